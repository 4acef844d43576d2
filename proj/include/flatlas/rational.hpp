#ifndef FLATLAS_RATIONAL_HPP
#define FLATLAS_RATIONAL_HPP

#include <compare>
#include <cstdint>
#include <numeric>
#include <string>

#include "flatlas/errors.hpp"

namespace flatlas {

// Exact rational constant. Keeps expression normal forms reproducible:
// folding 1/2 + 1/3 must give the same node on every code path.
class Rational {
 public:
  constexpr Rational() = default;
  Rational(std::int64_t n) : num_(n), den_(1) {}  // NOLINT: implicit by design
  Rational(std::int64_t n, std::int64_t d) : num_(n), den_(d) { normalize(); }

  std::int64_t num() const { return num_; }
  std::int64_t den() const { return den_; }

  bool is_zero() const { return num_ == 0; }
  bool is_one() const { return num_ == 1 && den_ == 1; }
  bool is_integer() const { return den_ == 1; }
  int sign() const { return num_ > 0 ? 1 : (num_ < 0 ? -1 : 0); }

  double to_double() const {
    return static_cast<double>(num_) / static_cast<double>(den_);
  }

  friend Rational operator+(const Rational& a, const Rational& b) {
    return make(checked(static_cast<__int128>(a.num_) * b.den_ +
                        static_cast<__int128>(b.num_) * a.den_),
                checked(static_cast<__int128>(a.den_) * b.den_));
  }
  friend Rational operator-(const Rational& a, const Rational& b) {
    return a + Rational(-b.num_, b.den_);
  }
  friend Rational operator-(const Rational& a) { return Rational(-a.num_, a.den_); }
  friend Rational operator*(const Rational& a, const Rational& b) {
    return make(checked(static_cast<__int128>(a.num_) * b.num_),
                checked(static_cast<__int128>(a.den_) * b.den_));
  }
  friend Rational operator/(const Rational& a, const Rational& b) {
    if (b.num_ == 0) raise(ErrorKind::DomainError, "rational division by zero");
    return make(checked(static_cast<__int128>(a.num_) * b.den_),
                checked(static_cast<__int128>(a.den_) * b.num_));
  }

  Rational pow(int e) const {
    if (e == 0) return Rational(1);
    if (num_ == 0 && e < 0)
      raise(ErrorKind::DomainError, "zero raised to a negative power");
    Rational base = e > 0 ? *this : Rational(den_, num_);
    int k = e > 0 ? e : -e;
    Rational acc(1);
    while (k-- > 0) acc = acc * base;
    return acc;
  }

  friend bool operator==(const Rational& a, const Rational& b) {
    return a.num_ == b.num_ && a.den_ == b.den_;
  }
  friend std::strong_ordering operator<=>(const Rational& a, const Rational& b) {
    __int128 l = static_cast<__int128>(a.num_) * b.den_;
    __int128 r = static_cast<__int128>(b.num_) * a.den_;
    return l < r ? std::strong_ordering::less
                 : (l > r ? std::strong_ordering::greater
                          : std::strong_ordering::equal);
  }

  std::string str() const {
    if (den_ == 1) return std::to_string(num_);
    return std::to_string(num_) + "/" + std::to_string(den_);
  }

  // Best rational approximation with bounded denominator (continued
  // fractions); used when numeric config values (e.g. the car length from
  // JSON) enter symbolic formulas.
  static Rational from_double(double x, std::int64_t max_den = 1000000) {
    if (x != x) raise(ErrorKind::DomainError, "cannot convert NaN to rational");
    bool neg = x < 0;
    double v = neg ? -x : x;
    std::int64_t p0 = 0, q0 = 1, p1 = 1, q1 = 0;
    double frac = v;
    for (int it = 0; it < 64; ++it) {
      std::int64_t a = static_cast<std::int64_t>(frac);
      std::int64_t p2 = a * p1 + p0, q2 = a * q1 + q0;
      if (q2 > max_den) break;
      p0 = p1; q0 = q1; p1 = p2; q1 = q2;
      double rem = frac - static_cast<double>(a);
      if (rem < 1e-15) break;
      frac = 1.0 / rem;
    }
    Rational r(neg ? -p1 : p1, q1 == 0 ? 1 : q1);
    return r;
  }

 private:
  static std::int64_t checked(__int128 v) {
    if (v > INT64_MAX || v < INT64_MIN)
      raise(ErrorKind::UnsupportedEntry, "rational constant overflow");
    return static_cast<std::int64_t>(v);
  }
  static Rational make(std::int64_t n, std::int64_t d) {
    Rational r;
    r.num_ = n;
    r.den_ = d;
    r.normalize();
    return r;
  }
  void normalize() {
    if (den_ == 0) raise(ErrorKind::DomainError, "rational with zero denominator");
    if (den_ < 0) { num_ = -num_; den_ = -den_; }
    std::int64_t g = std::gcd(num_ < 0 ? -num_ : num_, den_);
    if (g > 1) { num_ /= g; den_ /= g; }
  }

  std::int64_t num_ = 0;
  std::int64_t den_ = 1;
};

}  // namespace flatlas

#endif  // FLATLAS_RATIONAL_HPP
