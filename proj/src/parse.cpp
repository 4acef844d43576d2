#include "flatlas/parse.hpp"

#include <cctype>
#include <sstream>

namespace flatlas {

std::optional<int> NameTable::base_of(const std::string& name) const {
  for (std::size_t i = 0; i < names_.size(); ++i)
    if (names_[i] == name) return static_cast<int>(i);
  // Canonical tokens x1, x2, ... are always accepted.
  if (name.size() >= 2 && name[0] == 'x') {
    bool digits = true;
    for (std::size_t i = 1; i < name.size(); ++i)
      if (!std::isdigit(static_cast<unsigned char>(name[i]))) digits = false;
    if (digits) {
      int idx = std::stoi(name.substr(1));
      if (idx >= 1) return idx - 1;
    }
  }
  return std::nullopt;
}

std::string NameTable::name_of(int base) const {
  if (base >= 0 && base < static_cast<int>(names_.size()) && !names_[base].empty())
    return names_[base];
  return "x" + std::to_string(base + 1);
}

namespace {

struct Token {
  enum Type { Number, Ident, Op, End } type = End;
  std::string text;
  Rational value;
};

class Lexer {
 public:
  explicit Lexer(const std::string& s) : s_(s) { advance(); }

  const Token& peek() const { return tok_; }
  Token next() {
    Token t = tok_;
    advance();
    return t;
  }

  struct State {
    std::size_t pos;
    Token tok;
  };
  State save() const { return {pos_, tok_}; }
  void restore(const State& st) {
    pos_ = st.pos;
    tok_ = st.tok;
  }

 private:
  void advance() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    if (pos_ >= s_.size()) {
      tok_ = Token{Token::End, "", Rational(0)};
      return;
    }
    char c = s_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c)) ||
        (c == '.' && pos_ + 1 < s_.size() &&
         std::isdigit(static_cast<unsigned char>(s_[pos_ + 1])))) {
      std::size_t start = pos_;
      while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
      std::int64_t ip = 0, frac = 0, scale = 1;
      for (std::size_t i = start; i < pos_; ++i) ip = ip * 10 + (s_[i] - '0');
      if (pos_ < s_.size() && s_[pos_] == '.') {
        ++pos_;
        std::size_t fs = pos_;
        while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
        if (pos_ - fs > 15)
          raise(ErrorKind::ParseError, "numeric literal has too many digits");
        for (std::size_t i = fs; i < pos_; ++i) {
          frac = frac * 10 + (s_[i] - '0');
          scale *= 10;
        }
      }
      tok_ = Token{Token::Number, s_.substr(start, pos_ - start),
                   Rational(ip) + Rational(frac, scale)};
      return;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t start = pos_;
      while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) ||
                                  s_[pos_] == '_'))
        ++pos_;
      tok_ = Token{Token::Ident, s_.substr(start, pos_ - start), Rational(0)};
      return;
    }
    static const std::string ops = "+-*/^()',";
    if (ops.find(c) == std::string::npos)
      raise(ErrorKind::ParseError, std::string("unexpected character '") + c + "'");
    ++pos_;
    tok_ = Token{Token::Op, std::string(1, c), Rational(0)};
  }

  const std::string& s_;
  std::size_t pos_ = 0;
  Token tok_;
};

class Parser {
 public:
  Parser(const std::string& text, const NameTable& names)
      : lex_(text), names_(names) {}

  Expr parse() {
    Expr e = parse_sum();
    if (lex_.peek().type != Token::End)
      raise(ErrorKind::ParseError, "trailing input near '" + lex_.peek().text + "'");
    return e;
  }

 private:
  bool is_op(const char* s) const {
    return lex_.peek().type == Token::Op && lex_.peek().text == s;
  }
  void expect(const char* s) {
    if (!is_op(s)) raise(ErrorKind::ParseError, std::string("expected '") + s + "'");
    lex_.next();
  }

  Expr parse_sum() {
    Expr acc = parse_product();
    while (is_op("+") || is_op("-")) {
      bool plus = lex_.next().text == "+";
      Expr rhs = parse_product();
      acc = plus ? acc + rhs : acc - rhs;
    }
    return acc;
  }

  Expr parse_product() {
    Expr acc = parse_unary();
    while (is_op("*") || is_op("/")) {
      bool mul = lex_.next().text == "*";
      Expr rhs = parse_unary();
      acc = mul ? acc * rhs : acc / rhs;
    }
    return acc;
  }

  Expr parse_unary() {
    int sign = 1;
    while (is_op("-") || is_op("+")) {
      if (lex_.next().text == "-") sign = -sign;
    }
    Expr e = parse_power();
    return sign < 0 ? -e : e;
  }

  Expr parse_power() {
    Expr base = parse_postfix();
    if (!is_op("^")) return base;
    lex_.next();
    return Expr::pow(base, parse_exponent());
  }

  int parse_exponent() {
    bool paren = false;
    if (is_op("(")) {
      paren = true;
      lex_.next();
    }
    int sign = 1;
    while (is_op("-")) {
      sign = -sign;
      lex_.next();
    }
    Token t = lex_.next();
    if (t.type != Token::Number || !t.value.is_integer())
      raise(ErrorKind::ParseError, "exponent must be an integer");
    if (paren) expect(")");
    return sign * static_cast<int>(t.value.num());
  }

  Expr parse_postfix() {
    Token t = lex_.next();
    if (t.type == Token::Number) return Expr::constant(t.value);
    if (t.type == Token::Op && t.text == "(") {
      Expr e = parse_sum();
      expect(")");
      return e;
    }
    if (t.type != Token::Ident)
      raise(ErrorKind::ParseError, "unexpected token '" + t.text + "'");

    if (t.text == "sin" || t.text == "cos" || t.text == "tan" || t.text == "sqrt" ||
        t.text == "atan" || t.text == "atan2") {
      expect("(");
      Expr a0 = parse_sum();
      if (t.text == "atan2") {
        expect(",");
        Expr a1 = parse_sum();
        expect(")");
        return Expr::atan2(a0, a1);
      }
      expect(")");
      if (t.text == "sin") return Expr::sin(a0);
      if (t.text == "cos") return Expr::cos(a0);
      if (t.text == "tan") return Expr::tan(a0);
      if (t.text == "atan") return Expr::atan2(a0, Expr::constant(1));
      return Expr::sqrt(a0);
    }

    auto base = names_.base_of(t.text);
    if (!base)
      raise(ErrorKind::ParseError, "unknown identifier '" + t.text + "'");
    int order = 0;
    while (is_op("'")) {
      lex_.next();
      ++order;
    }
    // A parenthesized non-negative integer directly after the variable is a
    // derivative order: x1^(3). Negative or bare exponents fall through to
    // the power operator.
    if (order == 0 && is_op("^")) {
      Lexer::State save = lex_.save();
      lex_.next();
      if (is_op("(")) {
        lex_.next();
        if (lex_.peek().type == Token::Number && lex_.peek().value.is_integer() &&
            lex_.peek().value.sign() >= 0) {
          int k = static_cast<int>(lex_.next().value.num());
          expect(")");
          return Expr::var(*base, k);
        }
      }
      lex_.restore(save);
    }
    return Expr::var(*base, order);
  }

  Lexer lex_;
  const NameTable& names_;
};

// ---- printing ----------------------------------------------------------

enum Prec { kAdd = 0, kMul = 1, kPow = 2, kAtom = 3 };

void emit(const Expr& e, const NameTable& names, int parent_prec, std::string& out);

void emit_wrapped(const Expr& e, const NameTable& names, int prec, int parent,
                  std::string& out) {
  if (prec < parent) {
    out += '(';
    emit(e, names, kAdd, out);
    out += ')';
  } else {
    emit(e, names, parent, out);
  }
}

bool negative_lead(const Expr& e) {
  const ExprNode& n = e.node();
  if (n.kind == Kind::Constant) return n.value.sign() < 0;
  if (n.kind == Kind::Product && n.kids[0].is_constant())
    return n.kids[0].node().value.sign() < 0;
  return false;
}

void emit(const Expr& e, const NameTable& names, int parent_prec, std::string& out) {
  const ExprNode& n = e.node();
  switch (n.kind) {
    case Kind::Constant: {
      bool wrap = n.value.sign() < 0 && parent_prec > kAdd;
      bool frac = !n.value.is_integer() && parent_prec > kMul;
      if (wrap || frac) out += '(';
      out += n.value.str();
      if (wrap || frac) out += ')';
      return;
    }
    case Kind::Variable: {
      out += names.name_of(n.var.base);
      if (n.var.order >= 1 && n.var.order <= 3)
        out.append(static_cast<std::size_t>(n.var.order), '\'');
      else if (n.var.order > 3)
        out += "^(" + std::to_string(n.var.order) + ")";
      return;
    }
    case Kind::Call: {
      switch (n.fn) {
        case Fn::Sin: out += "sin("; break;
        case Fn::Cos: out += "cos("; break;
        case Fn::Tan: out += "tan("; break;
        case Fn::Sqrt: out += "sqrt("; break;
        case Fn::Atan2: out += "atan2("; break;
      }
      emit(n.kids[0], names, kAdd, out);
      if (n.fn == Fn::Atan2) {
        out += ", ";
        emit(n.kids[1], names, kAdd, out);
      }
      out += ')';
      return;
    }
    case Kind::Power: {
      if (n.expo < 0) {
        // Standalone reciprocal: print as a quotient.
        if (parent_prec > kMul) out += '(';
        out += "1/";
        emit_wrapped(Expr::pow(n.kids[0], -n.expo), names, kPow, kPow, out);
        if (parent_prec > kMul) out += ')';
        return;
      }
      emit_wrapped(n.kids[0], names, kAtom, kAtom, out);
      out += '^' + std::to_string(n.expo);
      return;
    }
    case Kind::Product: {
      std::vector<Expr> num, den;
      Rational coeff(1);
      for (const Expr& k : n.kids) {
        if (k.is_constant()) {
          coeff = k.node().value;
        } else if (k.kind() == Kind::Power && k.node().expo < 0) {
          den.push_back(Expr::pow(k.node().kids[0], -k.node().expo));
        } else {
          num.push_back(k);
        }
      }
      std::string body;
      bool neg = coeff.sign() < 0;
      Rational mag = neg ? -coeff : coeff;
      bool first = true;
      if (!mag.is_one() || num.empty()) {
        body += mag.str();
        first = false;
      }
      for (const Expr& k : num) {
        if (!first) body += '*';
        emit_wrapped(k, names, kMul + 1, kMul + 1, body);
        first = false;
      }
      if (!den.empty()) {
        body += '/';
        if (den.size() > 1) body += '(';
        for (std::size_t i = 0; i < den.size(); ++i) {
          if (i) body += '*';
          emit_wrapped(den[i], names, kMul + 1, kMul + 1, body);
        }
        if (den.size() > 1) body += ')';
      }
      int prec = neg ? kAdd : kMul;
      if (prec < parent_prec) out += '(';
      if (neg) out += '-';
      out += body;
      if (prec < parent_prec) out += ')';
      return;
    }
    case Kind::Sum: {
      if (parent_prec > kAdd) out += '(';
      for (std::size_t i = 0; i < n.kids.size(); ++i) {
        const Expr& k = n.kids[i];
        if (i == 0) {
          emit(k, names, kAdd, out);
        } else if (negative_lead(k)) {
          out += " - ";
          emit(-k, names, kMul, out);
        } else {
          out += " + ";
          emit(k, names, kMul, out);
        }
      }
      if (parent_prec > kAdd) out += ')';
      return;
    }
  }
}

}  // namespace

Expr parse_expr(const std::string& text, const NameTable& names) {
  return Parser(text, names).parse();
}

std::string to_string(const Expr& e, const NameTable& names) {
  std::string out;
  emit(e, names, kAdd, out);
  return out;
}

}  // namespace flatlas
