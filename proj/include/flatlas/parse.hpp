#ifndef FLATLAS_PARSE_HPP
#define FLATLAS_PARSE_HPP

#include <optional>
#include <string>
#include <vector>

#include "flatlas/expr.hpp"

namespace flatlas {

// Display names for coordinate bases. Base i falls back to the canonical
// token x<i+1> when no name is registered, so "x1", "x2", ... always parse.
class NameTable {
 public:
  NameTable() = default;
  explicit NameTable(std::vector<std::string> names) : names_(std::move(names)) {}

  std::optional<int> base_of(const std::string& name) const;
  std::string name_of(int base) const;
  int size() const { return static_cast<int>(names_.size()); }
  const std::vector<std::string>& names() const { return names_; }

 private:
  std::vector<std::string> names_;
};

// Infix expression syntax: operators + - * / ^, functions sin, cos, tan,
// atan2, sqrt (and atan(u) as shorthand for atan2(u, 1)); jet coordinates
// written x1, x1', x1'' or x1^(k). Exponents must be integers; a
// parenthesized exponent directly after a variable is read as a derivative
// order, so write squares as x1^2.
Expr parse_expr(const std::string& text, const NameTable& names = {});

// Prints the normal form; parse_expr(to_string(e)) reproduces e exactly.
std::string to_string(const Expr& e, const NameTable& names = {});

}  // namespace flatlas

#endif  // FLATLAS_PARSE_HPP
