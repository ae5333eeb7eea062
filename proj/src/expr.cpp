// SPDX-License-Identifier: Apache-2.0

#include "kan/expr.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numbers>
#include <set>

#include "kan/errors.hpp"
#include "kan/primitives.hpp"

namespace kan {

namespace {

const std::set<std::string>& unary_functions() {
  static const std::set<std::string> names = {"sqrt", "exp",  "log",  "sin",  "cos",     "tan",
                                              "tanh", "abs",  "asin", "atan", "gaussian"};
  return names;
}

Prim unary_prim(const std::string& fn) { return prim_from_name(fn); }

ExprPtr node(ExprKind kind, std::string name, double value, std::vector<ExprPtr> children) {
  auto e = std::make_shared<Expr>();
  e->kind = kind;
  e->name = std::move(name);
  e->value = value;
  e->children = std::move(children);
  return e;
}

bool is_const(const ExprPtr& e) { return e->kind == ExprKind::Constant; }

bool is_integer(double v) { return std::isfinite(v) && v == std::round(v); }

}  // namespace

bool is_unary_function(const std::string& name) { return unary_functions().count(name) > 0; }

ExprPtr make_var(const std::string& name) { return node(ExprKind::Variable, name, 0.0, {}); }

ExprPtr make_const(double v) {
  if (!std::isfinite(v)) throw DomainError("non-finite constant");
  return node(ExprKind::Constant, "", v, {});
}

ExprPtr make_unary(const std::string& fn, ExprPtr arg) {
  if (!is_unary_function(fn)) throw InvalidArgument("unknown function '" + fn + "'");
  return node(ExprKind::Unary, fn, 0.0, {std::move(arg)});
}

ExprPtr make_sum(std::vector<ExprPtr> children) {
  if (children.empty()) return make_const(0.0);
  if (children.size() == 1) return children.front();
  std::vector<ExprPtr> flat;
  for (auto& c : children) {
    if (c->kind == ExprKind::Sum)
      flat.insert(flat.end(), c->children.begin(), c->children.end());
    else
      flat.push_back(std::move(c));
  }
  return node(ExprKind::Sum, "", 0.0, std::move(flat));
}

ExprPtr make_product(std::vector<ExprPtr> children) {
  if (children.empty()) return make_const(1.0);
  if (children.size() == 1) return children.front();
  std::vector<ExprPtr> flat;
  for (auto& c : children) {
    if (c->kind == ExprKind::Product)
      flat.insert(flat.end(), c->children.begin(), c->children.end());
    else
      flat.push_back(std::move(c));
  }
  return node(ExprKind::Product, "", 0.0, std::move(flat));
}

ExprPtr make_power(ExprPtr base, double exponent) {
  if (!std::isfinite(exponent)) throw DomainError("non-finite exponent");
  return node(ExprKind::Power, "", exponent, {std::move(base)});
}

// ---------------------------------------------------------------- parsing

namespace {

enum class Tok { Number, Ident, Plus, Minus, Star, Slash, Caret, LParen, RParen, End };

struct Token {
  Tok type = Tok::End;
  std::string text;
  double number = 0.0;
  std::size_t pos = 0;
};

class Parser {
 public:
  Parser(const std::string& text, const std::vector<std::string>& names, bool open)
      : s_(text), names_(names), open_(open) {
    advance();
  }

  ExprPtr parse() {
    if (cur_.type == Tok::End) throw ParseError("empty formula", 0);
    ExprPtr e = parse_expr(1);
    if (cur_.type == Tok::RParen) throw ParseError("unbalanced ')'", cur_.pos);
    if (cur_.type != Tok::End) throw ParseError("unexpected '" + cur_.text + "'", cur_.pos);
    return e;
  }

 private:
  static int precedence(Tok t) {
    switch (t) {
      case Tok::Plus:
      case Tok::Minus: return 1;
      case Tok::Star:
      case Tok::Slash: return 2;
      case Tok::Caret: return 4;
      default: return 0;
    }
  }

  void advance() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    cur_ = Token{};
    cur_.pos = pos_;
    if (pos_ >= s_.size()) {
      cur_.type = Tok::End;
      return;
    }
    const char c = s_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      std::size_t end = pos_;
      while (end < s_.size() && (std::isdigit(static_cast<unsigned char>(s_[end])) || s_[end] == '.'))
        ++end;
      if (end < s_.size() && (s_[end] == 'e' || s_[end] == 'E')) {
        std::size_t k = end + 1;
        if (k < s_.size() && (s_[k] == '+' || s_[k] == '-')) ++k;
        if (k < s_.size() && std::isdigit(static_cast<unsigned char>(s_[k]))) {
          while (k < s_.size() && std::isdigit(static_cast<unsigned char>(s_[k]))) ++k;
          end = k;
        }
      }
      cur_.type = Tok::Number;
      cur_.text = s_.substr(pos_, end - pos_);
      const auto res = std::from_chars(s_.data() + pos_, s_.data() + end, cur_.number);
      if (res.ec != std::errc() || res.ptr != s_.data() + end)
        throw ParseError("malformed number '" + cur_.text + "'", pos_);
      pos_ = end;
      return;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t end = pos_;
      while (end < s_.size() &&
             (std::isalnum(static_cast<unsigned char>(s_[end])) || s_[end] == '_'))
        ++end;
      cur_.type = Tok::Ident;
      cur_.text = s_.substr(pos_, end - pos_);
      pos_ = end;
      return;
    }
    cur_.text = std::string(1, c);
    switch (c) {
      case '+': cur_.type = Tok::Plus; break;
      case '-': cur_.type = Tok::Minus; break;
      case '*': cur_.type = Tok::Star; break;
      case '/': cur_.type = Tok::Slash; break;
      case '^': cur_.type = Tok::Caret; break;
      case '(': cur_.type = Tok::LParen; break;
      case ')': cur_.type = Tok::RParen; break;
      default: throw ParseError(std::string("unexpected character '") + c + "'", pos_);
    }
    ++pos_;
  }

  static ExprPtr negate(const ExprPtr& e) {
    if (is_const(e)) return make_const(-e->value);
    return make_product({make_const(-1.0), e});
  }

  ExprPtr parse_expr(int min_prec) {
    ExprPtr lhs = parse_unary();
    while (true) {
      const Tok op = cur_.type;
      const int prec = precedence(op);
      if (prec == 0 || prec < min_prec) break;
      const std::size_t op_pos = cur_.pos;
      advance();
      const bool right_assoc = op == Tok::Caret;
      ExprPtr rhs = parse_expr(right_assoc ? prec : prec + 1);
      switch (op) {
        case Tok::Plus: lhs = make_sum({lhs, rhs}); break;
        case Tok::Minus: lhs = make_sum({lhs, negate(rhs)}); break;
        case Tok::Star: lhs = make_product({lhs, rhs}); break;
        case Tok::Slash: lhs = make_product({lhs, make_power(rhs, -1.0)}); break;
        case Tok::Caret: {
          if (!free_variables(rhs).empty())
            throw UnsupportedError("variable exponent at position " + std::to_string(op_pos));
          lhs = make_power(lhs, eval_expr(rhs, std::map<std::string, double>{}));
          break;
        }
        default: break;
      }
    }
    return lhs;
  }

  ExprPtr parse_unary() {
    if (cur_.type == Tok::Minus) {
      advance();
      // Binds tighter than '*' but looser than '^': -x^2 is -(x^2).
      return negate(parse_expr(precedence(Tok::Caret)));
    }
    if (cur_.type == Tok::Plus) {
      advance();
      return parse_expr(precedence(Tok::Caret));
    }
    return parse_primary();
  }

  ExprPtr parse_primary() {
    const Token t = cur_;
    switch (t.type) {
      case Tok::Number:
        advance();
        return make_const(t.number);
      case Tok::LParen: {
        advance();
        if (cur_.type == Tok::RParen) throw ParseError("empty parentheses", cur_.pos);
        ExprPtr e = parse_expr(1);
        if (cur_.type != Tok::RParen) throw ParseError("expected ')'", cur_.pos);
        advance();
        return e;
      }
      case Tok::Ident: {
        advance();
        if (cur_.type == Tok::LParen) {
          if (!is_unary_function(t.text))
            throw ParseError("unknown function '" + t.text + "'", t.pos);
          advance();
          if (cur_.type == Tok::RParen) throw ParseError("empty argument", cur_.pos);
          if (cur_.type == Tok::End) throw ParseError("expected ')'", cur_.pos);
          ExprPtr arg = parse_expr(1);
          if (cur_.type != Tok::RParen) throw ParseError("expected ')'", cur_.pos);
          advance();
          return make_unary(t.text, arg);
        }
        if (std::find(names_.begin(), names_.end(), t.text) != names_.end())
          return make_var(t.text);
        if (t.text == "pi") return make_const(std::numbers::pi);
        if (t.text == "e") return make_const(std::numbers::e);
        if (open_) return make_var(t.text);
        throw ParseError("unknown identifier '" + t.text + "'", t.pos);
      }
      case Tok::End: throw ParseError("unexpected end of formula", t.pos);
      case Tok::RParen: throw ParseError("unbalanced ')'", t.pos);
      default: throw ParseError("unexpected '" + t.text + "'", t.pos);
    }
  }

  const std::string& s_;
  const std::vector<std::string>& names_;
  bool open_ = false;
  std::size_t pos_ = 0;
  Token cur_;
};

}  // namespace

ExprPtr parse_formula(const std::string& text, const std::vector<std::string>& input_names) {
  Parser p(text, input_names, false);
  return p.parse();
}

ExprPtr parse_formula_open(const std::string& text) {
  const std::vector<std::string> none;
  Parser p(text, none, true);
  return p.parse();
}

// --------------------------------------------------------------- printing

std::string format_number(double v) {
  if (!std::isfinite(v)) throw DomainError("cannot print a non-finite number");
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

namespace {

std::string print_const(double v) {
  const std::string s = format_number(v);
  return v < 0.0 || std::signbit(v) ? "(" + s + ")" : s;
}

std::string print(const ExprPtr& e) {
  switch (e->kind) {
    case ExprKind::Variable: return e->name;
    case ExprKind::Constant: return print_const(e->value);
    case ExprKind::Unary: return e->name + "(" + print(e->children[0]) + ")";
    case ExprKind::Sum: {
      std::string s;
      for (std::size_t i = 0; i < e->children.size(); ++i) {
        if (i) s += " + ";
        s += print(e->children[i]);
      }
      return s;
    }
    case ExprKind::Product: {
      std::string s;
      for (std::size_t i = 0; i < e->children.size(); ++i) {
        if (i) s += "*";
        const auto& c = e->children[i];
        s += c->kind == ExprKind::Sum ? "(" + print(c) + ")" : print(c);
      }
      return s;
    }
    case ExprKind::Power: {
      const auto& b = e->children[0];
      const bool bare = b->kind == ExprKind::Variable || b->kind == ExprKind::Unary ||
                        (b->kind == ExprKind::Constant && !std::signbit(b->value));
      const std::string base = bare ? print(b) : "(" + print(b) + ")";
      return base + "^" + print_const(e->value);
    }
  }
  return "";
}

}  // namespace

std::string to_string(const ExprPtr& e) { return print(e); }

bool structurally_equal(const ExprPtr& a, const ExprPtr& b) {
  if (a->kind != b->kind || a->name != b->name || a->value != b->value ||
      a->children.size() != b->children.size())
    return false;
  for (std::size_t i = 0; i < a->children.size(); ++i)
    if (!structurally_equal(a->children[i], b->children[i])) return false;
  return true;
}

// ------------------------------------------------------------- evaluation

namespace {

template <class Lookup>
double eval_impl(const ExprPtr& e, const Lookup& lookup) {
  switch (e->kind) {
    case ExprKind::Variable: return lookup(e->name);
    case ExprKind::Constant: return e->value;
    case ExprKind::Unary: {
      const double x = eval_impl(e->children[0], lookup);
      return prim_eval(unary_prim(e->name), x, true);
    }
    case ExprKind::Sum: {
      double s = 0.0;
      for (const auto& c : e->children) s += eval_impl(c, lookup);
      return s;
    }
    case ExprKind::Product: {
      double p = 1.0;
      for (const auto& c : e->children) p *= eval_impl(c, lookup);
      return p;
    }
    case ExprKind::Power: {
      const double b = eval_impl(e->children[0], lookup);
      const double p = e->value;
      if (b == 0.0 && p < 0.0) throw DomainError("division by zero in power");
      if (b < 0.0 && !is_integer(p))
        throw DomainError("negative base " + std::to_string(b) + " with fractional exponent");
      if (p == 2.0) return b * b;
      if (p == -1.0) return 1.0 / b;
      if (p == 0.5) return std::sqrt(b);
      return std::pow(b, p);
    }
  }
  return 0.0;
}

}  // namespace

double eval_expr(const ExprPtr& e, const std::map<std::string, double>& binding) {
  return eval_impl(e, [&](const std::string& name) {
    const auto it = binding.find(name);
    if (it == binding.end()) throw InvalidArgument("unbound variable '" + name + "'");
    return it->second;
  });
}

double eval_expr(const ExprPtr& e, const std::vector<std::string>& names,
                 std::span<const double> values) {
  if (names.size() != values.size()) throw InvalidArgument("names and values differ in length");
  return eval_impl(e, [&](const std::string& name) {
    for (std::size_t i = 0; i < names.size(); ++i)
      if (names[i] == name) return values[i];
    throw InvalidArgument("unbound variable '" + name + "'");
  });
}

// -------------------------------------------------------- canonicalization

namespace {

ExprPtr canon_power(ExprPtr base, double p) {
  if (p == 1.0) return base;
  if (p == 0.0) return make_const(1.0);
  if (is_const(base)) return make_const(eval_expr(make_power(base, p), {}));
  if (base->kind == ExprKind::Power && is_integer(p))
    return canon_power(base->children[0], base->value * p);
  if (base->kind == ExprKind::Unary && base->name == "sqrt")
    return canon_power(base->children[0], 0.5 * p);
  if (base->kind == ExprKind::Product && is_integer(p)) {
    std::vector<ExprPtr> parts;
    for (const auto& c : base->children) parts.push_back(canon_power(c, p));
    return canonicalize(make_product(std::move(parts)));
  }
  return make_power(std::move(base), p);
}

}  // namespace

ExprPtr canonicalize(const ExprPtr& e) {
  switch (e->kind) {
    case ExprKind::Variable:
    case ExprKind::Constant: return e;
    case ExprKind::Unary: {
      ExprPtr arg = canonicalize(e->children[0]);
      if (is_const(arg)) return make_const(prim_eval(unary_prim(e->name), arg->value, true));
      return make_unary(e->name, arg);
    }
    case ExprKind::Power: return canon_power(canonicalize(e->children[0]), e->value);
    case ExprKind::Sum: {
      std::vector<ExprPtr> parts;
      for (const auto& c : e->children) parts.push_back(canonicalize(c));
      ExprPtr flat = make_sum(std::move(parts));
      if (flat->kind != ExprKind::Sum) return flat;
      // Like terms k1*t + k2*t merge, in order of first appearance.
      double k = 0.0;
      std::vector<std::pair<double, ExprPtr>> terms;
      std::map<std::string, std::size_t> slot;
      for (const auto& c : flat->children) {
        if (is_const(c)) {
          k += c->value;
          continue;
        }
        double coef = 1.0;
        ExprPtr t = c;
        if (c->kind == ExprKind::Product && is_const(c->children.front())) {
          coef = c->children.front()->value;
          t = make_product({c->children.begin() + 1, c->children.end()});
        }
        const auto [it, fresh] = slot.emplace(to_string(t), terms.size());
        if (fresh)
          terms.emplace_back(coef, t);
        else
          terms[it->second].first += coef;
      }
      std::vector<ExprPtr> rest;
      for (const auto& [coef, t] : terms) {
        if (coef == 0.0) continue;
        rest.push_back(coef == 1.0 ? t : make_product({make_const(coef), t}));
      }
      if (rest.empty()) return make_const(k);
      if (k != 0.0) rest.push_back(make_const(k));
      return make_sum(std::move(rest));
    }
    case ExprKind::Product: {
      std::vector<ExprPtr> parts;
      for (const auto& c : e->children) parts.push_back(canonicalize(c));
      ExprPtr flat = make_product(std::move(parts));
      if (flat->kind != ExprKind::Product) return flat;
      double k = 1.0;
      std::vector<ExprPtr> rest;
      for (const auto& c : flat->children) {
        if (is_const(c))
          k *= c->value;
        else
          rest.push_back(c);
      }
      if (k == 0.0 || rest.empty()) return make_const(k);
      // A constant times a single sum distributes over it.
      if (k != 1.0 && rest.size() == 1 && rest.front()->kind == ExprKind::Sum) {
        std::vector<ExprPtr> scaled;
        for (const auto& c : rest.front()->children)
          scaled.push_back(make_product({make_const(k), c}));
        return canonicalize(make_sum(std::move(scaled)));
      }
      if (k != 1.0) rest.insert(rest.begin(), make_const(k));
      return make_product(std::move(rest));
    }
  }
  return e;
}

std::vector<std::string> free_variables(const ExprPtr& e) {
  std::set<std::string> out;
  std::vector<const Expr*> stack{e.get()};
  while (!stack.empty()) {
    const Expr* n = stack.back();
    stack.pop_back();
    if (n->kind == ExprKind::Variable) out.insert(n->name);
    for (const auto& c : n->children) stack.push_back(c.get());
  }
  return {out.begin(), out.end()};
}

int expr_depth(const ExprPtr& e) {
  int d = 0;
  for (const auto& c : e->children) d = std::max(d, expr_depth(c));
  return e->children.empty() ? 0 : d + 1;
}

ExprPtr round_constants(const ExprPtr& e, int digits) {
  if (e->kind == ExprKind::Constant) {
    const double scale = std::pow(10.0, digits);
    return make_const(std::round(e->value * scale) / scale);
  }
  if (e->children.empty()) return e;
  std::vector<ExprPtr> kids;
  for (const auto& c : e->children) kids.push_back(round_constants(c, digits));
  return node(e->kind, e->name, e->value, std::move(kids));
}

}  // namespace kan
