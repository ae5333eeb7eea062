// SPDX-License-Identifier: Apache-2.0

#include "kan/primitives.hpp"

#include <array>
#include <utility>

namespace kan {

namespace {

struct Entry {
  Prim prim;
  std::string_view name;
  int complexity;
};

constexpr std::array<Entry, 19> kTable{{
    {Prim::Zero, "0", 0},
    {Prim::X, "x", 1},
    {Prim::X2, "x^2", 2},
    {Prim::X3, "x^3", 3},
    {Prim::X4, "x^4", 3},
    {Prim::Inv, "1/x", 2},
    {Prim::Inv2, "1/x^2", 2},
    {Prim::Sqrt, "sqrt", 2},
    {Prim::InvSqrt, "x^-0.5", 2},
    {Prim::Exp, "exp", 2},
    {Prim::Log, "log", 2},
    {Prim::Sin, "sin", 2},
    {Prim::Cos, "cos", 2},
    {Prim::Tan, "tan", 3},
    {Prim::Tanh, "tanh", 3},
    {Prim::Abs, "abs", 3},
    {Prim::Asin, "asin", 4},
    {Prim::Atan, "atan", 4},
    {Prim::Gaussian, "gaussian", 3},
}};

constexpr std::array<std::pair<std::string_view, Prim>, 12> kAliases{{
    {"identity", Prim::X},
    {"id", Prim::X},
    {"square", Prim::X2},
    {"cube", Prim::X3},
    {"quartic", Prim::X4},
    {"inverse", Prim::Inv},
    {"x^-1", Prim::Inv},
    {"x^-2", Prim::Inv2},
    {"x^{-1/2}", Prim::InvSqrt},
    {"rsqrt", Prim::InvSqrt},
    {"x^0.5", Prim::Sqrt},
    {"zero", Prim::Zero},
}};

const Entry& entry(Prim p) { return kTable[static_cast<std::size_t>(p)]; }

}  // namespace

const std::vector<Prim>& all_primitives() {
  static const std::vector<Prim> prims = [] {
    std::vector<Prim> v;
    for (const auto& e : kTable) v.push_back(e.prim);
    return v;
  }();
  return prims;
}

std::string_view prim_name(Prim p) { return entry(p).name; }

int prim_complexity(Prim p) { return entry(p).complexity; }

bool is_prim_name(std::string_view name) {
  for (const auto& e : kTable)
    if (e.name == name) return true;
  for (const auto& [alias, p] : kAliases)
    if (alias == name) return true;
  return false;
}

Prim prim_from_name(std::string_view name) {
  for (const auto& e : kTable)
    if (e.name == name) return e.prim;
  for (const auto& [alias, p] : kAliases)
    if (alias == name) return p;
  throw InvalidArgument("unknown primitive '" + std::string(name) + "'");
}

bool prim_is_singular(Prim p) {
  switch (p) {
    case Prim::Inv:
    case Prim::Inv2:
    case Prim::Sqrt:
    case Prim::InvSqrt:
    case Prim::Log:
    case Prim::Asin:
    case Prim::Tan:
      return true;
    default:
      return false;
  }
}

}  // namespace kan
