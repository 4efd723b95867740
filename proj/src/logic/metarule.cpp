#include "metasel/logic/metarule.hpp"

#include <bit>
#include <sstream>

#include "metasel/util/config.hpp"
#include "metasel/util/error.hpp"

namespace metasel::logic {
namespace {

constexpr int A = 0, B = 1, C = 2;
constexpr int P = 0, Q = 1, R = 2;

std::array<MetaRule, kPoolSize> build_pool() {
  return {{
      {MetaRuleId::Identity, "Identity", {"P", "Q"}, {P, {A, B}}, {{Q, {A, B}}}, 2},
      {MetaRuleId::Inverse, "Inverse", {"P", "Q"}, {P, {A, B}}, {{Q, {B, A}}}, 2},
      {MetaRuleId::Precon, "Precon", {"P", "Q", "R"}, {P, {A, B}}, {{Q, {A}}, {R, {A, B}}}, 2},
      {MetaRuleId::Postcon, "Postcon", {"P", "Q", "R"}, {P, {A, B}}, {{Q, {A, B}}, {R, {B}}}, 2},
      {MetaRuleId::Chain, "Chain", {"P", "Q", "R"}, {P, {A, B}}, {{Q, {A, C}}, {R, {C, B}}}, 3},
      {MetaRuleId::Recursion, "Recursion", {"P", "Q"}, {P, {A, B}}, {{Q, {A, C}}, {P, {C, B}}}, 3},
  }};
}

void write_literal(std::ostream& out, const std::vector<std::string>& so_vars, const MetaLiteral& lit) {
  static constexpr const char* kVarNames[] = {"A", "B", "C"};
  out << '[' << so_vars[static_cast<std::size_t>(lit.pred_var)];
  for (int a : lit.args) out << ',' << kVarNames[a];
  out << ']';
}

}  // namespace

int MetaRule::arity_of(int var) const {
  if (head.pred_var == var) return static_cast<int>(head.args.size());
  for (const auto& lit : body) {
    if (lit.pred_var == var) return static_cast<int>(lit.args.size());
  }
  return 2;
}

std::string MetaRule::to_string() const {
  std::ostringstream out;
  out << "metarule([";
  for (std::size_t i = 0; i < second_order_vars.size(); ++i) {
    if (i) out << ',';
    out << second_order_vars[i];
  }
  out << "], ";
  write_literal(out, second_order_vars, head);
  out << ", [";
  for (std::size_t i = 0; i < body.size(); ++i) {
    if (i) out << ',';
    write_literal(out, second_order_vars, body[i]);
  }
  out << "]).";
  return out.str();
}

const std::array<MetaRule, kPoolSize>& metarule_pool() {
  static const auto pool = build_pool();
  return pool;
}

const MetaRule& metarule(MetaRuleId id) { return metarule_pool()[static_cast<std::size_t>(id)]; }

std::string_view metarule_name(MetaRuleId id) { return metarule(id).name; }

std::optional<MetaRuleId> metarule_from_name(std::string_view name) {
  for (const auto& m : metarule_pool()) {
    if (m.name == name) return m.id;
  }
  return std::nullopt;
}

MetaRuleSet MetaRuleSet::from_selection(const std::array<bool, kPoolSize>& selection) {
  MetaRuleSet s;
  for (std::size_t i = 0; i < kPoolSize; ++i) {
    if (selection[i]) s.insert(static_cast<MetaRuleId>(i));
  }
  return s;
}

MetaRuleSet MetaRuleSet::parse(std::string_view text) {
  std::string cleaned;
  for (char c : text) {
    if (c != '{' && c != '}') cleaned.push_back(c == ' ' || c == '+' ? ',' : c);
  }
  MetaRuleSet s;
  for (const auto& name : split_list(cleaned)) {
    const auto id = metarule_from_name(name);
    if (!id) throw ConfigError("unknown meta-rule: " + name);
    s.insert(*id);
  }
  return s;
}

int MetaRuleSet::size() const { return std::popcount(bits_); }

std::vector<MetaRuleId> MetaRuleSet::ids() const {
  std::vector<MetaRuleId> out;
  for (std::size_t i = 0; i < kPoolSize; ++i) {
    if (contains(static_cast<MetaRuleId>(i))) out.push_back(static_cast<MetaRuleId>(i));
  }
  return out;
}

std::string MetaRuleSet::to_string() const {
  std::string out = "{";
  bool first = true;
  for (auto id : ids()) {
    if (!first) out += ", ";
    first = false;
    out += metarule_name(id);
  }
  return out + "}";
}

}  // namespace metasel::logic
