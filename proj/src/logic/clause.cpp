#include "metasel/logic/clause.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "metasel/util/error.hpp"

namespace metasel::logic {
namespace {

constexpr const char* kVarNames[] = {"A", "B", "C"};

void write_literal(std::ostream& out, const Literal& lit) {
  out << lit.pred << '(';
  for (std::size_t i = 0; i < lit.args.size(); ++i) {
    if (i) out << ',';
    out << kVarNames[lit.args[i]];
  }
  out << ')';
}

int symbol_arity(const BackgroundDomain& domain, std::string_view target, const std::string& symbol) {
  if (symbol == target || is_invented_name(target, symbol)) return 2;
  const Builtin* b = domain.find(symbol);
  if (!b) throw UnknownPredicate("unknown predicate symbol: " + symbol);
  return b->arity;
}

}  // namespace

std::string Clause::to_string() const {
  std::ostringstream out;
  write_literal(out, head);
  if (!body.empty()) {
    out << ":-";
    for (std::size_t i = 0; i < body.size(); ++i) {
      if (i) out << ',';
      write_literal(out, body[i]);
    }
  }
  out << '.';
  return out.str();
}

std::string Hypothesis::to_string() const {
  std::string out;
  for (const auto& c : clauses) out += c.to_string() + '\n';
  return out;
}

std::string invented_name(std::string_view target, int index) {
  return std::string(target) + "_" + std::to_string(index);
}

bool is_invented_name(std::string_view target, std::string_view name) {
  if (name.size() <= target.size() + 1 || name.substr(0, target.size()) != target || name[target.size()] != '_') {
    return false;
  }
  const auto digits = name.substr(target.size() + 1);
  return digits.front() != '0' && std::all_of(digits.begin(), digits.end(), [](char c) { return c >= '0' && c <= '9'; });
}

Clause instantiate_metarule(const MetaRule& rule, const BackgroundDomain& domain, std::string_view target,
                            const std::map<std::string, std::string>& binding) {
  std::vector<std::string> fill;
  fill.reserve(rule.second_order_vars.size());
  for (std::size_t v = 0; v < rule.second_order_vars.size(); ++v) {
    const auto& var = rule.second_order_vars[v];
    const auto it = binding.find(var);
    if (it == binding.end()) {
      throw InvalidMetasubstitution(rule.name + ": second-order variable " + var + " is unbound");
    }
    const std::string& symbol = it->second;
    const int want = rule.arity_of(static_cast<int>(v));
    const int have = symbol_arity(domain, target, symbol);
    if (want != have) {
      throw ArityMismatch(rule.name + ": " + var + " needs arity " + std::to_string(want) + " but " + symbol +
                          " has arity " + std::to_string(have));
    }
    if (want == 1 && !domain.is_monadic_test(symbol)) {
      throw IllegalMonadicFill(rule.name + ": " + symbol + " is not a monadic test");
    }
    fill.push_back(symbol);
  }
  if (fill[0] != target && !is_invented_name(target, fill[0])) {
    throw InvalidMetasubstitution(rule.name + ": head symbol " + fill[0] + " is a background predicate");
  }

  Clause c;
  c.head = Literal{fill[static_cast<std::size_t>(rule.head.pred_var)], rule.head.args};
  for (const auto& lit : rule.body) {
    c.body.push_back(Literal{fill[static_cast<std::size_t>(lit.pred_var)], lit.args});
    c.guarded.push_back(c.body.back().pred == c.head.pred);
  }
  c.num_vars = rule.num_vars;
  c.origin = rule.id;
  c.fill = std::move(fill);
  return c;
}

bool is_well_formed(const Hypothesis& h, const BackgroundDomain& domain, std::string_view target,
                    std::size_t max_clauses) {
  if (h.clauses.size() > max_clauses) return false;
  std::set<std::string> defined;
  for (const auto& c : h.clauses) defined.insert(c.head.pred);
  for (const auto& c : h.clauses) {
    for (const auto& lit : c.body) {
      if (domain.find(lit.pred) || lit.pred == target) continue;
      if (is_invented_name(target, lit.pred) && defined.count(lit.pred)) continue;
      return false;
    }
  }
  return true;
}

}  // namespace metasel::logic
