#include "metasel/logic/prover.hpp"

#include <set>

#include "engine.hpp"

namespace metasel::logic {

namespace {

void collect_symbols(const Hypothesis& hyp, std::set<std::string>& out) {
  for (const auto& c : hyp.clauses) {
    out.insert(c.head.pred);
    for (const auto& l : c.body) out.insert(l.pred);
  }
}

}  // namespace

ProofStatus prove(std::span<const Term> goals, const Hypothesis& hyp, const BackgroundDomain& domain,
                  ProofBudget budget) {
  std::set<std::string> symbols;
  collect_symbols(hyp, symbols);
  detail::Engine::Settings s;
  s.domain = &domain;
  s.target = hyp.clauses.empty() ? std::string("f") : hyp.clauses.front().head.pred;
  s.max_depth = budget.max_depth;
  s.max_steps = budget.max_steps;
  detail::Engine engine(s, {symbols.begin(), symbols.end()});
  engine.load(hyp);
  return engine.prove(goals);
}

bool entails(const Hypothesis& hyp, const BackgroundDomain& domain, const Term& atom, ProofBudget budget,
             bool* budget_exceeded) {
  const ProofStatus st = prove(std::span<const Term>(&atom, 1), hyp, domain, budget);
  if (budget_exceeded) *budget_exceeded = st == ProofStatus::BudgetExceeded;
  return st == ProofStatus::Proved;
}

Term make_atom(std::string pred, std::vector<Term> args) { return Term::compound(std::move(pred), std::move(args)); }

}  // namespace metasel::logic
