#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

#include "metasel/logic/background.hpp"
#include "metasel/logic/clause.hpp"
#include "metasel/logic/term.hpp"

namespace metasel::logic {

enum class ProofStatus : std::uint8_t { Proved, NotProved, BudgetExceeded };

struct ProofBudget {
  std::uint64_t max_steps = 1'000'000;  // 0 = unlimited
  std::size_t max_depth = 14;           // nested clause resolutions per proof
};

// SLD resolution with leftmost goal selection and hypothesis clause order.
// Goals are atoms pred(Arg, ...) whose arguments are ground terms or plain
// variables. BudgetExceeded means no proof was found and the step budget ran
// out or some branch was cut at max_depth.
ProofStatus prove(std::span<const Term> goals, const Hypothesis& hyp, const BackgroundDomain& domain,
                  ProofBudget budget);

// prove([atom]) == Proved. `budget_exceeded`, when given, is set if the
// answer false came from hitting the budget.
bool entails(const Hypothesis& hyp, const BackgroundDomain& domain, const Term& atom, ProofBudget budget,
             bool* budget_exceeded = nullptr);

// Builds pred(args...).
Term make_atom(std::string pred, std::vector<Term> args);

}  // namespace metasel::logic
