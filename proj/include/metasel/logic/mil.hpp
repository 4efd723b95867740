#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>

#include "metasel/logic/background.hpp"
#include "metasel/logic/clause.hpp"
#include "metasel/logic/metarule.hpp"
#include "metasel/logic/prover.hpp"
#include "metasel/logic/term.hpp"

namespace metasel::logic {

struct MilLimits {
  std::size_t max_clauses = 4;
  int max_invented = 2;
  double timeout_s = 2.0;      // wall clock; <= 0 disables
  std::uint64_t max_steps = 0;  // global resolution steps; 0 = unlimited
  // Per-proof nesting bound; 0 selects 2 * (longest list in any example) + 4.
  std::size_t max_depth = 0;
};

enum class MilStatus : std::uint8_t { Success, NoRule, Timeout };

std::string_view to_string(MilStatus s);

struct MilOutcome {
  MilStatus status = MilStatus::NoRule;
  std::optional<Hypothesis> hypothesis;  // set iff Success
  double elapsed_s = 0.0;
  std::uint64_t resolution_steps = 0;
};

// Metagol-style meta-interpretive learning. Positives are proved left to
// right; a goal on the target or an invented predicate is resolved against
// the clauses built so far and then, while the clause bound allows, against
// new metasubstitutions of the given meta-rules (pool order, then symbol
// lexical order). Once all positives are proved the program is frozen and
// every negative must fail. The clause bound is deepened 1..max_clauses.
MilOutcome mil_induce(std::span<const Term> positives, std::span<const Term> negatives, MetaRuleSet metarules,
                      const BackgroundDomain& domain, const MilLimits& limits);

// Per-proof budget matching what mil_induce used for these examples.
ProofBudget proof_budget_for(std::span<const Term> positives, std::span<const Term> negatives,
                             const MilLimits& limits);

}  // namespace metasel::logic
