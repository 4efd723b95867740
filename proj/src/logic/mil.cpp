#include "metasel/logic/mil.hpp"

#include <algorithm>
#include <stdexcept>

#include "engine.hpp"

namespace metasel::logic {

std::string_view to_string(MilStatus s) {
  switch (s) {
    case MilStatus::Success: return "success";
    case MilStatus::NoRule: return "no_rule";
    case MilStatus::Timeout: return "timeout";
  }
  return "unknown";
}

namespace {

std::size_t longest_list(const Term& t) {
  if (t.empty() || t.is_var()) return 0;
  std::size_t best = t.is_list() ? t.list_length() : 0;
  if (t.kind() == TermKind::List || t.kind() == TermKind::Struct) {
    for (const auto& c : t.items()) best = std::max(best, longest_list(c));
  }
  return best;
}

const std::string& target_of(std::span<const Term> positives) {
  if (positives.empty()) throw std::invalid_argument("mil_induce needs at least one positive example");
  const Term& first = positives.front();
  if (first.empty() || first.kind() != TermKind::Struct || first.arity() != 2) {
    throw std::invalid_argument("examples must be binary atoms: " + first.to_string());
  }
  for (const auto& p : positives) {
    if (p.kind() != TermKind::Struct || p.name() != first.name() || p.arity() != 2) {
      throw std::invalid_argument("positive examples must share one binary target: " + p.to_string());
    }
  }
  return first.name();
}

}  // namespace

ProofBudget proof_budget_for(std::span<const Term> positives, std::span<const Term> negatives,
                             const MilLimits& limits) {
  ProofBudget b;
  b.max_steps = limits.max_steps;
  if (limits.max_depth != 0) {
    b.max_depth = limits.max_depth;
  } else {
    std::size_t longest = 0;
    for (const auto& t : positives) longest = std::max(longest, longest_list(t));
    for (const auto& t : negatives) longest = std::max(longest, longest_list(t));
    b.max_depth = 2 * longest + 4;
  }
  return b;
}

MilOutcome mil_induce(std::span<const Term> positives, std::span<const Term> negatives, MetaRuleSet metarules,
                      const BackgroundDomain& domain, const MilLimits& limits) {
  using Clock = detail::Engine::Clock;
  const auto start = Clock::now();
  const std::string target = target_of(positives);
  MilOutcome out;
  auto finish = [&] {
    out.elapsed_s = std::chrono::duration<double>(Clock::now() - start).count();
    return out;
  };
  if (metarules.empty()) return finish();

  detail::Engine::Settings s;
  s.domain = &domain;
  s.target = target;
  s.max_invented = limits.max_invented;
  s.max_depth = proof_budget_for(positives, negatives, limits).max_depth;
  s.max_steps = limits.max_steps;
  if (limits.timeout_s > 0) {
    s.deadline = start + std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(limits.timeout_s));
  }
  detail::Engine engine(s);
  for (std::size_t bound = 1; bound <= limits.max_clauses; ++bound) {
    if (!engine.induce(positives, negatives, metarules, bound)) continue;
    if (engine.aborted()) {
      out.status = MilStatus::Timeout;
    } else {
      out.status = MilStatus::Success;
      out.hypothesis = engine.solution();
    }
    break;
  }
  out.resolution_steps = engine.steps();
  return finish();
}

}  // namespace metasel::logic
