#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "metasel/corpus/tasks.hpp"
#include "metasel/logic/prover.hpp"
#include "metasel/logic/term.hpp"

namespace metasel::corpus {

using logic::Term;

struct CaseSet {
  std::vector<Term> positives;
  std::vector<Term> negatives;
  // For each negative: index of the positive it was mutated from, or -1 for
  // a uniformly random negative.
  std::vector<int> near_miss_source;
};

// Budget used when checking generated cases against the ground-truth rule.
logic::ProofBudget verification_budget(const TaskSpec& task);

// Every positive case of the task, grouped by case length, in a fixed order.
// MNIST folds keep every partial result a single digit.
std::vector<std::vector<Term>> enumerate_positives(const TaskSpec& task);
std::size_t positive_space_size(const TaskSpec& task);

// Case length (number of states, or digits including the result) of an
// example atom.
int case_length(const TaskSpec& task, const Term& atom);

// Positives: Mario draws distinct cases (length uniform, then uniform within
// the length) and throws ExhaustedSpace past the space size; MNIST draws with
// replacement because its spaces are small. Negatives: half near-miss
// mutations of a generated positive, half uniform random, all distinct and
// all rejected by the ground-truth rule.
CaseSet gen_cases(const TaskSpec& task, std::size_t n_pos, std::size_t n_neg, std::uint64_t seed);

struct Caps {
  std::size_t pos = 0;
  std::size_t neg = 0;
};
Caps training_caps(DomainKind domain);     // 20/50 Mario, 10/20 MNIST
Caps application_size(DomainKind domain);  // 5/20 Mario, 2/1 MNIST

struct Instance {
  std::string task_id;
  std::vector<Term> positives;
  std::vector<Term> negatives;
  double corruption_rate = 0.0;

  friend bool operator==(const Instance&, const Instance&) = default;
};

// Uniform sample without replacement from the pool. Throws CapExceeded when
// a count is above the domain cap and ExhaustedSpace when the pool is short.
Instance sample_instance(const TaskSpec& task, const CaseSet& pool, std::size_t n_pos, std::size_t n_neg,
                         std::uint64_t seed);

// Replaces each atomic symbol slot (grid coordinate, target type, scene,
// digit) with a uniformly drawn different value with probability `rate`.
// The input is not modified.
Instance corrupt_instance(const Instance& inst, const TaskSpec& task, double rate, std::uint64_t seed,
                          std::size_t* slots = nullptr, std::size_t* changed = nullptr);

}  // namespace metasel::corpus
