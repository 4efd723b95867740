#pragma once

#include <array>
#include <chrono>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "metasel/logic/background.hpp"
#include "metasel/logic/clause.hpp"
#include "metasel/logic/metarule.hpp"
#include "metasel/logic/prover.hpp"
#include "metasel/logic/term.hpp"

namespace metasel::logic::detail {

// Shared resolution core behind prove() and mil_induce(). Clause variables
// live in a flat cell store with a trail; goals form persistent linked lists
// in an arena, so backtracking is a matter of truncating three vectors.
class Engine {
 public:
  using Clock = std::chrono::steady_clock;

  struct Settings {
    const BackgroundDomain* domain = nullptr;
    std::string target = "f";
    int max_invented = 0;
    std::size_t max_depth = 14;
    std::uint64_t max_steps = 0;
    std::optional<Clock::time_point> deadline;
  };

  explicit Engine(Settings settings, const std::vector<std::string>& extra_symbols = {});

  // Plain proof against a fixed program.
  void load(const Hypothesis& hyp);
  ProofStatus prove(std::span<const Term> goals);

  // One iterative-deepening layer of induction. Returns true when a
  // consistent program was found (see solution()) or the run aborted
  // (see aborted()).
  bool induce(std::span<const Term> positives, std::span<const Term> negatives, MetaRuleSet metarules,
              std::size_t clause_bound);

  bool aborted() const { return aborted_; }
  std::uint64_t steps() const { return steps_; }
  const Hypothesis& solution() const { return solution_; }

 private:
  struct PredInfo {
    std::string name;
    int arity = 2;
    const Builtin* builtin = nullptr;
    int invented_index = 0;  // k for f_k, 0 otherwise
  };

  struct CompiledLiteral {
    int pred = 0;
    std::int8_t a0 = 0;
    std::int8_t a1 = -1;
    bool guarded = false;
  };

  struct CompiledClause {
    int head = 0;
    int num_vars = 2;
    std::uint8_t body_size = 0;
    std::array<CompiledLiteral, 2> body{};
    MetaRuleId origin = MetaRuleId::Identity;
    std::array<int, 3> fill{-1, -1, -1};
  };

  struct Slot {
    Term value;
    std::int32_t alias = -1;
  };

  struct Goal {
    int pred = 0;
    std::int32_t a0 = -1;
    std::int32_t a1 = -1;
    std::int32_t guard = -1;  // cell of the clause head's first argument
    std::int32_t depth = 0;
    std::int32_t next = -1;
    std::int32_t parent = -1;  // goal whose clause body created this one
  };

  enum class Mode { Prove, Induce };

  int intern(const std::string& name);
  CompiledClause compile(const Clause& c);
  Hypothesis decompile() const;

  std::int32_t new_cell(const Term& value);
  std::int32_t deref(std::int32_t cell) const;
  void bind(std::int32_t cell, const Term& value);
  void undo(std::size_t trail_mark);
  long size_of(std::int32_t cell) const;
  std::int32_t push_goal(const Goal& g);
  std::int32_t atoms_to_goals(std::span<const Term> atoms, std::int32_t tail, std::vector<std::pair<VarId, std::int32_t>>& vars);

  bool solve(std::int32_t goal);
  bool solve_builtin(const Goal& g, const PredInfo& p);
  bool solve_user(std::int32_t index, const Goal& g);
  bool resolve(const CompiledClause& c, std::int32_t index, const Goal& g);
  bool try_new_clauses(std::int32_t index, const Goal& g);
  bool same_arg(std::int32_t a, std::int32_t b) const;
  bool repeats_ancestor(const Goal& g) const;
  bool on_empty();
  bool check_negatives();
  bool tick();

  Settings settings_;
  std::vector<PredInfo> preds_;
  std::vector<int> binary_candidates_;   // lexical order
  std::vector<int> monadic_candidates_;  // lexical order
  int target_ = -1;

  std::vector<Slot> cells_;
  std::vector<std::int32_t> trail_;
  std::vector<Goal> arena_;
  std::vector<CompiledClause> program_;

  Mode mode_ = Mode::Prove;
  MetaRuleSet metarules_;
  std::size_t clause_bound_ = 0;
  int invented_used_ = 0;
  std::span<const Term> negatives_;

  std::uint64_t steps_ = 0;
  bool aborted_ = false;
  bool proved_ = false;
  bool cut_ = false;
  Hypothesis solution_;
};

}  // namespace metasel::logic::detail
