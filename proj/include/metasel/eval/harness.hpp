#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "metasel/corpus/cases.hpp"
#include "metasel/logic/mil.hpp"
#include "metasel/policy/checkpoint.hpp"
#include "metasel/policy/network.hpp"
#include "metasel/train/ppo.hpp"

namespace metasel::eval {

using logic::kPoolSize;
using logic::MetaRuleSet;
using logic::MilStatus;

enum class Strategy : std::uint8_t { Policy, Handmade, RandomTwo, All };

std::string_view to_string(Strategy s);
// policy, handmade, random2 (or randomtwo), all; case-insensitive. Throws
// UnknownStrategy.
Strategy parse_strategy(std::string_view name);

struct EvalConfig {
  std::size_t trials = 100;  // total, split round-robin over the repeats
  std::size_t repeats = 3;
  logic::MilLimits mil{4, 2, 30.0, 0, 0};
  std::uint64_t seed = 0;
  unsigned workers = 1;

  void validate() const;  // throws ConfigError
};

struct TrialRecord {
  std::size_t trial = 0;
  std::size_t repeat = 0;
  MetaRuleSet selection;
  MilStatus status = MilStatus::NoRule;
  std::uint64_t steps = 0;
  double elapsed_s = 0.0;
  double reward = 0.0;
};

// Rates are the mean over repeats of the per-repeat rates; *_std is the
// population standard deviation over repeats.
struct StrategyReport {
  Strategy strategy = Strategy::All;
  std::string task_id;
  double corruption_rate = 0.0;
  std::size_t trials = 0;
  std::size_t repeats = 0;
  double success_rate = 0.0, success_std = 0.0;
  double timeout_rate = 0.0, timeout_std = 0.0;
  double other_error_rate = 0.0, other_error_std = 0.0;
  double mean_selected = 0.0, mean_selected_std = 0.0;
  double mean_reward = 0.0, mean_reward_std = 0.0;
  double mean_elapsed_s = 0.0;
  std::vector<TrialRecord> records;  // by trial index
};

// Test instances for a task: application-size bags drawn from a pool generated
// under a seed stream separate from the training pools.
corpus::CaseSet eval_pool(const corpus::TaskSpec& task, std::uint64_t seed, std::size_t n_pos = 200,
                          std::size_t n_neg = 400);

// Application-size instance for trial t; independent of the strategy, so
// strategies are compared on identical instances.
corpus::Instance trial_instance(const corpus::TaskSpec& task, const corpus::CaseSet& pool, std::uint64_t seed,
                                std::size_t trial);

// Runs `cfg.trials` trials. Policy needs `params`; the policy sees the
// instance after corrupt_instance(rate = corruption) while MIL always runs on
// the clean cases. An empty selection counts as NoRule without running MIL.
StrategyReport evaluate_strategy(Strategy strategy, const corpus::TaskSpec& task, const corpus::CaseSet& pool,
                                 const EvalConfig& cfg, const policy::PolicyParams<double>* params = nullptr,
                                 double corruption = 0.0);

// ---- brute-force oracle --------------------------------------------------------

inline constexpr std::size_t kSubsetCount = std::size_t{1} << kPoolSize;

struct OracleResult {
  std::string task_id;
  std::size_t instance = 0;
  std::array<MilStatus, kSubsetCount> outcomes{};  // by MetaRuleSet::bits()
  std::array<std::uint64_t, kSubsetCount> steps{};
  MetaRuleSet best_subset;  // smallest succeeding subset, lowest bits on ties
  double best_reward = 0.0;

  bool succeeds(MetaRuleSet s) const { return outcomes[s.bits()] == MilStatus::Success; }
};

OracleResult brute_force_oracle(const corpus::Instance& inst, const logic::MilLimits& limits, unsigned workers = 1,
                                std::size_t instance_index = 0);

// Supersets of succeeding subsets that did not succeed, re-run with
// `relaxed` limits; returns the subsets that still fail (empty when the
// outcome map is monotone).
std::vector<MetaRuleSet> monotonicity_violations(const corpus::Instance& inst, const OracleResult& r,
                                                 const logic::MilLimits& relaxed, unsigned workers = 1);

struct SubsetSummary {
  MetaRuleSet subset;
  std::size_t successes = 0;
  std::size_t instances = 0;
  bool minimal = false;  // succeeds everywhere and no proper subset does
};

// One entry per subset that succeeded on at least one instance, ordered by
// size then bits.
std::vector<SubsetSummary> summarize_oracle(const std::vector<OracleResult>& results);

std::string oracle_to_json_line(const OracleResult& r);

// ---- protocols ----------------------------------------------------------------

// Throws ManifestViolation when any of `unseen` is in the checkpoint's
// training task list (or the list is missing).
void check_manifest(const policy::Checkpoint& ckpt, const std::vector<const corpus::TaskSpec*>& unseen);

// Policy reports on tasks the checkpoint never trained on.
std::vector<StrategyReport> generalization_eval(const policy::Checkpoint& ckpt,
                                                const std::vector<const corpus::TaskSpec*>& unseen,
                                                const EvalConfig& cfg);

// Policy reports at each corruption rate; rates must lie in [0, 1].
std::vector<StrategyReport> robustness_sweep(const policy::PolicyParams<double>& params, const corpus::TaskSpec& task,
                                             const corpus::CaseSet& pool, const std::vector<double>& rates,
                                             const EvalConfig& cfg);

// Mean reward of selections drawn from the uniform 0.5 policy, computed
// exactly from an oracle outcome map.
double uniform_policy_reward(const OracleResult& r);

// ---- reports ------------------------------------------------------------------

// strategy,task,corruption,trials,repeats,success_rate,success_std,
// timeout_rate,timeout_std,other_error_rate,other_error_std,mean_selected,
// mean_selected_std,mean_reward,mean_reward_std
std::string reports_csv(const std::vector<StrategyReport>& reports);
// strategy,task,corruption,trial,repeat,selection,status,steps,reward
std::string trials_csv(const std::vector<StrategyReport>& reports);

struct ProbabilityTrace {
  std::string task_id;
  std::vector<std::size_t> iterations;
  std::vector<std::array<double, kPoolSize>> probs;  // one row per iteration
};

// Per-task traces from a training history.
std::vector<ProbabilityTrace> traces_from_history(const std::vector<train::IterationLog>& history);

// Per-task traces from the history.csv written during pre-training.
// Throws IoFailure on a malformed table.
std::vector<ProbabilityTrace> traces_from_history_csv(const std::string& text);

// task,iteration,metarule,prob
std::string heatmap_csv(const std::vector<ProbabilityTrace>& traces);
// Static SVG: one row per meta-rule, one column per iteration, linear
// white-to-blue scale between the trace's min and max.
std::string heatmap_svg(const ProbabilityTrace& trace);

// Writes reports.csv, trials.csv, heatmap.csv and heatmap_<task>.svg under
// `dir` (the last two only when traces are given). Throws IoFailure.
void emit_reports(const std::filesystem::path& dir, const std::vector<StrategyReport>& reports,
                  const std::vector<ProbabilityTrace>& traces = {});

// Writes text to a file (via a temporary and rename). Throws IoFailure.
void write_text(const std::filesystem::path& file, const std::string& text);

}  // namespace metasel::eval
