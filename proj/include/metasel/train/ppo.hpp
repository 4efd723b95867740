#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "metasel/corpus/cases.hpp"
#include "metasel/corpus/encoding.hpp"
#include "metasel/logic/mil.hpp"
#include "metasel/policy/checkpoint.hpp"
#include "metasel/policy/network.hpp"
#include "metasel/util/config.hpp"

namespace metasel::train {

using policy::PolicyParams;

struct TrainConfig {
  std::vector<std::string> tasks;  // mixture, task ids or group names
  std::size_t iterations = 100;
  std::size_t batch_size = 32;
  double clip_eps = 0.2;
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t ppo_epochs = 4;
  std::uint64_t seed = 0;
  logic::MilLimits mil{4, 2, 0.0, 300000, 0};
  // Cases generated per task when no dataset directory is given.
  std::size_t pool_pos = 200;
  std::size_t pool_neg = 400;
  // Fixed instances per task whose mean probabilities are logged.
  std::size_t probe_instances = 4;
  std::size_t checkpoint_every = 0;
  unsigned workers = 1;
  double init_scale = 0.05;

  // Reads the keys written by to_config(); absent keys keep their defaults.
  // Throws ConfigError.
  static TrainConfig from_config(const KeyValueConfig& kv);
  KeyValueConfig to_config() const;
  void validate() const;
};

// 0 unless Success, else 2^(pool_size - n_selected).
double compute_reward(logic::MilStatus status, int n_selected, int pool_size = static_cast<int>(logic::kPoolSize));

struct TrajectoryRecord {
  std::size_t task = 0;  // index into the mixture
  corpus::Instance instance;
  corpus::InstanceEncoding encoding;
  std::array<double, logic::kPoolSize> old_probs{};
  std::array<bool, logic::kPoolSize> selection{};
  double old_log_prob = 0.0;
  logic::MilStatus status = logic::MilStatus::NoRule;
  std::uint64_t mil_steps = 0;
  double reward = 0.0;
  double advantage = 0.0;
};

// Case pools and probe instances for a task mixture.
class TaskPools {
 public:
  // Generates pool_pos/pool_neg cases per task, or loads <data_dir>/<task>.jsonl
  // when data_dir is non-empty. Throws ConfigError for unknown tasks or mixed domains.
  TaskPools(const TrainConfig& cfg, const std::filesystem::path& data_dir = {});

  std::size_t size() const { return tasks_.size(); }
  const corpus::TaskSpec& task(std::size_t i) const { return *tasks_[i]; }
  const corpus::CaseSet& pool(std::size_t i) const { return pools_[i]; }
  const std::vector<corpus::InstanceEncoding>& probes(std::size_t i) const { return probes_[i]; }
  corpus::DomainKind domain() const { return domain_; }

  // A training-size bag: n_pos uniform in [application, cap], same for n_neg.
  corpus::Instance sample(std::size_t task, Rng& rng) const;

 private:
  std::vector<const corpus::TaskSpec*> tasks_;
  std::vector<corpus::CaseSet> pools_;
  std::vector<std::vector<corpus::InstanceEncoding>> probes_;
  corpus::DomainKind domain_ = corpus::DomainKind::Mario;
};

// batch_size records for one iteration; record i draws everything from the
// stream (seed, iteration, i), so the batch does not depend on worker count.
std::vector<TrajectoryRecord> collect_trajectory(const PolicyParams<double>& params, const TaskPools& pools,
                                                 const TrainConfig& cfg, std::size_t iteration);

// (r - mean) / (std + 1e-8) over the batch.
void compute_advantages(std::vector<TrajectoryRecord>& records);

struct AdamState {
  PolicyParams<double> m, v;
  std::uint64_t t = 0;

  static AdamState zeros(const policy::PolicyShape& shape);
};

struct UpdateStats {
  double loss_first = 0.0;  // clipped surrogate before the first step
  double loss_last = 0.0;   // before the last step
  double clip_fraction = 0.0;
  double max_abs_step = 0.0;
};

// ppo_epochs full-batch steps of the clipped surrogate with Adam. On a
// non-finite loss or gradient, params and state are restored and
// NonFiniteLoss is thrown.
UpdateStats ppo_update(PolicyParams<double>& params, AdamState& adam, const std::vector<TrajectoryRecord>& records,
                       const TrainConfig& cfg);

struct TaskLog {
  std::string task;
  std::size_t samples = 0;
  double mean_reward = 0.0;
  std::size_t success = 0, timeout = 0, norule = 0;
  std::array<double, logic::kPoolSize> mean_probs{};  // over the task's probe instances
};

struct IterationLog {
  std::size_t iteration = 0;  // 1-based
  double mean_reward = 0.0;
  double mean_selected = 0.0;
  std::size_t success = 0, timeout = 0, norule = 0;
  UpdateStats update;
  std::vector<TaskLog> tasks;
};

struct PretrainState {
  PolicyParams<double> params;
  AdamState adam;
  std::size_t iteration = 0;  // completed iterations
  std::vector<IterationLog> history;
};

struct PretrainHooks {
  std::function<void(const IterationLog&)> on_iteration;
  std::function<void(const PretrainState&)> on_checkpoint;
};

PretrainState initial_state(const TrainConfig& cfg, const TaskPools& pools);

// Runs iterations state.iteration+1 .. cfg.iterations.
void pretrain(PretrainState& state, const TrainConfig& cfg, const TaskPools& pools, const PretrainHooks& hooks = {});

// Mean probabilities over a task's probe instances.
std::array<double, logic::kPoolSize> probe_probs(const PolicyParams<double>& params, const TaskPools& pools,
                                                 std::size_t task);

// ---- persistence -------------------------------------------------------------

// Checkpoint carrying params, Adam moments, the iteration, the config and
// the training task list.
policy::Checkpoint to_checkpoint(const PretrainState& state, const TrainConfig& cfg, corpus::DomainKind domain);
PretrainState state_from_checkpoint(const policy::Checkpoint& ckpt);
TrainConfig config_from_checkpoint(const policy::Checkpoint& ckpt);

// history.csv: iteration,task,metarule,mean_prob,mean_reward,success_rate,
// timeout_rate,norule_rate,samples (one row per task and meta-rule).
std::string history_csv_header();
std::string history_csv_rows(const IterationLog& log);
// progress.csv: one row per iteration with batch-level statistics.
std::string progress_csv_header();
std::string progress_csv_row(const IterationLog& log);

}  // namespace metasel::train
