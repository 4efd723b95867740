#include "metasel/train/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "metasel/corpus/dataset.hpp"
#include "metasel/util/parallel.hpp"

namespace metasel::train {
namespace {

using logic::kPoolSize;
using logic::MilStatus;

std::string fixed(double x) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.6f", x);
  return buf;
}

double rate(std::size_t n, std::size_t d) { return d ? static_cast<double>(n) / static_cast<double>(d) : 0.0; }

bool all_finite(const PolicyParams<double>& g) {
  bool ok = true;
  policy::for_each_tensor(g, [&](const std::string&, const Eigen::MatrixXd& m) { ok = ok && m.allFinite(); });
  return ok;
}

}  // namespace

// ---- config ------------------------------------------------------------------

TrainConfig TrainConfig::from_config(const KeyValueConfig& kv) {
  TrainConfig c;
  const auto count = [&](const char* key, std::size_t fallback) {
    const long long v = kv.get_int(key, static_cast<long long>(fallback));
    if (v < 0) throw ConfigError(std::string(key) + " must be non-negative");
    return static_cast<std::size_t>(v);
  };
  c.tasks = kv.get_list("tasks", c.tasks);
  c.iterations = count("iterations", c.iterations);
  c.batch_size = count("batch_size", c.batch_size);
  c.clip_eps = kv.get_double("clip_eps", c.clip_eps);
  c.lr = kv.get_double("lr", c.lr);
  c.beta1 = kv.get_double("beta1", c.beta1);
  c.beta2 = kv.get_double("beta2", c.beta2);
  c.adam_eps = kv.get_double("adam_eps", c.adam_eps);
  c.ppo_epochs = count("ppo_epochs", c.ppo_epochs);
  c.seed = static_cast<std::uint64_t>(kv.get_int("seed", static_cast<long long>(c.seed)));
  c.mil.max_steps = count("step_budget", c.mil.max_steps);
  c.mil.timeout_s = kv.get_double("timeout", c.mil.timeout_s);
  c.mil.max_clauses = count("max_clauses", c.mil.max_clauses);
  c.mil.max_invented = static_cast<int>(count("max_invented", static_cast<std::size_t>(c.mil.max_invented)));
  c.pool_pos = count("pool_pos", c.pool_pos);
  c.pool_neg = count("pool_neg", c.pool_neg);
  c.probe_instances = count("probe_instances", c.probe_instances);
  c.checkpoint_every = count("checkpoint_every", c.checkpoint_every);
  c.workers = static_cast<unsigned>(count("workers", c.workers));
  c.init_scale = kv.get_double("init_scale", c.init_scale);
  c.validate();
  return c;
}

KeyValueConfig TrainConfig::to_config() const {
  KeyValueConfig kv;
  kv.set("tasks", join_list(tasks));
  kv.set("iterations", std::to_string(iterations));
  kv.set("batch_size", std::to_string(batch_size));
  kv.set("clip_eps", format_number(clip_eps));
  kv.set("lr", format_number(lr));
  kv.set("beta1", format_number(beta1));
  kv.set("beta2", format_number(beta2));
  kv.set("adam_eps", format_number(adam_eps));
  kv.set("ppo_epochs", std::to_string(ppo_epochs));
  kv.set("seed", std::to_string(seed));
  kv.set("step_budget", std::to_string(mil.max_steps));
  kv.set("timeout", format_number(mil.timeout_s));
  kv.set("max_clauses", std::to_string(mil.max_clauses));
  kv.set("max_invented", std::to_string(mil.max_invented));
  kv.set("pool_pos", std::to_string(pool_pos));
  kv.set("pool_neg", std::to_string(pool_neg));
  kv.set("probe_instances", std::to_string(probe_instances));
  kv.set("checkpoint_every", std::to_string(checkpoint_every));
  kv.set("workers", std::to_string(workers));
  kv.set("init_scale", format_number(init_scale));
  return kv;
}

void TrainConfig::validate() const {
  if (!(clip_eps > 0)) throw ConfigError("clip_eps must be positive");
  if (!(lr > 0)) throw ConfigError("lr must be positive");
  if (!(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1)) throw ConfigError("Adam moments must lie in [0, 1)");
  if (batch_size == 0) throw ConfigError("batch_size must be at least 1");
  if (mil.max_clauses == 0) throw ConfigError("max_clauses must be at least 1");
  if (pool_pos == 0 || pool_neg == 0) throw ConfigError("case pools must be non-empty");
}

// ---- reward and trajectories -------------------------------------------------

double compute_reward(MilStatus status, int n_selected, int pool_size) {
  if (n_selected < 0 || n_selected > pool_size) throw ConfigError("selected count outside the pool");
  if (status != MilStatus::Success) return 0.0;
  return std::ldexp(1.0, pool_size - n_selected);
}

TaskPools::TaskPools(const TrainConfig& cfg, const std::filesystem::path& data_dir) {
  if (cfg.tasks.empty()) throw ConfigError("task mixture is empty");
  tasks_ = corpus::resolve_tasks(join_list(cfg.tasks));
  domain_ = tasks_.front()->domain;
  for (const auto* t : tasks_) {
    if (t->domain != domain_) throw ConfigError("task mixture mixes Mario and MNIST tasks");
  }
  const auto app = corpus::application_size(domain_);
  for (const auto* t : tasks_) {
    if (data_dir.empty()) {
      std::size_t n_pos = cfg.pool_pos;
      if (t->domain == corpus::DomainKind::Mario) n_pos = std::min(n_pos, corpus::positive_space_size(*t));
      pools_.push_back(corpus::gen_cases(*t, n_pos, cfg.pool_neg, cfg.seed));
    } else {
      pools_.push_back(corpus::load_task_pool(data_dir, *t));
    }
    const auto& pool = pools_.back();
    const auto enc_cfg = corpus::encoding_config(domain_);
    std::vector<corpus::InstanceEncoding> probes;
    for (std::size_t j = 0; j < cfg.probe_instances; ++j) {
      const auto seed = derive_seed(cfg.seed, stream_id("probe"), stream_id(t->id), j);
      probes.push_back(corpus::encode_instance(corpus::sample_instance(*t, pool, app.pos, app.neg, seed), enc_cfg));
    }
    probes_.push_back(std::move(probes));
  }
}

corpus::Instance TaskPools::sample(std::size_t task, Rng& rng) const {
  const auto caps = corpus::training_caps(domain_);
  const auto app = corpus::application_size(domain_);
  const auto& pool = pools_[task];
  const std::size_t max_pos = std::min(caps.pos, pool.positives.size());
  const std::size_t max_neg = std::min(caps.neg, pool.negatives.size());
  const std::size_t lo_pos = std::min(app.pos, max_pos);
  const std::size_t lo_neg = std::min(app.neg, max_neg);
  const std::size_t n_pos = lo_pos + uniform_index(rng, max_pos - lo_pos + 1);
  const std::size_t n_neg = lo_neg + uniform_index(rng, max_neg - lo_neg + 1);
  return corpus::sample_instance(*tasks_[task], pool, n_pos, n_neg, rng());
}

std::vector<TrajectoryRecord> collect_trajectory(const PolicyParams<double>& params, const TaskPools& pools,
                                                 const TrainConfig& cfg, std::size_t iteration) {
  if (pools.size() == 0) throw ConfigError("task mixture is empty");
  const auto enc_cfg = corpus::encoding_config(pools.domain());
  std::vector<TrajectoryRecord> records(cfg.batch_size);
  parallel_for(records.size(), cfg.workers, [&](std::size_t i) {
    Rng rng = make_rng(cfg.seed, stream_id("trajectory"), iteration, i);
    TrajectoryRecord& r = records[i];
    r.task = uniform_index(rng, pools.size());
    r.instance = pools.sample(r.task, rng);
    r.encoding = corpus::encode_instance(r.instance, enc_cfg);
    const auto out = policy::sample_selection(policy::forward(r.encoding, params), rng);
    r.old_probs = out.probs;
    r.selection = out.selection;
    r.old_log_prob = out.log_prob;
    const auto chosen = out.selected();
    if (chosen.empty()) {
      r.status = MilStatus::NoRule;
    } else {
      const auto& task = pools.task(r.task);
      const auto outcome =
          logic::mil_induce(r.instance.positives, r.instance.negatives, chosen, task.domain_ref(), cfg.mil);
      r.status = outcome.status;
      r.mil_steps = outcome.resolution_steps;
    }
    r.reward = compute_reward(r.status, chosen.size());
  });
  return records;
}

void compute_advantages(std::vector<TrajectoryRecord>& records) {
  if (records.empty()) return;
  double mean = 0;
  for (const auto& r : records) mean += r.reward;
  mean /= static_cast<double>(records.size());
  double var = 0;
  for (const auto& r : records) var += (r.reward - mean) * (r.reward - mean);
  const double sd = std::sqrt(var / static_cast<double>(records.size()));
  for (auto& r : records) r.advantage = (r.reward - mean) / (sd + 1e-8);
}

// ---- update ------------------------------------------------------------------

AdamState AdamState::zeros(const policy::PolicyShape& shape) {
  return AdamState{policy::zero_params<double>(shape), policy::zero_params<double>(shape), 0};
}

UpdateStats ppo_update(PolicyParams<double>& params, AdamState& adam, const std::vector<TrajectoryRecord>& records,
                       const TrainConfig& cfg) {
  UpdateStats stats;
  if (records.empty()) return stats;
  if (std::all_of(records.begin(), records.end(), [](const TrajectoryRecord& r) { return r.advantage == 0.0; })) {
    return stats;
  }
  const auto saved_params = params;
  const auto saved_adam = adam;
  const auto rollback = [&](const std::string& what) {
    params = saved_params;
    adam = saved_adam;
    throw NonFiniteLoss(what);
  };
  const double n = static_cast<double>(records.size());
  std::size_t clipped_total = 0;
  for (std::size_t epoch = 0; epoch < cfg.ppo_epochs; ++epoch) {
    std::vector<PolicyParams<double>> grads(records.size());
    std::vector<double> losses(records.size());
    std::vector<std::uint8_t> clipped(records.size());
    parallel_for(records.size(), cfg.workers, [&](std::size_t i) {
      const auto& r = records[i];
      policy::ForwardCache<double> cache;
      const Eigen::VectorXd probs = policy::forward(r.encoding, params, &cache);
      const double lp = policy::selection_log_prob(probs, r.selection);
      const double ratio = std::exp(lp - r.old_log_prob);
      const double a = r.advantage;
      const double unclipped = ratio * a;
      const double bounded = std::clamp(ratio, 1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps) * a;
      losses[i] = -std::min(unclipped, bounded);
      const bool active = unclipped <= bounded;
      clipped[i] = !active;
      const double d_ratio = active ? -a / n : 0.0;
      const Eigen::VectorXd upstream = d_ratio * ratio * policy::selection_log_prob_grad(probs, r.selection);
      grads[i] = policy::backward(r.encoding, params, cache, upstream);
    });
    double loss = 0;
    for (const double l : losses) loss += l;
    loss /= n;
    if (!std::isfinite(loss)) rollback("PPO loss is not finite");
    auto total = policy::zero_params<double>(params.shape);
    for (const auto& g : grads) {
      policy::zip_tensors(total, g, [](const std::string&, Eigen::MatrixXd& acc, const Eigen::MatrixXd& x) { acc += x; });
    }
    if (!all_finite(total)) rollback("PPO gradient is not finite");
    for (const auto c : clipped) clipped_total += c;
    if (epoch == 0) stats.loss_first = loss;
    stats.loss_last = loss;

    ++adam.t;
    const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(adam.t));
    const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(adam.t));
    std::vector<Eigen::MatrixXd*> ps, ms, vs;
    policy::for_each_tensor(params, [&](const std::string&, Eigen::MatrixXd& x) { ps.push_back(&x); });
    policy::for_each_tensor(adam.m, [&](const std::string&, Eigen::MatrixXd& x) { ms.push_back(&x); });
    policy::for_each_tensor(adam.v, [&](const std::string&, Eigen::MatrixXd& x) { vs.push_back(&x); });
    std::size_t k = 0;
    policy::for_each_tensor(total, [&](const std::string&, const Eigen::MatrixXd& g) {
      Eigen::MatrixXd& m = *ms[k];
      Eigen::MatrixXd& v = *vs[k];
      m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
      v = cfg.beta2 * v + (1.0 - cfg.beta2) * g.cwiseProduct(g);
      const Eigen::MatrixXd step =
          cfg.lr * ((m / c1).array() / ((v / c2).array().sqrt() + cfg.adam_eps)).matrix();
      *ps[k] -= step;
      if (step.size() > 0) stats.max_abs_step = std::max(stats.max_abs_step, step.cwiseAbs().maxCoeff());
      ++k;
    });
    if (!all_finite(params)) rollback("parameters became non-finite");
  }
  stats.clip_fraction = static_cast<double>(clipped_total) / (n * static_cast<double>(std::max<std::size_t>(cfg.ppo_epochs, 1)));
  return stats;
}

// ---- pretraining -------------------------------------------------------------

PretrainState initial_state(const TrainConfig& cfg, const TaskPools& pools) {
  PretrainState s;
  Rng rng = make_rng(cfg.seed, stream_id("init"));
  s.params = policy::init_params<double>(policy::default_shape(pools.domain()), rng, cfg.init_scale);
  s.adam = AdamState::zeros(s.params.shape);
  return s;
}

std::array<double, kPoolSize> probe_probs(const PolicyParams<double>& params, const TaskPools& pools,
                                          std::size_t task) {
  std::array<double, kPoolSize> mean{};
  const auto& probes = pools.probes(task);
  for (const auto& enc : probes) {
    const Eigen::VectorXd p = policy::forward(enc, params);
    for (std::size_t i = 0; i < kPoolSize; ++i) mean[i] += p(static_cast<Eigen::Index>(i));
  }
  if (!probes.empty()) {
    for (auto& m : mean) m /= static_cast<double>(probes.size());
  }
  return mean;
}

void pretrain(PretrainState& state, const TrainConfig& cfg, const TaskPools& pools, const PretrainHooks& hooks) {
  cfg.validate();
  for (std::size_t it = state.iteration + 1; it <= cfg.iterations; ++it) {
    auto records = collect_trajectory(state.params, pools, cfg, it);
    compute_advantages(records);
    IterationLog log;
    log.iteration = it;
    try {
      log.update = ppo_update(state.params, state.adam, records, cfg);
    } catch (const NonFiniteLoss&) {
      TrainConfig retry = cfg;
      retry.lr *= 0.5;
      log.update = ppo_update(state.params, state.adam, records, retry);
    }
    std::vector<TaskLog> tasks(pools.size());
    for (std::size_t t = 0; t < pools.size(); ++t) tasks[t].task = pools.task(t).id;
    for (const auto& r : records) {
      auto& tl = tasks[r.task];
      ++tl.samples;
      tl.mean_reward += r.reward;
      log.mean_reward += r.reward;
      log.mean_selected += static_cast<double>(std::count(r.selection.begin(), r.selection.end(), true));
      const auto bump = [&](std::size_t& a, std::size_t& b) { ++a, ++b; };
      switch (r.status) {
        case MilStatus::Success: bump(tl.success, log.success); break;
        case MilStatus::Timeout: bump(tl.timeout, log.timeout); break;
        case MilStatus::NoRule: bump(tl.norule, log.norule); break;
      }
    }
    log.mean_reward /= static_cast<double>(records.size());
    log.mean_selected /= static_cast<double>(records.size());
    for (std::size_t t = 0; t < pools.size(); ++t) {
      if (tasks[t].samples) tasks[t].mean_reward /= static_cast<double>(tasks[t].samples);
      tasks[t].mean_probs = probe_probs(state.params, pools, t);
    }
    log.tasks = std::move(tasks);
    state.iteration = it;
    state.history.push_back(log);
    if (hooks.on_iteration) hooks.on_iteration(log);
    const bool due = cfg.checkpoint_every > 0 && it % cfg.checkpoint_every == 0;
    if (hooks.on_checkpoint && (due || it == cfg.iterations)) hooks.on_checkpoint(state);
  }
}

// ---- persistence -------------------------------------------------------------

policy::Checkpoint to_checkpoint(const PretrainState& state, const TrainConfig& cfg, corpus::DomainKind domain) {
  policy::Checkpoint c;
  c.params = state.params;
  c.sections = {{"adam_m", state.adam.m}, {"adam_v", state.adam.v}};
  std::vector<std::string> ids;
  for (const auto* t : corpus::resolve_tasks(join_list(cfg.tasks))) ids.push_back(t->id);
  c.meta = {{"domain", std::string(logic::to_string(domain))},
            {"iteration", std::to_string(state.iteration)},
            {"adam_t", std::to_string(state.adam.t)},
            {"tasks", join_list(ids)},
            {"registry", std::string(corpus::kRegistryVersion)},
            {"config", cfg.to_config().dump()}};
  return c;
}

PretrainState state_from_checkpoint(const policy::Checkpoint& ckpt) {
  PretrainState s;
  s.params = ckpt.params;
  const auto* m = ckpt.section("adam_m");
  const auto* v = ckpt.section("adam_v");
  s.adam = (m && v) ? AdamState{*m, *v, 0} : AdamState::zeros(ckpt.params.shape);
  const auto get = [&](const char* key) {
    const auto it = ckpt.meta.find(key);
    return it == ckpt.meta.end() ? std::string("0") : it->second;
  };
  s.adam.t = std::stoull(get("adam_t"));
  s.iteration = std::stoull(get("iteration"));
  return s;
}

TrainConfig config_from_checkpoint(const policy::Checkpoint& ckpt) {
  const auto it = ckpt.meta.find("config");
  if (it == ckpt.meta.end()) throw ConfigError("checkpoint carries no training config");
  return TrainConfig::from_config(KeyValueConfig::parse(it->second));
}

std::string history_csv_header() {
  return "iteration,task,metarule,mean_prob,mean_reward,success_rate,timeout_rate,norule_rate,samples\n";
}

std::string history_csv_rows(const IterationLog& log) {
  std::string out;
  for (const auto& t : log.tasks) {
    for (std::size_t i = 0; i < kPoolSize; ++i) {
      out += std::to_string(log.iteration) + ',' + t.task + ',' +
             std::string(logic::metarule_name(static_cast<logic::MetaRuleId>(i))) + ',' + fixed(t.mean_probs[i]) + ',' +
             fixed(t.mean_reward) + ',' + fixed(rate(t.success, t.samples)) + ',' + fixed(rate(t.timeout, t.samples)) +
             ',' + fixed(rate(t.norule, t.samples)) + ',' + std::to_string(t.samples) + '\n';
    }
  }
  return out;
}

std::string progress_csv_header() {
  return "iteration,mean_reward,success_rate,timeout_rate,norule_rate,mean_selected,loss_first,loss_last,"
         "clip_fraction,max_abs_step\n";
}

std::string progress_csv_row(const IterationLog& log) {
  const std::size_t n = log.success + log.timeout + log.norule;
  return std::to_string(log.iteration) + ',' + fixed(log.mean_reward) + ',' + fixed(rate(log.success, n)) + ',' +
         fixed(rate(log.timeout, n)) + ',' + fixed(rate(log.norule, n)) + ',' + fixed(log.mean_selected) + ',' +
         fixed(log.update.loss_first) + ',' + fixed(log.update.loss_last) + ',' + fixed(log.update.clip_fraction) +
         ',' + fixed(log.update.max_abs_step) + '\n';
}

}  // namespace metasel::train
