#include <cmath>

#include "doctest.h"
#include "metasel/train/ppo.hpp"

using namespace metasel::train;
using metasel::logic::MilStatus;

namespace {

TrainConfig small_config() {
  TrainConfig c;
  c.tasks = {"mario_just_up", "mario_right_one_step", "mario_bomb_far"};
  c.iterations = 3;
  c.batch_size = 6;
  c.pool_pos = 30;
  c.pool_neg = 60;
  c.probe_instances = 2;
  c.seed = 5;
  c.mil.max_steps = 20000;
  return c;
}

bool same_params(const PolicyParams<double>& a, const PolicyParams<double>& b) {
  bool same = true;
  metasel::policy::zip_tensors(a, b, [&](const std::string&, const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
    same = same && x == y;
  });
  return same;
}

std::string csv_of(const std::vector<IterationLog>& history) {
  std::string s = history_csv_header();
  for (const auto& h : history) s += history_csv_rows(h);
  s += progress_csv_header();
  for (const auto& h : history) s += progress_csv_row(h);
  return s;
}

}  // namespace

TEST_CASE("reward follows the subset-size schedule") {
  CHECK(compute_reward(MilStatus::Success, 2) == 16.0);
  CHECK(compute_reward(MilStatus::Success, 6) == 1.0);
  for (int n = 1; n <= 6; ++n) {
    CHECK(compute_reward(MilStatus::Success, n) == std::ldexp(1.0, 6 - n));
    CHECK(compute_reward(MilStatus::Timeout, n) == 0.0);
    CHECK(compute_reward(MilStatus::NoRule, n) == 0.0);
  }
  CHECK_THROWS_AS(compute_reward(MilStatus::Success, 7), metasel::ConfigError);
}

TEST_CASE("advantages are batch-normalised rewards") {
  std::vector<TrajectoryRecord> rs(4);
  for (auto& r : rs) r.reward = 8.0;
  compute_advantages(rs);
  for (const auto& r : rs) CHECK(r.advantage == 0.0);

  rs.resize(2);
  rs[0].reward = 0.0;
  rs[1].reward = 16.0;
  compute_advantages(rs);
  CHECK(rs[0].advantage == doctest::Approx(-1.0).epsilon(1e-8));
  CHECK(rs[1].advantage == doctest::Approx(1.0).epsilon(1e-8));

  std::vector<TrajectoryRecord> mixed(7);
  for (std::size_t i = 0; i < mixed.size(); ++i) mixed[i].reward = std::ldexp(1.0, static_cast<int>(i % 5));
  compute_advantages(mixed);
  double sum = 0;
  for (const auto& r : mixed) sum += r.advantage;
  CHECK(std::abs(sum) < 1e-9);
}

TEST_CASE("config round trip and validation") {
  auto c = small_config();
  c.lr = 1e-5;
  c.clip_eps = 0.15;
  const auto back = TrainConfig::from_config(c.to_config());
  CHECK(back.to_config().dump() == c.to_config().dump());
  CHECK(back.lr == 1e-5);
  CHECK(back.tasks == c.tasks);
  auto kv = c.to_config();
  kv.set("lr", "0");
  CHECK_THROWS_AS(TrainConfig::from_config(kv), metasel::ConfigError);
  kv = c.to_config();
  kv.set("clip_eps", "-1");
  CHECK_THROWS_AS(TrainConfig::from_config(kv), metasel::ConfigError);
  kv = c.to_config();
  kv.set("batch_size", "many");
  CHECK_THROWS_AS(TrainConfig::from_config(kv), metasel::ConfigError);

  auto mixed = small_config();
  mixed.tasks = {"mario_just_up", "mnist_cumulative_sum"};
  CHECK_THROWS_AS(TaskPools{mixed}, metasel::ConfigError);
}

TEST_CASE("trajectories have batch size records and do not depend on worker count") {
  auto cfg = small_config();
  const TaskPools pools(cfg);
  const auto state = initial_state(cfg, pools);
  auto a = collect_trajectory(state.params, pools, cfg, 1);
  cfg.workers = 3;
  auto b = collect_trajectory(state.params, pools, cfg, 1);
  REQUIRE(a.size() == cfg.batch_size);
  REQUIRE(b.size() == cfg.batch_size);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].instance == b[i].instance);
    CHECK(a[i].selection == b[i].selection);
    CHECK(a[i].reward == b[i].reward);
    CHECK(a[i].old_log_prob == doctest::Approx(metasel::policy::selection_log_prob(
                                   Eigen::Map<const Eigen::VectorXd>(a[i].old_probs.data(), 6).eval(), a[i].selection)));
    const int n = static_cast<int>(std::count(a[i].selection.begin(), a[i].selection.end(), true));
    CHECK(a[i].reward == compute_reward(a[i].status, n));
    CHECK(a[i].reward <= 32.0);
  }
  CHECK(collect_trajectory(state.params, pools, cfg, 2)[0].instance != a[0].instance);
}

TEST_CASE("an empty selection skips induction and earns nothing") {
  auto cfg = small_config();
  cfg.batch_size = 20;
  const TaskPools pools(cfg);
  auto state = initial_state(cfg, pools);
  state.params.head_bias(0, 0) = -50.0;
  int empty = 0;
  for (const auto& r : collect_trajectory(state.params, pools, cfg, 1)) {
    if (std::count(r.selection.begin(), r.selection.end(), true) != 0) continue;
    ++empty;
    CHECK(r.status == MilStatus::NoRule);
    CHECK(r.reward == 0.0);
    CHECK(r.mil_steps == 0);
  }
  CHECK(empty > 10);
}

TEST_CASE("ppo_update") {
  auto cfg = small_config();
  const TaskPools pools(cfg);
  const auto state = initial_state(cfg, pools);
  auto records = collect_trajectory(state.params, pools, cfg, 1);

  SUBCASE("zero advantages leave parameters unchanged") {
    for (auto& r : records) r.advantage = 0.0;
    auto params = state.params;
    auto adam = AdamState::zeros(params.shape);
    ppo_update(params, adam, records, cfg);
    CHECK(same_params(params, state.params));
    CHECK(adam.t == 0);
  }

  SUBCASE("the first epoch on fresh records is unclipped") {
    compute_advantages(records);
    auto params = state.params;
    auto adam = AdamState::zeros(params.shape);
    cfg.ppo_epochs = 1;
    const auto stats = ppo_update(params, adam, records, cfg);
    CHECK(stats.clip_fraction == 0.0);
    double expected = 0;
    for (const auto& r : records) expected -= r.advantage;
    CHECK(stats.loss_first == doctest::Approx(expected / static_cast<double>(records.size())));
    CHECK(stats.max_abs_step > 0);
    CHECK(stats.max_abs_step <= cfg.lr * 1.0001);
  }

  SUBCASE("a positive advantage raises the log-probability of its selection") {
    std::vector<TrajectoryRecord> one{records[0]};
    one[0].advantage = 1.0;
    auto params = state.params;
    auto adam = AdamState::zeros(params.shape);
    cfg.lr = 1e-4;
    cfg.ppo_epochs = 1;
    const auto before = metasel::policy::selection_log_prob(metasel::policy::forward(one[0].encoding, params), one[0].selection);
    ppo_update(params, adam, one, cfg);
    const auto after = metasel::policy::selection_log_prob(metasel::policy::forward(one[0].encoding, params), one[0].selection);
    CHECK(after > before);
    one[0].advantage = -1.0;
    ppo_update(params, adam, one, cfg);
    const auto back = metasel::policy::selection_log_prob(metasel::policy::forward(one[0].encoding, params), one[0].selection);
    CHECK(back < after);
  }

  SUBCASE("a non-finite loss rolls the update back") {
    compute_advantages(records);
    records[0].advantage = -1.0;
    records[0].old_log_prob = -std::numeric_limits<double>::infinity();
    auto params = state.params;
    auto adam = AdamState::zeros(params.shape);
    CHECK_THROWS_AS(ppo_update(params, adam, records, cfg), metasel::NonFiniteLoss);
    CHECK(same_params(params, state.params));
    CHECK(adam.t == 0);
  }
}

TEST_CASE("pretrain is reproducible and resumable") {
  const auto cfg = small_config();
  const TaskPools pools(cfg);

  auto full = initial_state(cfg, pools);
  std::size_t checkpoints = 0;
  PretrainHooks hooks;
  hooks.on_checkpoint = [&](const PretrainState&) { ++checkpoints; };
  pretrain(full, cfg, pools, hooks);
  CHECK(full.iteration == 3);
  CHECK(full.history.size() == 3);
  CHECK(checkpoints == 1);
  for (const auto& h : full.history) {
    CHECK(h.tasks.size() == 3);
    CHECK(h.success + h.timeout + h.norule == cfg.batch_size);
  }
  const std::string rows = history_csv_rows(full.history[0]);
  CHECK(std::count(rows.begin(), rows.end(), '\n') == 18);

  auto again = initial_state(cfg, pools);
  pretrain(again, cfg, pools);
  CHECK(csv_of(again.history) == csv_of(full.history));
  CHECK(same_params(again.params, full.params));

  auto first = cfg;
  first.iterations = 2;
  auto part = initial_state(first, pools);
  pretrain(part, first, pools);
  const auto ckpt = to_checkpoint(part, cfg, pools.domain());
  CHECK(ckpt.meta.at("tasks") == "mario_just_up,mario_right_one_step,mario_bomb_far");
  CHECK(config_from_checkpoint(ckpt).to_config().dump() == cfg.to_config().dump());
  auto resumed = state_from_checkpoint(ckpt);
  CHECK(resumed.iteration == 2);
  CHECK(resumed.adam.t == part.adam.t);
  pretrain(resumed, cfg, pools);
  REQUIRE(resumed.history.size() == 1);
  CHECK(csv_of(resumed.history) == csv_of({full.history[2]}));
  CHECK(same_params(resumed.params, full.params));
}
