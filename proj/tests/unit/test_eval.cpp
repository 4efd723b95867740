#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "metasel/eval/harness.hpp"
#include "metasel/util/error.hpp"

using namespace metasel;
using namespace metasel::eval;
using logic::MetaRuleId;

namespace {

EvalConfig quick_config(std::size_t trials) {
  EvalConfig c;
  c.trials = trials;
  c.repeats = 3;
  c.mil = {4, 2, 0.0, 100000, 0};
  c.seed = 11;
  return c;
}

policy::PolicyParams<double> random_policy(corpus::DomainKind domain, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  return policy::init_params<double>(policy::default_shape(domain), rng);
}

std::vector<std::string> split_csv_line(const std::string& line) { return split_list(line, ','); }

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace

TEST_CASE("strategy names") {
  CHECK(parse_strategy("policy") == Strategy::Policy);
  CHECK(parse_strategy("Handmade") == Strategy::Handmade);
  CHECK(parse_strategy("random2") == Strategy::RandomTwo);
  CHECK(parse_strategy("RandomTwo") == Strategy::RandomTwo);
  CHECK(parse_strategy("ALL") == Strategy::All);
  CHECK_THROWS_AS(parse_strategy("greedy"), UnknownStrategy);
  for (auto s : {Strategy::Policy, Strategy::Handmade, Strategy::RandomTwo, Strategy::All}) {
    CHECK(parse_strategy(to_string(s)) == s);
  }
}

TEST_CASE("evaluate_strategy bookkeeping") {
  const auto& task = corpus::find_task("mario_just_up");
  const auto pool = eval_pool(task, 3);
  const auto cfg = quick_config(10);

  SUBCASE("handmade uses the task's set") {
    const auto rep = evaluate_strategy(Strategy::Handmade, task, pool, cfg);
    CHECK(rep.trials == 10);
    CHECK(rep.repeats == 3);
    CHECK(rep.records.size() == 10);
    for (const auto& r : rep.records) CHECK(r.selection == MetaRuleSet{MetaRuleId::Chain});
    CHECK(rep.success_rate + rep.timeout_rate + rep.other_error_rate == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(rep.success_rate == 1.0);
    CHECK(rep.mean_reward == 32.0);
    CHECK(rep.mean_selected == 1.0);
  }
  SUBCASE("all uses the pool") {
    const auto rep = evaluate_strategy(Strategy::All, task, pool, cfg);
    for (const auto& r : rep.records) CHECK(r.selection == MetaRuleSet::all());
    CHECK(rep.mean_selected == 6.0);
  }
  SUBCASE("policy needs parameters") {
    CHECK_THROWS_AS(evaluate_strategy(Strategy::Policy, task, pool, cfg), ConfigError);
  }
  SUBCASE("bad config") {
    auto bad = cfg;
    bad.trials = 0;
    CHECK_THROWS_AS(evaluate_strategy(Strategy::All, task, pool, bad), ConfigError);
    CHECK_THROWS_AS(evaluate_strategy(Strategy::All, task, pool, cfg, nullptr, 1.5), ConfigError);
  }
  SUBCASE("repeats split round-robin, rates are means over repeats") {
    const auto rep = evaluate_strategy(Strategy::RandomTwo, task, pool, cfg);
    std::array<double, 3> succ{}, n{};
    for (const auto& r : rep.records) {
      CHECK(r.repeat == r.trial % 3);
      n[r.repeat] += 1;
      succ[r.repeat] += r.status == MilStatus::Success;
    }
    const double mean = (succ[0] / n[0] + succ[1] / n[1] + succ[2] / n[2]) / 3.0;
    CHECK(rep.success_rate == doctest::Approx(mean).epsilon(1e-12));
  }
}

TEST_CASE("random two draws distinct pairs uniformly") {
  const auto& task = corpus::find_task("mario_just_up");
  const auto pool = eval_pool(task, 3);
  auto cfg = quick_config(450);
  cfg.mil.max_steps = 2000;
  const auto rep = evaluate_strategy(Strategy::RandomTwo, task, pool, cfg);
  std::map<int, int> counts;
  for (const auto& r : rep.records) {
    CHECK(r.selection.size() == 2);
    counts[r.selection.bits()]++;
  }
  REQUIRE(counts.size() == 15);
  // 30 expected per pair; 3 sigma of Binomial(450, 1/15) is about 16.
  for (const auto& [bits, c] : counts) {
    CHECK(c >= 14);
    CHECK(c <= 46);
  }
}

TEST_CASE("evaluation is deterministic and independent of worker count") {
  const auto& task = corpus::find_task("mario_right_one_step");
  const auto pool = eval_pool(task, 3);
  const auto params = random_policy(task.domain, 4);
  auto cfg = quick_config(12);
  const auto a = evaluate_strategy(Strategy::Policy, task, pool, cfg, &params);
  cfg.workers = 3;
  const auto b = evaluate_strategy(Strategy::Policy, task, pool, cfg, &params);
  REQUIRE(a.records.size() == b.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    CHECK(a.records[i].selection == b.records[i].selection);
    CHECK(a.records[i].status == b.records[i].status);
    CHECK(a.records[i].steps == b.records[i].steps);
  }
  CHECK(reports_csv({a}) == reports_csv({b}));
  // Instances do not depend on the strategy.
  CHECK(trial_instance(task, pool, cfg.seed, 5) == trial_instance(task, pool, cfg.seed, 5));
  CHECK_FALSE(trial_instance(task, pool, cfg.seed, 5) == trial_instance(task, pool, cfg.seed, 6));
}

TEST_CASE("policy at p_min mostly selects nothing") {
  const auto& task = corpus::find_task("mario_just_up");
  const auto pool = eval_pool(task, 3);
  auto params = random_policy(task.domain, 1);
  params.head_bias(0, 0) = -50.0;
  const auto rep = evaluate_strategy(Strategy::Policy, task, pool, quick_config(60), &params);
  std::size_t empty = 0;
  for (const auto& r : rep.records) {
    if (r.selection.empty()) {
      ++empty;
      CHECK(r.status == MilStatus::NoRule);
      CHECK(r.steps == 0);
      CHECK(r.reward == 0.0);
    }
  }
  // P(empty) = 0.98^6 = 0.886.
  CHECK(empty >= 45);
}

TEST_CASE("brute-force oracle") {
  const logic::MilLimits limits{4, 2, 0.0, 100000, 0};

  SUBCASE("just-up: Chain alone is best") {
    const auto& task = corpus::find_task("mario_just_up");
    const auto inst = trial_instance(task, eval_pool(task, 2), 2, 0);
    const auto r = brute_force_oracle(inst, limits);
    CHECK(r.outcomes[0] == MilStatus::NoRule);
    CHECK(r.best_subset == MetaRuleSet{MetaRuleId::Chain});
    CHECK(r.best_reward == 32.0);
    // best_reward is the maximum of 2^(6 - |s|) over succeeding subsets.
    double best = 0.0;
    for (std::size_t bits = 1; bits < kSubsetCount; ++bits) {
      const MetaRuleSet s(static_cast<std::uint8_t>(bits));
      if (r.succeeds(s)) best = std::max(best, std::ldexp(1.0, 6 - s.size()));
    }
    CHECK(r.best_reward == best);
    CHECK(monotonicity_violations(inst, r, {4, 2, 0.0, 2000000, 0}).empty());
  }
  SUBCASE("right-priority: handmade set succeeds") {
    const auto& task = corpus::find_task("mario_right_priority");
    const auto inst = trial_instance(task, eval_pool(task, 2), 2, 0);
    const auto r = brute_force_oracle(inst, limits, 2);
    CHECK(r.succeeds({MetaRuleId::Identity, MetaRuleId::Recursion}));
  }
  SUBCASE("reverse cumulative sum: Inverse and Recursion succeed") {
    const auto& task = corpus::find_task("mnist_reverse_cumulative_sum");
    const auto inst = trial_instance(task, eval_pool(task, 2), 2, 0);
    const auto r = brute_force_oracle(inst, limits);
    CHECK(r.succeeds({MetaRuleId::Inverse, MetaRuleId::Recursion}));
  }
  SUBCASE("json line") {
    const auto& task = corpus::find_task("mario_just_up");
    const auto inst = trial_instance(task, eval_pool(task, 2), 2, 1);
    const auto line = oracle_to_json_line(brute_force_oracle(inst, limits));
    CHECK(line.find("\"best_subset\":\"{Chain}\"") != std::string::npos);
    CHECK(line.find("\"{}\":\"no_rule\"") != std::string::npos);
    CHECK(line.find('\n') == std::string::npos);
  }
}

TEST_CASE("oracle summary and uniform-policy reward") {
  OracleResult a, b;
  a.outcomes.fill(MilStatus::NoRule);
  b.outcomes.fill(MilStatus::NoRule);
  const MetaRuleSet chain{MetaRuleId::Chain};
  const MetaRuleSet chain_id{MetaRuleId::Chain, MetaRuleId::Identity};
  const MetaRuleSet post{MetaRuleId::Postcon};
  a.outcomes[chain.bits()] = MilStatus::Success;
  a.outcomes[chain_id.bits()] = MilStatus::Success;
  b.outcomes[chain_id.bits()] = MilStatus::Success;
  b.outcomes[post.bits()] = MilStatus::Success;
  const auto sum = summarize_oracle({a, b});
  REQUIRE(sum.size() == 3);
  CHECK(sum[0].subset.size() == 1);
  CHECK(sum[2].subset == chain_id);
  CHECK(sum[2].successes == 2);
  CHECK(sum[2].minimal);
  for (const auto& s : sum) {
    if (s.subset != chain_id) CHECK_FALSE(s.minimal);
  }

  // Every non-empty subset succeeding: sum_n C(6,n) 2^(6-n) / 64 = (3^6 - 2^6) / 64.
  OracleResult full;
  full.outcomes.fill(MilStatus::Success);
  full.outcomes[0] = MilStatus::NoRule;
  CHECK(uniform_policy_reward(full) == doctest::Approx((729.0 - 64.0) / 64.0).epsilon(1e-15));
  CHECK(uniform_policy_reward(a) == doctest::Approx((32.0 + 16.0) / 64.0).epsilon(1e-15));
}

TEST_CASE("policy successes are confirmed by the oracle") {
  const auto& task = corpus::find_task("mario_just_up");
  const auto pool = eval_pool(task, 3);
  const auto params = random_policy(task.domain, 9);
  const auto cfg = quick_config(8);
  const auto rep = evaluate_strategy(Strategy::Policy, task, pool, cfg, &params);
  std::size_t checked = 0;
  for (const auto& r : rep.records) {
    if (r.status != MilStatus::Success) continue;
    const auto o = brute_force_oracle(trial_instance(task, pool, cfg.seed, r.trial), cfg.mil);
    CHECK(o.succeeds(r.selection));
    CHECK(o.best_reward >= r.reward);
    ++checked;
  }
  CHECK(checked > 0);
}

TEST_CASE("manifest check") {
  const auto unseen = corpus::resolve_tasks("mario_down_priority,mario_just_right");
  policy::Checkpoint ck;
  CHECK_THROWS_AS(check_manifest(ck, unseen), ManifestViolation);
  ck.meta["tasks"] = "mario_right_priority,mario_just_up";
  CHECK_NOTHROW(check_manifest(ck, unseen));
  ck.meta["tasks"] = "mario_right_priority,mario_just_right";
  CHECK_THROWS_AS(check_manifest(ck, unseen), ManifestViolation);
  CHECK_THROWS_AS(generalization_eval(ck, unseen, quick_config(3)), ManifestViolation);
}

TEST_CASE("generalization_eval echoes trials") {
  const auto unseen = corpus::resolve_tasks("mario_just_right");
  policy::Checkpoint ck;
  ck.params = random_policy(corpus::DomainKind::Mario, 2);
  ck.meta["tasks"] = "mario_just_up";
  const auto reps = generalization_eval(ck, unseen, quick_config(7));
  REQUIRE(reps.size() == 1);
  CHECK(reps[0].trials == 7);
  CHECK(reps[0].strategy == Strategy::Policy);
  CHECK(reps[0].task_id == "mario_just_right");
}

TEST_CASE("robustness sweep") {
  const auto& task = corpus::find_task("mario_right_one_step");
  const auto pool = eval_pool(task, 3);
  const auto params = random_policy(task.domain, 4);
  const auto cfg = quick_config(9);
  const auto sweep = robustness_sweep(params, task, pool, {0.0, 0.5}, cfg);
  REQUIRE(sweep.size() == 2);
  const auto plain = evaluate_strategy(Strategy::Policy, task, pool, cfg, &params);
  CHECK(reports_csv({sweep[0]}) == reports_csv({plain}));
  CHECK(sweep[1].corruption_rate == 0.5);
  CHECK_THROWS_AS(robustness_sweep(params, task, pool, {-0.1}, cfg), ConfigError);
  CHECK_THROWS_AS(robustness_sweep(params, task, pool, {1.1}, cfg), ConfigError);
}

TEST_CASE("reports") {
  const auto& task = corpus::find_task("mario_just_up");
  const auto pool = eval_pool(task, 3);
  auto cfg = quick_config(7);
  cfg.mil.max_steps = 3000;
  std::vector<StrategyReport> reps;
  for (auto s : {Strategy::Handmade, Strategy::RandomTwo, Strategy::All}) {
    reps.push_back(evaluate_strategy(s, task, pool, cfg));
  }

  SUBCASE("csv rows partition the trials") {
    std::istringstream in(reports_csv(reps));
    std::string line;
    std::getline(in, line);
    const auto header = split_csv_line(line);
    REQUIRE(header.size() == 15);
    std::size_t rows = 0;
    while (std::getline(in, line)) {
      const auto f = split_csv_line(line);
      REQUIRE(f.size() == 15);
      CHECK(std::stod(f[5]) + std::stod(f[7]) + std::stod(f[9]) == doctest::Approx(1.0).epsilon(1e-9));
      ++rows;
    }
    CHECK(rows == 3);
    const auto trials = trials_csv(reps);
    CHECK(std::count(trials.begin(), trials.end(), '\n') == 1 + 3 * 7);
  }

  SUBCASE("heatmap") {
    train::IterationLog l1, l2;
    l1.iteration = 1;
    l2.iteration = 2;
    train::TaskLog t;
    t.task = "mario_just_up";
    t.mean_probs = {0.5, 0.5, 0.5, 0.5, 0.6, 0.5};
    l1.tasks.push_back(t);
    t.mean_probs = {0.4, 0.3, 0.5, 0.2, 0.9, 0.1};
    l2.tasks.push_back(t);
    const auto traces = traces_from_history({l1, l2});
    REQUIRE(traces.size() == 1);
    CHECK(traces[0].iterations == std::vector<std::size_t>{1, 2});
    const auto svg = heatmap_svg(traces[0]);
    std::size_t rows = 0;
    for (auto p = svg.find("<g class=\"row\">"); p != std::string::npos; p = svg.find("<g class=\"row\">", p + 1)) ++rows;
    CHECK(rows == 6);
    CHECK(svg.find("min 0.1000") != std::string::npos);
    CHECK(svg.find("max 0.9000") != std::string::npos);
    CHECK(svg.find("<script") == std::string::npos);
    const auto csv = heatmap_csv(traces);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 2 * 6);

    const auto dir = std::filesystem::temp_directory_path() / "metasel_test_reports";
    std::filesystem::remove_all(dir);
    emit_reports(dir / "a", reps, traces);
    emit_reports(dir / "b", reps, traces);
    for (const char* f : {"reports.csv", "trials.csv", "heatmap.csv", "heatmap_mario_just_up.svg"}) {
      REQUIRE(std::filesystem::exists(dir / "a" / f));
      CHECK(slurp(dir / "a" / f) == slurp(dir / "b" / f));
    }
    std::filesystem::remove_all(dir);
  }

  SUBCASE("unwritable directory") {
    const auto file = std::filesystem::temp_directory_path() / "metasel_test_blocker";
    { std::ofstream(file) << "x"; }
    CHECK_THROWS_AS(emit_reports(file / "sub", reps), IoFailure);
    std::filesystem::remove(file);
  }
}
