#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "metasel/cli/commands.hpp"
#include "metasel/util/config.hpp"

using namespace metasel;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code = 0;
  std::string out, err;
};

Result invoke(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  Result r;
  r.code = cli::run(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

fs::path fresh_dir(const std::string& name) {
  const auto d = fs::temp_directory_path() / ("metasel_cli_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::vector<std::string> pretrain_args(const fs::path& out, int iterations) {
  return {"pretrain",      "--out",        out.string(), "--tasks",   "mario_just_up,mario_right_one_step",
          "--iterations",  std::to_string(iterations),   "--batch-size", "6",
          "--step-budget", "20000",        "--timeout",  "0",         "--seed",
          "5"};
}

}  // namespace

TEST_CASE("help and argument errors map to exit codes") {
  CHECK(invoke({"--help"}).code == cli::kExitOk);
  CHECK(invoke({"pretrain", "--help"}).code == cli::kExitOk);
  CHECK(invoke({}).code == cli::kExitConfig);
  CHECK(invoke({"train"}).code == cli::kExitConfig);
  CHECK(invoke({"eval", "--no-such-flag", "1"}).code == cli::kExitConfig);
}

TEST_CASE("config values are validated before any work") {
  const auto d = fresh_dir("config");
  CHECK(invoke({"gen-data", "--out", d.string(), "--tasks", "mario_nope"}).code == cli::kExitConfig);
  CHECK(invoke({"eval", "--out", d.string(), "--strategy", "greedy"}).code == cli::kExitConfig);
  CHECK(invoke({"eval", "--out", d.string(), "--strategy", "handmade", "--robustness", "0,1.5"}).code ==
        cli::kExitConfig);
  CHECK(invoke({"oracle", "--out", d.string(), "--instances", "0"}).code == cli::kExitConfig);
  CHECK(invoke({"gen-data", "--out", d.string(), "--tasks", "mario_just_up", "--n-pos", "379"}).code ==
        cli::kExitConfig);
  // A config file key the command does not know.
  std::ofstream(d / "bad.cfg") << "tasks = mario_just_up\nbogus = 1\n";
  CHECK(invoke({"oracle", "--config", (d / "bad.cfg").string(), "--out", d.string()}).code == cli::kExitConfig);
}

TEST_CASE("flags override the config file and the effective config is echoed") {
  const auto d = fresh_dir("echo");
  std::ofstream(d / "run.cfg") << "tasks = mario_just_up\ninstances = 5\nseed = 9\n";
  const auto r = invoke({"oracle", "--config", (d / "run.cfg").string(), "--out", d.string(), "--instances", "1",
                      "--step-budget", "20000"});
  REQUIRE(r.code == cli::kExitOk);
  const auto echo = KeyValueConfig::load(d / "oracle.config");
  CHECK(echo.get_int("instances", 0) == 1);
  CHECK(echo.get_int("seed", 0) == 9);
  CHECK(echo.get_string("tasks", "") == "mario_just_up");
  CHECK(echo.get_int("max_clauses", 0) == 4);
  CHECK(fs::exists(d / "reports" / "oracle.jsonl"));
  CHECK(slurp(d / "reports" / "oracle_summary.csv").rfind("task,subset,size,successes,instances,minimal\n", 0) ==
        0);
  CHECK(r.out.find("minimal sufficient subsets") != std::string::npos);
}

TEST_CASE("missing checkpoint is an IO error") {
  const auto d = fresh_dir("nockpt");
  CHECK(invoke({"eval", "--out", d.string(), "--strategy", "policy", "--tasks", "mario_just_up"}).code ==
        cli::kExitIo);
  CHECK(invoke({"pretrain", "--out", d.string(), "--tasks", "mario_just_up", "--iterations", "1"}).code ==
        cli::kExitIo);
}

TEST_CASE("gen-data, pretrain, resume and eval end to end") {
  const auto a = fresh_dir("e2e_a");
  const auto b = fresh_dir("e2e_b");
  for (const auto& d : {a, b}) {
    REQUIRE(invoke({"gen-data", "--out", d.string(), "--tasks", "mario_just_up,mario_right_one_step", "--seed", "5"})
                .code == cli::kExitOk);
  }
  CHECK(slurp(a / "datasets" / "manifest.json") == slurp(b / "datasets" / "manifest.json"));
  CHECK(slurp(a / "datasets" / "mario_just_up.jsonl") == slurp(b / "datasets" / "mario_just_up.jsonl"));

  // Four iterations straight against two plus a resumed two.
  REQUIRE(invoke(pretrain_args(a, 4)).code == cli::kExitOk);
  REQUIRE(invoke(pretrain_args(b, 2)).code == cli::kExitOk);
  auto resume = pretrain_args(b, 4);
  resume.push_back("--resume");
  const auto r = invoke(resume);
  REQUIRE(r.code == cli::kExitOk);
  CHECK(r.out.find("resuming after iteration 2") != std::string::npos);
  CHECK(slurp(a / "reports" / "history.csv") == slurp(b / "reports" / "history.csv"));
  CHECK(slurp(a / "reports" / "progress.csv") == slurp(b / "reports" / "progress.csv"));
  CHECK(slurp(a / "checkpoints" / "latest.ckpt") == slurp(b / "checkpoints" / "latest.ckpt"));
  CHECK(fs::exists(a / "reports" / "heatmap_mario_just_up.svg"));

  // Resuming with a changed learning rate is refused.
  auto changed = pretrain_args(b, 6);
  changed.insert(changed.end(), {"--resume", "--lr", "0.01"});
  CHECK(invoke(changed).code == cli::kExitConfig);

  const auto e = invoke({"eval", "--out", a.string(), "--strategy", "policy,handmade", "--tasks", "mario_just_up",
                      "--trials", "6", "--repeats", "2", "--timeout", "0", "--step-budget", "20000", "--robustness",
                      "0,0.5"});
  REQUIRE(e.code == cli::kExitOk);
  const auto reports = slurp(a / "reports" / "eval" / "reports.csv");
  CHECK(reports.find("handmade,mario_just_up") != std::string::npos);
  CHECK(reports.find("policy,mario_just_up") != std::string::npos);
  CHECK(fs::exists(a / "reports" / "robustness" / "trials.csv"));

  // The manifest forbids treating a training task as unseen.
  CHECK(invoke({"eval", "--out", a.string(), "--strategy", "policy", "--tasks", "mario_just_up", "--trials", "3",
             "--generalization", "--step-budget", "20000", "--timeout", "0"})
            .code == cli::kExitInvariant);
  CHECK(invoke({"eval", "--out", a.string(), "--strategy", "policy", "--tasks", "mario_just_right", "--trials", "3",
             "--generalization", "--step-budget", "20000", "--timeout", "0"})
            .code == cli::kExitOk);
  // A Mario checkpoint cannot drive an MNIST task.
  CHECK(invoke({"eval", "--out", a.string(), "--strategy", "policy", "--tasks", "mnist_cumulative_sum", "--trials", "3"})
            .code == cli::kExitConfig);
}
