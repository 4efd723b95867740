#include "metasel/cli/commands.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "metasel/corpus/dataset.hpp"
#include "metasel/eval/harness.hpp"
#include "metasel/train/ppo.hpp"
#include "metasel/util/error.hpp"
#include "metasel/util/parallel.hpp"

namespace metasel::cli {
namespace {

namespace fs = std::filesystem;
using Defaults = std::vector<std::pair<std::string, std::string>>;

const Defaults kCommon = {{"out", "metasel_out"}, {"seed", "0"}, {"workers", "1"}};

Defaults gen_data_defaults() {
  Defaults d = kCommon;
  d.insert(d.end(), {{"tasks", "all"}, {"n_pos", "auto"}, {"n_neg", "auto"}, {"data", ""}});
  return d;
}

Defaults pretrain_defaults() {
  Defaults d = kCommon;
  train::TrainConfig t;
  t.tasks = {"mario_train"};
  const auto kv = t.to_config();
  for (const auto& [k, v] : kv.values()) {
    if (k != "seed" && k != "workers") d.emplace_back(k, v);
  }
  d.insert(d.end(), {{"exclude_tasks", ""}, {"data", ""}, {"resume", "false"}});
  return d;
}

Defaults eval_defaults() {
  Defaults d = kCommon;
  d.insert(d.end(), {{"strategy", "policy,handmade,random2,all"},
                     {"tasks", "mario_right_priority"},
                     {"trials", "100"},
                     {"repeats", "3"},
                     {"timeout", "30"},
                     {"step_budget", "0"},
                     {"max_clauses", "4"},
                     {"max_invented", "2"},
                     {"checkpoint", ""},
                     {"robustness", ""},
                     {"generalization", "false"},
                     {"data", ""}});
  return d;
}

Defaults oracle_defaults() {
  Defaults d = kCommon;
  d.insert(d.end(), {{"tasks", "mario_just_up,mnist_reverse_cumulative_sum"},
                     {"instances", "10"},
                     {"timeout", "0"},
                     {"step_budget", "300000"},
                     {"max_clauses", "4"},
                     {"max_invented", "2"},
                     {"data", ""}});
  return d;
}

// Defaults overlaid with `kv`; keys the command does not know are refused.
KeyValueConfig effective(const KeyValueConfig& kv, const Defaults& defaults, const std::string& command) {
  KeyValueConfig out;
  for (const auto& [k, v] : defaults) out.set(k, v);
  for (const auto& [k, v] : kv.values()) {
    const bool known = std::any_of(defaults.begin(), defaults.end(), [&](const auto& d) { return d.first == k; });
    if (!known) throw ConfigError("unknown key '" + k + "' for " + command);
    out.set(k, v);
  }
  return out;
}

std::size_t get_count(const KeyValueConfig& kv, const std::string& key) {
  const long long v = kv.get_int(key, 0);
  if (v < 0) throw ConfigError(key + " must be non-negative");
  return static_cast<std::size_t>(v);
}

unsigned get_workers(const KeyValueConfig& kv) {
  const auto w = get_count(kv, "workers");
  if (w == 0) throw ConfigError("workers must be at least 1");
  return static_cast<unsigned>(w);
}

logic::MilLimits mil_limits(const KeyValueConfig& kv) {
  logic::MilLimits m;
  m.max_clauses = get_count(kv, "max_clauses");
  m.max_invented = static_cast<int>(get_count(kv, "max_invented"));
  m.timeout_s = kv.get_double("timeout", 0.0);
  m.max_steps = get_count(kv, "step_budget");
  if (m.max_clauses == 0) throw ConfigError("max_clauses must be at least 1");
  if (m.timeout_s < 0) throw ConfigError("timeout must be non-negative");
  return m;
}

void echo_config(const KeyValueConfig& kv, const std::string& command) {
  eval::write_text(fs::path(kv.get_string("out", ".")) / (command + ".config"), kv.dump());
}

std::string read_text(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw IoFailure("cannot read " + file.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void append_text(const fs::path& file, const std::string& text) {
  std::ofstream out(file, std::ios::binary | std::ios::app);
  if (!out || !(out << text) || !out.flush()) throw IoFailure("cannot append to " + file.string());
}

// Keeps the header and the rows of iterations <= `last`.
std::string truncate_history(const std::string& text, std::size_t last) {
  std::istringstream in(text);
  std::string line, out;
  bool header = true;
  while (std::getline(in, line)) {
    if (header) {
      out += line + '\n';
      header = false;
      continue;
    }
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw IoFailure("malformed history row: " + line);
    std::size_t it = 0;
    try {
      it = std::stoull(line.substr(0, comma));
    } catch (const std::exception&) {
      throw IoFailure("malformed history row: " + line);
    }
    if (it <= last) out += line + '\n';
  }
  return out;
}

std::vector<const corpus::TaskSpec*> pool_source_tasks(const KeyValueConfig& kv) {
  auto tasks = corpus::resolve_tasks(kv.get_string("tasks", ""));
  if (tasks.empty()) throw ConfigError("no tasks selected");
  return tasks;
}

corpus::CaseSet task_pool(const KeyValueConfig& kv, const corpus::TaskSpec& task) {
  const auto data = kv.get_string("data", "");
  if (!data.empty()) return corpus::load_task_pool(data, task);
  return eval::eval_pool(task, static_cast<std::uint64_t>(kv.get_int("seed", 0)));
}

std::string fmt(const char* format, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, format, x);
  return buf;
}

struct SubcommandFlags {
  CLI::App* app = nullptr;
  std::string config;
  std::vector<std::pair<std::string, CLI::Option*>> options;  // key, option
  std::map<std::string, std::string> values;
  std::map<std::string, bool> flags;
};

}  // namespace

fs::path datasets_dir(const KeyValueConfig& kv) {
  const auto data = kv.get_string("data", "");
  return data.empty() ? fs::path(kv.get_string("out", ".")) / "datasets" : fs::path(data);
}
fs::path checkpoints_dir(const KeyValueConfig& kv) { return fs::path(kv.get_string("out", ".")) / "checkpoints"; }
fs::path reports_dir(const KeyValueConfig& kv) { return fs::path(kv.get_string("out", ".")) / "reports"; }

int exit_code_for_current_exception() {
  try {
    throw;
  } catch (const ConfigError&) {
    return kExitConfig;
  } catch (const UnknownStrategy&) {
    return kExitConfig;
  } catch (const CapExceeded&) {
    return kExitConfig;
  } catch (const ExhaustedSpace&) {
    return kExitConfig;
  } catch (const ManifestViolation&) {
    return kExitInvariant;
  } catch (const NonFiniteLoss&) {
    return kExitInvariant;
  } catch (const IoFailure&) {
    return kExitIo;
  } catch (const ShapeMismatch&) {
    return kExitIo;
  } catch (const fs::filesystem_error&) {
    return kExitIo;
  } catch (...) {
    return kExitFailure;
  }
}

// ---- gen-data -------------------------------------------------------------------

int cmd_gen_data(const KeyValueConfig& given, std::ostream& log) {
  const auto kv = effective(given, gen_data_defaults(), "gen-data");
  const auto tasks = pool_source_tasks(kv);
  const auto seed = static_cast<std::uint64_t>(kv.get_int("seed", 0));
  const auto workers = get_workers(kv);
  const auto n_pos_text = kv.get_string("n_pos", "auto");
  const auto n_neg_text = kv.get_string("n_neg", "auto");
  if (n_pos_text != "auto" && kv.get_int("n_pos", 0) <= 0) throw ConfigError("n_pos must be 'auto' or positive");
  if (n_neg_text != "auto" && kv.get_int("n_neg", 0) <= 0) throw ConfigError("n_neg must be 'auto' or positive");
  echo_config(kv, "gen-data");
  const auto dir = datasets_dir(kv);
  fs::create_directories(dir);

  std::vector<corpus::DatasetEntry> entries(tasks.size());
  parallel_for(tasks.size(), workers, [&](std::size_t i) {
    const auto& t = *tasks[i];
    std::size_t n_pos = 3000;
    if (n_pos_text == "auto") {
      if (t.domain == logic::DomainKind::Mario) n_pos = std::min(n_pos, corpus::positive_space_size(t));
    } else {
      n_pos = get_count(kv, "n_pos");
    }
    // Mario near-miss negatives are bounded by the positive space.
    std::size_t n_neg = t.domain == logic::DomainKind::Mario ? std::min<std::size_t>(3000, 2 * n_pos) : 3000;
    if (n_neg_text != "auto") n_neg = get_count(kv, "n_neg");
    const auto pool = corpus::gen_cases(t, n_pos, n_neg, derive_seed(seed, stream_id("dataset"), stream_id(t.id)));
    const auto instances = corpus::chunk_pool(t, pool);
    corpus::write_instances(dir / (t.id + ".jsonl"), instances);
    entries[i] = {t.id, t.id + ".jsonl", pool.positives.size(), pool.negatives.size(), instances.size()};
  });
  corpus::DatasetManifest m{std::string(corpus::kRegistryVersion), seed, entries};
  corpus::write_manifest(dir / "manifest.json", m);
  for (const auto& e : entries) {
    log << e.task_id << ": " << e.positives << " positives, " << e.negatives << " negatives, " << e.instances
        << " instances\n";
  }
  log << "datasets written to " << dir.string() << '\n';
  return kExitOk;
}

// ---- pretrain -------------------------------------------------------------------

int cmd_pretrain(const KeyValueConfig& given, std::ostream& log) {
  const auto kv = effective(given, pretrain_defaults(), "pretrain");
  auto tasks = corpus::resolve_tasks(kv.get_string("tasks", ""));
  const auto excluded = corpus::resolve_tasks(kv.get_string("exclude_tasks", ""));
  std::erase_if(tasks, [&](const corpus::TaskSpec* t) {
    return std::find(excluded.begin(), excluded.end(), t) != excluded.end();
  });
  if (tasks.empty()) throw ConfigError("no training tasks left after exclusions");
  auto resolved = kv;
  std::vector<std::string> ids;
  for (const auto* t : tasks) ids.push_back(t->id);
  resolved.set("tasks", join_list(ids));
  const auto cfg = train::TrainConfig::from_config(resolved);
  echo_config(kv, "pretrain");

  const auto ckdir = checkpoints_dir(kv);
  const auto rdir = reports_dir(kv);
  fs::create_directories(ckdir);
  fs::create_directories(rdir);
  const train::TaskPools pools(cfg, datasets_dir(kv));

  train::PretrainState state;
  if (kv.get_bool("resume", false)) {
    const auto ck = policy::load_checkpoint(ckdir / "latest.ckpt");
    auto saved = train::config_from_checkpoint(ck);
    saved.iterations = cfg.iterations;
    saved.workers = cfg.workers;
    saved.checkpoint_every = cfg.checkpoint_every;
    if (saved.to_config().dump() != cfg.to_config().dump()) {
      throw ConfigError("resume: configuration differs from the checkpoint's; only iterations, workers and "
                        "checkpoint_every may change");
    }
    state = train::state_from_checkpoint(ck);
    const auto hist = rdir / "history.csv";
    const auto prog = rdir / "progress.csv";
    eval::write_text(hist, truncate_history(read_text(hist), state.iteration));
    eval::write_text(prog, truncate_history(read_text(prog), state.iteration));
    log << "resuming after iteration " << state.iteration << '\n';
  } else {
    state = train::initial_state(cfg, pools);
    eval::write_text(rdir / "history.csv", train::history_csv_header());
    eval::write_text(rdir / "progress.csv", train::progress_csv_header());
  }

  train::PretrainHooks hooks;
  hooks.on_iteration = [&](const train::IterationLog& l) {
    append_text(rdir / "history.csv", train::history_csv_rows(l));
    append_text(rdir / "progress.csv", train::progress_csv_row(l));
    log << "iteration " << l.iteration << ": mean_reward " << fmt("%.3f", l.mean_reward) << ", success "
        << l.success << ", timeout " << l.timeout << ", no_rule " << l.norule << '\n';
  };
  hooks.on_checkpoint = [&](const train::PretrainState& s) {
    const auto ck = train::to_checkpoint(s, cfg, pools.domain());
    char name[32];
    std::snprintf(name, sizeof name, "iter_%06zu.ckpt", s.iteration);
    policy::save_checkpoint(ckdir / name, ck);
    policy::save_checkpoint(ckdir / "latest.ckpt", ck);
  };
  train::pretrain(state, cfg, pools, hooks);
  if (state.history.empty() && !fs::exists(ckdir / "latest.ckpt")) hooks.on_checkpoint(state);

  const auto traces = eval::traces_from_history_csv(read_text(rdir / "history.csv"));
  eval::write_text(rdir / "heatmap.csv", eval::heatmap_csv(traces));
  for (const auto& tr : traces) eval::write_text(rdir / ("heatmap_" + tr.task_id + ".svg"), eval::heatmap_svg(tr));

  log << "final probabilities (" << join_list([] {
    std::vector<std::string> n;
    for (const auto& m : logic::metarule_pool()) n.push_back(m.name);
    return n;
  }()) << "):\n";
  for (std::size_t t = 0; t < pools.size(); ++t) {
    const auto p = train::probe_probs(state.params, pools, t);
    log << "  " << pools.task(t).id;
    for (double x : p) log << ' ' << fmt("%.3f", x);
    log << '\n';
  }
  log << "checkpoint: " << (ckdir / "latest.ckpt").string() << '\n';
  return kExitOk;
}

// ---- eval -----------------------------------------------------------------------

int cmd_eval(const KeyValueConfig& given, std::ostream& log) {
  const auto kv = effective(given, eval_defaults(), "eval");
  std::vector<eval::Strategy> strategies;
  for (const auto& s : split_list(kv.get_string("strategy", ""))) strategies.push_back(eval::parse_strategy(s));
  if (strategies.empty()) throw ConfigError("no strategy selected");
  const auto tasks = pool_source_tasks(kv);
  std::vector<double> rates;
  for (const auto& r : split_list(kv.get_string("robustness", ""))) {
    try {
      rates.push_back(std::stod(r));
    } catch (const std::exception&) {
      throw ConfigError("bad corruption rate '" + r + "'");
    }
    if (!(rates.back() >= 0.0 && rates.back() <= 1.0)) throw ConfigError("corruption rate " + r + " outside [0, 1]");
  }
  eval::EvalConfig ec;
  ec.trials = get_count(kv, "trials");
  ec.repeats = get_count(kv, "repeats");
  ec.mil = mil_limits(kv);
  ec.seed = static_cast<std::uint64_t>(kv.get_int("seed", 0));
  ec.workers = get_workers(kv);
  ec.validate();
  const bool generalization = kv.get_bool("generalization", false);
  echo_config(kv, "eval");

  const bool needs_policy = generalization || !rates.empty() ||
                            std::find(strategies.begin(), strategies.end(), eval::Strategy::Policy) != strategies.end();
  policy::Checkpoint ck;
  if (needs_policy) {
    const auto path = kv.get_string("checkpoint", "");
    ck = policy::load_checkpoint(path.empty() ? checkpoints_dir(kv) / "latest.ckpt" : fs::path(path));
    const auto dom = ck.meta.find("domain");
    for (const auto* t : tasks) {
      if (dom != ck.meta.end() && dom->second != logic::to_string(t->domain)) {
        throw ConfigError("checkpoint domain " + dom->second + " does not match task " + t->id);
      }
    }
    if (generalization) eval::check_manifest(ck, tasks);
  }

  std::vector<eval::StrategyReport> reports, sweep;
  for (const auto* t : tasks) {
    const auto pool = task_pool(kv, *t);
    for (auto s : strategies) {
      reports.push_back(eval::evaluate_strategy(s, *t, pool, ec, s == eval::Strategy::Policy ? &ck.params : nullptr));
    }
    if (!rates.empty()) {
      auto r = eval::robustness_sweep(ck.params, *t, pool, rates, ec);
      sweep.insert(sweep.end(), r.begin(), r.end());
    }
  }

  bool ok = true;
  const auto check = [&](const eval::StrategyReport& r) {
    const double sum = r.success_rate + r.timeout_rate + r.other_error_rate;
    if (std::abs(sum - 1.0) > 1e-9 || r.trials != ec.trials || r.records.size() != ec.trials) {
      ok = false;
      log << "invariant failed: " << to_string(r.strategy) << ' ' << r.task_id << " rates sum to " << sum << '\n';
    }
  };
  for (const auto& r : reports) check(r);
  for (const auto& r : sweep) check(r);

  eval::emit_reports(reports_dir(kv) / "eval", reports);
  if (!sweep.empty()) eval::emit_reports(reports_dir(kv) / "robustness", sweep);
  const auto print = [&](const eval::StrategyReport& r) {
    log << r.task_id << ' ' << to_string(r.strategy) << " corruption " << fmt("%.2f", r.corruption_rate)
        << ": success " << fmt("%.3f", r.success_rate) << "+-" << fmt("%.3f", r.success_std) << ", timeout "
        << fmt("%.3f", r.timeout_rate) << ", other " << fmt("%.3f", r.other_error_rate) << ", mean selected "
        << fmt("%.2f", r.mean_selected) << '\n';
  };
  for (const auto& r : reports) print(r);
  for (const auto& r : sweep) print(r);
  return ok ? kExitOk : kExitInvariant;
}

// ---- oracle ---------------------------------------------------------------------

int cmd_oracle(const KeyValueConfig& given, std::ostream& log) {
  const auto kv = effective(given, oracle_defaults(), "oracle");
  const auto tasks = pool_source_tasks(kv);
  const auto n = get_count(kv, "instances");
  if (n == 0) throw ConfigError("instances must be at least 1");
  const auto limits = mil_limits(kv);
  const auto seed = static_cast<std::uint64_t>(kv.get_int("seed", 0));
  const auto workers = get_workers(kv);
  echo_config(kv, "oracle");

  std::string jsonl;
  std::string summary = "task,subset,size,successes,instances,minimal\n";
  for (const auto* t : tasks) {
    const auto pool = task_pool(kv, *t);
    std::vector<eval::OracleResult> results;
    for (std::size_t i = 0; i < n; ++i) {
      results.push_back(eval::brute_force_oracle(eval::trial_instance(*t, pool, seed, i), limits, workers, i));
      jsonl += eval::oracle_to_json_line(results.back()) + '\n';
    }
    std::vector<std::string> minimal;
    for (const auto& s : eval::summarize_oracle(results)) {
      summary += t->id + ",\"" + s.subset.to_string() + "\"," + std::to_string(s.subset.size()) + ',' +
                 std::to_string(s.successes) + ',' + std::to_string(s.instances) + ',' +
                 (s.minimal ? "true" : "false") + '\n';
      if (s.minimal) minimal.push_back(s.subset.to_string());
    }
    log << t->id << " minimal sufficient subsets: " << (minimal.empty() ? "none" : join_list(minimal, ' ')) << '\n';
  }
  eval::write_text(reports_dir(kv) / "oracle.jsonl", jsonl);
  eval::write_text(reports_dir(kv) / "oracle_summary.csv", summary);
  return kExitOk;
}

// ---- command line ---------------------------------------------------------------

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Meta-rule selection for meta-interpretive learning"};
  app.name("metasel");
  app.require_subcommand(1);

  struct Spec {
    const char* name;
    const char* help;
    Defaults defaults;
    std::vector<std::string> bool_keys;
    int (*fn)(const KeyValueConfig&, std::ostream&);
  };
  const std::vector<Spec> specs = {
      {"gen-data", "Generate JSONL case datasets and a manifest", gen_data_defaults(), {}, &cmd_gen_data},
      {"pretrain", "Pre-train the selection policy with PPO", pretrain_defaults(), {"resume"}, &cmd_pretrain},
      {"eval", "Evaluate selection strategies", eval_defaults(), {"generalization"}, &cmd_eval},
      {"oracle", "Run every meta-rule subset on sample instances", oracle_defaults(), {}, &cmd_oracle},
  };

  std::vector<SubcommandFlags> subs(specs.size());
  for (std::size_t i = 0; i < specs.size(); ++i) {
    auto& s = subs[i];
    s.app = app.add_subcommand(specs[i].name, specs[i].help);
    s.app->add_option("--config", s.config, "key=value file; flags override its values");
    for (const auto& [key, def] : specs[i].defaults) {
      std::string flag = "--" + key;
      std::replace(flag.begin(), flag.end(), '_', '-');
      const bool is_bool = std::find(specs[i].bool_keys.begin(), specs[i].bool_keys.end(), key) !=
                           specs[i].bool_keys.end();
      CLI::Option* opt = is_bool ? s.app->add_flag(flag, s.flags[key], "default " + def)
                                 : s.app->add_option(flag, s.values[key], def.empty() ? "" : "default " + def);
      s.options.emplace_back(key, opt);
    }
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  for (std::size_t i = 0; i < specs.size(); ++i) {
    auto& s = subs[i];
    if (!s.app->parsed()) continue;
    try {
      KeyValueConfig kv = s.config.empty() ? KeyValueConfig{} : KeyValueConfig::load(s.config);
      for (const auto& [key, opt] : s.options) {
        if (opt->count() == 0) continue;
        kv.set(key, s.flags.count(key) ? std::string("true") : s.values[key]);
      }
      return specs[i].fn(kv, out);
    } catch (const std::exception& e) {
      const int code = exit_code_for_current_exception();
      err << "metasel " << specs[i].name << ": " << e.what() << '\n';
      return code;
    }
  }
  return kExitConfig;
}

}  // namespace metasel::cli
