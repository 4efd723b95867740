#include "metasel/eval/harness.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"
#include "metasel/corpus/encoding.hpp"
#include "metasel/util/parallel.hpp"

namespace metasel::eval {
namespace {

struct Moments {
  double mean = 0.0;
  double sd = 0.0;
};

Moments moments(const std::vector<double>& xs) {
  Moments m;
  if (xs.empty()) return m;
  for (double x : xs) m.mean += x;
  m.mean /= static_cast<double>(xs.size());
  double var = 0.0;
  for (double x : xs) var += (x - m.mean) * (x - m.mean);
  m.sd = std::sqrt(var / static_cast<double>(xs.size()));
  return m;
}

MetaRuleSet random_two(Rng& rng) {
  const auto a = uniform_index(rng, kPoolSize);
  auto b = uniform_index(rng, kPoolSize - 1);
  if (b >= a) ++b;
  return MetaRuleSet(static_cast<std::uint8_t>((1U << a) | (1U << b)));
}

std::string num(double x) { return format_number(x); }

}  // namespace

std::string_view to_string(Strategy s) {
  switch (s) {
    case Strategy::Policy: return "policy";
    case Strategy::Handmade: return "handmade";
    case Strategy::RandomTwo: return "random2";
    case Strategy::All: return "all";
  }
  return "?";
}

Strategy parse_strategy(std::string_view name) {
  std::string s(name);
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (s == "policy") return Strategy::Policy;
  if (s == "handmade") return Strategy::Handmade;
  if (s == "random2" || s == "randomtwo") return Strategy::RandomTwo;
  if (s == "all") return Strategy::All;
  throw UnknownStrategy("unknown strategy '" + std::string(name) + "'");
}

void EvalConfig::validate() const {
  if (trials == 0) throw ConfigError("trials must be at least 1");
  if (repeats == 0) throw ConfigError("repeats must be at least 1");
  if (mil.max_clauses == 0) throw ConfigError("max_clauses must be at least 1");
}

corpus::CaseSet eval_pool(const corpus::TaskSpec& task, std::uint64_t seed, std::size_t n_pos, std::size_t n_neg) {
  if (task.domain == logic::DomainKind::Mario) n_pos = std::min(n_pos, corpus::positive_space_size(task));
  return corpus::gen_cases(task, n_pos, n_neg, derive_seed(seed, stream_id("eval-pool"), stream_id(task.id)));
}

corpus::Instance trial_instance(const corpus::TaskSpec& task, const corpus::CaseSet& pool, std::uint64_t seed,
                                std::size_t trial) {
  const auto app = corpus::application_size(task.domain);
  return corpus::sample_instance(task, pool, app.pos, app.neg,
                                 derive_seed(seed, stream_id("eval-instance"), stream_id(task.id), trial));
}

StrategyReport evaluate_strategy(Strategy strategy, const corpus::TaskSpec& task, const corpus::CaseSet& pool,
                                 const EvalConfig& cfg, const policy::PolicyParams<double>* params,
                                 double corruption) {
  cfg.validate();
  if (strategy == Strategy::Policy && params == nullptr) throw ConfigError("policy strategy needs a checkpoint");
  if (corruption < 0.0 || corruption > 1.0) throw ConfigError("corruption rate must lie in [0, 1]");
  const auto enc_cfg = corpus::encoding_config(task.domain);

  StrategyReport rep;
  rep.strategy = strategy;
  rep.task_id = task.id;
  rep.corruption_rate = corruption;
  rep.trials = cfg.trials;
  rep.repeats = std::min(cfg.repeats, cfg.trials);
  rep.records.resize(cfg.trials);

  parallel_for(cfg.trials, cfg.workers, [&](std::size_t t) {
    TrialRecord& r = rep.records[t];
    r.trial = t;
    r.repeat = t % rep.repeats;
    const auto inst = trial_instance(task, pool, cfg.seed, t);
    Rng rng = make_rng(cfg.seed, stream_id("eval-select"), stream_id(task.id), t);
    switch (strategy) {
      case Strategy::Policy: {
        const auto seen = corruption > 0.0
                              ? corpus::corrupt_instance(inst, task, corruption,
                                                         derive_seed(cfg.seed, stream_id("eval-noise"), t))
                              : inst;
        const auto probs = policy::forward(corpus::encode_instance(seen, enc_cfg), *params);
        r.selection = policy::sample_selection(probs, rng).selected();
        break;
      }
      case Strategy::Handmade: r.selection = task.handmade; break;
      case Strategy::RandomTwo: r.selection = random_two(rng); break;
      case Strategy::All: r.selection = MetaRuleSet::all(); break;
    }
    if (!r.selection.empty()) {
      const auto out = logic::mil_induce(inst.positives, inst.negatives, r.selection, task.domain_ref(), cfg.mil);
      r.status = out.status;
      r.steps = out.resolution_steps;
      r.elapsed_s = out.elapsed_s;
    }
    r.reward = train::compute_reward(r.status, r.selection.size());
  });

  std::vector<double> succ(rep.repeats), tout(rep.repeats), other(rep.repeats), sel(rep.repeats),
      reward(rep.repeats), count(rep.repeats);
  double elapsed = 0.0;
  for (const auto& r : rep.records) {
    count[r.repeat] += 1;
    succ[r.repeat] += r.status == MilStatus::Success;
    tout[r.repeat] += r.status == MilStatus::Timeout;
    other[r.repeat] += r.status == MilStatus::NoRule;
    sel[r.repeat] += r.selection.size();
    reward[r.repeat] += r.reward;
    elapsed += r.elapsed_s;
  }
  for (std::size_t k = 0; k < rep.repeats; ++k) {
    for (auto* v : {&succ, &tout, &other, &sel, &reward}) (*v)[k] /= count[k];
  }
  const auto set = [](const std::vector<double>& xs, double& mean, double& sd) {
    const auto m = moments(xs);
    mean = m.mean;
    sd = m.sd;
  };
  set(succ, rep.success_rate, rep.success_std);
  set(tout, rep.timeout_rate, rep.timeout_std);
  set(other, rep.other_error_rate, rep.other_error_std);
  set(sel, rep.mean_selected, rep.mean_selected_std);
  set(reward, rep.mean_reward, rep.mean_reward_std);
  rep.mean_elapsed_s = elapsed / static_cast<double>(cfg.trials);
  return rep;
}

// ---- oracle ---------------------------------------------------------------------

OracleResult brute_force_oracle(const corpus::Instance& inst, const logic::MilLimits& limits, unsigned workers,
                                std::size_t instance_index) {
  const auto& task = corpus::find_task(inst.task_id);
  OracleResult r;
  r.task_id = task.id;
  r.instance = instance_index;
  r.outcomes[0] = MilStatus::NoRule;
  parallel_for(kSubsetCount - 1, workers, [&](std::size_t i) {
    const MetaRuleSet s(static_cast<std::uint8_t>(i + 1));
    const auto out = logic::mil_induce(inst.positives, inst.negatives, s, task.domain_ref(), limits);
    r.outcomes[i + 1] = out.status;
    r.steps[i + 1] = out.resolution_steps;
  });
  for (std::size_t bits = 1; bits < kSubsetCount; ++bits) {
    const MetaRuleSet s(static_cast<std::uint8_t>(bits));
    const double reward = train::compute_reward(r.outcomes[bits], s.size());
    if (reward > r.best_reward) {
      r.best_reward = reward;
      r.best_subset = s;
    }
  }
  return r;
}

std::vector<MetaRuleSet> monotonicity_violations(const corpus::Instance& inst, const OracleResult& r,
                                                 const logic::MilLimits& relaxed, unsigned workers) {
  std::vector<MetaRuleSet> suspects;
  for (std::size_t bits = 1; bits < kSubsetCount; ++bits) {
    const MetaRuleSet s(static_cast<std::uint8_t>(bits));
    if (r.succeeds(s)) continue;
    for (std::size_t sub = 1; sub < kSubsetCount; ++sub) {
      const MetaRuleSet t(static_cast<std::uint8_t>(sub));
      if (t.is_subset_of(s) && r.succeeds(t)) {
        suspects.push_back(s);
        break;
      }
    }
  }
  const auto& task = corpus::find_task(inst.task_id);
  std::vector<std::uint8_t> failed(suspects.size());
  parallel_for(suspects.size(), workers, [&](std::size_t i) {
    const auto out = logic::mil_induce(inst.positives, inst.negatives, suspects[i], task.domain_ref(), relaxed);
    failed[i] = out.status != MilStatus::Success;
  });
  std::vector<MetaRuleSet> violations;
  for (std::size_t i = 0; i < suspects.size(); ++i) {
    if (failed[i]) violations.push_back(suspects[i]);
  }
  return violations;
}

std::vector<SubsetSummary> summarize_oracle(const std::vector<OracleResult>& results) {
  std::array<std::size_t, kSubsetCount> wins{};
  for (const auto& r : results) {
    for (std::size_t bits = 0; bits < kSubsetCount; ++bits) wins[bits] += r.outcomes[bits] == MilStatus::Success;
  }
  const std::size_t n = results.size();
  std::vector<SubsetSummary> out;
  for (std::size_t bits = 1; bits < kSubsetCount; ++bits) {
    if (wins[bits] == 0) continue;
    SubsetSummary s;
    s.subset = MetaRuleSet(static_cast<std::uint8_t>(bits));
    s.successes = wins[bits];
    s.instances = n;
    s.minimal = wins[bits] == n;
    for (std::size_t sub = 1; sub < kSubsetCount && s.minimal; ++sub) {
      const MetaRuleSet t(static_cast<std::uint8_t>(sub));
      if (sub != bits && t.is_subset_of(s.subset) && wins[sub] == n) s.minimal = false;
    }
    out.push_back(s);
  }
  std::stable_sort(out.begin(), out.end(), [](const SubsetSummary& a, const SubsetSummary& b) {
    return a.subset.size() < b.subset.size();
  });
  return out;
}

std::string oracle_to_json_line(const OracleResult& r) {
  nlohmann::ordered_json j;
  j["task_id"] = r.task_id;
  j["instance"] = r.instance;
  nlohmann::ordered_json outcomes = nlohmann::ordered_json::object();
  for (std::size_t bits = 0; bits < kSubsetCount; ++bits) {
    outcomes[MetaRuleSet(static_cast<std::uint8_t>(bits)).to_string()] = std::string(logic::to_string(r.outcomes[bits]));
  }
  j["outcomes"] = outcomes;
  j["best_subset"] = r.best_subset.to_string();
  j["best_reward"] = r.best_reward;
  return j.dump();
}

double uniform_policy_reward(const OracleResult& r) {
  double total = 0.0;
  for (std::size_t bits = 1; bits < kSubsetCount; ++bits) {
    total += train::compute_reward(r.outcomes[bits], MetaRuleSet(static_cast<std::uint8_t>(bits)).size());
  }
  return total / static_cast<double>(kSubsetCount);
}

// ---- protocols ------------------------------------------------------------------

void check_manifest(const policy::Checkpoint& ckpt, const std::vector<const corpus::TaskSpec*>& unseen) {
  const auto it = ckpt.meta.find("tasks");
  if (it == ckpt.meta.end()) throw ManifestViolation("checkpoint carries no training task list");
  const auto trained = split_list(it->second);
  for (const auto* t : unseen) {
    if (std::find(trained.begin(), trained.end(), t->id) != trained.end()) {
      throw ManifestViolation("checkpoint was trained on " + t->id);
    }
  }
}

std::vector<StrategyReport> generalization_eval(const policy::Checkpoint& ckpt,
                                                const std::vector<const corpus::TaskSpec*>& unseen,
                                                const EvalConfig& cfg) {
  check_manifest(ckpt, unseen);
  std::vector<StrategyReport> out;
  for (const auto* t : unseen) {
    out.push_back(evaluate_strategy(Strategy::Policy, *t, eval_pool(*t, cfg.seed), cfg, &ckpt.params));
  }
  return out;
}

std::vector<StrategyReport> robustness_sweep(const policy::PolicyParams<double>& params, const corpus::TaskSpec& task,
                                             const corpus::CaseSet& pool, const std::vector<double>& rates,
                                             const EvalConfig& cfg) {
  for (double r : rates) {
    if (!(r >= 0.0 && r <= 1.0)) throw ConfigError("corruption rate must lie in [0, 1]");
  }
  std::vector<StrategyReport> out;
  for (double r : rates) out.push_back(evaluate_strategy(Strategy::Policy, task, pool, cfg, &params, r));
  return out;
}

// ---- reports --------------------------------------------------------------------

std::string reports_csv(const std::vector<StrategyReport>& reports) {
  std::string s =
      "strategy,task,corruption,trials,repeats,success_rate,success_std,timeout_rate,timeout_std,"
      "other_error_rate,other_error_std,mean_selected,mean_selected_std,mean_reward,mean_reward_std\n";
  for (const auto& r : reports) {
    s += std::string(to_string(r.strategy)) + ',' + r.task_id + ',' + num(r.corruption_rate) + ',' +
         std::to_string(r.trials) + ',' + std::to_string(r.repeats) + ',' + num(r.success_rate) + ',' +
         num(r.success_std) + ',' + num(r.timeout_rate) + ',' + num(r.timeout_std) + ',' + num(r.other_error_rate) +
         ',' + num(r.other_error_std) + ',' + num(r.mean_selected) + ',' + num(r.mean_selected_std) + ',' +
         num(r.mean_reward) + ',' + num(r.mean_reward_std) + '\n';
  }
  return s;
}

std::string trials_csv(const std::vector<StrategyReport>& reports) {
  std::string s = "strategy,task,corruption,trial,repeat,selection,status,steps,reward\n";
  for (const auto& r : reports) {
    for (const auto& t : r.records) {
      std::vector<std::string> names;
      for (auto id : t.selection.ids()) names.emplace_back(logic::metarule_name(id));
      s += std::string(to_string(r.strategy)) + ',' + r.task_id + ',' + num(r.corruption_rate) + ',' +
           std::to_string(t.trial) + ',' + std::to_string(t.repeat) + ',' + join_list(names, '+') + ',' +
           std::string(logic::to_string(t.status)) + ',' + std::to_string(t.steps) + ',' + num(t.reward) + '\n';
    }
  }
  return s;
}

std::vector<ProbabilityTrace> traces_from_history(const std::vector<train::IterationLog>& history) {
  std::vector<ProbabilityTrace> traces;
  std::map<std::string, std::size_t> index;
  for (const auto& log : history) {
    for (const auto& t : log.tasks) {
      auto [it, fresh] = index.emplace(t.task, traces.size());
      if (fresh) traces.push_back(ProbabilityTrace{t.task, {}, {}});
      auto& tr = traces[it->second];
      tr.iterations.push_back(log.iteration);
      tr.probs.push_back(t.mean_probs);
    }
  }
  return traces;
}

std::vector<ProbabilityTrace> traces_from_history_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line.rfind("iteration,task,metarule,mean_prob", 0) != 0) {
    throw IoFailure("history table has an unexpected header");
  }
  std::vector<ProbabilityTrace> traces;
  std::map<std::string, std::size_t> index;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_list(line, ',');
    if (f.size() < 4) throw IoFailure("malformed history row: " + line);
    const auto rule = logic::metarule_from_name(f[2]);
    if (!rule) throw IoFailure("unknown meta-rule in history: " + f[2]);
    std::size_t iteration = 0;
    double prob = 0.0;
    try {
      iteration = std::stoull(f[0]);
      prob = std::stod(f[3]);
    } catch (const std::exception&) {
      throw IoFailure("malformed history row: " + line);
    }
    auto [it, fresh] = index.emplace(f[1], traces.size());
    if (fresh) traces.push_back(ProbabilityTrace{f[1], {}, {}});
    auto& tr = traces[it->second];
    if (tr.iterations.empty() || tr.iterations.back() != iteration) {
      tr.iterations.push_back(iteration);
      tr.probs.emplace_back();
    }
    tr.probs.back()[static_cast<std::size_t>(*rule)] = prob;
  }
  return traces;
}

std::string heatmap_csv(const std::vector<ProbabilityTrace>& traces) {
  std::string s = "task,iteration,metarule,prob\n";
  for (const auto& tr : traces) {
    for (std::size_t k = 0; k < tr.iterations.size(); ++k) {
      for (std::size_t m = 0; m < kPoolSize; ++m) {
        s += tr.task_id + ',' + std::to_string(tr.iterations[k]) + ',' +
             std::string(logic::metarule_name(static_cast<logic::MetaRuleId>(m))) + ',' + num(tr.probs[k][m]) + '\n';
      }
    }
  }
  return s;
}

std::string heatmap_svg(const ProbabilityTrace& trace) {
  constexpr int kLabel = 90, kTop = 30, kRow = 24, kLegend = 40;
  const std::size_t cols = trace.probs.size();
  const double cell = cols == 0 ? 8.0 : std::clamp(600.0 / static_cast<double>(cols), 1.0, 24.0);
  double lo = 1.0, hi = 0.0;
  for (const auto& row : trace.probs) {
    for (double p : row) {
      lo = std::min(lo, p);
      hi = std::max(hi, p);
    }
  }
  if (cols == 0) lo = hi = 0.0;
  const double span = hi > lo ? hi - lo : 1.0;
  const double width = kLabel + cell * static_cast<double>(cols) + 20;
  const double height = kTop + kRow * static_cast<double>(kPoolSize) + kLegend;
  char buf[256];
  std::ostringstream os;
  std::snprintf(buf, sizeof buf,
                "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%.0f\" height=\"%.0f\" "
                "font-family=\"sans-serif\" font-size=\"11\">\n",
                width, height);
  os << buf;
  os << "<text x=\"4\" y=\"16\">" << trace.task_id << ": selection probability by iteration</text>\n";
  for (std::size_t m = 0; m < kPoolSize; ++m) {
    const double y = kTop + kRow * static_cast<double>(m);
    std::snprintf(buf, sizeof buf, "<text x=\"4\" y=\"%.1f\">%s</text>\n", y + kRow * 0.65,
                  std::string(logic::metarule_name(static_cast<logic::MetaRuleId>(m))).c_str());
    os << buf;
    os << "<g class=\"row\">";
    for (std::size_t k = 0; k < cols; ++k) {
      const double v = (trace.probs[k][m] - lo) / span;
      const int r = static_cast<int>(std::lround(255 - 247 * v));
      const int g = static_cast<int>(std::lround(255 - 207 * v));
      const int b = static_cast<int>(std::lround(255 - 148 * v));
      std::snprintf(buf, sizeof buf,
                    "<rect x=\"%.2f\" y=\"%.1f\" width=\"%.2f\" height=\"%d\" fill=\"#%02x%02x%02x\"/>",
                    kLabel + cell * static_cast<double>(k), y, cell, kRow, r, g, b);
      os << buf;
    }
    os << "</g>\n";
  }
  const double ly = kTop + kRow * static_cast<double>(kPoolSize) + 8;
  os << "<defs><linearGradient id=\"scale\"><stop offset=\"0\" stop-color=\"#ffffff\"/>"
        "<stop offset=\"1\" stop-color=\"#08306b\"/></linearGradient></defs>\n";
  std::snprintf(buf, sizeof buf, "<rect x=\"%d\" y=\"%.1f\" width=\"120\" height=\"10\" fill=\"url(#scale)\"/>\n",
                kLabel, ly);
  os << buf;
  std::snprintf(buf, sizeof buf, "<text x=\"%d\" y=\"%.1f\">min %.4f</text>\n", kLabel, ly + 24, lo);
  os << buf;
  std::snprintf(buf, sizeof buf, "<text x=\"%d\" y=\"%.1f\">max %.4f</text>\n", kLabel + 130, ly + 24, hi);
  os << buf;
  if (cols > 0) {
    std::snprintf(buf, sizeof buf, "<text x=\"%d\" y=\"%.1f\">iterations %zu..%zu</text>\n", kLabel + 240, ly + 24,
                  trace.iterations.front(), trace.iterations.back());
    os << buf;
  }
  os << "</svg>\n";
  return os.str();
}

void write_text(const std::filesystem::path& file, const std::string& text) {
  std::error_code ec;
  if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path(), ec);
  auto tmp = file;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoFailure("cannot write " + file.string());
    out << text;
    if (!out.flush()) throw IoFailure("write failed: " + file.string());
  }
  std::filesystem::rename(tmp, file, ec);
  if (ec) throw IoFailure("cannot rename to " + file.string() + ": " + ec.message());
}

void emit_reports(const std::filesystem::path& dir, const std::vector<StrategyReport>& reports,
                  const std::vector<ProbabilityTrace>& traces) {
  write_text(dir / "reports.csv", reports_csv(reports));
  write_text(dir / "trials.csv", trials_csv(reports));
  if (traces.empty()) return;
  write_text(dir / "heatmap.csv", heatmap_csv(traces));
  for (const auto& tr : traces) write_text(dir / ("heatmap_" + tr.task_id + ".svg"), heatmap_svg(tr));
}

}  // namespace metasel::eval
