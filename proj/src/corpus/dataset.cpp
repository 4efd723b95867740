#include "metasel/corpus/dataset.hpp"

#include <fstream>

#include "json.hpp"
#include "metasel/logic/parse.hpp"
#include "metasel/util/error.hpp"

namespace metasel::corpus {

using nlohmann::json;

namespace {

json terms_to_json(const std::vector<Term>& terms) {
  json out = json::array();
  for (const auto& t : terms) out.push_back(t.to_string());
  return out;
}

std::vector<Term> terms_from_json(const json& j) {
  std::vector<Term> out;
  for (const auto& s : j) out.push_back(logic::parse_term(s.get<std::string>()));
  return out;
}

std::ifstream open_in(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw IoFailure("cannot read " + file.string());
  return in;
}

std::ofstream open_out(const std::filesystem::path& file) {
  if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw IoFailure("cannot write " + file.string());
  return out;
}

}  // namespace

std::string instance_to_json_line(const Instance& inst) {
  json j;
  j["task_id"] = inst.task_id;
  j["positives"] = terms_to_json(inst.positives);
  j["negatives"] = terms_to_json(inst.negatives);
  j["corruption_rate"] = inst.corruption_rate;
  return j.dump();
}

Instance instance_from_json_line(const std::string& line) {
  try {
    const json j = json::parse(line);
    Instance inst;
    inst.task_id = j.at("task_id").get<std::string>();
    inst.positives = terms_from_json(j.at("positives"));
    inst.negatives = terms_from_json(j.at("negatives"));
    inst.corruption_rate = j.at("corruption_rate").get<double>();
    return inst;
  } catch (const json::exception& e) {
    throw ParseError(std::string("bad instance line: ") + e.what());
  }
}

void write_instances(const std::filesystem::path& file, const std::vector<Instance>& instances) {
  auto out = open_out(file);
  for (const auto& inst : instances) out << instance_to_json_line(inst) << '\n';
  if (!out) throw IoFailure("write failed: " + file.string());
}

std::vector<Instance> read_instances(const std::filesystem::path& file) {
  auto in = open_in(file);
  std::vector<Instance> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) out.push_back(instance_from_json_line(line));
  }
  return out;
}

std::vector<Instance> chunk_pool(const TaskSpec& task, const CaseSet& pool) {
  const Caps caps = training_caps(task.domain);
  const std::size_t p = pool.positives.size();
  const std::size_t n = pool.negatives.size();
  const std::size_t lines = std::max<std::size_t>({1, (p + caps.pos - 1) / caps.pos, (n + caps.neg - 1) / caps.neg});
  std::vector<Instance> out(lines);
  for (std::size_t i = 0; i < lines; ++i) {
    out[i].task_id = task.id;
    for (std::size_t k = i * p / lines; k < (i + 1) * p / lines; ++k) out[i].positives.push_back(pool.positives[k]);
    for (std::size_t k = i * n / lines; k < (i + 1) * n / lines; ++k) out[i].negatives.push_back(pool.negatives[k]);
  }
  return out;
}

CaseSet merge_pool(const std::vector<Instance>& instances) {
  CaseSet out;
  for (const auto& inst : instances) {
    out.positives.insert(out.positives.end(), inst.positives.begin(), inst.positives.end());
    out.negatives.insert(out.negatives.end(), inst.negatives.begin(), inst.negatives.end());
  }
  out.near_miss_source.assign(out.negatives.size(), -1);
  return out;
}

void write_manifest(const std::filesystem::path& file, const DatasetManifest& m) {
  json j;
  j["registry_version"] = m.registry_version;
  j["seed"] = m.seed;
  j["tasks"] = json::array();
  for (const auto& e : m.tasks) {
    j["tasks"].push_back({{"task_id", e.task_id},
                          {"file", e.file},
                          {"positives", e.positives},
                          {"negatives", e.negatives},
                          {"instances", e.instances}});
  }
  auto out = open_out(file);
  out << j.dump(2) << '\n';
}

DatasetManifest read_manifest(const std::filesystem::path& file) {
  auto in = open_in(file);
  try {
    const json j = json::parse(in);
    DatasetManifest m;
    m.registry_version = j.at("registry_version").get<std::string>();
    m.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& e : j.at("tasks")) {
      m.tasks.push_back({e.at("task_id").get<std::string>(), e.at("file").get<std::string>(),
                         e.at("positives").get<std::size_t>(), e.at("negatives").get<std::size_t>(),
                         e.at("instances").get<std::size_t>()});
    }
    return m;
  } catch (const json::exception& e) {
    throw ParseError("bad manifest " + file.string() + ": " + e.what());
  }
}

CaseSet load_task_pool(const std::filesystem::path& dir, const TaskSpec& task) {
  const auto file = dir / (task.id + ".jsonl");
  if (!std::filesystem::exists(file)) throw IoFailure("missing dataset for " + task.id + ": " + file.string());
  return merge_pool(read_instances(file));
}

}  // namespace metasel::corpus
