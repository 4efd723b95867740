#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "metasel/corpus/cases.hpp"

namespace metasel::corpus {

// One JSON object per line: task_id, positives, negatives, corruption_rate,
// with terms in clause notation.
std::string instance_to_json_line(const Instance& inst);
Instance instance_from_json_line(const std::string& line);

void write_instances(const std::filesystem::path& file, const std::vector<Instance>& instances);
std::vector<Instance> read_instances(const std::filesystem::path& file);

// Splits a case pool into instances no larger than the training caps,
// spreading positives and negatives evenly over the lines.
std::vector<Instance> chunk_pool(const TaskSpec& task, const CaseSet& pool);

// Concatenation of every instance's cases.
CaseSet merge_pool(const std::vector<Instance>& instances);

struct DatasetEntry {
  std::string task_id;
  std::string file;  // relative to the dataset directory
  std::size_t positives = 0;
  std::size_t negatives = 0;
  std::size_t instances = 0;
};

struct DatasetManifest {
  std::string registry_version;
  std::uint64_t seed = 0;
  std::vector<DatasetEntry> tasks;
};

void write_manifest(const std::filesystem::path& file, const DatasetManifest& m);
DatasetManifest read_manifest(const std::filesystem::path& file);

// Pool for `task` from <dir>/<task>.jsonl. Throws IoFailure when missing.
CaseSet load_task_pool(const std::filesystem::path& dir, const TaskSpec& task);

}  // namespace metasel::corpus
