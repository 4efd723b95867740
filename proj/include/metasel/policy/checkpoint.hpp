#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "metasel/policy/network.hpp"

namespace metasel::policy {

inline constexpr const char* kCheckpointMagic = "metasel-policy-checkpoint/1";

// File layout: the magic line, one line of JSON describing shapes, sections
// and metadata, then every section's tensors in for_each_tensor order as
// row-major little-endian float64.
struct Checkpoint {
  PolicyParams<double> params;
  // Extra tensor sets with the same shapes (optimizer moments).
  std::vector<std::pair<std::string, PolicyParams<double>>> sections;
  std::map<std::string, std::string> meta;

  const PolicyParams<double>* section(const std::string& name) const;
};

// Throws IoFailure.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
// Throws IoFailure, or ShapeMismatch for a header that does not describe the
// tensors it carries.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace metasel::policy
