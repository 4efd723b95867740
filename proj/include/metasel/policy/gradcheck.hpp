#pragma once

#include <string>
#include <vector>

#include "metasel/policy/network.hpp"

namespace metasel::policy {

struct GroupCheck {
  std::string name;
  std::size_t checked = 0;
  // ||analytic - numeric|| / max(||analytic||, ||numeric||) over the checked
  // entries; 0 when both vanish.
  double rel_error = 0.0;
  double max_abs_diff = 0.0;
  double analytic_norm = 0.0;
};

// Central finite differences of upstream . forward(enc, params) against
// backward(). max_per_group = 0 checks every entry; otherwise a random
// subset, half of it drawn from entries with a nonzero analytic gradient.
std::vector<GroupCheck> check_gradients(const corpus::InstanceEncoding& enc, const PolicyParams<double>& params,
                                        const Eigen::VectorXd& upstream, double h, std::size_t max_per_group,
                                        Rng& rng);

}  // namespace metasel::policy
