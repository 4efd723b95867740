#include "metasel/policy/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace metasel::policy {

std::vector<GroupCheck> check_gradients(const corpus::InstanceEncoding& enc, const PolicyParams<double>& params,
                                        const Eigen::VectorXd& upstream, double h, std::size_t max_per_group,
                                        Rng& rng) {
  const auto analytic = backward(enc, params, upstream);
  auto probe = params;
  const auto objective = [&] { return upstream.dot(forward(enc, probe)); };

  std::vector<Eigen::MatrixXd*> probe_tensors;
  for_each_tensor(probe, [&](const std::string&, Eigen::MatrixXd& m) { probe_tensors.push_back(&m); });

  std::vector<GroupCheck> out;
  std::size_t t = 0;
  for_each_tensor(analytic, [&](const std::string& name, const Eigen::MatrixXd& g) {
    Eigen::MatrixXd& m = *probe_tensors[t++];
    const auto n = static_cast<std::size_t>(g.size());
    std::vector<std::size_t> coords;
    if (max_per_group == 0 || max_per_group >= n) {
      coords.resize(n);
      for (std::size_t i = 0; i < n; ++i) coords[i] = i;
    } else {
      std::vector<std::size_t> nonzero;
      for (std::size_t i = 0; i < n; ++i) {
        if (g.data()[i] != 0.0) nonzero.push_back(i);
      }
      for (std::size_t k = 0; k < max_per_group / 2 && !nonzero.empty(); ++k) {
        coords.push_back(nonzero[uniform_index(rng, nonzero.size())]);
      }
      while (coords.size() < max_per_group) coords.push_back(uniform_index(rng, n));
      std::sort(coords.begin(), coords.end());
      coords.erase(std::unique(coords.begin(), coords.end()), coords.end());
    }
    double diff2 = 0, a2 = 0, n2 = 0, max_diff = 0;
    for (const std::size_t i : coords) {
      const double saved = m.data()[i];
      m.data()[i] = saved + h;
      const double up = objective();
      m.data()[i] = saved - h;
      const double down = objective();
      m.data()[i] = saved;
      const double numeric = (up - down) / (2 * h);
      const double a = g.data()[i];
      diff2 += (a - numeric) * (a - numeric);
      a2 += a * a;
      n2 += numeric * numeric;
      max_diff = std::max(max_diff, std::abs(a - numeric));
    }
    GroupCheck c;
    c.name = name;
    c.checked = coords.size();
    const double scale = std::sqrt(std::max(a2, n2));
    c.rel_error = scale > 0 ? std::sqrt(diff2) / scale : 0.0;
    c.max_abs_diff = max_diff;
    c.analytic_norm = std::sqrt(a2);
    out.push_back(c);
  });
  return out;
}

}  // namespace metasel::policy
