#include "metasel/policy/network.hpp"

#include <algorithm>
#include <numeric>

namespace metasel::policy {

void PolicyShape::validate() const {
  if (vocab_size <= 0 || d_model <= 0 || heads <= 0 || metarule_dim <= 0) {
    throw ShapeMismatch("policy dimensions must be positive");
  }
  if (d_model % heads != 0) throw ShapeMismatch("head count must divide d_model");
  if (!(p_min > 0.0 && p_min < 0.5)) throw ShapeMismatch("p_min must lie in (0, 0.5)");
}

PolicyShape default_shape(corpus::DomainKind domain) {
  PolicyShape s;
  s.vocab_size = corpus::encoding_config(domain).vocab_size;
  return s;
}

PolicyOutput sample_selection(const Eigen::VectorXd& probs, Rng& rng) {
  if (probs.size() != static_cast<Eigen::Index>(kPoolSize)) throw ShapeMismatch("probs must have 6 entries");
  PolicyOutput out;
  for (std::size_t i = 0; i < kPoolSize; ++i) {
    out.probs[i] = probs(static_cast<Eigen::Index>(i));
    out.selection[i] = uniform_unit(rng) < out.probs[i];
  }
  out.log_prob = selection_log_prob(probs, out.selection);
  return out;
}

std::array<logic::MetaRuleId, kPoolSize> ranked_metarules(const Eigen::VectorXd& probs) {
  std::array<std::size_t, kPoolSize> order;
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return probs(static_cast<Eigen::Index>(a)) > probs(static_cast<Eigen::Index>(b));
  });
  std::array<logic::MetaRuleId, kPoolSize> out{};
  for (std::size_t i = 0; i < kPoolSize; ++i) out[i] = static_cast<logic::MetaRuleId>(order[i]);
  return out;
}

template Eigen::VectorXd forward(const corpus::InstanceEncoding&, const PolicyParams<double>&, ForwardCache<double>*);
template PolicyParams<double> backward(const corpus::InstanceEncoding&, const PolicyParams<double>&,
                                       const ForwardCache<double>&, const Eigen::VectorXd&);

}  // namespace metasel::policy
