#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "metasel/corpus/encoding.hpp"
#include "metasel/logic/metarule.hpp"
#include "metasel/util/error.hpp"
#include "metasel/util/rng.hpp"

namespace metasel::policy {

using logic::kPoolSize;
using logic::MetaRuleSet;

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
// true marks a valid key slot.
using KeyMask = Eigen::Array<bool, Eigen::Dynamic, 1>;

struct PolicyShape {
  std::int32_t vocab_size = 0;
  int d_model = 64;
  int heads = 8;
  int metarule_dim = 16;
  double p_min = 0.02;

  int d_head() const { return d_model / heads; }
  // Throws ShapeMismatch.
  void validate() const;
  friend bool operator==(const PolicyShape&, const PolicyShape&) = default;
};

PolicyShape default_shape(corpus::DomainKind domain);

// Per-head projections are column blocks of wq/wk/wv (head h owns columns
// [h*d_head, (h+1)*d_head)); wo maps the concatenated heads back to d_model.
template <typename Scalar>
struct AttentionParams {
  MatrixX<Scalar> wq, wk, wv, wo;
};

template <typename Scalar>
struct PolicyParams {
  PolicyShape shape;
  MatrixX<Scalar> token_embedding;  // vocab x d
  AttentionParams<Scalar> pos_attn, neg_attn, joint_attn, cross_attn;
  MatrixX<Scalar> metarule_embedding;  // 6 x metarule_dim
  MatrixX<Scalar> metarule_proj;       // metarule_dim x d
  MatrixX<Scalar> metarule_bias;       // 1 x d
  MatrixX<Scalar> head_weight;         // d x 1
  MatrixX<Scalar> head_bias;           // 1 x 1
};

// Visits every tensor as f(name, matrix) in declaration order, which is also
// the checkpoint order. Works on const and mutable params.
template <typename Params, typename F>
void for_each_tensor(Params& p, F&& f) {
  f("token_embedding", p.token_embedding);
  const auto attn = [&](const char* prefix, auto& a) {
    const std::string s(prefix);
    f(s + ".wq", a.wq);
    f(s + ".wk", a.wk);
    f(s + ".wv", a.wv);
    f(s + ".wo", a.wo);
  };
  attn("pos_attn", p.pos_attn);
  attn("neg_attn", p.neg_attn);
  attn("joint_attn", p.joint_attn);
  attn("cross_attn", p.cross_attn);
  f("metarule_embedding", p.metarule_embedding);
  f("metarule_proj", p.metarule_proj);
  f("metarule_bias", p.metarule_bias);
  f("head_weight", p.head_weight);
  f("head_bias", p.head_bias);
}

// Pairwise visit over two params of the same shape: f(name, a, b).
template <typename A, typename B, typename F>
void zip_tensors(A& a, B& b, F&& f) {
  std::vector<std::string> names;
  std::vector<decltype(&a.token_embedding)> left;
  for_each_tensor(a, [&](const std::string& n, auto& m) {
    names.push_back(n);
    left.push_back(&m);
  });
  std::size_t i = 0;
  for_each_tensor(b, [&](const std::string&, auto& m) {
    f(names[i], *left[i], m);
    ++i;
  });
}

template <typename Scalar>
PolicyParams<Scalar> zero_params(const PolicyShape& shape) {
  shape.validate();
  const int d = shape.d_model;
  PolicyParams<Scalar> p;
  p.shape = shape;
  p.token_embedding = MatrixX<Scalar>::Zero(shape.vocab_size, d);
  for (auto* a : {&p.pos_attn, &p.neg_attn, &p.joint_attn, &p.cross_attn}) {
    a->wq = a->wk = a->wv = a->wo = MatrixX<Scalar>::Zero(d, d);
  }
  p.metarule_embedding = MatrixX<Scalar>::Zero(kPoolSize, shape.metarule_dim);
  p.metarule_proj = MatrixX<Scalar>::Zero(shape.metarule_dim, d);
  p.metarule_bias = MatrixX<Scalar>::Zero(1, d);
  p.head_weight = MatrixX<Scalar>::Zero(d, 1);
  p.head_bias = MatrixX<Scalar>::Zero(1, 1);
  return p;
}

// Uniform(-scale, scale) in every entry.
template <typename Scalar>
PolicyParams<Scalar> init_params(const PolicyShape& shape, Rng& rng, double scale = 0.05) {
  auto p = zero_params<Scalar>(shape);
  for_each_tensor(p, [&](const std::string&, MatrixX<Scalar>& m) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = static_cast<Scalar>((2.0 * uniform_unit(rng) - 1.0) * scale);
    }
  });
  return p;
}

template <typename To, typename From>
PolicyParams<To> cast_params(const PolicyParams<From>& from) {
  auto to = zero_params<To>(from.shape);
  zip_tensors(from, to, [](const std::string&, const MatrixX<From>& a, MatrixX<To>& b) { b = a.template cast<To>(); });
  return to;
}

template <typename Scalar>
std::size_t parameter_count(const PolicyParams<Scalar>& p) {
  std::size_t n = 0;
  for_each_tensor(p, [&](const std::string&, const MatrixX<Scalar>& m) { n += static_cast<std::size_t>(m.size()); });
  return n;
}

// ---- attention -------------------------------------------------------------

template <typename Scalar>
struct AttentionCache {
  MatrixX<Scalar> xq, xkv, q, k, v, o;
  std::vector<MatrixX<Scalar>> attn;  // per head, rows x keys
};

// Multi-head scaled softmax attention with residual:
//   Y = Xq + concat_h(softmax(Q_h K_h^T / sqrt(d_head)) V_h) Wo
// Masked keys get zero weight; a query row whose keys are all masked is
// returned unchanged.
template <typename Scalar>
MatrixX<Scalar> attention_block(const MatrixX<Scalar>& xq, const MatrixX<Scalar>& xkv, const KeyMask& mask,
                                const AttentionParams<Scalar>& p, int heads, AttentionCache<Scalar>* cache = nullptr) {
  const Eigen::Index d = p.wq.rows();
  if (xq.cols() != d || xkv.cols() != d || mask.size() != xkv.rows() || heads <= 0 || d % heads != 0) {
    throw ShapeMismatch("attention_block: inconsistent shapes");
  }
  const Eigen::Index dh = d / heads;
  const Scalar beta = Scalar(1) / std::sqrt(static_cast<Scalar>(dh));
  const MatrixX<Scalar> q = xq * p.wq;
  const MatrixX<Scalar> k = xkv * p.wk;
  const MatrixX<Scalar> v = xkv * p.wv;
  MatrixX<Scalar> o = MatrixX<Scalar>::Zero(xq.rows(), d);
  std::vector<MatrixX<Scalar>> attn;
  if (cache) attn.reserve(static_cast<std::size_t>(heads));
  for (int h = 0; h < heads; ++h) {
    const Eigen::Index c0 = h * dh;
    MatrixX<Scalar> a = beta * (q.middleCols(c0, dh) * k.middleCols(c0, dh).transpose());
    for (Eigen::Index r = 0; r < a.rows(); ++r) {
      Scalar top = -std::numeric_limits<Scalar>::infinity();
      for (Eigen::Index c = 0; c < a.cols(); ++c) {
        if (mask(c)) top = std::max(top, a(r, c));
      }
      if (!std::isfinite(top)) {
        a.row(r).setZero();
        continue;
      }
      Scalar sum = 0;
      for (Eigen::Index c = 0; c < a.cols(); ++c) {
        a(r, c) = mask(c) ? std::exp(a(r, c) - top) : Scalar(0);
        sum += a(r, c);
      }
      a.row(r) /= sum;
    }
    o.middleCols(c0, dh) = a * v.middleCols(c0, dh);
    if (cache) attn.push_back(std::move(a));
  }
  MatrixX<Scalar> y = xq + o * p.wo;
  if (cache) *cache = AttentionCache<Scalar>{xq, xkv, q, k, v, std::move(o), std::move(attn)};
  return y;
}

// Accumulates parameter gradients into `grad` and input gradients into
// d_xq / d_xkv (which must be sized like the inputs).
template <typename Scalar>
void attention_backward(const AttentionCache<Scalar>& c, const AttentionParams<Scalar>& p, int heads,
                        const MatrixX<Scalar>& d_y, AttentionParams<Scalar>& grad, MatrixX<Scalar>& d_xq,
                        MatrixX<Scalar>& d_xkv) {
  const Eigen::Index d = p.wq.rows();
  const Eigen::Index dh = d / heads;
  const Scalar beta = Scalar(1) / std::sqrt(static_cast<Scalar>(dh));
  d_xq += d_y;
  grad.wo += c.o.transpose() * d_y;
  const MatrixX<Scalar> d_o = d_y * p.wo.transpose();
  MatrixX<Scalar> d_q(c.q.rows(), d), d_k(c.k.rows(), d), d_v(c.v.rows(), d);
  for (int h = 0; h < heads; ++h) {
    const Eigen::Index c0 = h * dh;
    const auto& a = c.attn[static_cast<std::size_t>(h)];
    const MatrixX<Scalar> d_a = d_o.middleCols(c0, dh) * c.v.middleCols(c0, dh).transpose();
    d_v.middleCols(c0, dh) = a.transpose() * d_o.middleCols(c0, dh);
    const VectorX<Scalar> row_dot = (d_a.array() * a.array()).rowwise().sum();
    const MatrixX<Scalar> d_s = (a.array() * (d_a.colwise() - row_dot).array()).matrix() * beta;
    d_q.middleCols(c0, dh) = d_s * c.k.middleCols(c0, dh);
    d_k.middleCols(c0, dh) = d_s.transpose() * c.q.middleCols(c0, dh);
  }
  grad.wq += c.xq.transpose() * d_q;
  grad.wk += c.xkv.transpose() * d_k;
  grad.wv += c.xkv.transpose() * d_v;
  d_xq += d_q * p.wq.transpose();
  d_xkv += d_k * p.wk.transpose() + d_v * p.wv.transpose();
}

// ---- full network ----------------------------------------------------------

template <typename Scalar>
struct ForwardCache {
  // Real case slots, in bag order.
  std::vector<std::size_t> pos_slots, neg_slots;
  MatrixX<Scalar> x_pos, x_neg;
  AttentionCache<Scalar> pos, neg, joint, cross;
  MatrixX<Scalar> meta;      // 6 x d, queries
  MatrixX<Scalar> combined;  // 6 x d, cross-attention output
  VectorX<Scalar> logits;
  VectorX<Scalar> sigmoid;
  VectorX<Scalar> probs;
};

namespace detail {

inline void check_encoding(const corpus::InstanceEncoding& enc, const PolicyShape& shape) {
  const std::size_t stride = enc.case_stride();
  if (enc.pos_tokens.size() != enc.cap_pos * stride || enc.neg_tokens.size() != enc.cap_neg * stride ||
      enc.pos_mask.size() != enc.cap_pos || enc.neg_mask.size() != enc.cap_neg) {
    throw ShapeMismatch("instance encoding has inconsistent sizes");
  }
  for (const auto* tokens : {&enc.pos_tokens, &enc.neg_tokens}) {
    for (const auto t : *tokens) {
      if (t < 0 || t >= shape.vocab_size) throw ShapeMismatch("token outside the policy vocabulary");
    }
  }
}

// Mean of the non-PAD token embeddings of each real case.
template <typename Scalar>
MatrixX<Scalar> pool_cases(const std::vector<std::int32_t>& tokens, const std::vector<std::uint8_t>& mask,
                           std::size_t stride, const MatrixX<Scalar>& emb, std::vector<std::size_t>& slots) {
  slots.clear();
  for (std::size_t s = 0; s < mask.size(); ++s) {
    if (mask[s]) slots.push_back(s);
  }
  MatrixX<Scalar> x = MatrixX<Scalar>::Zero(static_cast<Eigen::Index>(slots.size()), emb.cols());
  for (std::size_t i = 0; i < slots.size(); ++i) {
    int count = 0;
    for (std::size_t t = slots[i] * stride; t < (slots[i] + 1) * stride; ++t) {
      if (tokens[t] == corpus::kPadToken) continue;
      x.row(static_cast<Eigen::Index>(i)) += emb.row(tokens[t]);
      ++count;
    }
    if (count > 0) x.row(static_cast<Eigen::Index>(i)) /= static_cast<Scalar>(count);
  }
  return x;
}

template <typename Scalar>
void pool_backward(const std::vector<std::int32_t>& tokens, const std::vector<std::size_t>& slots, std::size_t stride,
                   const MatrixX<Scalar>& d_x, MatrixX<Scalar>& d_emb) {
  for (std::size_t i = 0; i < slots.size(); ++i) {
    int count = 0;
    for (std::size_t t = slots[i] * stride; t < (slots[i] + 1) * stride; ++t) count += tokens[t] != corpus::kPadToken;
    if (count == 0) continue;
    for (std::size_t t = slots[i] * stride; t < (slots[i] + 1) * stride; ++t) {
      if (tokens[t] != corpus::kPadToken) d_emb.row(tokens[t]) += d_x.row(static_cast<Eigen::Index>(i)) / static_cast<Scalar>(count);
    }
  }
}

}  // namespace detail

// Selection probabilities, one per meta-rule in pool order, each clamped to
// [p_min, 1 - p_min]. Only real cases and non-PAD tokens contribute.
template <typename Scalar>
VectorX<Scalar> forward(const corpus::InstanceEncoding& enc, const PolicyParams<Scalar>& p,
                        ForwardCache<Scalar>* cache = nullptr) {
  detail::check_encoding(enc, p.shape);
  ForwardCache<Scalar> local;
  ForwardCache<Scalar>& c = cache ? *cache : local;
  const int heads = p.shape.heads;
  const std::size_t stride = enc.case_stride();
  c.x_pos = detail::pool_cases(enc.pos_tokens, enc.pos_mask, stride, p.token_embedding, c.pos_slots);
  c.x_neg = detail::pool_cases(enc.neg_tokens, enc.neg_mask, stride, p.token_embedding, c.neg_slots);
  const KeyMask pos_mask = KeyMask::Constant(c.x_pos.rows(), true);
  const KeyMask neg_mask = KeyMask::Constant(c.x_neg.rows(), true);
  const MatrixX<Scalar> h_pos = attention_block(c.x_pos, c.x_pos, pos_mask, p.pos_attn, heads, &c.pos);
  const MatrixX<Scalar> h_neg = attention_block(c.x_neg, c.x_neg, neg_mask, p.neg_attn, heads, &c.neg);
  MatrixX<Scalar> joint_in(h_pos.rows() + h_neg.rows(), h_pos.cols());
  joint_in << h_pos, h_neg;
  const KeyMask joint_mask = KeyMask::Constant(joint_in.rows(), true);
  const MatrixX<Scalar> h_joint = attention_block(joint_in, joint_in, joint_mask, p.joint_attn, heads, &c.joint);
  c.meta = p.metarule_embedding * p.metarule_proj;
  c.meta.rowwise() += p.metarule_bias.row(0);
  c.combined = attention_block(c.meta, h_joint, joint_mask, p.cross_attn, heads, &c.cross);
  c.logits = c.combined * p.head_weight;
  c.logits.array() += p.head_bias(0, 0);
  c.sigmoid = (Scalar(1) / (Scalar(1) + (-c.logits.array()).exp())).matrix();
  const Scalar lo = static_cast<Scalar>(p.shape.p_min);
  c.probs = c.sigmoid.cwiseMax(lo).cwiseMin(Scalar(1) - lo);
  return c.probs;
}

// Gradient of sum_i upstream_i * probs_i with respect to every parameter,
// using the cache of the forward pass on the same inputs. The clamp passes
// no gradient where it is active.
template <typename Scalar>
PolicyParams<Scalar> backward(const corpus::InstanceEncoding& enc, const PolicyParams<Scalar>& p,
                              const ForwardCache<Scalar>& c, const VectorX<Scalar>& upstream) {
  if (upstream.size() != static_cast<Eigen::Index>(kPoolSize)) throw ShapeMismatch("upstream gradient must have 6 entries");
  auto g = zero_params<Scalar>(p.shape);
  const int heads = p.shape.heads;
  const Scalar lo = static_cast<Scalar>(p.shape.p_min);
  VectorX<Scalar> d_logits(kPoolSize);
  for (Eigen::Index i = 0; i < d_logits.size(); ++i) {
    const Scalar s = c.sigmoid(i);
    d_logits(i) = (s < lo || s > Scalar(1) - lo) ? Scalar(0) : upstream(i) * s * (Scalar(1) - s);
  }
  g.head_bias(0, 0) = d_logits.sum();
  g.head_weight = c.combined.transpose() * d_logits;
  const MatrixX<Scalar> d_combined = d_logits * p.head_weight.transpose();

  const Eigen::Index n_pos = c.x_pos.rows();
  const Eigen::Index n_joint = c.joint.xkv.rows();
  MatrixX<Scalar> d_meta = MatrixX<Scalar>::Zero(c.meta.rows(), c.meta.cols());
  MatrixX<Scalar> d_h_joint = MatrixX<Scalar>::Zero(n_joint, c.meta.cols());
  attention_backward(c.cross, p.cross_attn, heads, d_combined, g.cross_attn, d_meta, d_h_joint);
  g.metarule_bias = d_meta.colwise().sum();
  g.metarule_proj = p.metarule_embedding.transpose() * d_meta;
  g.metarule_embedding = d_meta * p.metarule_proj.transpose();

  MatrixX<Scalar> d_joint_in = MatrixX<Scalar>::Zero(n_joint, c.meta.cols());
  {
    MatrixX<Scalar> d_kv = MatrixX<Scalar>::Zero(n_joint, c.meta.cols());
    attention_backward(c.joint, p.joint_attn, heads, d_h_joint, g.joint_attn, d_joint_in, d_kv);
    d_joint_in += d_kv;
  }
  const MatrixX<Scalar> d_h_pos = d_joint_in.topRows(n_pos);
  const MatrixX<Scalar> d_h_neg = d_joint_in.bottomRows(n_joint - n_pos);
  const auto self_backward = [&](const AttentionCache<Scalar>& ac, const AttentionParams<Scalar>& ap,
                                 AttentionParams<Scalar>& ag, const MatrixX<Scalar>& d_h) {
    MatrixX<Scalar> d_x = MatrixX<Scalar>::Zero(ac.xq.rows(), ac.xq.cols());
    MatrixX<Scalar> d_kv = MatrixX<Scalar>::Zero(ac.xq.rows(), ac.xq.cols());
    attention_backward(ac, ap, heads, d_h, ag, d_x, d_kv);
    return MatrixX<Scalar>(d_x + d_kv);
  };
  const MatrixX<Scalar> d_x_pos = self_backward(c.pos, p.pos_attn, g.pos_attn, d_h_pos);
  const MatrixX<Scalar> d_x_neg = self_backward(c.neg, p.neg_attn, g.neg_attn, d_h_neg);
  const std::size_t stride = enc.case_stride();
  detail::pool_backward(enc.pos_tokens, c.pos_slots, stride, d_x_pos, g.token_embedding);
  detail::pool_backward(enc.neg_tokens, c.neg_slots, stride, d_x_neg, g.token_embedding);
  return g;
}

template <typename Scalar>
PolicyParams<Scalar> backward(const corpus::InstanceEncoding& enc, const PolicyParams<Scalar>& p,
                              const VectorX<Scalar>& upstream) {
  ForwardCache<Scalar> c;
  forward(enc, p, &c);
  return backward(enc, p, c, upstream);
}

// ---- selection -------------------------------------------------------------

struct PolicyOutput {
  std::array<double, kPoolSize> probs{};
  std::array<bool, kPoolSize> selection{};
  double log_prob = 0.0;

  MetaRuleSet selected() const { return MetaRuleSet::from_selection(selection); }
};

// sum_i [s_i log p_i + (1 - s_i) log(1 - p_i)]
template <typename Scalar>
Scalar selection_log_prob(const VectorX<Scalar>& probs, const std::array<bool, kPoolSize>& selection) {
  Scalar lp = 0;
  for (std::size_t i = 0; i < kPoolSize; ++i) {
    const Scalar q = probs(static_cast<Eigen::Index>(i));
    lp += selection[i] ? std::log(q) : std::log(Scalar(1) - q);
  }
  return lp;
}

// d log_prob / d probs.
template <typename Scalar>
VectorX<Scalar> selection_log_prob_grad(const VectorX<Scalar>& probs, const std::array<bool, kPoolSize>& selection) {
  VectorX<Scalar> g(kPoolSize);
  for (std::size_t i = 0; i < kPoolSize; ++i) {
    const Scalar q = probs(static_cast<Eigen::Index>(i));
    g(static_cast<Eigen::Index>(i)) = selection[i] ? Scalar(1) / q : Scalar(-1) / (Scalar(1) - q);
  }
  return g;
}

// One Bernoulli draw per meta-rule, in pool order.
PolicyOutput sample_selection(const Eigen::VectorXd& probs, Rng& rng);

// Meta-rules ranked by probability, highest first (ties by pool order).
std::array<logic::MetaRuleId, kPoolSize> ranked_metarules(const Eigen::VectorXd& probs);

extern template Eigen::VectorXd forward(const corpus::InstanceEncoding&, const PolicyParams<double>&,
                                        ForwardCache<double>*);
extern template PolicyParams<double> backward(const corpus::InstanceEncoding&, const PolicyParams<double>&,
                                              const ForwardCache<double>&, const Eigen::VectorXd&);

}  // namespace metasel::policy
