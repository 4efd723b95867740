#pragma once

#include <cstdint>
#include <vector>

#include "metasel/corpus/cases.hpp"
#include "metasel/corpus/tasks.hpp"

namespace metasel::corpus {

inline constexpr std::int32_t kPadToken = 0;
inline constexpr std::int32_t kResultToken = 1;

// Token layout for one domain. Every row (one Mario state, or one digit) is
// `fields` tokens; value tokens are specific to (row position, field), so the
// vocabulary also carries within-case order.
struct EncodingConfig {
  DomainKind domain = DomainKind::Mario;
  std::size_t cap_pos = 0;
  std::size_t cap_neg = 0;
  std::size_t max_case_len = 5;
  std::size_t fields = 0;
  std::int32_t vocab_size = 0;
};

EncodingConfig encoding_config(DomainKind domain);

struct InstanceEncoding {
  std::size_t cap_pos = 0;
  std::size_t cap_neg = 0;
  std::size_t max_case_len = 0;
  std::size_t fields = 0;
  // [cap × max_case_len × fields], row-major; PAD outside real rows.
  std::vector<std::int32_t> pos_tokens;
  std::vector<std::int32_t> neg_tokens;
  // One flag per case slot: true for a real case.
  std::vector<std::uint8_t> pos_mask;
  std::vector<std::uint8_t> neg_mask;

  std::size_t case_stride() const { return max_case_len * fields; }
  friend bool operator==(const InstanceEncoding&, const InstanceEncoding&) = default;
};

// The instance's task id fixes where the MNIST result sits.
// Throws VocabularyOverflow for a value outside the vocabulary (e.g. a case
// longer than max_case_len, or a digit above 9) and CapExceeded for bags
// larger than the caps.
InstanceEncoding encode_instance(const Instance& inst, const EncodingConfig& cfg);

// Inverse of encode_instance for the task's example shape.
Instance decode_instance(const InstanceEncoding& enc, const EncodingConfig& cfg, const TaskSpec& task);

}  // namespace metasel::corpus
