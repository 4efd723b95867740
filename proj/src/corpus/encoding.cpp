#include "metasel/corpus/encoding.hpp"

#include <array>
#include <stdexcept>

#include "metasel/logic/mario.hpp"
#include "metasel/logic/prover.hpp"
#include "metasel/util/error.hpp"

namespace metasel::corpus {
namespace {

using logic::MarioState;

constexpr std::int32_t kPositionBase = 2;
constexpr std::size_t kMaxCaseLen = 5;
constexpr std::int32_t kValueBase = kPositionBase + static_cast<std::int32_t>(kMaxCaseLen);

// Mario row: position, mario row/col, target row/col, type, scene, frame.
constexpr std::array<std::int32_t, 7> kMarioFieldSize{3, 3, 3, 3, 2, 3, 7};
constexpr std::int32_t kMarioRowValues = 24;
constexpr std::int32_t kDigitValues = 10;

std::int32_t mario_field_offset(std::size_t f) {
  std::int32_t off = 0;
  for (std::size_t i = 0; i < f; ++i) off += kMarioFieldSize[i];
  return off;
}

[[noreturn]] void overflow(const std::string& what) { throw VocabularyOverflow(what); }

void encode_mario(const Term& atom, std::int32_t* out, const EncodingConfig& cfg) {
  const Term& list = atom[0];
  if (list.list_length() > cfg.max_case_len) overflow("case longer than " + std::to_string(cfg.max_case_len));
  for (std::size_t j = 0; j < list.list_length(); ++j) {
    const auto s = MarioState::from_term(list[j]);
    if (!s) overflow("not an encodable Mario state: " + list[j].to_string());
    const std::array<int, 7> v{s->mario.row, s->mario.col, s->target.row, s->target.col,
                               static_cast<int>(s->type), static_cast<int>(s->scene), s->frame};
    std::int32_t* row = out + j * cfg.fields;
    row[0] = kPositionBase + static_cast<std::int32_t>(j);
    for (std::size_t f = 0; f < v.size(); ++f) {
      row[f + 1] = kValueBase + static_cast<std::int32_t>(j) * kMarioRowValues + mario_field_offset(f) + v[f];
    }
  }
}

struct DigitRow {
  int digit;
  bool result;
};

std::vector<DigitRow> mnist_rows(const Term& atom, ResultShape shape) {
  auto flatten = [](const Term& t, bool result, std::vector<DigitRow>& rows) {
    if (t.kind() == logic::TermKind::Int) {
      rows.push_back({static_cast<int>(t.int_value()), result});
      return;
    }
    if (!t.is_list()) overflow("not an encodable MNIST term: " + t.to_string());
    for (const auto& d : t.items()) {
      if (d.kind() != logic::TermKind::Int) overflow("not a digit: " + d.to_string());
      rows.push_back({static_cast<int>(d.int_value()), result});
    }
  };
  const bool result_first = shape == ResultShape::IntFirst || shape == ResultShape::TagFirst;
  std::vector<DigitRow> rows;
  flatten(atom[0], result_first, rows);
  flatten(atom[1], !result_first, rows);
  return rows;
}

void encode_mnist(const Term& atom, ResultShape shape, std::int32_t* out, const EncodingConfig& cfg) {
  const auto rows = mnist_rows(atom, shape);
  if (rows.size() > cfg.max_case_len) overflow("case longer than " + std::to_string(cfg.max_case_len));
  for (std::size_t j = 0; j < rows.size(); ++j) {
    if (rows[j].digit < 0 || rows[j].digit >= kDigitValues) overflow("digit out of range: " + std::to_string(rows[j].digit));
    std::int32_t* row = out + j * cfg.fields;
    row[0] = kValueBase + static_cast<std::int32_t>(j) * kDigitValues + rows[j].digit;
    row[1] = rows[j].result ? kResultToken : kPositionBase + static_cast<std::int32_t>(j);
  }
}

void encode_bag(const std::vector<Term>& bag, std::size_t cap, const EncodingConfig& cfg, ResultShape shape,
                std::vector<std::int32_t>& tokens, std::vector<std::uint8_t>& mask) {
  if (bag.size() > cap) throw CapExceeded("bag of " + std::to_string(bag.size()) + " exceeds cap " + std::to_string(cap));
  const std::size_t stride = cfg.max_case_len * cfg.fields;
  tokens.assign(cap * stride, kPadToken);
  mask.assign(cap, 0);
  for (std::size_t i = 0; i < bag.size(); ++i) {
    mask[i] = 1;
    if (cfg.domain == DomainKind::Mario) {
      encode_mario(bag[i], tokens.data() + i * stride, cfg);
    } else {
      encode_mnist(bag[i], shape, tokens.data() + i * stride, cfg);
    }
  }
}

Term decode_case(const std::int32_t* tokens, const EncodingConfig& cfg, const TaskSpec& task) {
  std::size_t rows = 0;
  while (rows < cfg.max_case_len && tokens[rows * cfg.fields] != kPadToken) ++rows;
  if (cfg.domain == DomainKind::Mario) {
    std::vector<Term> states;
    for (std::size_t j = 0; j < rows; ++j) {
      const std::int32_t* row = tokens + j * cfg.fields;
      std::array<int, 7> v{};
      for (std::size_t f = 0; f < v.size(); ++f) {
        v[f] = row[f + 1] - kValueBase - static_cast<std::int32_t>(j) * kMarioRowValues - mario_field_offset(f);
      }
      const MarioState s{{v[0], v[1]}, {v[2], v[3]}, static_cast<logic::TargetType>(v[4]),
                         static_cast<logic::Scene>(v[5]), v[6]};
      states.push_back(s.to_term());
    }
    const Term last = states.back();
    return logic::make_atom("f", {Term::list(std::move(states)), last});
  }
  std::vector<Term> list;
  int result = 0;
  for (std::size_t j = 0; j < rows; ++j) {
    const std::int32_t* row = tokens + j * cfg.fields;
    const int digit = row[0] - kValueBase - static_cast<std::int32_t>(j) * kDigitValues;
    if (row[1] == kResultToken) {
      result = digit;
    } else {
      list.push_back(Term::integer(digit));
    }
  }
  const Term l = Term::list(std::move(list));
  switch (task.shape) {
    case ResultShape::IntLast: return logic::make_atom("f", {l, Term::integer(result)});
    case ResultShape::IntFirst: return logic::make_atom("f", {Term::integer(result), l});
    case ResultShape::TagLast: return logic::make_atom("f", {l, Term::list({Term::integer(result)})});
    case ResultShape::TagFirst: return logic::make_atom("f", {Term::list({Term::integer(result)}), l});
    case ResultShape::None: break;
  }
  throw std::invalid_argument("task has no MNIST shape: " + task.id);
}

}  // namespace

EncodingConfig encoding_config(DomainKind domain) {
  EncodingConfig cfg;
  cfg.domain = domain;
  const Caps caps = training_caps(domain);
  cfg.cap_pos = caps.pos;
  cfg.cap_neg = caps.neg;
  cfg.max_case_len = kMaxCaseLen;
  if (domain == DomainKind::Mario) {
    cfg.fields = 1 + kMarioFieldSize.size();
    cfg.vocab_size = kValueBase + static_cast<std::int32_t>(kMaxCaseLen) * kMarioRowValues;
  } else {
    cfg.fields = 2;
    cfg.vocab_size = kValueBase + static_cast<std::int32_t>(kMaxCaseLen) * kDigitValues;
  }
  return cfg;
}

InstanceEncoding encode_instance(const Instance& inst, const EncodingConfig& cfg) {
  InstanceEncoding enc;
  enc.cap_pos = cfg.cap_pos;
  enc.cap_neg = cfg.cap_neg;
  enc.max_case_len = cfg.max_case_len;
  enc.fields = cfg.fields;
  const ResultShape shape = cfg.domain == DomainKind::Mnist ? find_task(inst.task_id).shape : ResultShape::None;
  encode_bag(inst.positives, cfg.cap_pos, cfg, shape, enc.pos_tokens, enc.pos_mask);
  encode_bag(inst.negatives, cfg.cap_neg, cfg, shape, enc.neg_tokens, enc.neg_mask);
  return enc;
}

Instance decode_instance(const InstanceEncoding& enc, const EncodingConfig& cfg, const TaskSpec& task) {
  Instance inst;
  inst.task_id = task.id;
  const std::size_t stride = enc.case_stride();
  for (std::size_t i = 0; i < enc.cap_pos; ++i) {
    if (enc.pos_mask[i]) inst.positives.push_back(decode_case(enc.pos_tokens.data() + i * stride, cfg, task));
  }
  for (std::size_t i = 0; i < enc.cap_neg; ++i) {
    if (enc.neg_mask[i]) inst.negatives.push_back(decode_case(enc.neg_tokens.data() + i * stride, cfg, task));
  }
  return inst;
}

}  // namespace metasel::corpus
