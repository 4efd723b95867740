#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace metasel::logic {

enum class MetaRuleId : std::uint8_t { Identity, Inverse, Precon, Postcon, Chain, Recursion };

inline constexpr std::size_t kPoolSize = 6;

// Second-order literal: pred_var indexes MetaRule::second_order_vars, args are
// first-order variable indices (0 = A, 1 = B, 2 = C).
struct MetaLiteral {
  int pred_var = 0;
  std::vector<int> args;
};

// metarule([P,Q,R], [P,A,B], [[Q,A,C],[R,C,B]]) and friends. The head
// predicate variable is always second_order_vars[0].
struct MetaRule {
  MetaRuleId id;
  std::string name;
  std::vector<std::string> second_order_vars;
  MetaLiteral head;
  std::vector<MetaLiteral> body;
  int num_vars = 2;

  // Arity every symbol filling second-order variable `var` must have.
  int arity_of(int var) const;
  std::string to_string() const;
};

// The six-rule pool, in pool order.
const std::array<MetaRule, kPoolSize>& metarule_pool();
const MetaRule& metarule(MetaRuleId id);
std::optional<MetaRuleId> metarule_from_name(std::string_view name);
std::string_view metarule_name(MetaRuleId id);

// Subset of the pool as a bitmask (bit i = pool index i).
class MetaRuleSet {
 public:
  constexpr MetaRuleSet() = default;
  constexpr explicit MetaRuleSet(std::uint8_t bits) : bits_(bits & 0x3F) {}
  MetaRuleSet(std::initializer_list<MetaRuleId> ids) {
    for (auto id : ids) insert(id);
  }

  static constexpr MetaRuleSet all() { return MetaRuleSet(0x3F); }
  static MetaRuleSet from_selection(const std::array<bool, kPoolSize>& selection);
  // "Identity,Recursion" or "{Identity, Recursion}"; throws ConfigError.
  static MetaRuleSet parse(std::string_view text);

  constexpr bool contains(MetaRuleId id) const { return (bits_ >> static_cast<int>(id)) & 1U; }
  void insert(MetaRuleId id) { bits_ |= static_cast<std::uint8_t>(1U << static_cast<int>(id)); }
  constexpr bool empty() const { return bits_ == 0; }
  int size() const;
  constexpr std::uint8_t bits() const { return bits_; }
  constexpr bool is_subset_of(MetaRuleSet o) const { return (bits_ & ~o.bits_) == 0; }
  std::vector<MetaRuleId> ids() const;

  // "{Identity, Recursion}"
  std::string to_string() const;

  friend constexpr bool operator==(MetaRuleSet, MetaRuleSet) = default;

 private:
  std::uint8_t bits_ = 0;
};

}  // namespace metasel::logic
