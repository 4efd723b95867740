#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace metasel::logic {

using VarId = std::uint32_t;

enum class TermKind : std::uint8_t { Var, Int, Atom, List, Struct };

// Immutable first-order term with shared structure. Copies are cheap (one
// reference count); equality is structural.
class Term {
 public:
  Term() = default;  // the empty term; only meaningful as "no value"

  static Term var(VarId id);
  static Term integer(std::int64_t value);
  static Term atom(std::string name);
  static Term list(std::vector<Term> items);
  static Term compound(std::string functor, std::vector<Term> args);

  bool empty() const { return node_ == nullptr; }
  TermKind kind() const;
  bool is_var() const { return !empty() && kind() == TermKind::Var; }
  bool is_list() const { return !empty() && kind() == TermKind::List; }
  bool is_ground() const;

  VarId var_id() const;
  std::int64_t int_value() const;
  // Atom name or compound functor.
  const std::string& name() const;
  // List items or compound arguments.
  std::span<const Term> items() const;
  std::size_t arity() const { return items().size(); }
  const Term& operator[](std::size_t i) const { return items()[i]; }

  // Number of list items for lists, 0 otherwise.
  std::size_t list_length() const { return is_list() ? items().size() : 0; }

  // Items [from, end) as a new list.
  Term list_suffix(std::size_t from) const;

  bool same_node(const Term& other) const { return node_ == other.node_; }

  friend bool operator==(const Term& a, const Term& b);
  friend bool operator!=(const Term& a, const Term& b) { return !(a == b); }
  // Total order: kind, then value/name, then children lexicographically.
  friend bool operator<(const Term& a, const Term& b);

  // Prolog-style text: f([1,2],3), s(0,1,coin), _G12 for variables.
  std::string to_string() const;

 private:
  struct Node;
  explicit Term(std::shared_ptr<const Node> node) : node_(std::move(node)) {}
  std::shared_ptr<const Node> node_;
};

using Substitution = std::map<VarId, Term>;

// Applies the substitution to fixpoint.
Term apply(const Term& t, const Substitution& s);

// Most general extension of `bindings` that makes a and b equal, with occurs
// check; nullopt when none exists.
std::optional<Substitution> unify(const Term& a, const Term& b, Substitution bindings = {});

bool occurs_in(VarId v, const Term& t, const Substitution& s);

}  // namespace metasel::logic
