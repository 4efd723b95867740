#include "metasel/logic/term.hpp"

#include <cassert>
#include <sstream>
#include <stdexcept>

namespace metasel::logic {

struct Term::Node {
  TermKind kind;
  bool ground;
  std::int64_t value;  // Int value or Var id
  std::string name;
  std::vector<Term> children;
};

namespace {

bool all_ground(const std::vector<Term>& items) {
  for (const auto& t : items) {
    if (!t.is_ground()) return false;
  }
  return true;
}

}  // namespace

Term Term::var(VarId id) {
  return Term(std::make_shared<const Node>(Node{TermKind::Var, false, id, {}, {}}));
}

Term Term::integer(std::int64_t value) {
  return Term(std::make_shared<const Node>(Node{TermKind::Int, true, value, {}, {}}));
}

Term Term::atom(std::string name) {
  return Term(std::make_shared<const Node>(Node{TermKind::Atom, true, 0, std::move(name), {}}));
}

Term Term::list(std::vector<Term> items) {
  const bool g = all_ground(items);
  return Term(std::make_shared<const Node>(Node{TermKind::List, g, 0, {}, std::move(items)}));
}

Term Term::compound(std::string functor, std::vector<Term> args) {
  const bool g = all_ground(args);
  return Term(std::make_shared<const Node>(Node{TermKind::Struct, g, 0, std::move(functor), std::move(args)}));
}

TermKind Term::kind() const {
  assert(node_);
  return node_->kind;
}

bool Term::is_ground() const { return node_ && node_->ground; }

VarId Term::var_id() const {
  if (kind() != TermKind::Var) throw std::logic_error("Term::var_id on non-variable");
  return static_cast<VarId>(node_->value);
}

std::int64_t Term::int_value() const {
  if (kind() != TermKind::Int) throw std::logic_error("Term::int_value on non-integer");
  return node_->value;
}

const std::string& Term::name() const {
  assert(node_);
  return node_->name;
}

std::span<const Term> Term::items() const {
  if (!node_) return {};
  return node_->children;
}

Term Term::list_suffix(std::size_t from) const {
  const auto its = items();
  return list(std::vector<Term>(its.begin() + static_cast<std::ptrdiff_t>(std::min(from, its.size())), its.end()));
}

bool operator==(const Term& a, const Term& b) {
  if (a.node_ == b.node_) return true;
  if (!a.node_ || !b.node_) return false;
  const auto& x = *a.node_;
  const auto& y = *b.node_;
  if (x.kind != y.kind || x.value != y.value || x.name != y.name || x.children.size() != y.children.size()) {
    return false;
  }
  for (std::size_t i = 0; i < x.children.size(); ++i) {
    if (!(x.children[i] == y.children[i])) return false;
  }
  return true;
}

bool operator<(const Term& a, const Term& b) {
  if (a.node_ == b.node_) return false;
  if (!a.node_) return true;
  if (!b.node_) return false;
  const auto& x = *a.node_;
  const auto& y = *b.node_;
  if (x.kind != y.kind) return x.kind < y.kind;
  if (x.value != y.value) return x.value < y.value;
  if (x.name != y.name) return x.name < y.name;
  const std::size_t n = std::min(x.children.size(), y.children.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (x.children[i] < y.children[i]) return true;
    if (y.children[i] < x.children[i]) return false;
  }
  return x.children.size() < y.children.size();
}

namespace {

void write(std::ostream& out, const Term& t) {
  if (t.empty()) {
    out << "<empty>";
    return;
  }
  switch (t.kind()) {
    case TermKind::Var:
      out << "_G" << t.var_id();
      break;
    case TermKind::Int:
      out << t.int_value();
      break;
    case TermKind::Atom:
      out << t.name();
      break;
    case TermKind::List: {
      out << '[';
      bool first = true;
      for (const auto& item : t.items()) {
        if (!first) out << ',';
        first = false;
        write(out, item);
      }
      out << ']';
      break;
    }
    case TermKind::Struct: {
      out << t.name() << '(';
      bool first = true;
      for (const auto& arg : t.items()) {
        if (!first) out << ',';
        first = false;
        write(out, arg);
      }
      out << ')';
      break;
    }
  }
}

Term walk(const Term& t, const Substitution& s) {
  Term cur = t;
  while (cur.is_var()) {
    const auto it = s.find(cur.var_id());
    if (it == s.end()) break;
    cur = it->second;
  }
  return cur;
}

bool unify_into(const Term& a, const Term& b, Substitution& s) {
  const Term x = walk(a, s);
  const Term y = walk(b, s);
  if (x.same_node(y)) return true;
  if (x.is_var() && y.is_var() && x.var_id() == y.var_id()) return true;
  if (x.is_var()) {
    if (occurs_in(x.var_id(), y, s)) return false;
    s.emplace(x.var_id(), y);
    return true;
  }
  if (y.is_var()) {
    if (occurs_in(y.var_id(), x, s)) return false;
    s.emplace(y.var_id(), x);
    return true;
  }
  if (x.kind() != y.kind()) return false;
  switch (x.kind()) {
    case TermKind::Int:
      return x.int_value() == y.int_value();
    case TermKind::Atom:
      return x.name() == y.name();
    case TermKind::Struct:
      if (x.name() != y.name()) return false;
      [[fallthrough]];
    case TermKind::List: {
      const auto xs = x.items();
      const auto ys = y.items();
      if (xs.size() != ys.size()) return false;
      for (std::size_t i = 0; i < xs.size(); ++i) {
        if (!unify_into(xs[i], ys[i], s)) return false;
      }
      return true;
    }
    case TermKind::Var:
      break;
  }
  return false;
}

}  // namespace

std::string Term::to_string() const {
  std::ostringstream out;
  write(out, *this);
  return out.str();
}

bool occurs_in(VarId v, const Term& t, const Substitution& s) {
  const Term x = walk(t, s);
  if (x.is_ground()) return false;
  if (x.is_var()) return x.var_id() == v;
  for (const auto& c : x.items()) {
    if (occurs_in(v, c, s)) return true;
  }
  return false;
}

Term apply(const Term& t, const Substitution& s) {
  const Term x = walk(t, s);
  if (x.empty() || x.is_ground() || x.is_var()) return x;
  std::vector<Term> items;
  items.reserve(x.items().size());
  for (const auto& c : x.items()) items.push_back(apply(c, s));
  return x.kind() == TermKind::List ? Term::list(std::move(items)) : Term::compound(x.name(), std::move(items));
}

std::optional<Substitution> unify(const Term& a, const Term& b, Substitution bindings) {
  if (!unify_into(a, b, bindings)) return std::nullopt;
  return bindings;
}

}  // namespace metasel::logic
