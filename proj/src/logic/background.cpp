#include "metasel/logic/background.hpp"

#include <algorithm>

#include "metasel/logic/mario.hpp"
#include "metasel/util/error.hpp"

namespace metasel::logic {
namespace {

// ---- Mario ---------------------------------------------------------------

template <int DRow, int DCol>
std::optional<Term> mario_move(const Term& in, const Term&) {
  if (!in.is_list() || in.list_length() < 2) return std::nullopt;
  const auto a = MarioState::from_term(in[0]);
  const auto b = MarioState::from_term(in[1]);
  if (!a || !b || !a->same_world(*b)) return std::nullopt;
  if (!(b->mario == a->mario + GridPos{DRow, DCol})) return std::nullopt;
  return in.list_suffix(1);
}

std::optional<Term> mario_jump(const Term& in, const Term&) {
  if (!in.is_list() || in.list_length() < 2) return std::nullopt;
  const auto a = MarioState::from_term(in[0]);
  const auto b = MarioState::from_term(in[1]);
  if (!a || !b || !a->same_world(*b)) return std::nullopt;
  const int dr = b->mario.row - a->mario.row;
  const int dc = b->mario.col - a->mario.col;
  if ((dr != 1 && dr != -1) || (dc != 1 && dc != -1)) return std::nullopt;
  return in.list_suffix(1);
}

std::optional<Term> mario_far(const Term& in, const Term&) {
  if (!in.is_list() || in.list_length() != 2) return std::nullopt;
  const auto a = MarioState::from_term(in[0]);
  const auto b = MarioState::from_term(in[1]);
  if (!a || !b || !a->same_world(*b)) return std::nullopt;
  if (manhattan(b->mario, b->target) <= manhattan(a->mario, a->target)) return std::nullopt;
  return in[1];
}

std::optional<Term> mario_terminate(const Term& in, const Term&) {
  if (!in.is_list() || in.list_length() != 1) return std::nullopt;
  const auto s = MarioState::from_term(in[0]);
  if (!s || !(s->mario == s->target)) return std::nullopt;
  return in[0];
}

template <TargetType T>
bool mario_type_is(const Term& t) {
  const auto s = MarioState::from_term(t);
  return s && s->type == T;
}

template <Scene S>
bool mario_scene_is(const Term& t) {
  const auto s = MarioState::from_term(t);
  return s && s->scene == S;
}

// ---- MNIST ---------------------------------------------------------------

bool int_prefix(const Term& in, std::size_t n) {
  if (!in.is_list() || in.list_length() < n) return false;
  for (std::size_t i = 0; i < n; ++i) {
    if (in[i].kind() != TermKind::Int) return false;
  }
  return true;
}

template <bool Multiply>
std::optional<Term> mnist_fold(const Term& in, const Term&) {
  if (!int_prefix(in, 2)) return std::nullopt;
  const auto x = in[0].int_value();
  const auto y = in[1].int_value();
  std::vector<Term> items;
  items.reserve(in.list_length() - 1);
  items.push_back(Term::integer(Multiply ? x * y : x + y));
  for (std::size_t i = 2; i < in.list_length(); ++i) items.push_back(in[i]);
  return Term::list(std::move(items));
}

std::optional<Term> mnist_eq(const Term& in, const Term&) {
  if (!in.is_list() || in.list_length() != 1) return std::nullopt;
  return in[0];
}

std::optional<Term> mnist_head(const Term& in, const Term&) {
  if (!in.is_list() || in.list_length() == 0) return std::nullopt;
  return in[0];
}

// less([X,Y|T],[Y|T]) iff X<Y; less([X],[Z]) holds for any bound singleton
// [Z] (the transition from the sequence to its tag). The singleton case never
// generates an output.
template <bool Ascending>
std::optional<Term> mnist_order(const Term& in, const Term& out) {
  if (!in.is_list()) return std::nullopt;
  if (in.list_length() == 1) {
    if (in[0].kind() != TermKind::Int) return std::nullopt;
    if (!out.empty() && out.is_list() && out.list_length() == 1) return out;
    return std::nullopt;
  }
  if (!int_prefix(in, 2)) return std::nullopt;
  const auto x = in[0].int_value();
  const auto y = in[1].int_value();
  if (Ascending ? !(x < y) : !(x > y)) return std::nullopt;
  return in.list_suffix(1);
}

bool mnist_zero(const Term& t) {
  return t.is_list() && t.list_length() == 1 && t[0].kind() == TermKind::Int && t[0].int_value() == 0;
}

bool mnist_empty(const Term& t) { return t.is_list() && t.list_length() == 0; }

Builtin binary(std::string name, BinaryFn fn) { return Builtin{std::move(name), 2, fn, nullptr}; }
Builtin unary(std::string name, TestFn fn) { return Builtin{std::move(name), 1, nullptr, fn}; }

}  // namespace

std::string_view to_string(DomainKind kind) { return kind == DomainKind::Mario ? "mario" : "mnist"; }

DomainKind domain_kind_from_string(std::string_view name) {
  if (name == "mario") return DomainKind::Mario;
  if (name == "mnist") return DomainKind::Mnist;
  throw ConfigError("unknown domain: " + std::string(name));
}

BackgroundDomain::BackgroundDomain(DomainKind kind, std::vector<Builtin> predicates,
                                   std::vector<std::string> monadic_tests)
    : kind_(kind), predicates_(std::move(predicates)), monadic_tests_(std::move(monadic_tests)) {
  std::sort(predicates_.begin(), predicates_.end(), [](const Builtin& a, const Builtin& b) { return a.name < b.name; });
  std::sort(monadic_tests_.begin(), monadic_tests_.end());
  for (const auto& p : predicates_) {
    if (p.arity == 2) binary_names_.push_back(p.name);
  }
}

const Builtin* BackgroundDomain::find(std::string_view name) const {
  const auto it = std::lower_bound(predicates_.begin(), predicates_.end(), name,
                                   [](const Builtin& b, std::string_view n) { return b.name < n; });
  return it != predicates_.end() && it->name == name ? &*it : nullptr;
}

bool BackgroundDomain::is_monadic_test(std::string_view name) const {
  return std::binary_search(monadic_tests_.begin(), monadic_tests_.end(), name);
}

const BackgroundDomain& mario_domain() {
  static const BackgroundDomain domain(
      DomainKind::Mario,
      {binary("right", &mario_move<0, 1>), binary("left", &mario_move<0, -1>), binary("up", &mario_move<1, 0>),
       binary("down", &mario_move<-1, 0>), binary("jump", &mario_jump), binary("far", &mario_far),
       binary("terminate", &mario_terminate), unary("bomb", &mario_type_is<TargetType::Bomb>),
       unary("coin", &mario_type_is<TargetType::Coin>), unary("sea", &mario_scene_is<Scene::Sea>),
       unary("flower", &mario_scene_is<Scene::Flower>), unary("chess", &mario_scene_is<Scene::Chess>)},
      {"bomb", "coin", "sea", "flower", "chess"});
  return domain;
}

const BackgroundDomain& mnist_domain() {
  static const BackgroundDomain domain(
      DomainKind::Mnist,
      {binary("add", &mnist_fold<false>), binary("multi", &mnist_fold<true>), binary("eq", &mnist_eq),
       binary("head", &mnist_head), binary("less", &mnist_order<true>), binary("more", &mnist_order<false>),
       unary("zero", &mnist_zero), unary("empty", &mnist_empty)},
      {"zero", "empty"});
  return domain;
}

const BackgroundDomain& domain_for(DomainKind kind) {
  return kind == DomainKind::Mario ? mario_domain() : mnist_domain();
}

std::vector<Substitution> eval_background(const BackgroundDomain& domain, std::string_view pred,
                                          std::span<const Term> args) {
  const Builtin* b = domain.find(pred);
  if (!b) throw UnknownPredicate("unknown background predicate: " + std::string(pred));
  if (static_cast<int>(args.size()) != b->arity) {
    throw ArityMismatch(std::string(pred) + "/" + std::to_string(b->arity) + " called with " +
                        std::to_string(args.size()) + " arguments");
  }
  if (!args[0].is_ground()) return {};
  if (b->arity == 1) {
    if (b->test(args[0])) return {Substitution{}};
    return {};
  }
  const Term out = args[1].is_var() ? Term{} : args[1];
  const auto value = b->binary(args[0], out);
  if (!value) return {};
  auto s = unify(args[1], *value);
  if (!s) return {};
  return {std::move(*s)};
}

}  // namespace metasel::logic
