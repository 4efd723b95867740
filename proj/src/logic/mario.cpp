#include "metasel/logic/mario.hpp"

#include <algorithm>
#include <string>

namespace metasel::logic {
namespace {

template <std::size_t N>
std::optional<int> index_of(const std::array<std::string_view, N>& names, const Term& t) {
  if (t.empty() || t.kind() != TermKind::Atom) return std::nullopt;
  const auto it = std::find(names.begin(), names.end(), t.name());
  if (it == names.end()) return std::nullopt;
  return static_cast<int>(it - names.begin());
}

std::optional<int> coordinate(const Term& t) {
  if (t.empty() || t.kind() != TermKind::Int) return std::nullopt;
  const auto v = t.int_value();
  if (v < 0 || v >= kGridSize) return std::nullopt;
  return static_cast<int>(v);
}

}  // namespace

Term MarioState::to_term() const {
  return Term::compound("s", {Term::integer(mario.row), Term::integer(mario.col), Term::integer(target.row),
                              Term::integer(target.col),
                              Term::atom(std::string(kTargetTypeNames[static_cast<int>(type)])),
                              Term::atom(std::string(kSceneNames[static_cast<int>(scene)])),
                              Term::atom(std::string(kFrameNames[static_cast<std::size_t>(frame)]))});
}

std::optional<MarioState> MarioState::from_term(const Term& t) {
  if (t.empty() || t.kind() != TermKind::Struct || t.name() != "s" || t.arity() != 7) return std::nullopt;
  const auto mr = coordinate(t[0]);
  const auto mc = coordinate(t[1]);
  const auto tr = coordinate(t[2]);
  const auto tc = coordinate(t[3]);
  const auto ty = index_of(kTargetTypeNames, t[4]);
  const auto sc = index_of(kSceneNames, t[5]);
  const auto fr = index_of(kFrameNames, t[6]);
  if (!mr || !mc || !tr || !tc || !ty || !sc || !fr) return std::nullopt;
  MarioState s;
  s.mario = {*mr, *mc};
  s.target = {*tr, *tc};
  s.type = static_cast<TargetType>(*ty);
  s.scene = static_cast<Scene>(*sc);
  s.frame = *fr;
  return s;
}

}  // namespace metasel::logic
