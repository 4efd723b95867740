#pragma once

#include <string>
#include <vector>

#include "metasel/logic/clause.hpp"
#include "metasel/logic/mario.hpp"
#include "metasel/logic/prover.hpp"
#include "metasel/logic/term.hpp"

namespace testing {

using namespace metasel::logic;

inline Term ints(std::initializer_list<int> xs) {
  std::vector<Term> items;
  for (int x : xs) items.push_back(Term::integer(x));
  return Term::list(std::move(items));
}

// Mario path from `start` following moves ('R','L','U','D' or diagonals
// "UR","UL","DR","DL" as single chars 'a','b','c','d').
inline std::vector<MarioState> walk(MarioState start, const std::string& moves) {
  std::vector<MarioState> out{start};
  for (char m : moves) {
    MarioState s = out.back();
    switch (m) {
      case 'R': s.mario.col += 1; break;
      case 'L': s.mario.col -= 1; break;
      case 'U': s.mario.row += 1; break;
      case 'D': s.mario.row -= 1; break;
      case 'a': s.mario.row += 1; s.mario.col += 1; break;
      case 'b': s.mario.row += 1; s.mario.col -= 1; break;
      case 'c': s.mario.row -= 1; s.mario.col += 1; break;
      case 'd': s.mario.row -= 1; s.mario.col -= 1; break;
      default: break;
    }
    out.push_back(s);
  }
  return out;
}

inline MarioState state(int mr, int mc, int tr, int tc, TargetType type = TargetType::Coin,
                        Scene scene = Scene::Sea, int frame = 0) {
  return MarioState{{mr, mc}, {tr, tc}, type, scene, frame};
}

inline Term mario_atom(const std::vector<MarioState>& path) {
  std::vector<Term> items;
  for (const auto& s : path) items.push_back(s.to_term());
  return make_atom("f", {Term::list(items), path.back().to_term()});
}

// Path from `start` to its target via `moves`, with the target set to
// wherever the walk ends.
inline Term mario_case(int mr, int mc, const std::string& moves, Scene scene = Scene::Sea,
                       TargetType type = TargetType::Coin) {
  auto path = walk(state(mr, mc, 0, 0, type, scene), moves);
  const GridPos end = path.back().mario;
  for (auto& s : path) s.target = end;
  return mario_atom(path);
}

inline Clause clause_of(const std::string& head, std::vector<Literal> body) {
  Clause c;
  c.head = Literal{head, {0, 1}};
  c.body = std::move(body);
  int vars = 2;
  for (const auto& l : c.body)
    for (int a : l.args) vars = std::max(vars, a + 1);
  c.num_vars = vars;
  for (const auto& l : c.body) c.guarded.push_back(l.pred == head);
  return c;
}

}  // namespace testing
