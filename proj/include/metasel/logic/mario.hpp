#pragma once

#include <array>
#include <optional>
#include <string_view>

#include "metasel/logic/term.hpp"

namespace metasel::logic {

inline constexpr int kGridSize = 3;

enum class TargetType : std::uint8_t { Coin, Bomb };
enum class Scene : std::uint8_t { Sea, Flower, Chess };

inline constexpr std::array<std::string_view, 2> kTargetTypeNames{"coin", "bomb"};
inline constexpr std::array<std::string_view, 3> kSceneNames{"sea", "flower", "chess"};
inline constexpr std::array<std::string_view, 7> kFrameNames{
    "brick1", "brick2", "brick3", "green_panel", "white_panel", "glass", "concrete"};

// Row 0 is the bottom of the map, so "up" increments the row.
struct GridPos {
  int row = 0;
  int col = 0;
  friend bool operator==(const GridPos&, const GridPos&) = default;
  bool on_grid() const { return row >= 0 && row < kGridSize && col >= 0 && col < kGridSize; }
};

inline GridPos operator+(GridPos a, GridPos b) { return {a.row + b.row, a.col + b.col}; }
inline int manhattan(GridPos a, GridPos b) {
  return (a.row > b.row ? a.row - b.row : b.row - a.row) + (a.col > b.col ? a.col - b.col : b.col - a.col);
}

// One symbolic Mario frame: s(MarioRow, MarioCol, TargetRow, TargetCol, Type, Scene, Frame).
struct MarioState {
  GridPos mario;
  GridPos target;
  TargetType type = TargetType::Coin;
  Scene scene = Scene::Sea;
  int frame = 0;

  friend bool operator==(const MarioState&, const MarioState&) = default;

  // Equal in everything except Mario's own position.
  bool same_world(const MarioState& o) const {
    return target == o.target && type == o.type && scene == o.scene && frame == o.frame;
  }

  Term to_term() const;
  static std::optional<MarioState> from_term(const Term& t);
};

}  // namespace metasel::logic
