#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "metasel/logic/background.hpp"
#include "metasel/logic/clause.hpp"
#include "metasel/logic/metarule.hpp"

namespace metasel::corpus {

using logic::DomainKind;
using logic::MetaRuleSet;

inline constexpr std::string_view kRegistryVersion = "metasel-tasks/1";

enum class TaskFamily : std::uint8_t {
  Priority,           // primary moves, then secondary moves, then stop on target
  Just,               // 1 or 2 moves in one direction
  OneStep,            // exactly one move
  BombFar,            // one step away from a bomb
  Flower,             // right-priority on the flower scene
  ChessJump,          // diagonal walk on the chess scene
  OpPriority,         // op1 folded first, then op2, result last
  Cumulative,         // fold one op, result last
  ReverseCumulative,  // fold one op, result first
  Increasing,         // strictly increasing list, tag [0] last
  Decreasing,         // strictly decreasing list, tag [0] first
};

// Mario move directions as (row, col) deltas; row 0 is the bottom.
enum class Move : std::uint8_t { Right, Left, Up, Down, UpRight, UpLeft, DownRight, DownLeft };
inline constexpr std::size_t kMoveCount = 8;
std::string_view move_predicate(Move m);  // right/left/up/down; diagonals have none

// Where the result sits in an MNIST example atom.
enum class ResultShape : std::uint8_t { None, IntLast, IntFirst, TagLast, TagFirst };

struct TaskSpec {
  std::string id;
  DomainKind domain = DomainKind::Mario;
  TaskFamily family = TaskFamily::Priority;
  std::string rule_text;
  logic::Hypothesis ground_truth;
  MetaRuleSet handmade;
  // Meta-rule subsets known to admit a consistent program.
  std::vector<MetaRuleSet> sufficient_sets;
  std::vector<int> case_lengths;
  bool unseen = false;

  Move primary = Move::Right;
  Move secondary = Move::Up;
  bool multiply = false;  // first (or only) fold is multi
  ResultShape shape = ResultShape::None;

  const logic::BackgroundDomain& domain_ref() const { return logic::domain_for(domain); }
  int max_case_length() const;
};

// Every task, in a fixed order: Mario first, then MNIST.
const std::vector<TaskSpec>& task_registry();

// Accepts full ids ("mario_down_priority") and unambiguous short ids
// ("down_priority"). Throws ConfigError.
const TaskSpec& find_task(std::string_view id);

// Comma separated ids; "all", "train", "unseen", "mario", "mnist", "mario_train"
// and "mnist_train" expand to registry groups.
std::vector<const TaskSpec*> resolve_tasks(std::string_view list);

std::vector<const TaskSpec*> tasks_for(DomainKind domain, bool include_unseen);

}  // namespace metasel::corpus
