#include "metasel/corpus/tasks.hpp"

#include <algorithm>

#include "metasel/logic/parse.hpp"
#include "metasel/util/config.hpp"
#include "metasel/util/error.hpp"

namespace metasel::corpus {
namespace {

using logic::MetaRuleId;

constexpr std::string_view kMoveNames[] = {"right", "left", "up", "down", "", "", "", ""};

TaskSpec make(std::string id, DomainKind domain, TaskFamily family, std::string rule, MetaRuleSet handmade,
              std::vector<int> lengths) {
  TaskSpec t;
  t.id = std::move(id);
  t.domain = domain;
  t.family = family;
  t.rule_text = std::move(rule);
  t.handmade = handmade;
  t.sufficient_sets = {handmade};
  t.case_lengths = std::move(lengths);
  return t;
}

std::string s(Move m) { return std::string(move_predicate(m)); }

TaskSpec priority(Move primary, Move secondary, bool unseen) {
  const std::string rule = "f(A,B):-" + s(primary) + "(A,C),f(C,B).\nf(A,B):-f_1(A,B).\nf_1(A,B):-" + s(secondary) +
                           "(A,C),f_1(C,B).\nf_1(A,B):-terminate(A,B).\n";
  TaskSpec t = make("mario_" + s(primary) + "_priority", DomainKind::Mario, TaskFamily::Priority, rule,
                    {MetaRuleId::Identity, MetaRuleId::Recursion}, {2, 3, 4, 5});
  t.primary = primary;
  t.secondary = secondary;
  t.unseen = unseen;
  return t;
}

TaskSpec just(Move m, bool unseen) {
  const std::string d = s(m);
  const std::string rule = "f(A,B):-" + d + "(A,C),terminate(C,B).\nf(A,B):-" + d + "(A,C),f_1(C,B).\nf_1(A,B):-" + d +
                           "(A,C),terminate(C,B).\n";
  TaskSpec t = make("mario_just_" + d, DomainKind::Mario, TaskFamily::Just, rule, {MetaRuleId::Chain}, {2, 3});
  t.sufficient_sets.push_back({MetaRuleId::Identity, MetaRuleId::Recursion});
  t.primary = m;
  t.unseen = unseen;
  return t;
}

TaskSpec one_step(Move m, bool unseen) {
  const std::string d = s(m);
  TaskSpec t = make("mario_" + d + "_one_step", DomainKind::Mario, TaskFamily::OneStep,
                    "f(A,B):-" + d + "(A,C),terminate(C,B).\n", {MetaRuleId::Chain}, {2});
  t.primary = m;
  t.unseen = unseen;
  return t;
}

TaskSpec fold_priority(bool multiply_first) {
  const std::string a = multiply_first ? "multi" : "add";
  const std::string b = multiply_first ? "add" : "multi";
  TaskSpec t = make("mnist_" + a + "_priority", DomainKind::Mnist, TaskFamily::OpPriority,
                    "f(A,B):-" + a + "(A,C),f(C,B).\nf(A,B):-f_1(A,B).\nf_1(A,B):-" + b +
                        "(A,C),f_1(C,B).\nf_1(A,B):-eq(A,B).\n",
                    {MetaRuleId::Identity, MetaRuleId::Recursion}, {3, 4, 5});
  t.multiply = multiply_first;
  t.shape = ResultShape::IntLast;
  return t;
}

TaskSpec cumulative(bool multiply) {
  const std::string op = multiply ? "multi" : "add";
  TaskSpec t = make(std::string("mnist_cumulative_") + (multiply ? "product" : "sum"), DomainKind::Mnist,
                    TaskFamily::Cumulative, "f(A,B):-" + op + "(A,C),f(C,B).\nf(A,B):-eq(A,B).\n",
                    {MetaRuleId::Identity, MetaRuleId::Recursion}, {3, 4, 5});
  t.multiply = multiply;
  t.shape = ResultShape::IntLast;
  return t;
}

TaskSpec reverse_cumulative(bool multiply) {
  const std::string op = multiply ? "multi" : "add";
  TaskSpec t = make(std::string("mnist_reverse_cumulative_") + (multiply ? "product" : "sum"), DomainKind::Mnist,
                    TaskFamily::ReverseCumulative,
                    "f(A,B):-f_1(B,A).\nf_1(A,B):-" + op + "(A,C),f_1(C,B).\nf_1(A,B):-eq(A,B).\n",
                    {MetaRuleId::Inverse, MetaRuleId::Recursion}, {3, 4, 5});
  t.sufficient_sets.push_back({MetaRuleId::Identity, MetaRuleId::Inverse, MetaRuleId::Recursion});
  t.multiply = multiply;
  t.shape = ResultShape::IntFirst;
  return t;
}

std::vector<TaskSpec> build() {
  std::vector<TaskSpec> out;
  out.push_back(priority(Move::Right, Move::Up, false));
  out.push_back(priority(Move::Up, Move::Right, false));
  out.push_back(priority(Move::Left, Move::Up, false));
  out.push_back(priority(Move::Down, Move::Right, true));
  out.push_back(just(Move::Up, false));
  out.push_back(just(Move::Down, false));
  out.push_back(just(Move::Left, false));
  out.push_back(just(Move::Right, true));
  out.push_back(one_step(Move::Right, false));
  out.push_back(one_step(Move::Down, false));
  out.push_back(one_step(Move::Left, false));
  out.push_back(one_step(Move::Up, true));
  out.push_back(make("mario_bomb_far", DomainKind::Mario, TaskFamily::BombFar, "f(A,B):-far(A,B),bomb(B).\n",
                     {MetaRuleId::Postcon}, {2}));
  out.push_back(make("mario_flower", DomainKind::Mario, TaskFamily::Flower,
                     "f(A,B):-right(A,C),f(C,B).\nf(A,B):-f_1(A,B),flower(B).\nf_1(A,B):-up(A,C),f_1(C,B).\n"
                     "f_1(A,B):-terminate(A,B),flower(B).\n",
                     {MetaRuleId::Postcon, MetaRuleId::Chain}, {2, 3, 4, 5}));
  out.push_back(make("mario_chess_jump", DomainKind::Mario, TaskFamily::ChessJump,
                     "f(A,B):-terminate(A,B),chess(B).\nf(A,B):-jump(A,C),f(C,B).\n",
                     {MetaRuleId::Postcon, MetaRuleId::Chain}, {2, 3, 4, 5}));

  out.push_back(fold_priority(false));
  out.push_back(fold_priority(true));
  out.push_back(cumulative(false));
  out.push_back(cumulative(true));
  out.push_back(reverse_cumulative(false));
  out.push_back(reverse_cumulative(true));
  TaskSpec inc = make("mnist_increasing_sequence", DomainKind::Mnist, TaskFamily::Increasing,
                      "f(A,B):-less(A,C),f(C,B).\nf(A,B):-less(A,B),zero(B).\n",
                      {MetaRuleId::Postcon, MetaRuleId::Recursion}, {3, 4, 5});
  inc.shape = ResultShape::TagLast;
  out.push_back(inc);
  TaskSpec dec = make("mnist_decreasing_sequence", DomainKind::Mnist, TaskFamily::Decreasing,
                      "f(A,B):-f_1(B,A).\nf_1(A,B):-more(A,C),f_1(C,B).\nf_1(A,B):-more(A,B),zero(B).\n",
                      {MetaRuleId::Inverse, MetaRuleId::Postcon, MetaRuleId::Recursion}, {3, 4, 5});
  dec.shape = ResultShape::TagFirst;
  out.push_back(dec);

  for (auto& t : out) {
    // Where Chain and Recursion both fit a clause, attribute it to whichever
    // the task's handmade set contains.
    t.ground_truth = logic::parse_hypothesis(t.rule_text, t.domain_ref(), "f", t.handmade);
  }
  return out;
}

}  // namespace

std::string_view move_predicate(Move m) { return kMoveNames[static_cast<int>(m)]; }

int TaskSpec::max_case_length() const { return *std::max_element(case_lengths.begin(), case_lengths.end()); }

const std::vector<TaskSpec>& task_registry() {
  static const std::vector<TaskSpec> registry = build();
  return registry;
}

const TaskSpec& find_task(std::string_view id) {
  const TaskSpec* hit = nullptr;
  for (const auto& t : task_registry()) {
    if (t.id == id) return t;
  }
  for (const auto& t : task_registry()) {
    const std::string_view full(t.id);
    const auto cut = full.find('_');
    if (cut != std::string_view::npos && full.size() == cut + 1 + id.size() && full.ends_with(id)) {
      if (hit) throw ConfigError("ambiguous task id: " + std::string(id));
      hit = &t;
    }
  }
  if (!hit) throw ConfigError("unknown task: " + std::string(id));
  return *hit;
}

std::vector<const TaskSpec*> tasks_for(DomainKind domain, bool include_unseen) {
  std::vector<const TaskSpec*> out;
  for (const auto& t : task_registry()) {
    if (t.domain == domain && (include_unseen || !t.unseen)) out.push_back(&t);
  }
  return out;
}

std::vector<const TaskSpec*> resolve_tasks(std::string_view list) {
  std::vector<const TaskSpec*> out;
  auto add = [&](const TaskSpec* t) {
    if (std::find(out.begin(), out.end(), t) == out.end()) out.push_back(t);
  };
  for (const auto& item : split_list(list, ',')) {
    if (item == "all" || item == "train" || item == "unseen") {
      for (const auto& t : task_registry()) {
        if (item == "all" || (item == "train") != t.unseen) add(&t);
      }
    } else if (item == "mario" || item == "mnist") {
      for (const auto* t : tasks_for(logic::domain_kind_from_string(item), true)) add(t);
    } else if (item == "mario_train" || item == "mnist_train") {
      for (const auto* t : tasks_for(item == "mario_train" ? DomainKind::Mario : DomainKind::Mnist, false)) add(t);
    } else {
      add(&find_task(item));
    }
  }
  return out;
}

}  // namespace metasel::corpus
