#include "metasel/corpus/cases.hpp"

#include <algorithm>
#include <array>
#include <set>
#include <stdexcept>

#include "metasel/logic/mario.hpp"
#include "metasel/util/error.hpp"
#include "metasel/util/rng.hpp"

namespace metasel::corpus {
namespace {

using logic::GridPos;
using logic::MarioState;
using logic::Scene;
using logic::TargetType;

constexpr std::array<GridPos, kMoveCount> kDelta{
    GridPos{0, 1}, GridPos{0, -1}, GridPos{1, 0}, GridPos{-1, 0},
    GridPos{1, 1}, GridPos{1, -1}, GridPos{-1, 1}, GridPos{-1, -1}};

constexpr int kTypes = 2;
constexpr int kScenes = 3;
constexpr int kFrames = static_cast<int>(logic::kFrameNames.size());
constexpr int kDigits = 10;

// ---- Mario -----------------------------------------------------------------

Term mario_atom(const std::vector<MarioState>& states) {
  std::vector<Term> items;
  items.reserve(states.size());
  for (const auto& s : states) items.push_back(s.to_term());
  return logic::make_atom("f", {Term::list(std::move(items)), states.back().to_term()});
}

std::vector<MarioState> mario_states(const Term& atom) {
  std::vector<MarioState> out;
  for (const auto& t : atom[0].items()) {
    auto s = MarioState::from_term(t);
    if (!s) throw std::invalid_argument("not a Mario case: " + atom.to_string());
    out.push_back(*s);
  }
  return out;
}

// Position sequences starting anywhere on the grid and following `moves`.
void walks_from(const std::vector<Move>& moves, std::vector<std::vector<GridPos>>& out) {
  for (int r = 0; r < logic::kGridSize; ++r) {
    for (int c = 0; c < logic::kGridSize; ++c) {
      std::vector<GridPos> path{{r, c}};
      bool ok = true;
      for (Move m : moves) {
        const GridPos next = path.back() + kDelta[static_cast<int>(m)];
        if (!next.on_grid()) {
          ok = false;
          break;
        }
        path.push_back(next);
      }
      if (ok) out.push_back(std::move(path));
    }
  }
}

// Mario position sequences of the task with `length` states.
std::vector<std::vector<GridPos>> mario_shapes(const TaskSpec& task, int length) {
  std::vector<std::vector<GridPos>> out;
  const int steps = length - 1;
  switch (task.family) {
    case TaskFamily::Priority:
    case TaskFamily::Flower: {
      const Move p = task.family == TaskFamily::Flower ? Move::Right : task.primary;
      const Move q = task.family == TaskFamily::Flower ? Move::Up : task.secondary;
      for (int a = 0; a <= steps; ++a) {
        std::vector<Move> moves(static_cast<std::size_t>(a), p);
        moves.insert(moves.end(), static_cast<std::size_t>(steps - a), q);
        walks_from(moves, out);
      }
      break;
    }
    case TaskFamily::Just:
    case TaskFamily::OneStep:
      walks_from(std::vector<Move>(static_cast<std::size_t>(steps), task.primary), out);
      break;
    case TaskFamily::BombFar:
      for (int m = 0; m < 4; ++m) walks_from({static_cast<Move>(m)}, out);
      break;
    case TaskFamily::ChessJump: {
      std::vector<Move> moves(static_cast<std::size_t>(steps));
      const auto total = 1 << (2 * steps);
      for (int code = 0; code < total; ++code) {
        for (int i = 0; i < steps; ++i) moves[static_cast<std::size_t>(i)] = static_cast<Move>(4 + ((code >> (2 * i)) & 3));
        walks_from(moves, out);
      }
      break;
    }
    default:
      throw std::logic_error("not a Mario task: " + task.id);
  }
  return out;
}

std::vector<Term> mario_positives(const TaskSpec& task, int length) {
  std::vector<Term> out;
  for (const auto& shape : mario_shapes(task, length)) {
    std::vector<GridPos> targets;
    if (task.family == TaskFamily::BombFar) {
      for (int r = 0; r < logic::kGridSize; ++r) {
        for (int c = 0; c < logic::kGridSize; ++c) {
          const GridPos t{r, c};
          if (logic::manhattan(shape[1], t) > logic::manhattan(shape[0], t)) targets.push_back(t);
        }
      }
    } else {
      targets.push_back(shape.back());
    }
    for (const GridPos target : targets) {
      for (int type = 0; type < kTypes; ++type) {
        if (task.family == TaskFamily::BombFar && type != static_cast<int>(TargetType::Bomb)) continue;
        for (int scene = 0; scene < kScenes; ++scene) {
          if (task.family == TaskFamily::Flower && scene != static_cast<int>(Scene::Flower)) continue;
          if (task.family == TaskFamily::ChessJump && scene != static_cast<int>(Scene::Chess)) continue;
          for (int frame = 0; frame < kFrames; ++frame) {
            std::vector<MarioState> states;
            for (const GridPos p : shape) {
              states.push_back(MarioState{p, target, static_cast<TargetType>(type), static_cast<Scene>(scene), frame});
            }
            out.push_back(mario_atom(states));
          }
        }
      }
    }
  }
  return out;
}

Term mario_random(const TaskSpec& task, Rng& rng) {
  const int length = task.case_lengths[uniform_index(rng, task.case_lengths.size())];
  const GridPos target{static_cast<int>(uniform_index(rng, 3)), static_cast<int>(uniform_index(rng, 3))};
  const auto type = static_cast<TargetType>(uniform_index(rng, kTypes));
  const auto scene = static_cast<Scene>(uniform_index(rng, kScenes));
  const int frame = static_cast<int>(uniform_index(rng, kFrames));
  std::vector<MarioState> states;
  for (int i = 0; i < length; ++i) {
    const GridPos p{static_cast<int>(uniform_index(rng, 3)), static_cast<int>(uniform_index(rng, 3))};
    states.push_back(MarioState{p, target, type, scene, frame});
  }
  return mario_atom(states);
}

std::optional<Term> mario_near_miss(const Term& positive, Rng& rng) {
  auto states = mario_states(positive);
  if (uniform_index(rng, 2) == 0 && states.size() >= 2) {
    // One wrong move; later states keep their own moves.
    std::vector<GridPos> moves;
    for (std::size_t i = 1; i < states.size(); ++i) {
      moves.push_back({states[i].mario.row - states[i - 1].mario.row, states[i].mario.col - states[i - 1].mario.col});
    }
    const auto at = uniform_index(rng, moves.size());
    GridPos replacement;
    do {
      replacement = kDelta[uniform_index(rng, kMoveCount)];
    } while (replacement == moves[at]);
    moves[at] = replacement;
    for (std::size_t i = 1; i < states.size(); ++i) {
      states[i].mario = states[i - 1].mario + moves[i - 1];
      if (!states[i].mario.on_grid()) return std::nullopt;
    }
  } else if (uniform_index(rng, 2) == 0) {
    const auto type = static_cast<TargetType>(1 - static_cast<int>(states[0].type));
    for (auto& s : states) s.type = type;
  } else {
    const auto scene = static_cast<Scene>((static_cast<int>(states[0].scene) + 1 + uniform_index(rng, 2)) % kScenes);
    for (auto& s : states) s.scene = scene;
  }
  return mario_atom(states);
}

// ---- MNIST -----------------------------------------------------------------

Term digits(const std::vector<int>& xs) {
  std::vector<Term> items;
  items.reserve(xs.size());
  for (int x : xs) items.push_back(Term::integer(x));
  return Term::list(std::move(items));
}

Term mnist_atom(const TaskSpec& task, const std::vector<int>& list, int result) {
  switch (task.shape) {
    case ResultShape::IntLast: return logic::make_atom("f", {digits(list), Term::integer(result)});
    case ResultShape::IntFirst: return logic::make_atom("f", {Term::integer(result), digits(list)});
    case ResultShape::TagLast: return logic::make_atom("f", {digits(list), digits({result})});
    case ResultShape::TagFirst: return logic::make_atom("f", {digits({result}), digits(list)});
    case ResultShape::None: break;
  }
  throw std::logic_error("not an MNIST task: " + task.id);
}

struct MnistCase {
  std::vector<int> list;
  int result = 0;
};

MnistCase mnist_decode(const TaskSpec& task, const Term& atom) {
  const bool first = task.shape == ResultShape::IntFirst || task.shape == ResultShape::TagFirst;
  const bool tag = task.shape == ResultShape::TagLast || task.shape == ResultShape::TagFirst;
  const Term& list = atom[first ? 1 : 0];
  const Term& result = atom[first ? 0 : 1];
  MnistCase c;
  for (const auto& t : list.items()) c.list.push_back(static_cast<int>(t.int_value()));
  c.result = static_cast<int>(tag ? result[0].int_value() : result.int_value());
  return c;
}

// Folds op over the list from the left, nullopt if a partial leaves 0..9.
std::optional<int> fold(const std::vector<int>& xs, std::size_t first_ops, bool multiply_first) {
  int acc = xs[0];
  for (std::size_t i = 1; i < xs.size(); ++i) {
    const bool mul = (i <= first_ops) == multiply_first;
    acc = mul ? acc * xs[i] : acc + xs[i];
    if (acc > 9) return std::nullopt;
  }
  return acc;
}

// All positives with `n` list digits, grouped by variant (the number of
// leading first-op folds for priority tasks, a single group otherwise).
std::vector<std::vector<Term>> mnist_positive_groups(const TaskSpec& task, int n) {
  const std::size_t variants = task.family == TaskFamily::OpPriority ? static_cast<std::size_t>(n) : 1;
  std::vector<std::vector<Term>> groups(variants);
  std::vector<int> xs(static_cast<std::size_t>(n), 0);
  int total = 1;
  for (int i = 0; i < n; ++i) total *= kDigits;
  for (int code = 0; code < total; ++code) {
    for (int i = n - 1, c = code; i >= 0; --i, c /= kDigits) xs[static_cast<std::size_t>(i)] = c % kDigits;
    switch (task.family) {
      case TaskFamily::OpPriority:
        for (std::size_t split = 0; split < variants; ++split) {
          if (auto r = fold(xs, split, task.multiply)) groups[split].push_back(mnist_atom(task, xs, *r));
        }
        break;
      case TaskFamily::Cumulative:
      case TaskFamily::ReverseCumulative:
        if (auto r = fold(xs, xs.size(), task.multiply)) groups[0].push_back(mnist_atom(task, xs, *r));
        break;
      case TaskFamily::Increasing:
        if (std::adjacent_find(xs.begin(), xs.end(), std::greater_equal<>()) == xs.end()) {
          groups[0].push_back(mnist_atom(task, xs, 0));
        }
        break;
      case TaskFamily::Decreasing:
        if (std::adjacent_find(xs.begin(), xs.end(), std::less_equal<>()) == xs.end()) {
          groups[0].push_back(mnist_atom(task, xs, 0));
        }
        break;
      default:
        throw std::logic_error("not an MNIST task: " + task.id);
    }
  }
  std::erase_if(groups, [](const auto& g) { return g.empty(); });
  return groups;
}

Term mnist_random(const TaskSpec& task, Rng& rng) {
  const int length = task.case_lengths[uniform_index(rng, task.case_lengths.size())];
  std::vector<int> xs;
  for (int i = 0; i < length - 1; ++i) xs.push_back(static_cast<int>(uniform_index(rng, kDigits)));
  return mnist_atom(task, xs, static_cast<int>(uniform_index(rng, kDigits)));
}

std::optional<Term> mnist_near_miss(const TaskSpec& task, const Term& positive, Rng& rng) {
  MnistCase c = mnist_decode(task, positive);
  if (uniform_index(rng, 2) == 0) {
    const int delta = 1 + static_cast<int>(uniform_index(rng, 3));
    const int r = uniform_index(rng, 2) == 0 ? c.result + delta : c.result - delta;
    if (r < 0 || r > 9) return std::nullopt;
    c.result = r;
  } else {
    const auto at = uniform_index(rng, c.list.size());
    c.list[at] = (c.list[at] + 1 + static_cast<int>(uniform_index(rng, kDigits - 1))) % kDigits;
  }
  return mnist_atom(task, c.list, c.result);
}

}  // namespace

logic::ProofBudget verification_budget(const TaskSpec& task) {
  return logic::ProofBudget{1'000'000, static_cast<std::size_t>(2 * task.max_case_length() + 4)};
}

std::vector<std::vector<Term>> enumerate_positives(const TaskSpec& task) {
  std::vector<std::vector<Term>> out;
  for (const int length : task.case_lengths) {
    if (task.domain == DomainKind::Mario) {
      out.push_back(mario_positives(task, length));
    } else {
      std::set<Term> seen;
      std::vector<Term> merged;
      for (auto& group : mnist_positive_groups(task, length - 1)) {
        for (auto& t : group) {
          if (seen.insert(t).second) merged.push_back(std::move(t));
        }
      }
      out.push_back(std::move(merged));
    }
  }
  return out;
}

std::size_t positive_space_size(const TaskSpec& task) {
  std::size_t n = 0;
  for (const auto& group : enumerate_positives(task)) n += group.size();
  return n;
}

int case_length(const TaskSpec& task, const Term& atom) {
  if (task.domain == DomainKind::Mario) return static_cast<int>(atom[0].list_length());
  const bool first = task.shape == ResultShape::IntFirst || task.shape == ResultShape::TagFirst;
  return static_cast<int>(atom[first ? 1 : 0].list_length()) + 1;
}

CaseSet gen_cases(const TaskSpec& task, std::size_t n_pos, std::size_t n_neg, std::uint64_t seed) {
  if (n_pos == 0 || n_neg == 0) throw std::invalid_argument("gen_cases needs at least one positive and one negative");
  Rng rng = make_rng(seed, stream_id(task.id));
  const auto& domain = task.domain_ref();
  const auto budget = verification_budget(task);
  CaseSet out;

  if (task.domain == DomainKind::Mario) {
    auto groups = enumerate_positives(task);
    std::size_t total = 0;
    for (const auto& g : groups) total += g.size();
    if (n_pos > total) {
      throw ExhaustedSpace(task.id + " has " + std::to_string(total) + " distinct positives, " +
                           std::to_string(n_pos) + " requested");
    }
    while (out.positives.size() < n_pos) {
      std::vector<std::size_t> live;
      for (std::size_t i = 0; i < groups.size(); ++i) {
        if (!groups[i].empty()) live.push_back(i);
      }
      auto& g = groups[live[uniform_index(rng, live.size())]];
      const auto k = uniform_index(rng, g.size());
      out.positives.push_back(std::move(g[k]));
      g[k] = std::move(g.back());
      g.pop_back();
    }
  } else {
    std::vector<std::vector<std::vector<Term>>> groups;
    for (const int length : task.case_lengths) groups.push_back(mnist_positive_groups(task, length - 1));
    for (std::size_t i = 0; i < n_pos; ++i) {
      const auto& by_variant = groups[uniform_index(rng, groups.size())];
      const auto& g = by_variant[uniform_index(rng, by_variant.size())];
      out.positives.push_back(g[uniform_index(rng, g.size())]);
    }
  }
  for (const auto& p : out.positives) {
    if (!logic::entails(task.ground_truth, domain, p, budget)) {
      throw std::logic_error(task.id + ": ground truth rejects generated positive " + p.to_string());
    }
  }

  std::set<Term> seen;
  const std::size_t n_near = (n_neg + 1) / 2;
  const std::size_t max_attempts = 1000 + 200 * n_neg;
  std::size_t attempts = 0;
  while (out.negatives.size() < n_neg) {
    if (++attempts > max_attempts) {
      throw ExhaustedSpace(task.id + ": could not draw " + std::to_string(n_neg) + " distinct negatives");
    }
    const bool near = out.negatives.size() < n_near;
    int source = -1;
    std::optional<Term> cand;
    if (near) {
      source = static_cast<int>(uniform_index(rng, out.positives.size()));
      const Term& p = out.positives[static_cast<std::size_t>(source)];
      cand = task.domain == DomainKind::Mario ? mario_near_miss(p, rng) : mnist_near_miss(task, p, rng);
    } else {
      cand = task.domain == DomainKind::Mario ? mario_random(task, rng) : mnist_random(task, rng);
    }
    if (!cand || seen.count(*cand)) continue;
    if (logic::entails(task.ground_truth, domain, *cand, budget)) continue;
    seen.insert(*cand);
    out.negatives.push_back(std::move(*cand));
    out.near_miss_source.push_back(source);
  }
  // Interleave the two kinds so that any prefix mixes them.
  for (std::size_t i = out.negatives.size(); i > 1; --i) {
    const auto j = uniform_index(rng, i);
    std::swap(out.negatives[i - 1], out.negatives[j]);
    std::swap(out.near_miss_source[i - 1], out.near_miss_source[j]);
  }
  return out;
}

Caps training_caps(DomainKind domain) { return domain == DomainKind::Mario ? Caps{20, 50} : Caps{10, 20}; }

Caps application_size(DomainKind domain) { return domain == DomainKind::Mario ? Caps{5, 20} : Caps{2, 1}; }

Instance sample_instance(const TaskSpec& task, const CaseSet& pool, std::size_t n_pos, std::size_t n_neg,
                         std::uint64_t seed) {
  const Caps caps = training_caps(task.domain);
  if (n_pos > caps.pos || n_neg > caps.neg) {
    throw CapExceeded(task.id + ": instance of " + std::to_string(n_pos) + "/" + std::to_string(n_neg) +
                      " exceeds caps " + std::to_string(caps.pos) + "/" + std::to_string(caps.neg));
  }
  if (n_pos > pool.positives.size() || n_neg > pool.negatives.size()) {
    throw ExhaustedSpace(task.id + ": pool too small for the requested instance");
  }
  Rng rng = make_rng(seed);
  auto pick = [&rng](const std::vector<Term>& from, std::size_t n) {
    std::vector<std::size_t> idx(from.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::vector<Term> out;
    for (std::size_t i = 0; i < n; ++i) {
      const auto j = i + uniform_index(rng, idx.size() - i);
      std::swap(idx[i], idx[j]);
      out.push_back(from[idx[i]]);
    }
    return out;
  };
  Instance inst;
  inst.task_id = task.id;
  inst.positives = pick(pool.positives, n_pos);
  inst.negatives = pick(pool.negatives, n_neg);
  return inst;
}

Instance corrupt_instance(const Instance& inst, const TaskSpec& task, double rate, std::uint64_t seed,
                          std::size_t* slots, std::size_t* changed) {
  if (rate < 0.0 || rate > 1.0) throw std::invalid_argument("corruption rate must lie in [0, 1]");
  Rng rng = make_rng(seed);
  std::size_t n_slots = 0;
  std::size_t n_changed = 0;
  // Returns a uniformly drawn value in [0, n) other than v, with probability rate.
  auto slot = [&](int v, int n) {
    ++n_slots;
    if (!(uniform_unit(rng) < rate)) return v;
    ++n_changed;
    return (v + 1 + static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(n - 1)))) % n;
  };
  auto corrupt = [&](const Term& atom) {
    if (task.domain == DomainKind::Mario) {
      auto states = mario_states(atom);
      for (auto& s : states) {
        s.mario.row = slot(s.mario.row, logic::kGridSize);
        s.mario.col = slot(s.mario.col, logic::kGridSize);
        s.target.row = slot(s.target.row, logic::kGridSize);
        s.target.col = slot(s.target.col, logic::kGridSize);
        s.type = static_cast<TargetType>(slot(static_cast<int>(s.type), kTypes));
        s.scene = static_cast<Scene>(slot(static_cast<int>(s.scene), kScenes));
      }
      return mario_atom(states);
    }
    MnistCase c = mnist_decode(task, atom);
    for (auto& d : c.list) d = slot(d, kDigits);
    c.result = slot(c.result, kDigits);
    return mnist_atom(task, c.list, c.result);
  };
  Instance out = inst;
  out.corruption_rate = rate;
  for (auto& t : out.positives) t = corrupt(t);
  for (auto& t : out.negatives) t = corrupt(t);
  if (slots) *slots = n_slots;
  if (changed) *changed = n_changed;
  return out;
}

}  // namespace metasel::corpus
