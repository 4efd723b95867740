#include "engine.hpp"

#include <algorithm>
#include <stdexcept>

#include "metasel/util/error.hpp"

namespace metasel::logic::detail {

Engine::Engine(Settings settings, const std::vector<std::string>& extra_symbols) : settings_(std::move(settings)) {
  for (const auto& b : settings_.domain->predicates()) intern(b.name);
  target_ = intern(settings_.target);
  for (int k = 1; k <= settings_.max_invented; ++k) intern(invented_name(settings_.target, k));
  for (const auto& s : extra_symbols) intern(s);

  for (int id = 0; id < static_cast<int>(preds_.size()); ++id) {
    const auto& p = preds_[static_cast<std::size_t>(id)];
    if (p.builtin == nullptr || p.arity == 2) {
      if (p.builtin || id == target_ || p.invented_index > 0) binary_candidates_.push_back(id);
    } else if (settings_.domain->is_monadic_test(p.name)) {
      monadic_candidates_.push_back(id);
    }
  }
  const auto by_name = [this](int a, int b) { return preds_[static_cast<std::size_t>(a)].name < preds_[static_cast<std::size_t>(b)].name; };
  std::sort(binary_candidates_.begin(), binary_candidates_.end(), by_name);
  std::sort(monadic_candidates_.begin(), monadic_candidates_.end(), by_name);
  program_.reserve(16);
}

int Engine::intern(const std::string& name) {
  for (std::size_t i = 0; i < preds_.size(); ++i) {
    if (preds_[i].name == name) return static_cast<int>(i);
  }
  PredInfo p;
  p.name = name;
  p.builtin = settings_.domain->find(name);
  p.arity = p.builtin ? p.builtin->arity : 2;
  if (is_invented_name(settings_.target, name)) {
    p.invented_index = std::stoi(name.substr(settings_.target.size() + 1));
  }
  preds_.push_back(std::move(p));
  return static_cast<int>(preds_.size() - 1);
}

Engine::CompiledClause Engine::compile(const Clause& c) {
  if (c.body.size() > 2) throw std::invalid_argument("clause bodies are limited to two literals: " + c.to_string());
  CompiledClause out;
  out.head = intern(c.head.pred);
  if (preds_[static_cast<std::size_t>(out.head)].builtin) {
    throw InvalidMetasubstitution("clause redefines background predicate: " + c.to_string());
  }
  out.num_vars = c.num_vars;
  out.origin = c.origin;
  out.body_size = static_cast<std::uint8_t>(c.body.size());
  for (std::size_t i = 0; i < c.body.size(); ++i) {
    const auto& lit = c.body[i];
    CompiledLiteral cl;
    cl.pred = intern(lit.pred);
    const auto& info = preds_[static_cast<std::size_t>(cl.pred)];
    if (static_cast<int>(lit.args.size()) != info.arity) {
      throw ArityMismatch("literal " + lit.pred + " has arity " + std::to_string(info.arity));
    }
    cl.a0 = static_cast<std::int8_t>(lit.args[0]);
    cl.a1 = lit.args.size() > 1 ? static_cast<std::int8_t>(lit.args[1]) : std::int8_t{-1};
    cl.guarded = i < c.guarded.size() ? c.guarded[i] : cl.pred == out.head;
    out.body[i] = cl;
  }
  for (std::size_t i = 0; i < c.fill.size() && i < 3; ++i) out.fill[i] = intern(c.fill[i]);
  return out;
}

Hypothesis Engine::decompile() const {
  Hypothesis h;
  for (const auto& cc : program_) {
    Clause c;
    c.head = Literal{preds_[static_cast<std::size_t>(cc.head)].name, {0, 1}};
    for (std::size_t i = 0; i < cc.body_size; ++i) {
      const auto& lit = cc.body[i];
      Literal l{preds_[static_cast<std::size_t>(lit.pred)].name, {lit.a0}};
      if (lit.a1 >= 0) l.args.push_back(lit.a1);
      c.body.push_back(std::move(l));
      c.guarded.push_back(lit.guarded);
    }
    c.num_vars = cc.num_vars;
    c.origin = cc.origin;
    for (int f : cc.fill) {
      if (f >= 0) c.fill.push_back(preds_[static_cast<std::size_t>(f)].name);
    }
    for (const auto& lit : c.body) {
      if (is_invented_name(settings_.target, lit.pred)) h.invented_arity[lit.pred] = 2;
    }
    if (is_invented_name(settings_.target, c.head.pred)) h.invented_arity[c.head.pred] = 2;
    h.clauses.push_back(std::move(c));
  }
  return h;
}

std::int32_t Engine::new_cell(const Term& value) {
  cells_.push_back(Slot{value, -1});
  return static_cast<std::int32_t>(cells_.size() - 1);
}

std::int32_t Engine::deref(std::int32_t cell) const {
  while (cells_[static_cast<std::size_t>(cell)].alias >= 0) cell = cells_[static_cast<std::size_t>(cell)].alias;
  return cell;
}

void Engine::bind(std::int32_t cell, const Term& value) {
  cells_[static_cast<std::size_t>(cell)].value = value;
  trail_.push_back(cell);
}

void Engine::undo(std::size_t trail_mark) {
  while (trail_.size() > trail_mark) {
    cells_[static_cast<std::size_t>(trail_.back())] = Slot{};
    trail_.pop_back();
  }
}

long Engine::size_of(std::int32_t cell) const {
  const auto& v = cells_[static_cast<std::size_t>(deref(cell))].value;
  if (v.empty()) return -1;
  return static_cast<long>(v.list_length());
}

std::int32_t Engine::push_goal(const Goal& g) {
  arena_.push_back(g);
  return static_cast<std::int32_t>(arena_.size() - 1);
}

std::int32_t Engine::atoms_to_goals(std::span<const Term> atoms, std::int32_t tail,
                                    std::vector<std::pair<VarId, std::int32_t>>& vars) {
  std::int32_t next = tail;
  for (auto it = atoms.rbegin(); it != atoms.rend(); ++it) {
    const Term& atom = *it;
    if (atom.empty() || atom.kind() != TermKind::Struct || atom.arity() < 1 || atom.arity() > 2) {
      throw std::invalid_argument("goal must be a unary or binary atom: " + atom.to_string());
    }
    Goal g;
    g.pred = intern(atom.name());
    const auto& info = preds_[static_cast<std::size_t>(g.pred)];
    if (info.builtin && static_cast<int>(atom.arity()) != info.arity) {
      throw ArityMismatch(atom.name() + " expects " + std::to_string(info.arity) + " arguments");
    }
    std::array<std::int32_t, 2> cells{-1, -1};
    for (std::size_t i = 0; i < atom.arity(); ++i) {
      const Term& arg = atom[i];
      if (arg.is_ground()) {
        cells[i] = new_cell(arg);
      } else if (arg.is_var()) {
        const auto found = std::find_if(vars.begin(), vars.end(), [&](const auto& p) { return p.first == arg.var_id(); });
        if (found != vars.end()) {
          cells[i] = found->second;
        } else {
          cells[i] = new_cell(Term{});
          vars.emplace_back(arg.var_id(), cells[i]);
        }
      } else {
        throw std::invalid_argument("goal arguments must be ground or variables: " + atom.to_string());
      }
    }
    g.a0 = cells[0];
    g.a1 = cells[1];
    g.depth = 0;
    g.next = next;
    next = push_goal(g);
  }
  return next;
}

bool Engine::tick() {
  if (settings_.max_steps != 0 && steps_ >= settings_.max_steps) {
    aborted_ = true;
    return true;
  }
  ++steps_;
  if (settings_.deadline && (steps_ & 255U) == 0 && Clock::now() >= *settings_.deadline) {
    aborted_ = true;
    return true;
  }
  return false;
}

bool Engine::solve(std::int32_t goal) {
  if (goal < 0) return on_empty();
  if (tick()) return true;
  const Goal g = arena_[static_cast<std::size_t>(goal)];
  const PredInfo& p = preds_[static_cast<std::size_t>(g.pred)];
  if (g.guard >= 0) {
    const long arg = size_of(g.a0);
    const long head = size_of(g.guard);
    if (arg < 0 || head < 0 || arg >= head) return false;
  }
  if (p.builtin) return solve_builtin(g, p);
  return solve_user(goal, g);
}

bool Engine::solve_builtin(const Goal& g, const PredInfo& p) {
  const Term in = cells_[static_cast<std::size_t>(deref(g.a0))].value;
  if (in.empty() || !in.is_ground()) return false;
  if (p.arity == 1) {
    if (!p.builtin->test(in)) return false;
    return solve(g.next);
  }
  const std::int32_t out_cell = deref(g.a1);
  const Term current = cells_[static_cast<std::size_t>(out_cell)].value;
  auto out = p.builtin->binary(in, current);
  if (!out) return false;
  if (!current.empty()) {
    if (!(current == *out)) return false;
    return solve(g.next);
  }
  const auto mark = trail_.size();
  bind(out_cell, *out);
  if (solve(g.next)) return true;
  undo(mark);
  return false;
}

bool Engine::same_arg(std::int32_t a, std::int32_t b) const {
  const auto ra = deref(a);
  const auto rb = deref(b);
  if (ra == rb) return true;
  const Term& va = cells_[static_cast<std::size_t>(ra)].value;
  const Term& vb = cells_[static_cast<std::size_t>(rb)].value;
  if (va.empty() || vb.empty()) return va.empty() && vb.empty();
  return va.same_node(vb) || va == vb;
}

// A goal that repeats one of its own ancestors can only be proved by a
// derivation that also proves the ancestor without the detour.
bool Engine::repeats_ancestor(const Goal& g) const {
  for (std::int32_t a = g.parent; a >= 0; a = arena_[static_cast<std::size_t>(a)].parent) {
    const Goal& anc = arena_[static_cast<std::size_t>(a)];
    if (anc.pred == g.pred && same_arg(anc.a0, g.a0) && same_arg(anc.a1, g.a1)) return true;
  }
  return false;
}

bool Engine::solve_user(std::int32_t index, const Goal& g) {
  if (g.a1 < 0) return false;  // user predicates are binary
  if (repeats_ancestor(g)) return false;
  const auto depth = static_cast<std::size_t>(g.depth) + 1;
  const std::size_t n = program_.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (program_[i].head != g.pred) continue;
    if (depth > settings_.max_depth) {
      cut_ = true;
      return false;
    }
    const CompiledClause c = program_[i];
    if (resolve(c, index, g)) return true;
  }
  if (mode_ == Mode::Induce && program_.size() < clause_bound_) return try_new_clauses(index, g);
  return false;
}

bool Engine::resolve(const CompiledClause& c, std::int32_t index, const Goal& g) {
  const auto trail_mark = trail_.size();
  const auto cell_mark = cells_.size();
  const auto arena_mark = arena_.size();
  const auto base = static_cast<std::int32_t>(cells_.size());
  cells_.resize(cell_mark + static_cast<std::size_t>(c.num_vars));
  const std::array<std::int32_t, 2> head_args{g.a0, g.a1};
  for (std::size_t i = 0; i < 2; ++i) {
    const std::int32_t r = deref(head_args[i]);
    auto& slot = cells_[static_cast<std::size_t>(base) + i];
    if (!cells_[static_cast<std::size_t>(r)].value.empty()) {
      slot.value = cells_[static_cast<std::size_t>(r)].value;
    } else {
      slot.alias = r;
    }
  }
  std::int32_t next = g.next;
  for (int i = c.body_size - 1; i >= 0; --i) {
    const auto& lit = c.body[static_cast<std::size_t>(i)];
    Goal ng;
    ng.pred = lit.pred;
    ng.a0 = base + lit.a0;
    ng.a1 = lit.a1 >= 0 ? base + lit.a1 : -1;
    ng.guard = lit.guarded ? base : -1;
    ng.depth = g.depth + 1;
    ng.next = next;
    ng.parent = index;
    next = push_goal(ng);
  }
  if (solve(next)) return true;
  undo(trail_mark);
  cells_.resize(cell_mark);
  arena_.resize(arena_mark);
  return false;
}

bool Engine::try_new_clauses(std::int32_t index, const Goal& g) {
  if (static_cast<std::size_t>(g.depth) + 1 > settings_.max_depth) {
    cut_ = true;
    return false;
  }
  for (const MetaRuleId id : metarules_.ids()) {
    const MetaRule& m = metarule(id);
    const auto nvars = m.second_order_vars.size();
    std::array<int, 3> fill{g.pred, -1, -1};

    // Depth-first over the non-head second-order variables in lexical
    // symbol order. Invented predicates are introduced in index order.
    auto leaf = [&](int level) -> bool {
      CompiledClause c;
      c.head = g.pred;
      c.num_vars = m.num_vars;
      c.origin = id;
      c.fill = fill;
      c.body_size = static_cast<std::uint8_t>(m.body.size());
      for (std::size_t i = 0; i < m.body.size(); ++i) {
        const auto& ml = m.body[i];
        CompiledLiteral lit;
        lit.pred = fill[static_cast<std::size_t>(ml.pred_var)];
        lit.a0 = static_cast<std::int8_t>(ml.args[0]);
        lit.a1 = ml.args.size() > 1 ? static_cast<std::int8_t>(ml.args[1]) : std::int8_t{-1};
        lit.guarded = lit.pred == c.head;
        // A direct self-call on the head's own first argument can never
        // pass the shrinking-list guard.
        if (lit.guarded && lit.a0 == m.head.args[0]) return false;
        c.body[i] = lit;
      }
      for (const auto& existing : program_) {
        if (existing.origin == c.origin && existing.fill == c.fill) return false;
      }
      const int saved = invented_used_;
      invented_used_ = std::max(invented_used_, level);
      program_.push_back(c);
      if (resolve(c, index, g)) return true;
      program_.pop_back();
      invented_used_ = saved;
      return false;
    };

    auto expand = [&](auto&& self, std::size_t var, int level) -> bool {
      if (var == nvars) return leaf(level);
      const auto& cands = m.arity_of(static_cast<int>(var)) == 1 ? monadic_candidates_ : binary_candidates_;
      for (const int pid : cands) {
        const int k = preds_[static_cast<std::size_t>(pid)].invented_index;
        int next_level = level;
        if (k > 0) {
          if (k > level + 1 || k > settings_.max_invented) continue;
          next_level = std::max(level, k);
        }
        fill[var] = pid;
        if (self(self, var + 1, next_level)) return true;
      }
      fill[var] = -1;
      return false;
    };

    const int head_k = preds_[static_cast<std::size_t>(g.pred)].invented_index;
    if (expand(expand, 1, std::max(invented_used_, head_k))) return true;
  }
  return false;
}

bool Engine::on_empty() {
  if (mode_ == Mode::Prove) {
    proved_ = true;
    return true;
  }
  return check_negatives();
}

bool Engine::check_negatives() {
  mode_ = Mode::Prove;
  std::vector<std::pair<VarId, std::int32_t>> vars;
  for (const Term& neg : negatives_) {
    const auto trail_mark = trail_.size();
    const auto cell_mark = cells_.size();
    const auto arena_mark = arena_.size();
    proved_ = false;
    vars.clear();
    const std::int32_t goal = atoms_to_goals(std::span<const Term>(&neg, 1), -1, vars);
    solve(goal);
    undo(trail_mark);
    cells_.resize(cell_mark);
    arena_.resize(arena_mark);
    if (aborted_ || proved_) {
      proved_ = false;
      mode_ = Mode::Induce;
      return aborted_;
    }
  }
  mode_ = Mode::Induce;
  solution_ = decompile();
  return true;
}

void Engine::load(const Hypothesis& hyp) {
  program_.clear();
  for (const auto& c : hyp.clauses) program_.push_back(compile(c));
}

ProofStatus Engine::prove(std::span<const Term> goals) {
  mode_ = Mode::Prove;
  proved_ = false;
  cut_ = false;
  aborted_ = false;
  cells_.clear();
  trail_.clear();
  arena_.clear();
  std::vector<std::pair<VarId, std::int32_t>> vars;
  const std::int32_t goal = atoms_to_goals(goals, -1, vars);
  solve(goal);
  if (proved_) return ProofStatus::Proved;
  if (aborted_ || cut_) return ProofStatus::BudgetExceeded;
  return ProofStatus::NotProved;
}

bool Engine::induce(std::span<const Term> positives, std::span<const Term> negatives, MetaRuleSet metarules,
                    std::size_t clause_bound) {
  mode_ = Mode::Induce;
  metarules_ = metarules;
  clause_bound_ = clause_bound;
  negatives_ = negatives;
  cells_.clear();
  trail_.clear();
  arena_.clear();
  program_.clear();
  invented_used_ = 0;
  solution_ = Hypothesis{};
  std::vector<std::pair<VarId, std::int32_t>> vars;
  const std::int32_t goal = atoms_to_goals(positives, -1, vars);
  return solve(goal);
}

}  // namespace metasel::logic::detail
