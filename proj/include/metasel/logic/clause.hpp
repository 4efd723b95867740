#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "metasel/logic/background.hpp"
#include "metasel/logic/metarule.hpp"

namespace metasel::logic {

// First-order literal over clause variables (0 = A, 1 = B, 2 = C).
struct Literal {
  std::string pred;
  std::vector<int> args;
  friend bool operator==(const Literal&, const Literal&) = default;
};

struct Clause {
  Literal head;
  std::vector<Literal> body;
  int num_vars = 2;
  MetaRuleId origin = MetaRuleId::Identity;
  // Symbol bound to each second-order variable of the origin meta-rule.
  std::vector<std::string> fill;
  // guarded[i]: body[i] calls the head predicate directly, so its first
  // argument must be a strictly shorter list than the head's first argument.
  std::vector<bool> guarded;

  // f(A,B):-right(A,C),f(C,B).
  std::string to_string() const;

  friend bool operator==(const Clause& a, const Clause& b) {
    return a.head == b.head && a.body == b.body && a.origin == b.origin;
  }
};

struct Hypothesis {
  std::vector<Clause> clauses;
  std::map<std::string, int> invented_arity;

  std::size_t size() const { return clauses.size(); }
  // One clause per line, each terminated by '\n'.
  std::string to_string() const;

  friend bool operator==(const Hypothesis& a, const Hypothesis& b) { return a.clauses == b.clauses; }
};

// "f" -> "f_1", "f_2", ...
std::string invented_name(std::string_view target, int index);
bool is_invented_name(std::string_view target, std::string_view name);

// Builds the first-order clause from a metasubstitution. `binding` maps every
// second-order variable name (P, Q, R) to a predicate symbol.
// Throws UnknownPredicate, ArityMismatch, IllegalMonadicFill,
// InvalidMetasubstitution.
Clause instantiate_metarule(const MetaRule& rule, const BackgroundDomain& domain, std::string_view target,
                            const std::map<std::string, std::string>& binding);

// Checks the Hypothesis invariants: body predicates are background, target,
// or invented-and-defined; size within max_clauses.
bool is_well_formed(const Hypothesis& h, const BackgroundDomain& domain, std::string_view target,
                    std::size_t max_clauses);

}  // namespace metasel::logic
