#pragma once

#include <string_view>

#include "metasel/logic/background.hpp"
#include "metasel/logic/clause.hpp"
#include "metasel/logic/metarule.hpp"
#include "metasel/logic/term.hpp"

namespace metasel::logic {

// Prolog-style term text: 3, coin, [1,2], s(0,1,coin), X. Upper-case or '_'
// identifiers are variables, numbered in order of first appearance.
Term parse_term(std::string_view text);

// One clause in the f(A,B):-right(A,C),f(C,B). notation. The origin
// meta-rule is recovered from the clause shape; where two pool rules fit
// (Chain with R = P is also Recursion) the first one in `prefer` wins, with
// Recursion tried before Chain. Throws ParseError or the
// instantiate_metarule errors.
Clause parse_clause(std::string_view text, const BackgroundDomain& domain, std::string_view target = "f",
                    MetaRuleSet prefer = MetaRuleSet::all());

// Clauses separated by newlines or by their terminating '.'.
Hypothesis parse_hypothesis(std::string_view text, const BackgroundDomain& domain, std::string_view target = "f",
                            MetaRuleSet prefer = MetaRuleSet::all());

}  // namespace metasel::logic
