#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "metasel/logic/term.hpp"

namespace metasel::logic {

enum class DomainKind : std::uint8_t { Mario, Mnist };

std::string_view to_string(DomainKind kind);
DomainKind domain_kind_from_string(std::string_view name);

// Binary built-ins are moded (+input, ?output): given a ground first argument
// they return the single value the second argument must equal, or nullopt.
// `output` is the current (possibly unbound, i.e. empty) second argument; only
// the sequence-to-tag transition of less/more inspects it.
using BinaryFn = std::optional<Term> (*)(const Term& input, const Term& output);
using TestFn = bool (*)(const Term& arg);

struct Builtin {
  std::string name;
  int arity = 2;
  BinaryFn binary = nullptr;
  TestFn test = nullptr;
};

class BackgroundDomain {
 public:
  BackgroundDomain(DomainKind kind, std::vector<Builtin> predicates, std::vector<std::string> monadic_tests);

  DomainKind kind() const { return kind_; }
  std::string_view name() const { return to_string(kind_); }

  // Sorted by name.
  const std::vector<Builtin>& predicates() const { return predicates_; }
  const Builtin* find(std::string_view name) const;
  bool is_monadic_test(std::string_view name) const;

  // Sorted names of binary predicates / monadic tests.
  const std::vector<std::string>& binary_names() const { return binary_names_; }
  const std::vector<std::string>& monadic_test_names() const { return monadic_tests_; }

 private:
  DomainKind kind_;
  std::vector<Builtin> predicates_;
  std::vector<std::string> binary_names_;
  std::vector<std::string> monadic_tests_;
};

// Mario: right, left, up, down, jump, far, terminate; tests bomb, coin, sea,
// flower, chess.
const BackgroundDomain& mario_domain();
// MNIST: add, multi, eq, head, less, more; tests zero, empty.
const BackgroundDomain& mnist_domain();
const BackgroundDomain& domain_for(DomainKind kind);

// Every substitution under which pred(args) holds, in deterministic order.
// Throws UnknownPredicate / ArityMismatch.
std::vector<Substitution> eval_background(const BackgroundDomain& domain, std::string_view pred,
                                          std::span<const Term> args);

}  // namespace metasel::logic
