#include "metasel/logic/parse.hpp"

#include <cctype>
#include <map>

#include "metasel/util/error.hpp"

namespace metasel::logic {
namespace {

class Reader {
 public:
  explicit Reader(std::string_view text) : text_(text) {}

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }
  bool done() {
    skip_ws();
    return pos_ >= text_.size();
  }
  char peek() {
    skip_ws();
    return pos_ < text_.size() ? text_[pos_] : '\0';
  }
  bool accept(char c) {
    if (peek() != c) return false;
    ++pos_;
    return true;
  }
  bool accept(std::string_view s) {
    skip_ws();
    if (text_.substr(pos_, s.size()) != s) return false;
    pos_ += s.size();
    return true;
  }
  void expect(char c) {
    if (!accept(c)) fail(std::string("expected '") + c + "'");
  }
  std::string identifier() {
    skip_ws();
    const auto start = pos_;
    while (pos_ < text_.size() && (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) ++pos_;
    if (start == pos_) fail("expected identifier");
    return std::string(text_.substr(start, pos_ - start));
  }
  [[noreturn]] void fail(const std::string& what) const {
    throw ParseError(what + " at offset " + std::to_string(pos_) + " in \"" + std::string(text_) + "\"");
  }

  Term term() {
    const char c = peek();
    if (c == '[') {
      ++pos_;
      std::vector<Term> items;
      if (!accept(']')) {
        do {
          items.push_back(term());
        } while (accept(','));
        expect(']');
      }
      return Term::list(std::move(items));
    }
    if (c == '-' || std::isdigit(static_cast<unsigned char>(c))) {
      const auto start = pos_;
      if (c == '-') ++pos_;
      while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
      const auto digits = text_.substr(start, pos_ - start);
      if (digits == "-") fail("expected digits");
      return Term::integer(std::stoll(std::string(digits)));
    }
    const std::string id = identifier();
    if (std::isupper(static_cast<unsigned char>(id[0])) || id[0] == '_') {
      auto [it, inserted] = vars_.try_emplace(id, static_cast<VarId>(vars_.size()));
      return Term::var(it->second);
    }
    if (accept('(')) {
      std::vector<Term> args;
      do {
        args.push_back(term());
      } while (accept(','));
      expect(')');
      return Term::compound(id, std::move(args));
    }
    return Term::atom(id);
  }

  // pred(V1,V2) with clause variables numbered by first appearance.
  Literal literal(std::map<std::string, int>& names) {
    Literal lit;
    lit.pred = identifier();
    expect('(');
    do {
      const std::string v = identifier();
      if (!std::isupper(static_cast<unsigned char>(v[0]))) fail("clause arguments must be variables");
      auto [it, inserted] = names.try_emplace(v, static_cast<int>(names.size()));
      lit.args.push_back(it->second);
    } while (accept(','));
    expect(')');
    return lit;
  }

 private:
  std::string_view text_;
  std::size_t pos_ = 0;
  std::map<std::string, VarId> vars_;
};

// Second-order binding that turns `rule` into the given head/body, if any.
std::optional<std::map<std::string, std::string>> match(const MetaRule& rule, const Literal& head,
                                                        const std::vector<Literal>& body) {
  if (rule.body.size() != body.size() || head.args != rule.head.args) return std::nullopt;
  std::map<std::string, std::string> binding;
  auto bind = [&](int var, const std::string& symbol) {
    auto [it, inserted] = binding.try_emplace(rule.second_order_vars[static_cast<std::size_t>(var)], symbol);
    return inserted || it->second == symbol;
  };
  if (!bind(rule.head.pred_var, head.pred)) return std::nullopt;
  for (std::size_t i = 0; i < body.size(); ++i) {
    if (body[i].args != rule.body[i].args) return std::nullopt;
    if (!bind(rule.body[i].pred_var, body[i].pred)) return std::nullopt;
  }
  return binding;
}

}  // namespace

Term parse_term(std::string_view text) {
  Reader r(text);
  Term t = r.term();
  if (!r.done()) r.fail("trailing input");
  return t;
}

Clause parse_clause(std::string_view text, const BackgroundDomain& domain, std::string_view target,
                    MetaRuleSet prefer) {
  Reader r(text);
  std::map<std::string, int> names;
  const Literal head = r.literal(names);
  std::vector<Literal> body;
  if (r.accept(":-")) {
    do {
      body.push_back(r.literal(names));
    } while (r.accept(','));
  }
  r.accept('.');
  if (!r.done()) r.fail("trailing input");

  static const MetaRuleId order[] = {MetaRuleId::Identity, MetaRuleId::Inverse, MetaRuleId::Precon,
                                     MetaRuleId::Postcon,  MetaRuleId::Recursion, MetaRuleId::Chain};
  for (int pass = 0; pass < 2; ++pass) {
    for (const MetaRuleId id : order) {
      if (pass == 0 && !prefer.contains(id)) continue;
      if (auto binding = match(metarule(id), head, body)) {
        return instantiate_metarule(metarule(id), domain, target, *binding);
      }
    }
  }
  throw ParseError("clause fits no meta-rule: " + std::string(text));
}

Hypothesis parse_hypothesis(std::string_view text, const BackgroundDomain& domain, std::string_view target,
                            MetaRuleSet prefer) {
  Hypothesis h;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= text.size(); ++i) {
    if (i < text.size() && text[i] != '.' && text[i] != '\n') continue;
    const auto piece = text.substr(start, i - start);
    start = i + 1;
    if (piece.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    h.clauses.push_back(parse_clause(piece, domain, target, prefer));
  }
  for (const auto& c : h.clauses) {
    for (const auto& s : c.fill) {
      if (is_invented_name(target, s)) h.invented_arity[s] = 2;
    }
  }
  return h;
}

}  // namespace metasel::logic
