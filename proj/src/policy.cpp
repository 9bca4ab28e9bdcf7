#include "gem/policy.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdlib>
#include <set>
#include <sstream>

#include "gem/state.hpp"

namespace gem {

namespace {

struct NamedEvent {
  EventKind kind;
  const char* name;
};

constexpr NamedEvent kEvents[] = {
    {EventKind::FieldUpdated, "field_updated"},
    {EventKind::TopicCreated, "topic_created"},
    {EventKind::TopicMerged, "topic_merged"},
    {EventKind::RetrievalPerformed, "retrieval_performed"},
    {EventKind::Tick, "tick"},
    {EventKind::PreCommit, "pre_commit"},
};

struct NamedVariable {
  Variable var;
  const char* name;
};

constexpr NamedVariable kVariables[] = {
    {Variable::UpdatedField, "updated_field"},
    {Variable::UpdatedTopic, "updated_topic"},
    {Variable::DependentTopic, "dependent_topic"},
    {Variable::AccessedTopic, "accessed_topic"},
    {Variable::SupersededCurrent, "superseded_current"},
    {Variable::AttenuationCandidate, "attenuation_candidate"},
};

const std::set<std::string, std::less<>> kKeywords = {
    "POLICY", "ON", "WHEN", "DO", "WITH", "EXISTS", "AND", "OR", "NOT",
    "salience", "active_footprint", "field", "topic_archived", "beta", "evidence",
    "flag_for_revision", "reject_transition", "attenuate", "archive", "noop",
};

}  // namespace

const char* to_string(EventKind e) {
  for (const auto& ne : kEvents) {
    if (ne.kind == e) return ne.name;
  }
  return "?";
}

std::optional<EventKind> event_kind_from_string(std::string_view s) {
  for (const auto& ne : kEvents) {
    if (s == ne.name) return ne.kind;
  }
  return std::nullopt;
}

const char* to_string(Variable v) {
  for (const auto& nv : kVariables) {
    if (nv.var == v) return nv.name;
  }
  return "?";
}

std::optional<Variable> variable_from_string(std::string_view s) {
  for (const auto& nv : kVariables) {
    if (s == nv.name) return nv.var;
  }
  return std::nullopt;
}

Condition Condition::exists(Variable v) {
  Condition c;
  c.kind = Kind::Exists;
  c.variable = v;
  return c;
}

Condition Condition::salience_below(Target t, double threshold) {
  Condition c;
  c.kind = Kind::SalienceBelow;
  c.target = std::move(t);
  c.threshold = threshold;
  return c;
}

Condition Condition::footprint_above(std::optional<std::uint64_t> limit) {
  Condition c;
  c.kind = Kind::FootprintAbove;
  c.footprint_limit = limit;
  return c;
}

Condition Condition::field_is(std::string name) {
  Condition c;
  c.kind = Kind::FieldIs;
  c.field = std::move(name);
  return c;
}

Condition Condition::topic_archived(Target t) {
  Condition c;
  c.kind = Kind::TopicArchived;
  c.target = std::move(t);
  return c;
}

Condition Condition::negate(Condition inner) {
  Condition c;
  c.kind = Kind::Not;
  c.children.push_back(std::move(inner));
  return c;
}

Condition Condition::both(Condition a, Condition b) {
  Condition c;
  c.kind = Kind::And;
  c.children.push_back(std::move(a));
  c.children.push_back(std::move(b));
  return c;
}

Condition Condition::either(Condition a, Condition b) {
  Condition c;
  c.kind = Kind::Or;
  c.children.push_back(std::move(a));
  c.children.push_back(std::move(b));
  return c;
}

PolicyParseError::PolicyParseError(const std::string& message, std::size_t line, std::size_t column,
                                   std::string token)
    : std::runtime_error("policy syntax error at line " + std::to_string(line) + ", column " +
                         std::to_string(column) + ": " + message +
                         (token.empty() ? std::string(" (at end of input)") : " (at '" + token + "')")),
      line_(line),
      column_(column),
      token_(std::move(token)) {}

// ---------------------------------------------------------------------------
// Lexer

namespace {

enum class Tok { Word, Number, String, LParen, RParen, LBrace, RBrace, Comma, Less, Greater, EqEq, Eq, End };

struct Token {
  Tok kind = Tok::End;
  std::string text;
  double number = 0.0;
  std::size_t line = 1;
  std::size_t column = 1;
};

bool is_word_char(unsigned char c) { return std::isalnum(c) || c == '_' || c == '-' || c == '.' || c == '+'; }

bool parse_number(std::string_view s, double& out) {
  if (s.empty()) return false;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

std::vector<Token> lex(std::string_view text) {
  std::vector<Token> out;
  std::size_t i = 0, line = 1, col = 1;
  auto advance = [&](std::size_t n) {
    for (std::size_t k = 0; k < n; ++k) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
      ++i;
    }
  };
  while (i < text.size()) {
    unsigned char c = static_cast<unsigned char>(text[i]);
    if (std::isspace(c)) {
      advance(1);
      continue;
    }
    if (c == '#') {
      while (i < text.size() && text[i] != '\n') advance(1);
      continue;
    }
    Token t;
    t.line = line;
    t.column = col;
    auto single = [&](Tok k) {
      t.kind = k;
      t.text = std::string(1, static_cast<char>(c));
      advance(1);
    };
    switch (c) {
      case '(': single(Tok::LParen); break;
      case ')': single(Tok::RParen); break;
      case '{': single(Tok::LBrace); break;
      case '}': single(Tok::RBrace); break;
      case ',': single(Tok::Comma); break;
      case '<': single(Tok::Less); break;
      case '>': single(Tok::Greater); break;
      case '=':
        if (i + 1 < text.size() && text[i + 1] == '=') {
          t.kind = Tok::EqEq;
          t.text = "==";
          advance(2);
        } else {
          single(Tok::Eq);
        }
        break;
      case '"': {
        advance(1);
        std::string value;
        bool closed = false;
        while (i < text.size()) {
          char ch = text[i];
          if (ch == '"') {
            advance(1);
            closed = true;
            break;
          }
          if (ch == '\\' && i + 1 < text.size()) {
            advance(1);
            ch = text[i];
            if (ch == 'n') ch = '\n';
          }
          value.push_back(ch);
          advance(1);
        }
        if (!closed) throw PolicyParseError("unterminated string literal", t.line, t.column, "\"" + value);
        t.kind = Tok::String;
        t.text = std::move(value);
        break;
      }
      default: {
        if (!is_word_char(c)) {
          throw PolicyParseError("unexpected character", line, col, std::string(1, static_cast<char>(c)));
        }
        std::size_t start = i;
        while (i < text.size() && is_word_char(static_cast<unsigned char>(text[i]))) advance(1);
        t.text = std::string(text.substr(start, i - start));
        double value = 0.0;
        if ((std::isdigit(static_cast<unsigned char>(t.text[0])) || t.text[0] == '-' || t.text[0] == '+' ||
             t.text[0] == '.') &&
            parse_number(t.text[0] == '+' ? std::string_view(t.text).substr(1) : std::string_view(t.text), value)) {
          t.kind = Tok::Number;
          t.number = value;
        } else {
          t.kind = Tok::Word;
        }
      }
    }
    out.push_back(std::move(t));
  }
  Token end;
  end.kind = Tok::End;
  end.line = line;
  end.column = col;
  out.push_back(end);
  return out;
}

// ---------------------------------------------------------------------------
// Recursive-descent parser
//
//   file      := policy*
//   policy    := POLICY word ON word WHEN or_expr DO action [WITH evidence = { [word {, word}] }]
//   or_expr   := and_expr {OR and_expr}
//   and_expr  := unary {AND unary}
//   unary     := NOT unary | primary
//   primary   := ( or_expr ) | EXISTS word
//              | salience ( target ) < number
//              | active_footprint > (integer | beta)
//              | field == (word | string)
//              | topic_archived ( target )
//   action    := flag_for_revision ( target ) | reject_transition ( string | word )
//              | attenuate ( target ) | archive ( target ) | noop
//   target    := word | string

class Parser {
 public:
  explicit Parser(std::string_view text) : tokens_(lex(text)) {}

  bool at_end() const { return peek().kind == Tok::End; }

  Policy policy() {
    expect_word("POLICY");
    Policy p;
    p.name = name("policy name");
    expect_word("ON");
    const Token& ev = expect(Tok::Word, "event name");
    auto kind = event_kind_from_string(ev.text);
    if (!kind) fail("unknown event '" + ev.text + "'", ev);
    p.on_event = *kind;
    expect_word("WHEN");
    p.condition = or_expr();
    expect_word("DO");
    p.action = action();
    if (is_word("WITH")) {
      next();
      expect_word("evidence");
      expect(Tok::Eq, "'='");
      expect(Tok::LBrace, "'{'");
      if (peek().kind != Tok::RBrace) {
        p.evidence.push_back(name("evidence identifier"));
        while (peek().kind == Tok::Comma) {
          next();
          p.evidence.push_back(name("evidence identifier"));
        }
      }
      expect(Tok::RBrace, "'}'");
    }
    return p;
  }

  [[noreturn]] void fail(const std::string& message, const Token& at) const {
    throw PolicyParseError(message, at.line, at.column, at.text);
  }

  const Token& peek() const { return tokens_[pos_]; }

 private:
  const Token& next() {
    const Token& t = tokens_[pos_];
    if (t.kind != Tok::End) ++pos_;
    return t;
  }

  bool is_word(std::string_view w) const { return peek().kind == Tok::Word && peek().text == w; }

  const Token& expect(Tok kind, const std::string& what) {
    if (peek().kind != kind) fail("expected " + what, peek());
    return next();
  }

  void expect_word(std::string_view w) {
    if (!is_word(w)) fail("expected '" + std::string(w) + "'", peek());
    next();
  }

  std::string name(const std::string& what) {
    const Token& t = peek();
    if (t.kind != Tok::Word || kKeywords.count(t.text)) fail("expected " + what, t);
    return next().text;
  }

  Condition or_expr() {
    Condition lhs = and_expr();
    while (is_word("OR")) {
      next();
      lhs = Condition::either(std::move(lhs), and_expr());
    }
    return lhs;
  }

  Condition and_expr() {
    Condition lhs = unary();
    while (is_word("AND")) {
      next();
      lhs = Condition::both(std::move(lhs), unary());
    }
    return lhs;
  }

  Condition unary() {
    if (is_word("NOT")) {
      next();
      return Condition::negate(unary());
    }
    return primary();
  }

  Target target() {
    const Token& t = peek();
    if (t.kind == Tok::String) return Target{next().text};
    if (t.kind == Tok::Word && !kKeywords.count(t.text)) {
      std::string w = next().text;
      if (auto v = variable_from_string(w)) return Target{*v};
      return Target{w};
    }
    fail("expected a variable or topic id", t);
  }

  Condition primary() {
    const Token& t = peek();
    if (t.kind == Tok::LParen) {
      next();
      Condition c = or_expr();
      expect(Tok::RParen, "')'");
      return c;
    }
    if (t.kind != Tok::Word) fail("expected a condition", t);
    if (t.text == "EXISTS") {
      next();
      const Token& v = expect(Tok::Word, "variable name");
      auto var = variable_from_string(v.text);
      if (!var) fail("unknown variable '" + v.text + "'", v);
      return Condition::exists(*var);
    }
    if (t.text == "salience") {
      next();
      expect(Tok::LParen, "'('");
      Target tgt = target();
      expect(Tok::RParen, "')'");
      expect(Tok::Less, "'<'");
      const Token& n = expect(Tok::Number, "number");
      return Condition::salience_below(std::move(tgt), n.number);
    }
    if (t.text == "active_footprint") {
      next();
      expect(Tok::Greater, "'>'");
      if (is_word("beta")) {
        next();
        return Condition::footprint_above(std::nullopt);
      }
      const Token& n = expect(Tok::Number, "integer or 'beta'");
      if (n.number < 0 || n.number != static_cast<double>(static_cast<std::uint64_t>(n.number)) ||
          n.text.find_first_not_of("0123456789") != std::string::npos) {
        fail("footprint bound must be a non-negative integer", n);
      }
      return Condition::footprint_above(static_cast<std::uint64_t>(n.number));
    }
    if (t.text == "field") {
      next();
      expect(Tok::EqEq, "'=='");
      const Token& n = peek();
      if (n.kind == Tok::String || (n.kind == Tok::Word && !kKeywords.count(n.text))) {
        return Condition::field_is(next().text);
      }
      fail("expected a field name", n);
    }
    if (t.text == "topic_archived") {
      next();
      expect(Tok::LParen, "'('");
      Target tgt = target();
      expect(Tok::RParen, "')'");
      return Condition::topic_archived(std::move(tgt));
    }
    fail("unknown condition '" + t.text + "'", t);
  }

  Action action() {
    const Token& t = peek();
    if (t.kind != Tok::Word) fail("expected an action", t);
    Action a;
    if (t.text == "noop") {
      next();
      a.kind = Action::Kind::Noop;
      return a;
    }
    if (t.text == "reject_transition") {
      next();
      expect(Tok::LParen, "'('");
      const Token& m = peek();
      if (m.kind != Tok::String && m.kind != Tok::Word) fail("expected a message", m);
      a.kind = Action::Kind::RejectTransition;
      a.message = next().text;
      expect(Tok::RParen, "')'");
      return a;
    }
    if (t.text == "flag_for_revision") {
      a.kind = Action::Kind::FlagForRevision;
    } else if (t.text == "attenuate") {
      a.kind = Action::Kind::Attenuate;
    } else if (t.text == "archive") {
      a.kind = Action::Kind::Archive;
    } else {
      fail("unknown action '" + t.text + "'", t);
    }
    next();
    expect(Tok::LParen, "'('");
    a.target = target();
    expect(Tok::RParen, "')'");
    return a;
  }

  std::vector<Token> tokens_;
  std::size_t pos_ = 0;
};

}  // namespace

Policy parse_policy(std::string_view text) {
  Parser parser(text);
  Policy p = parser.policy();
  if (!parser.at_end()) parser.fail("unexpected input after policy", parser.peek());
  return p;
}

std::vector<Policy> parse_policy_file(std::string_view text) {
  Parser parser(text);
  std::vector<Policy> out;
  std::set<std::string> names;
  while (!parser.at_end()) {
    const Token start = parser.peek();
    Policy p = parser.policy();
    if (!names.insert(p.name).second) parser.fail("duplicate policy name '" + p.name + "'", start);
    out.push_back(std::move(p));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Rendering

namespace {

bool renders_as_word(const std::string& s) {
  if (s.empty() || kKeywords.count(s)) return false;
  for (unsigned char c : s) {
    if (!is_word_char(c)) return false;
  }
  double ignored = 0.0;
  std::string_view v(s);
  if (v[0] == '+') v.remove_prefix(1);
  if ((std::isdigit(static_cast<unsigned char>(s[0])) || s[0] == '-' || s[0] == '+' || s[0] == '.') &&
      parse_number(v, ignored)) {
    return false;
  }
  return true;
}

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out.push_back('\\');
    if (c == '\n') {
      out += "\\n";
      continue;
    }
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

std::string render_number(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::string render_target(const Target& t) {
  if (t.is_variable()) return to_string(std::get<Variable>(t.ref));
  return quote(std::get<std::string>(t.ref));
}

int precedence(Condition::Kind k) {
  switch (k) {
    case Condition::Kind::Or: return 1;
    case Condition::Kind::And: return 2;
    case Condition::Kind::Not: return 3;
    default: return 4;
  }
}

void render_into(const Condition& c, std::ostringstream& os);

void render_child(const Condition& child, int parent_prec, bool right, std::ostringstream& os) {
  int p = precedence(child.kind);
  bool parens = p < parent_prec || (right && p == parent_prec && p < 3);
  if (parens) os << '(';
  render_into(child, os);
  if (parens) os << ')';
}

void render_into(const Condition& c, std::ostringstream& os) {
  switch (c.kind) {
    case Condition::Kind::Exists: os << "EXISTS " << to_string(c.variable); break;
    case Condition::Kind::SalienceBelow:
      os << "salience(" << render_target(c.target) << ") < " << render_number(c.threshold);
      break;
    case Condition::Kind::FootprintAbove:
      os << "active_footprint > " << (c.footprint_limit ? std::to_string(*c.footprint_limit) : std::string("beta"));
      break;
    case Condition::Kind::FieldIs:
      os << "field == " << (renders_as_word(c.field) ? c.field : quote(c.field));
      break;
    case Condition::Kind::TopicArchived: os << "topic_archived(" << render_target(c.target) << ")"; break;
    case Condition::Kind::Not:
      os << "NOT ";
      render_child(c.children.at(0), precedence(c.kind), false, os);
      break;
    case Condition::Kind::And:
    case Condition::Kind::Or: {
      const char* op = c.kind == Condition::Kind::And ? " AND " : " OR ";
      render_child(c.children.at(0), precedence(c.kind), false, os);
      os << op;
      render_child(c.children.at(1), precedence(c.kind), true, os);
      break;
    }
  }
}

}  // namespace

std::string render_action(const Action& a) {
  switch (a.kind) {
    case Action::Kind::Noop: return "noop";
    case Action::Kind::RejectTransition: return "reject_transition(" + quote(a.message) + ")";
    case Action::Kind::FlagForRevision: return "flag_for_revision(" + render_target(a.target) + ")";
    case Action::Kind::Attenuate: return "attenuate(" + render_target(a.target) + ")";
    case Action::Kind::Archive: return "archive(" + render_target(a.target) + ")";
  }
  return "noop";
}

std::string render_condition(const Condition& c) {
  std::ostringstream os;
  render_into(c, os);
  return os.str();
}

std::string render_policy(const Policy& p) {
  std::ostringstream os;
  os << "POLICY " << p.name << "\n";
  os << "  ON   " << to_string(p.on_event) << "\n";
  os << "  WHEN " << render_condition(p.condition) << "\n";
  os << "  DO   " << render_action(p.action) << "\n";
  os << "  WITH evidence = {";
  for (std::size_t i = 0; i < p.evidence.size(); ++i) {
    if (i) os << ", ";
    os << p.evidence[i];
  }
  os << "}\n";
  return os.str();
}

// ---------------------------------------------------------------------------
// Evaluation

namespace {

const std::string& bound(const std::optional<std::string>& v, Variable var) {
  if (!v) throw EvaluationError(std::string("unbound variable '") + to_string(var) + "'");
  return *v;
}

std::vector<std::string> ids_of(const std::vector<TopicId>& ids) {
  std::vector<std::string> out;
  out.reserve(ids.size());
  for (const auto& id : ids) out.push_back(id.value);
  return out;
}

double topic_salience(const MemoryState& state, const std::string& id) {
  const Topic* t = find_topic(state, TopicId{id});
  if (!t) return 0.0;
  double s = 0.0;
  for (const auto& [name, f] : t->fields) s = std::max(s, f.salience);
  return s;
}

}  // namespace

std::vector<std::string> resolve_target(const Target& target, const MemoryState& state, const EvalContext& ctx) {
  if (!target.is_variable()) {
    const auto& id = std::get<std::string>(target.ref);
    if (find_topic(state, TopicId{id})) return {id};
    return {};
  }
  const auto& b = ctx.bindings;
  switch (std::get<Variable>(target.ref)) {
    case Variable::UpdatedTopic: return {bound(b.updated_topic, Variable::UpdatedTopic)};
    case Variable::UpdatedField:
      bound(b.updated_field, Variable::UpdatedField);
      return {bound(b.updated_topic, Variable::UpdatedTopic)};
    case Variable::AccessedTopic: return {bound(b.accessed_topic, Variable::AccessedTopic)};
    case Variable::DependentTopic: {
      const auto& src = bound(b.updated_topic, Variable::UpdatedTopic);
      return ids_of(successors(state, TopicId{src}, EdgeKind::Extension));
    }
    case Variable::SupersededCurrent: return ids_of(topics_with_superseded_current(state));
    case Variable::AttenuationCandidate: return ids_of(attenuation_candidates(state, ctx.params));
  }
  return {};
}

bool evaluate_condition(const Condition& cond, const MemoryState& state, const EvalContext& ctx) {
  switch (cond.kind) {
    case Condition::Kind::Exists: {
      switch (cond.variable) {
        case Variable::UpdatedField: return !bound(ctx.bindings.updated_field, cond.variable).empty();
        case Variable::UpdatedTopic: return !bound(ctx.bindings.updated_topic, cond.variable).empty();
        case Variable::AccessedTopic: return !bound(ctx.bindings.accessed_topic, cond.variable).empty();
        default: return !resolve_target(Target{cond.variable}, state, ctx).empty();
      }
    }
    case Condition::Kind::SalienceBelow: {
      if (cond.target.is_variable() && std::get<Variable>(cond.target.ref) == Variable::UpdatedField) {
        const auto& topic = bound(ctx.bindings.updated_topic, Variable::UpdatedTopic);
        const auto& field = bound(ctx.bindings.updated_field, Variable::UpdatedField);
        const Field* f = find_field(state, TopicId{topic}, field);
        return (f ? f->salience : 0.0) < cond.threshold;
      }
      double s = 0.0;
      for (const auto& id : resolve_target(cond.target, state, ctx)) s = std::max(s, topic_salience(state, id));
      return s < cond.threshold;
    }
    case Condition::Kind::FootprintAbove: {
      double limit = cond.footprint_limit ? static_cast<double>(*cond.footprint_limit) : ctx.beta;
      return static_cast<double>(active_footprint(state)) > limit;
    }
    case Condition::Kind::FieldIs: return bound(ctx.bindings.updated_field, Variable::UpdatedField) == cond.field;
    case Condition::Kind::TopicArchived: {
      for (const auto& id : resolve_target(cond.target, state, ctx)) {
        const Topic* t = find_topic(state, TopicId{id});
        if (t && t->archived) return true;
      }
      return false;
    }
    case Condition::Kind::Not: return !evaluate_condition(cond.children.at(0), state, ctx);
    case Condition::Kind::And:
      return evaluate_condition(cond.children.at(0), state, ctx) && evaluate_condition(cond.children.at(1), state, ctx);
    case Condition::Kind::Or:
      return evaluate_condition(cond.children.at(0), state, ctx) || evaluate_condition(cond.children.at(1), state, ctx);
  }
  return false;
}

std::vector<Policy> default_policy_set() {
  static const char* kDefaults =
      "POLICY propagate-on-change\n"
      "  ON   field_updated\n"
      "  WHEN EXISTS dependent_topic\n"
      "  DO   flag_for_revision(dependent_topic)\n"
      "  WITH evidence = {updated_field, timestamp}\n"
      "\n"
      "POLICY no-superseded-current\n"
      "  ON   pre_commit\n"
      "  WHEN EXISTS superseded_current\n"
      "  DO   reject_transition(\"no-superseded-current\")\n"
      "  WITH evidence = {}\n"
      "\n"
      "POLICY bounded-active-state\n"
      "  ON   pre_commit\n"
      "  WHEN active_footprint > beta\n"
      "  DO   reject_transition(\"bounded-active-state\")\n"
      "  WITH evidence = {}\n"
      "\n"
      "POLICY attenuate-on-tick\n"
      "  ON   tick\n"
      "  WHEN EXISTS attenuation_candidate\n"
      "  DO   attenuate(attenuation_candidate)\n"
      "  WITH evidence = {timestamp}\n";
  return parse_policy_file(kDefaults);
}

}  // namespace gem
