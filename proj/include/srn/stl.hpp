#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "srn/format.hpp"
#include "srn/kinematics.hpp"

namespace srn::stl {

enum class NodeKind { Predicate, And, Eventually, Always, Seq };

enum class PredicateKind { Reach, Avoid };

/// Closed time window [lower, upper] in seconds, relative to the evaluation time.
struct Interval
{
  double lower{0.0};
  double upper{0.0};

  bool valid() const { return std::isfinite(lower) && std::isfinite(upper) && 0.0 <= lower && lower <= upper; }
  friend bool operator==(const Interval &, const Interval &) = default;
};

/**
 * Ball predicate over the robot position.
 *
 * reach(name, eps): eps - |p - c|, positive inside the ball.
 * avoid(name, r):   |p - c| - r, positive outside the ball.
 *
 * The center is bound from a NameTable after parsing; a dynamic binding
 * refers to a moving obstacle whose position is looked up per sample.
 */
struct Predicate
{
  PredicateKind kind{PredicateKind::Reach};
  std::string name;
  double radius{1.0};

  Vec2 center{Vec2::Zero()};
  int dynamic_index{-1};
  bool bound{false};

  bool is_dynamic() const { return dynamic_index >= 0; }
};

struct SourceLocation
{
  int line{1};
  int column{1};
};

struct Formula
{
  NodeKind kind{NodeKind::Predicate};
  Interval interval{};
  Predicate predicate{};
  std::vector<Formula> children;
  SourceLocation location{};

  static Formula make_predicate(PredicateKind kind, std::string name, double radius)
  {
    Formula f;
    f.kind = NodeKind::Predicate;
    f.predicate.kind = kind;
    f.predicate.name = std::move(name);
    f.predicate.radius = radius;
    return f;
  }

  static Formula make_temporal(NodeKind kind, Interval interval, Formula child)
  {
    Formula f;
    f.kind = kind;
    f.interval = interval;
    f.children.push_back(std::move(child));
    return f;
  }

  static Formula make_list(NodeKind kind, std::vector<Formula> children)
  {
    Formula f;
    f.kind = kind;
    f.children = std::move(children);
    return f;
  }

  bool is_temporal() const { return kind == NodeKind::Eventually || kind == NodeKind::Always; }
};

/// Structural equality: node kinds, intervals, predicate kinds, names and radii.
inline bool structurally_equal(const Formula & a, const Formula & b)
{
  if (a.kind != b.kind) { return false; }
  switch (a.kind) {
    case NodeKind::Predicate:
      return a.predicate.kind == b.predicate.kind && a.predicate.name == b.predicate.name &&
             a.predicate.radius == b.predicate.radius;
    case NodeKind::Eventually:
    case NodeKind::Always:
      if (!(a.interval == b.interval)) { return false; }
      [[fallthrough]];
    case NodeKind::And:
    case NodeKind::Seq:
      if (a.children.size() != b.children.size()) { return false; }
      for (std::size_t i = 0; i < a.children.size(); ++i) {
        if (!structurally_equal(a.children[i], b.children[i])) { return false; }
      }
      return true;
  }
  return false;
}

// ---------------------------------------------------------------------------
// Errors

class ParseError : public std::runtime_error
{
public:
  enum class Reason { Syntax, Interval, Radius };

  ParseError(Reason reason, SourceLocation loc, const std::string & msg)
      : std::runtime_error(std::to_string(loc.line) + ":" + std::to_string(loc.column) + ": " + msg),
        reason_(reason), location_(loc)
  {}

  Reason reason() const { return reason_; }
  SourceLocation location() const { return location_; }

private:
  Reason reason_;
  SourceLocation location_;
};

enum class ViolationKind {
  NestedTemporal,   ///< temporal operator below another temporal operator
  NestedSeq,        ///< seq anywhere but the root
  SeqOrdering,      ///< child windows overlap or are out of order
  UntimedInSeq,     ///< bare predicate inside a seq child
  InvalidInterval,  ///< 0 <= a <= b violated
  InvalidRadius,    ///< radius <= 0
  EmptyList,        ///< And/Seq with no children
};

struct Violation
{
  ViolationKind kind;
  std::string path;
  std::string message;
};

class FragmentError : public std::runtime_error
{
public:
  explicit FragmentError(std::vector<Violation> violations)
      : std::runtime_error(describe(violations)), violations_(std::move(violations))
  {}

  const std::vector<Violation> & violations() const { return violations_; }

private:
  static std::string describe(const std::vector<Violation> & vs)
  {
    std::string out = "formula outside the supported fragment:";
    for (const auto & v : vs) { out += " [" + v.path + "] " + v.message + ";"; }
    return out;
  }

  std::vector<Violation> violations_;
};

class UnresolvedNameError : public std::runtime_error
{
public:
  explicit UnresolvedNameError(const std::string & name)
      : std::runtime_error("unresolved name '" + name + "'"), name_(name)
  {}
  const std::string & name() const { return name_; }

private:
  std::string name_;
};

class HorizonError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Parser

namespace detail {

enum class TokenKind { Ident, Number, LBracket, RBracket, LParen, RParen, LBrace, RBrace, Comma, Semicolon, Amp, End };

struct Token
{
  TokenKind kind;
  std::string text;
  double number{0.0};
  SourceLocation loc;
};

inline std::string describe(TokenKind k)
{
  switch (k) {
    case TokenKind::Ident: return "identifier";
    case TokenKind::Number: return "number";
    case TokenKind::LBracket: return "'['";
    case TokenKind::RBracket: return "']'";
    case TokenKind::LParen: return "'('";
    case TokenKind::RParen: return "')'";
    case TokenKind::LBrace: return "'{'";
    case TokenKind::RBrace: return "'}'";
    case TokenKind::Comma: return "','";
    case TokenKind::Semicolon: return "';'";
    case TokenKind::Amp: return "'&'";
    case TokenKind::End: return "end of input";
  }
  return "?";
}

inline std::vector<Token> tokenize(std::string_view text)
{
  std::vector<Token> out;
  SourceLocation loc;
  std::size_t i = 0;
  auto advance = [&](std::size_t n) {
    for (std::size_t k = 0; k < n; ++k) {
      if (text[i] == '\n') {
        ++loc.line;
        loc.column = 1;
      } else {
        ++loc.column;
      }
      ++i;
    }
  };

  while (i < text.size()) {
    const char c = text[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      advance(1);
      continue;
    }
    if (c == '#') {
      while (i < text.size() && text[i] != '\n') { advance(1); }
      continue;
    }
    const SourceLocation start = loc;
    auto single = [&](TokenKind k) {
      out.push_back({k, std::string(1, c), 0.0, start});
      advance(1);
    };
    switch (c) {
      case '[': single(TokenKind::LBracket); continue;
      case ']': single(TokenKind::RBracket); continue;
      case '(': single(TokenKind::LParen); continue;
      case ')': single(TokenKind::RParen); continue;
      case '{': single(TokenKind::LBrace); continue;
      case '}': single(TokenKind::RBrace); continue;
      case ',': single(TokenKind::Comma); continue;
      case ';': single(TokenKind::Semicolon); continue;
      case '&': single(TokenKind::Amp); continue;
      default: break;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t j = i;
      while (j < text.size() && (std::isalnum(static_cast<unsigned char>(text[j])) || text[j] == '_')) { ++j; }
      out.push_back({TokenKind::Ident, std::string(text.substr(i, j - i)), 0.0, start});
      advance(j - i);
      continue;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.' || c == '-' || c == '+') {
      std::size_t j = i + 1;
      while (j < text.size()) {
        const char d = text[j];
        const bool exp_sign = (d == '-' || d == '+') && (text[j - 1] == 'e' || text[j - 1] == 'E');
        if (std::isdigit(static_cast<unsigned char>(d)) || d == '.' || d == 'e' || d == 'E' || exp_sign) {
          ++j;
        } else {
          break;
        }
      }
      const auto lexeme = text.substr(i, j - i);
      const auto value = parse_double(lexeme);
      if (!value || !std::isfinite(*value)) {
        throw ParseError(ParseError::Reason::Syntax, start, "malformed number '" + std::string(lexeme) + "'");
      }
      out.push_back({TokenKind::Number, std::string(lexeme), *value, start});
      advance(j - i);
      continue;
    }
    throw ParseError(ParseError::Reason::Syntax, start, std::string("unexpected character '") + c + "'");
  }
  out.push_back({TokenKind::End, "", 0.0, loc});
  return out;
}

class Parser
{
public:
  explicit Parser(std::vector<Token> tokens) : tokens_(std::move(tokens)) {}

  Formula parse_mission()
  {
    Formula f = parse_expr();
    expect(TokenKind::End);
    return f;
  }

private:
  const Token & peek() const { return tokens_[pos_]; }

  const Token & expect(TokenKind k)
  {
    const Token & t = peek();
    if (t.kind != k) {
      throw ParseError(ParseError::Reason::Syntax, t.loc,
                       "expected " + describe(k) + ", found " + (t.kind == TokenKind::End ? describe(t.kind) : "'" + t.text + "'"));
    }
    ++pos_;
    return t;
  }

  bool accept(TokenKind k)
  {
    if (peek().kind == k) {
      ++pos_;
      return true;
    }
    return false;
  }

  Formula parse_expr()
  {
    const SourceLocation loc = peek().loc;
    std::vector<Formula> terms;
    terms.push_back(parse_unary());
    while (accept(TokenKind::Amp)) { terms.push_back(parse_unary()); }
    if (terms.size() == 1) { return std::move(terms.front()); }

    std::vector<Formula> flat;
    for (auto & t : terms) {
      if (t.kind == NodeKind::And) {
        for (auto & c : t.children) { flat.push_back(std::move(c)); }
      } else {
        flat.push_back(std::move(t));
      }
    }
    Formula f = Formula::make_list(NodeKind::And, std::move(flat));
    f.location = loc;
    return f;
  }

  Formula parse_unary()
  {
    const Token & t = peek();
    if (t.kind == TokenKind::LParen) {
      ++pos_;
      Formula f = parse_expr();
      expect(TokenKind::RParen);
      return f;
    }
    if (t.kind != TokenKind::Ident) {
      throw ParseError(ParseError::Reason::Syntax, t.loc,
                       "expected formula, found " + (t.kind == TokenKind::End ? describe(t.kind) : "'" + t.text + "'"));
    }
    const SourceLocation loc = t.loc;
    if (t.text == "F" || t.text == "G") {
      const NodeKind kind = t.text == "F" ? NodeKind::Eventually : NodeKind::Always;
      ++pos_;
      const Interval iv = parse_interval();
      Formula f = Formula::make_temporal(kind, iv, parse_unary());
      f.location = loc;
      return f;
    }
    if (t.text == "seq") {
      ++pos_;
      expect(TokenKind::LBrace);
      std::vector<Formula> items;
      items.push_back(parse_expr());
      while (accept(TokenKind::Semicolon)) {
        if (peek().kind == TokenKind::RBrace) { break; }
        items.push_back(parse_expr());
      }
      expect(TokenKind::RBrace);
      Formula f = Formula::make_list(NodeKind::Seq, std::move(items));
      f.location = loc;
      return f;
    }
    if (t.text == "reach" || t.text == "avoid") {
      const PredicateKind kind = t.text == "reach" ? PredicateKind::Reach : PredicateKind::Avoid;
      ++pos_;
      expect(TokenKind::LParen);
      const Token & name = expect(TokenKind::Ident);
      expect(TokenKind::Comma);
      const Token & radius = expect(TokenKind::Number);
      expect(TokenKind::RParen);
      if (!(radius.number > 0.0)) {
        throw ParseError(ParseError::Reason::Radius, radius.loc, "predicate radius must be positive, got " + radius.text);
      }
      Formula f = Formula::make_predicate(kind, name.text, radius.number);
      f.location = loc;
      return f;
    }
    throw ParseError(ParseError::Reason::Syntax, t.loc, "unknown operator '" + t.text + "'");
  }

  Interval parse_interval()
  {
    const Token & open = expect(TokenKind::LBracket);
    const Token & lo = expect(TokenKind::Number);
    expect(TokenKind::Comma);
    const Token & hi = expect(TokenKind::Number);
    expect(TokenKind::RBracket);
    const Interval iv{lo.number, hi.number};
    if (iv.lower < 0.0) {
      throw ParseError(ParseError::Reason::Interval, lo.loc, "interval lower bound must be non-negative");
    }
    if (iv.lower > iv.upper) {
      throw ParseError(ParseError::Reason::Interval, open.loc,
                       "interval [" + lo.text + "," + hi.text + "] has lower bound above upper bound");
    }
    return iv;
  }

  std::vector<Token> tokens_;
  std::size_t pos_{0};
};

}  // namespace detail

/// Parses the grammar without checking the compilable fragment.
inline Formula parse_syntax(std::string_view text)
{
  detail::Parser parser(detail::tokenize(text));
  return parser.parse_mission();
}

// ---------------------------------------------------------------------------
// Fragment

namespace detail {

inline void check_conjunction_of_predicates(const Formula & f, const std::string & path, std::vector<Violation> & out)
{
  if (f.kind == NodeKind::Predicate) {
    if (!(f.predicate.radius > 0.0)) { out.push_back({ViolationKind::InvalidRadius, path, "predicate radius must be positive"}); }
    return;
  }
  if (f.kind == NodeKind::And) {
    if (f.children.empty()) { out.push_back({ViolationKind::EmptyList, path, "empty conjunction"}); }
    for (std::size_t i = 0; i < f.children.size(); ++i) {
      check_conjunction_of_predicates(f.children[i], path + ".and[" + std::to_string(i) + "]", out);
    }
    return;
  }
  if (f.is_temporal()) {
    out.push_back({ViolationKind::NestedTemporal, path, "nested temporal operator"});
  } else {
    out.push_back({ViolationKind::NestedSeq, path, "seq is only allowed at the root"});
  }
}

// task := conjunction of (temporal over predicates | predicate)
inline void check_task(const Formula & f, const std::string & path, bool in_seq, std::vector<Violation> & out)
{
  switch (f.kind) {
    case NodeKind::Predicate:
      if (in_seq) { out.push_back({ViolationKind::UntimedInSeq, path, "untimed predicate inside seq"}); }
      check_conjunction_of_predicates(f, path, out);
      return;
    case NodeKind::Eventually:
    case NodeKind::Always:
      if (!f.interval.valid()) { out.push_back({ViolationKind::InvalidInterval, path, "interval must satisfy 0 <= a <= b"}); }
      if (f.children.size() != 1) {
        out.push_back({ViolationKind::EmptyList, path, "temporal operator needs exactly one operand"});
        return;
      }
      check_conjunction_of_predicates(f.children.front(), path + (f.kind == NodeKind::Eventually ? ".F" : ".G"), out);
      return;
    case NodeKind::And:
      if (f.children.empty()) { out.push_back({ViolationKind::EmptyList, path, "empty conjunction"}); }
      for (std::size_t i = 0; i < f.children.size(); ++i) {
        check_task(f.children[i], path + ".and[" + std::to_string(i) + "]", in_seq, out);
      }
      return;
    case NodeKind::Seq:
      out.push_back({ViolationKind::NestedSeq, path, "seq is only allowed at the root"});
      return;
  }
}

inline void temporal_window(const Formula & f, double & start, double & deadline)
{
  if (f.is_temporal()) {
    start = std::min(start, f.interval.lower);
    deadline = std::max(deadline, f.interval.upper);
  }
  if (f.kind == NodeKind::And) {
    for (const auto & c : f.children) { temporal_window(c, start, deadline); }
  }
}

}  // namespace detail

/// Earliest window start and latest deadline over the temporal operators of a task.
inline std::pair<double, double> task_window(const Formula & task)
{
  double start = std::numeric_limits<double>::infinity();
  double deadline = 0.0;
  detail::temporal_window(task, start, deadline);
  if (!std::isfinite(start)) { start = 0.0; }
  return {start, deadline};
}

/**
 * Checks the compilable fragment: a task is a conjunction of predicates and
 * F/G operators over conjunctions of predicates; the root is a task or a
 * seq of tasks whose windows are ordered and non-overlapping.
 */
inline std::vector<Violation> validate_fragment(const Formula & f)
{
  std::vector<Violation> out;
  if (f.kind != NodeKind::Seq) {
    detail::check_task(f, "root", false, out);
    return out;
  }
  if (f.children.empty()) { out.push_back({ViolationKind::EmptyList, "root", "empty seq"}); }
  for (std::size_t i = 0; i < f.children.size(); ++i) {
    detail::check_task(f.children[i], "seq[" + std::to_string(i) + "]", true, out);
  }
  for (std::size_t i = 0; i + 1 < f.children.size(); ++i) {
    const auto [s0, d0] = task_window(f.children[i]);
    const auto [s1, d1] = task_window(f.children[i + 1]);
    (void)s0;
    (void)d1;
    if (d0 > s1) {
      out.push_back({ViolationKind::SeqOrdering, "seq[" + std::to_string(i + 1) + "]",
                     "task starts at " + format_double(s1) + " before previous deadline " + format_double(d0)});
    }
  }
  return out;
}

/// Parses and checks the fragment; throws ParseError or FragmentError.
inline Formula parse_stl(std::string_view text)
{
  if (text.find_first_not_of(" \t\r\n") == std::string_view::npos) {
    throw ParseError(ParseError::Reason::Syntax, {}, "empty formula");
  }
  Formula f = parse_syntax(text);
  auto violations = validate_fragment(f);
  if (!violations.empty()) { throw FragmentError(std::move(violations)); }
  return f;
}

/// Latest absolute time referenced by the formula when evaluated at t = 0.
inline double horizon(const Formula & f)
{
  double h = 0.0;
  if (f.is_temporal()) { h = f.interval.upper; }
  double child_max = 0.0;
  for (const auto & c : f.children) { child_max = std::max(child_max, horizon(c)); }
  return f.is_temporal() ? h + child_max : child_max;
}

// ---------------------------------------------------------------------------
// Printer

inline std::string to_string(const Formula & f)
{
  switch (f.kind) {
    case NodeKind::Predicate:
      return std::string(f.predicate.kind == PredicateKind::Reach ? "reach(" : "avoid(") + f.predicate.name + ", " +
             format_double(f.predicate.radius) + ")";
    case NodeKind::Eventually:
    case NodeKind::Always: {
      std::string out = f.kind == NodeKind::Eventually ? "F[" : "G[";
      out += format_double(f.interval.lower) + "," + format_double(f.interval.upper) + "] ";
      const Formula & c = f.children.front();
      return out + (c.kind == NodeKind::And ? "(" + to_string(c) + ")" : to_string(c));
    }
    case NodeKind::And: {
      std::string out;
      for (std::size_t i = 0; i < f.children.size(); ++i) {
        if (i) { out += " & "; }
        const Formula & c = f.children[i];
        out += c.kind == NodeKind::And ? "(" + to_string(c) + ")" : to_string(c);
      }
      return out;
    }
    case NodeKind::Seq: {
      std::string out = "seq { ";
      for (const auto & c : f.children) { out += to_string(c) + "; "; }
      return out + "}";
    }
  }
  return {};
}

// ---------------------------------------------------------------------------
// Name binding

/// Named points (poses, static obstacle centers) and dynamic obstacle slots.
struct NameTable
{
  std::map<std::string, Vec2, std::less<>> points;
  std::map<std::string, int, std::less<>> dynamic;
};

inline void bind_names(Formula & f, const NameTable & names)
{
  if (f.kind == NodeKind::Predicate) {
    auto & p = f.predicate;
    if (auto it = names.points.find(p.name); it != names.points.end()) {
      p.center = it->second;
      p.dynamic_index = -1;
    } else if (auto dit = names.dynamic.find(p.name); dit != names.dynamic.end()) {
      p.dynamic_index = dit->second;
    } else {
      throw UnresolvedNameError(p.name);
    }
    p.bound = true;
    return;
  }
  for (auto & c : f.children) { bind_names(c, names); }
}

template<typename Fn>
void for_each_predicate(const Formula & f, Fn && fn)
{
  if (f.kind == NodeKind::Predicate) {
    fn(f.predicate);
    return;
  }
  for (const auto & c : f.children) { for_each_predicate(c, fn); }
}

// ---------------------------------------------------------------------------
// Quantitative semantics

/// Margin of a bound predicate at a robot position; dynamic centers come from `dynamic_positions`.
inline double predicate_margin(const Predicate & p, const Vec2 & position, const std::vector<Vec2> & dynamic_positions = {})
{
  const Vec2 center = p.is_dynamic() ? dynamic_positions.at(static_cast<std::size_t>(p.dynamic_index)) : p.center;
  const double dist = (position - center).norm();
  return p.kind == PredicateKind::Reach ? p.radius - dist : dist - p.radius;
}

/// Sample-index window [first, last] covered by interval iv from sample k.
struct SampleWindow
{
  std::size_t first;
  std::size_t last;
};

inline SampleWindow sample_window(std::size_t k, const Interval & iv, double dt)
{
  constexpr double eps = 1e-9;
  const auto lo = static_cast<std::size_t>(std::ceil(iv.lower / dt - eps));
  const auto hi = static_cast<std::size_t>(std::floor(iv.upper / dt + eps));
  return {k + lo, k + hi};
}

/**
 * Robustness on a uniformly sampled signal.
 *
 * `signal(pred, k)` returns the predicate margin at sample k. Temporal
 * operators take max/min over the samples in [t+a, t+b]; no interpolation.
 */
template<typename Signal>
double robustness_at(const Formula & f, std::size_t k, std::size_t sample_count, double dt, Signal && signal)
{
  switch (f.kind) {
    case NodeKind::Predicate:
      if (k >= sample_count) { throw HorizonError("formula horizon exceeds trace"); }
      return signal(f.predicate, k);
    case NodeKind::And:
    case NodeKind::Seq: {
      double r = std::numeric_limits<double>::infinity();
      for (const auto & c : f.children) { r = std::min(r, robustness_at(c, k, sample_count, dt, signal)); }
      return r;
    }
    case NodeKind::Eventually:
    case NodeKind::Always: {
      const SampleWindow w = sample_window(k, f.interval, dt);
      if (w.last >= sample_count) {
        throw HorizonError("formula horizon t=" + format_double((static_cast<double>(w.last)) * dt) +
                           " exceeds trace end t=" + format_double(static_cast<double>(sample_count - 1) * dt));
      }
      const bool eventually = f.kind == NodeKind::Eventually;
      double r = eventually ? -std::numeric_limits<double>::infinity() : std::numeric_limits<double>::infinity();
      for (std::size_t j = w.first; j <= w.last; ++j) {
        const double v = robustness_at(f.children.front(), j, sample_count, dt, signal);
        r = eventually ? std::max(r, v) : std::min(r, v);
      }
      return r;
    }
  }
  return 0.0;
}

inline std::size_t time_to_sample(double t, double dt)
{
  if (t < 0.0) { throw HorizonError("negative evaluation time"); }
  return static_cast<std::size_t>(std::llround(t / dt));
}

}  // namespace srn::stl
