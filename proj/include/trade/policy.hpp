#pragma once

#include <cctype>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "trade/errors.hpp"

namespace trade {

// Attribute values are strings, integers or booleans; this is the whole
// value vocabulary of the policy language.
using Value = std::variant<std::string, std::int64_t, bool>;

inline std::string value_to_string(const Value& v) {
  if (std::holds_alternative<std::string>(v)) return '"' + std::get<std::string>(v) + '"';
  if (std::holds_alternative<std::int64_t>(v)) return std::to_string(std::get<std::int64_t>(v));
  return std::get<bool>(v) ? "true" : "false";
}

using AttributeSet = std::map<std::string, Value>;

enum class CompareOp : std::uint8_t { Eq, Ne, Lt, Le, Gt, Ge, Contains };

inline const char* compare_op_name(CompareOp op) {
  switch (op) {
    case CompareOp::Eq: return "=";
    case CompareOp::Ne: return "!=";
    case CompareOp::Lt: return "<";
    case CompareOp::Le: return "<=";
    case CompareOp::Gt: return ">";
    case CompareOp::Ge: return ">=";
    case CompareOp::Contains: return "contains";
  }
  return "?";
}

enum class Connective : std::uint8_t { And, Or };

// Rule tree: either a leaf comparison over one attribute or an AND/OR
// combination of at least two subtrees. There is no NOT; negation is
// available at leaves through !=.
struct RuleNode {
  enum class Kind : std::uint8_t { Leaf, Combine };

  Kind kind = Kind::Leaf;
  // leaf
  std::string attribute;
  CompareOp op = CompareOp::Eq;
  Value literal;
  // combine
  Connective connective = Connective::And;
  std::vector<RuleNode> children;

  static RuleNode leaf(std::string attribute, CompareOp op, Value literal) {
    RuleNode n;
    n.kind = Kind::Leaf;
    n.attribute = std::move(attribute);
    n.op = op;
    n.literal = std::move(literal);
    return n;
  }

  static RuleNode combine(Connective c, std::vector<RuleNode> children) {
    RuleNode n;
    n.kind = Kind::Combine;
    n.connective = c;
    n.children = std::move(children);
    return n;
  }

  bool operator==(const RuleNode& other) const {
    if (kind != other.kind) return false;
    if (kind == Kind::Leaf)
      return attribute == other.attribute && op == other.op && literal == other.literal;
    return connective == other.connective && children == other.children;
  }

  void collect_attributes(std::set<std::string>& out) const {
    if (kind == Kind::Leaf) {
      out.insert(attribute);
      return;
    }
    for (const auto& c : children) c.collect_attributes(out);
  }
};

enum class PolicyKind : std::uint8_t { Badge = 0, Sharing = 1, Consumption = 2 };

inline const char* policy_kind_name(PolicyKind k) {
  switch (k) {
    case PolicyKind::Badge: return "badge";
    case PolicyKind::Sharing: return "sharing";
    case PolicyKind::Consumption: return "consumption";
  }
  return "?";
}

struct PolicyDocument {
  std::string policy_id;
  std::string owner;  // pseudonym address
  std::string description;
  RuleNode terms;
  PolicyKind kind = PolicyKind::Sharing;
  std::set<std::string> grantees;  // pseudonym addresses allowed to reference the policy
};

// --- parser ---------------------------------------------------------------
//
//   policy := expr
//   expr   := '(' leaf ')' | '(' expr (('AND'|'OR') expr)+ ')'
//   leaf   := name op literal
//   op     := '=' | '!=' | '<' | '<=' | '>' | '>=' | 'contains'
//
// Whitespace-insensitive. A group must combine with a single connective;
// `(a AND b OR c)` is rejected rather than silently picking a precedence.

namespace detail {

struct Token {
  enum class Kind { LParen, RParen, And, Or, Ident, Op, String, Integer, Boolean, End };
  Kind kind;
  std::string text;
  CompareOp op = CompareOp::Eq;
  std::int64_t number = 0;
  bool flag = false;
  std::size_t pos = 0;
};

class Lexer {
 public:
  explicit Lexer(std::string_view text) : text_(text) {}

  Result<Token> next() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    Token t;
    t.pos = pos_;
    if (pos_ >= text_.size()) {
      t.kind = Token::Kind::End;
      return t;
    }
    char c = text_[pos_];
    if (c == '(') {
      ++pos_;
      t.kind = Token::Kind::LParen;
      return t;
    }
    if (c == ')') {
      ++pos_;
      t.kind = Token::Kind::RParen;
      return t;
    }
    if (c == '"') {
      ++pos_;
      std::string s;
      while (pos_ < text_.size() && text_[pos_] != '"') s.push_back(text_[pos_++]);
      if (pos_ >= text_.size())
        return Result<Token>::failure(Errc::SyntaxError, "unterminated string literal", t.pos);
      ++pos_;
      t.kind = Token::Kind::String;
      t.text = std::move(s);
      return t;
    }
    if (c == '-' || std::isdigit(static_cast<unsigned char>(c))) {
      std::size_t start = pos_;
      if (c == '-') ++pos_;
      while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
      if (pos_ == start + (c == '-' ? 1u : 0u))
        return Result<Token>::failure(Errc::SyntaxError, "expected digits", t.pos);
      t.kind = Token::Kind::Integer;
      try {
        t.number = std::stoll(std::string(text_.substr(start, pos_ - start)));
      } catch (...) {
        return Result<Token>::failure(Errc::SyntaxError, "integer out of range", t.pos);
      }
      return t;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t start = pos_;
      while (pos_ < text_.size() && (std::isalnum(static_cast<unsigned char>(text_[pos_])) ||
                                     text_[pos_] == '_'))
        ++pos_;
      std::string word(text_.substr(start, pos_ - start));
      if (word == "AND") {
        t.kind = Token::Kind::And;
        return t;
      }
      if (word == "OR") {
        t.kind = Token::Kind::Or;
        return t;
      }
      if (word == "true" || word == "false") {
        t.kind = Token::Kind::Boolean;
        t.flag = (word == "true");
        return t;
      }
      if (word == "contains") {
        t.kind = Token::Kind::Op;
        t.op = CompareOp::Contains;
        return t;
      }
      t.kind = Token::Kind::Ident;
      t.text = std::move(word);
      return t;
    }
    // operator punctuation
    auto two = text_.substr(pos_, 2);
    if (two == "!=" || two == "<=" || two == ">=") {
      t.kind = Token::Kind::Op;
      t.op = two == "!=" ? CompareOp::Ne : (two == "<=" ? CompareOp::Le : CompareOp::Ge);
      pos_ += 2;
      return t;
    }
    if (c == '=' || c == '<' || c == '>') {
      t.kind = Token::Kind::Op;
      t.op = c == '=' ? CompareOp::Eq : (c == '<' ? CompareOp::Lt : CompareOp::Gt);
      ++pos_;
      return t;
    }
    // reject operator-looking sequences like ~ or == distinctly from plain
    // garbage so callers can tell a bad operator from a bad expression
    if (c == '~' || c == '!' || c == '&' || c == '|') {
      return Result<Token>::failure(Errc::UnknownOperator, std::string(1, c), t.pos);
    }
    return Result<Token>::failure(Errc::SyntaxError, "unexpected character", t.pos);
  }

 private:
  std::string_view text_;
  std::size_t pos_ = 0;
};

class Parser {
 public:
  explicit Parser(std::string_view text) : lexer_(text) {}

  // The top level accepts an undelimited combination, so
  // `(a = 1) AND (b = 2)` needs no extra parentheses.
  Result<RuleNode> parse() {
    auto adv = advance();
    if (!adv.ok()) return Result<RuleNode>(adv.error());
    auto node = parse_expr();
    if (!node.ok()) return node;
    if (cur_.kind == Token::Kind::End) return node;

    Connective conn;
    if (cur_.kind == Token::Kind::And)
      conn = Connective::And;
    else if (cur_.kind == Token::Kind::Or)
      conn = Connective::Or;
    else
      return fail(Errc::SyntaxError, "trailing input after policy", cur_.pos);

    std::vector<RuleNode> children;
    children.push_back(std::move(node.value()));
    while (cur_.kind == Token::Kind::And || cur_.kind == Token::Kind::Or) {
      bool is_and = cur_.kind == Token::Kind::And;
      if ((is_and ? Connective::And : Connective::Or) != conn)
        return fail(Errc::SyntaxError, "mixed AND/OR in one group; add parentheses", cur_.pos);
      adv = advance();
      if (!adv.ok()) return Result<RuleNode>(adv.error());
      auto child = parse_expr();
      if (!child.ok()) return child;
      children.push_back(std::move(child.value()));
    }
    if (cur_.kind != Token::Kind::End)
      return fail(Errc::SyntaxError, "trailing input after policy", cur_.pos);
    return RuleNode::combine(conn, std::move(children));
  }

 private:
  Result<RuleNode> fail(Errc code, const std::string& why, std::size_t pos) {
    return Result<RuleNode>::failure(code, why, pos);
  }

  Status advance() {
    auto t = lexer_.next();
    if (!t.ok()) return Status(t.error());
    cur_ = t.value();
    return ok_status();
  }

  Result<RuleNode> parse_expr() {
    if (cur_.kind == Token::Kind::And || cur_.kind == Token::Kind::Or)
      return fail(Errc::EmptyCombine, "connective without a left operand", cur_.pos);
    if (cur_.kind != Token::Kind::LParen)
      return fail(Errc::SyntaxError, "expected '('", cur_.pos);
    std::size_t open_pos = cur_.pos;
    auto adv = advance();
    if (!adv.ok()) return Result<RuleNode>(adv.error());

    if (cur_.kind == Token::Kind::RParen)
      return fail(Errc::EmptyCombine, "empty parenthesized group", open_pos);
    if (cur_.kind == Token::Kind::And || cur_.kind == Token::Kind::Or)
      return fail(Errc::EmptyCombine, "connective without a left operand", cur_.pos);

    if (cur_.kind == Token::Kind::Ident) {
      return parse_leaf_tail();
    }

    // nested combination
    std::vector<RuleNode> children;
    auto first = parse_expr();
    if (!first.ok()) return first;
    children.push_back(std::move(first.value()));

    if (cur_.kind == Token::Kind::RParen)
      return fail(Errc::SyntaxError, "group must combine at least two expressions", cur_.pos);

    Connective conn;
    if (cur_.kind == Token::Kind::And)
      conn = Connective::And;
    else if (cur_.kind == Token::Kind::Or)
      conn = Connective::Or;
    else
      return fail(Errc::SyntaxError, "expected AND or OR", cur_.pos);

    while (cur_.kind == Token::Kind::And || cur_.kind == Token::Kind::Or) {
      bool is_and = cur_.kind == Token::Kind::And;
      if ((is_and ? Connective::And : Connective::Or) != conn)
        return fail(Errc::SyntaxError, "mixed AND/OR in one group; add parentheses", cur_.pos);
      adv = advance();
      if (!adv.ok()) return Result<RuleNode>(adv.error());
      auto child = parse_expr();
      if (!child.ok()) return child;
      children.push_back(std::move(child.value()));
    }
    if (cur_.kind != Token::Kind::RParen)
      return fail(Errc::SyntaxError, "expected ')'", cur_.pos);
    adv = advance();
    if (!adv.ok()) return Result<RuleNode>(adv.error());
    return RuleNode::combine(conn, std::move(children));
  }

  // cur_ is the attribute identifier; consumes through the closing paren.
  Result<RuleNode> parse_leaf_tail() {
    std::string name = cur_.text;
    auto adv = advance();
    if (!adv.ok()) return Result<RuleNode>(adv.error());
    if (cur_.kind != Token::Kind::Op)
      return fail(Errc::SyntaxError, "expected comparison operator", cur_.pos);
    CompareOp op = cur_.op;
    adv = advance();
    if (!adv.ok()) return Result<RuleNode>(adv.error());
    Value literal;
    switch (cur_.kind) {
      case Token::Kind::String: literal = cur_.text; break;
      case Token::Kind::Integer: literal = cur_.number; break;
      case Token::Kind::Boolean: literal = cur_.flag; break;
      case Token::Kind::Ident:
        return fail(Errc::SyntaxError, "expected literal (quote strings)", cur_.pos);
      default:
        return fail(Errc::SyntaxError, "expected literal", cur_.pos);
    }
    adv = advance();
    if (!adv.ok()) return Result<RuleNode>(adv.error());
    if (cur_.kind != Token::Kind::RParen)
      return fail(Errc::SyntaxError, "expected ')' after leaf", cur_.pos);
    adv = advance();
    if (!adv.ok()) return Result<RuleNode>(adv.error());
    return RuleNode::leaf(std::move(name), op, std::move(literal));
  }

  Lexer lexer_;
  Token cur_;
};

}  // namespace detail

inline Result<RuleNode> parse_policy(std::string_view text) {
  return detail::Parser(text).parse();
}

// Canonical form: parse(print_policy(n)) reproduces n exactly.
inline std::string print_policy(const RuleNode& n) {
  if (n.kind == RuleNode::Kind::Leaf)
    return "(" + n.attribute + " " + compare_op_name(n.op) + " " + value_to_string(n.literal) + ")";
  std::string out = "(";
  for (std::size_t i = 0; i < n.children.size(); ++i) {
    if (i) out += n.connective == Connective::And ? " AND " : " OR ";
    out += print_policy(n.children[i]);
  }
  out += ")";
  return out;
}

namespace detail {

inline Result<bool> evaluate_leaf(const RuleNode& n, const AttributeSet& attrs) {
  auto it = attrs.find(n.attribute);
  if (it == attrs.end()) return Result<bool>::failure(Errc::MissingAttribute, n.attribute);
  const Value& actual = it->second;
  auto mismatch = [&] { return Result<bool>::failure(Errc::TypeMismatch, n.attribute); };

  if (std::holds_alternative<std::int64_t>(n.literal)) {
    if (!std::holds_alternative<std::int64_t>(actual)) return mismatch();
    auto a = std::get<std::int64_t>(actual);
    auto b = std::get<std::int64_t>(n.literal);
    switch (n.op) {
      case CompareOp::Eq: return a == b;
      case CompareOp::Ne: return a != b;
      case CompareOp::Lt: return a < b;
      case CompareOp::Le: return a <= b;
      case CompareOp::Gt: return a > b;
      case CompareOp::Ge: return a >= b;
      case CompareOp::Contains: return mismatch();
    }
    return mismatch();
  }
  if (std::holds_alternative<std::string>(n.literal)) {
    if (!std::holds_alternative<std::string>(actual)) return mismatch();
    const auto& a = std::get<std::string>(actual);
    const auto& b = std::get<std::string>(n.literal);
    switch (n.op) {
      case CompareOp::Eq: return a == b;
      case CompareOp::Ne: return a != b;
      case CompareOp::Contains: return a.find(b) != std::string::npos;
      default: return mismatch();  // strings are unordered in this language
    }
  }
  if (!std::holds_alternative<bool>(actual)) return mismatch();
  bool a = std::get<bool>(actual);
  bool b = std::get<bool>(n.literal);
  switch (n.op) {
    case CompareOp::Eq: return a == b;
    case CompareOp::Ne: return a != b;
    default: return mismatch();
  }
}

}  // namespace detail

// Pure, total on well-formed input: AND is true iff all children are,
// OR iff any is. Children are still type-checked past a short circuit so
// that evaluation order can never change the outcome.
inline Result<bool> evaluate(const RuleNode& n, const AttributeSet& attrs) {
  if (n.kind == RuleNode::Kind::Leaf) return detail::evaluate_leaf(n, attrs);
  bool acc = n.connective == Connective::And;
  for (const auto& child : n.children) {
    auto r = evaluate(child, attrs);
    if (!r.ok()) return r;
    if (n.connective == Connective::And)
      acc = acc && r.value();
    else
      acc = acc || r.value();
  }
  return acc;
}

// Finite domains for the vacuity check, one value list per attribute.
using AttributeDomain = std::map<std::string, std::vector<Value>>;

inline constexpr std::uint64_t kVacuityBudget = 1000000;

// True iff the rule tree accepts every assignment over the declared domains
// of the attributes it mentions. Evaluation errors (missing domain, type
// confusion) propagate.
inline Result<bool> is_vacuous(const RuleNode& terms, const AttributeDomain& domains) {
  std::set<std::string> names;
  terms.collect_attributes(names);
  std::vector<std::string> attrs(names.begin(), names.end());

  std::uint64_t combinations = 1;
  for (const auto& name : attrs) {
    auto it = domains.find(name);
    if (it == domains.end()) return Result<bool>::failure(Errc::MissingAttribute, name);
    if (it->second.empty())
      return Result<bool>::failure(Errc::MissingAttribute, name + " has an empty domain");
    if (combinations > kVacuityBudget / it->second.size())
      return Result<bool>::failure(Errc::DomainTooLarge);
    combinations *= it->second.size();
  }
  if (combinations > kVacuityBudget) return Result<bool>::failure(Errc::DomainTooLarge);

  AttributeSet assignment;
  std::vector<std::size_t> idx(attrs.size(), 0);
  while (true) {
    for (std::size_t i = 0; i < attrs.size(); ++i)
      assignment[attrs[i]] = domains.at(attrs[i])[idx[i]];
    auto r = evaluate(terms, assignment);
    if (!r.ok()) return r;
    if (!r.value()) return false;
    // advance mixed-radix counter
    std::size_t i = 0;
    for (; i < idx.size(); ++i) {
      if (++idx[i] < domains.at(attrs[i]).size()) break;
      idx[i] = 0;
    }
    if (i == idx.size()) break;
  }
  return true;
}

}  // namespace trade
