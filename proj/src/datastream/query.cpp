#include "datastream/query.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <set>

#include <json.hpp>

#include "common/error.hpp"

namespace n2sky::datastream {

std::string_view op_symbol(CmpOp op) {
  switch (op) {
    case CmpOp::eq: return "=";
    case CmpOp::ne: return "!=";
    case CmpOp::lt: return "<";
    case CmpOp::le: return "<=";
    case CmpOp::gt: return ">";
    case CmpOp::ge: return ">=";
  }
  return "=";
}

namespace {

enum class Tok { ident, number, string, symbol, brace, end };

struct Token {
  Tok kind = Tok::end;
  std::string text;  // identifiers keep their case; symbols verbatim
  double number = 0;
  std::size_t pos = 0;
};

std::string upper(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

const std::set<std::string>& unsupported_keywords() {
  static const std::set<std::string> kw{
      "JOIN",   "INNER",  "LEFT",   "RIGHT",  "OUTER",    "CROSS", "NATURAL",
      "GROUP",  "ORDER",  "HAVING", "UNION",  "INTERSECT", "EXCEPT", "DISTINCT",
      "OFFSET", "INSERT", "UPDATE", "DELETE", "CREATE",   "DROP",  "ALTER",
      "INTO",   "VALUES", "IN",     "LIKE",   "BETWEEN",  "IS"};
  return kw;
}

class Lexer {
 public:
  explicit Lexer(std::string_view text) : text_(text) {}

  std::vector<Token> run() {
    std::vector<Token> out;
    for (;;) {
      skip_space();
      Token t;
      t.pos = i_;
      if (i_ >= text_.size()) {
        t.kind = Tok::end;
        out.push_back(t);
        return out;
      }
      const char c = text_[i_];
      if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
        std::size_t j = i_;
        while (j < text_.size() &&
               (std::isalnum(static_cast<unsigned char>(text_[j])) || text_[j] == '_')) {
          ++j;
        }
        t.kind = Tok::ident;
        t.text = std::string(text_.substr(i_, j - i_));
        i_ = j;
      } else if (std::isdigit(static_cast<unsigned char>(c)) ||
                 ((c == '-' || c == '.') && i_ + 1 < text_.size() &&
                  (std::isdigit(static_cast<unsigned char>(text_[i_ + 1])) ||
                   text_[i_ + 1] == '.'))) {
        t.kind = Tok::number;
        const char* first = text_.data() + i_;
        auto [ptr, ec] = std::from_chars(first, text_.data() + text_.size(), t.number);
        if (ec != std::errc()) throw SyntaxError(i_, "malformed number");
        t.text = std::string(first, ptr);
        i_ += static_cast<std::size_t>(ptr - first);
      } else if (c == '\'') {
        t.kind = Tok::string;
        std::size_t j = i_ + 1;
        for (;;) {
          if (j >= text_.size()) throw SyntaxError(i_, "unterminated string literal");
          if (text_[j] == '\'') {
            if (j + 1 < text_.size() && text_[j + 1] == '\'') {
              t.text += '\'';
              j += 2;
              continue;
            }
            break;
          }
          t.text += text_[j++];
        }
        i_ = j + 1;
      } else {
        t.kind = Tok::symbol;
        static constexpr std::string_view two[] = {"<=", ">=", "!=", "<>"};
        bool matched = false;
        for (auto s : two) {
          if (text_.substr(i_, 2) == s) {
            t.text = std::string(s == "<>" ? "!=" : s);
            i_ += 2;
            matched = true;
            break;
          }
        }
        if (!matched) {
          if (std::string_view("()*,;=<>.").find(c) == std::string_view::npos &&
              c != '{') {
            throw SyntaxError(i_, std::string("unexpected character '") + c + "'");
          }
          t.text = std::string(1, c);
          ++i_;
        }
      }
      // A document filter body is raw JSON; lexing stops at its '{' and the
      // parser re-lexes whatever follows the filter.
      const bool brace = t.kind == Tok::symbol && t.text == "{";
      if (brace) t.kind = Tok::brace;
      out.push_back(std::move(t));
      if (brace) {
        Token end;
        end.pos = text_.size();
        out.push_back(end);
        return out;
      }
    }
  }

 private:
  void skip_space() {
    while (i_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[i_]))) ++i_;
  }
  std::string_view text_;
  std::size_t i_ = 0;
};

class Parser {
 public:
  explicit Parser(std::string_view text) : text_(text) {}

  Query parse() {
    toks_ = Lexer(text_).run();
    const Token& first = peek();
    if (first.kind == Tok::end) {
      throw SyntaxError(first.pos, "empty query");
    }
    if (first.kind == Tok::ident) {
      const auto kw = upper(first.text);
      if (kw == "SELECT") return parse_select();
      if (unsupported_keywords().count(kw)) {
        throw_unsupported(first);
      }
      return parse_document();
    }
    throw SyntaxError(first.pos, "expected SELECT or a collection.find(...) query");
  }

 private:
  const Token& peek(std::size_t ahead = 0) const {
    const std::size_t idx = std::min(pos_ + ahead, toks_.size() - 1);
    return toks_[idx];
  }
  const Token& next() {
    const Token& t = peek();
    if (pos_ < toks_.size() - 1) ++pos_;
    return t;
  }
  bool is_keyword(const Token& t, std::string_view kw) const {
    return t.kind == Tok::ident && upper(t.text) == kw;
  }
  bool is_symbol(const Token& t, std::string_view s) const {
    return t.kind == Tok::symbol && t.text == s;
  }
  [[noreturn]] void throw_unsupported(const Token& t) const {
    throw Error(Errc::unsupported, "unsupported construct '" + upper(t.text) +
                                       "' at position " + std::to_string(t.pos));
  }
  void expect_keyword(std::string_view kw) {
    const Token& t = next();
    if (!is_keyword(t, kw)) {
      throw SyntaxError(t.pos, "expected " + std::string(kw));
    }
  }
  void expect_symbol(std::string_view s) {
    const Token& t = next();
    if (!is_symbol(t, s)) {
      throw SyntaxError(t.pos, "expected '" + std::string(s) + "'");
    }
  }
  std::string expect_identifier(const char* what) {
    const Token& t = next();
    if (t.kind != Tok::ident) throw SyntaxError(t.pos, std::string("expected ") + what);
    if (unsupported_keywords().count(upper(t.text))) throw_unsupported(t);
    return t.text;
  }
  void reject_if_unsupported(const Token& t) const {
    if (t.kind == Tok::ident && unsupported_keywords().count(upper(t.text))) {
      throw_unsupported(t);
    }
  }
  std::uint64_t parse_limit_value() {
    const Token& t = next();
    if (t.kind != Tok::number || t.text.find_first_not_of("0123456789") != std::string::npos) {
      throw SyntaxError(t.pos, "LIMIT expects a non-negative integer");
    }
    std::uint64_t n = 0;
    auto [ptr, ec] = std::from_chars(t.text.data(), t.text.data() + t.text.size(), n);
    if (ec != std::errc()) throw SyntaxError(t.pos, "LIMIT value out of range");
    return n;
  }
  void expect_end() {
    if (is_symbol(peek(), ";")) next();
    const Token& t = peek();
    if (t.kind != Tok::end) {
      reject_if_unsupported(t);
      throw SyntaxError(t.pos, "unexpected trailing input");
    }
  }

  Query parse_select() {
    next();  // SELECT
    TabularQuery q;
    if (is_symbol(peek(), "*")) {
      next();
    } else {
      for (;;) {
        q.projection.push_back(expect_identifier("a column name"));
        if (is_symbol(peek(), "(")) {
          throw Error(Errc::unsupported,
                      "unsupported construct: function call '" + q.projection.back() +
                          "(' at position " + std::to_string(peek().pos));
        }
        if (!is_symbol(peek(), ",")) break;
        next();
      }
    }
    expect_keyword("FROM");
    q.source = expect_identifier("a table name");
    if (is_symbol(peek(), ",")) {
      throw Error(Errc::unsupported, "unsupported construct: multiple tables at position " +
                                         std::to_string(peek().pos));
    }
    reject_if_unsupported(peek());
    if (is_keyword(peek(), "WHERE")) {
      next();
      q.predicate = parse_or();
    }
    reject_if_unsupported(peek());
    if (is_keyword(peek(), "LIMIT")) {
      next();
      q.limit = parse_limit_value();
    }
    expect_end();
    return q;
  }

  ExprPtr parse_or() {
    auto lhs = parse_and();
    while (is_keyword(peek(), "OR")) {
      next();
      auto rhs = parse_and();
      lhs = std::make_shared<Expr>(Expr{OrExpr{lhs, rhs}});
    }
    return lhs;
  }
  ExprPtr parse_and() {
    auto lhs = parse_factor();
    while (is_keyword(peek(), "AND")) {
      next();
      auto rhs = parse_factor();
      lhs = std::make_shared<Expr>(Expr{AndExpr{lhs, rhs}});
    }
    return lhs;
  }
  ExprPtr parse_factor() {
    if (is_keyword(peek(), "NOT")) {
      next();
      return std::make_shared<Expr>(Expr{NotExpr{parse_factor()}});
    }
    if (is_symbol(peek(), "(")) {
      next();
      if (is_keyword(peek(), "SELECT")) {
        throw Error(Errc::unsupported, "unsupported construct: subquery at position " +
                                           std::to_string(peek().pos));
      }
      auto e = parse_or();
      expect_symbol(")");
      return e;
    }
    Comparison c;
    c.lhs = parse_operand();
    const Token& op = next();
    if (op.kind != Tok::symbol) {
      reject_if_unsupported(op);
      throw SyntaxError(op.pos, "expected a comparison operator");
    }
    if (op.text == "=") c.op = CmpOp::eq;
    else if (op.text == "!=") c.op = CmpOp::ne;
    else if (op.text == "<") c.op = CmpOp::lt;
    else if (op.text == "<=") c.op = CmpOp::le;
    else if (op.text == ">") c.op = CmpOp::gt;
    else if (op.text == ">=") c.op = CmpOp::ge;
    else throw SyntaxError(op.pos, "expected a comparison operator");
    c.rhs = parse_operand();
    return std::make_shared<Expr>(Expr{std::move(c)});
  }
  Operand parse_operand() {
    const Token& t = next();
    switch (t.kind) {
      case Tok::number:
        return Value{t.number};
      case Tok::string:
        return Value{t.text};
      case Tok::ident:
        if (unsupported_keywords().count(upper(t.text))) throw_unsupported(t);
        return ColumnRef{t.text};
      default:
        throw SyntaxError(t.pos, "expected a column, number or string");
    }
  }

  // [db.]collection.find([{...}])[.limit(n)][;]
  Query parse_document() {
    DocumentQuery q;
    std::string first = expect_identifier("a collection name");
    expect_symbol(".");
    std::string second = expect_identifier("find");
    if (first == "db" && upper(second) != "FIND") {
      q.collection = second;
      expect_symbol(".");
      second = expect_identifier("find");
    } else {
      q.collection = first;
    }
    if (second != "find") {
      throw Error(Errc::unsupported, "unsupported document operation '" + second + "'");
    }
    expect_symbol("(");
    // The lexer stops at '{'; filter JSON is parsed directly from the text.
    const Token& t = peek();
    std::size_t resume = 0;
    if (t.kind == Tok::brace) {
      resume = parse_filter(t.pos, q);
    } else {
      expect_symbol(")");
      resume = peek().kind == Tok::end ? text_.size() : peek().pos;
      // Re-lex whatever follows the ')' uniformly below.
    }
    Parser tail(text_.substr(resume));
    tail.toks_ = Lexer(tail.text_).run();
    for (auto& tok : tail.toks_) tok.pos += resume;
    if (tail.is_symbol(tail.peek(), ".")) {
      tail.next();
      const Token& m = tail.next();
      if (!(m.kind == Tok::ident && m.text == "limit")) {
        throw Error(Errc::unsupported, "unsupported document modifier '" + m.text +
                                           "' at position " + std::to_string(m.pos));
      }
      tail.expect_symbol("(");
      q.limit = tail.parse_limit_value();
      tail.expect_symbol(")");
    }
    tail.expect_end();
    return q;
  }

  // Returns the offset just past the closing ')'.
  std::size_t parse_filter(std::size_t start, DocumentQuery& q) {
    std::size_t depth = 0;
    bool in_string = false;
    std::size_t end = start;
    for (; end < text_.size(); ++end) {
      const char c = text_[end];
      if (in_string) {
        if (c == '\\') ++end;
        else if (c == '"') in_string = false;
        continue;
      }
      if (c == '"') in_string = true;
      else if (c == '{') ++depth;
      else if (c == '}' && --depth == 0) break;
    }
    if (end >= text_.size()) throw SyntaxError(start, "unterminated filter object");
    nlohmann::json filter;
    try {
      filter = nlohmann::json::parse(text_.substr(start, end - start + 1));
    } catch (const nlohmann::json::parse_error& e) {
      throw SyntaxError(start + (e.byte > 0 ? e.byte - 1 : 0), "malformed filter object");
    }
    for (const auto& [key, cond] : filter.items()) {
      if (key.empty() || key.front() == '$') {
        throw Error(Errc::unsupported, "unsupported filter operator '" + key + "'");
      }
      if (cond.is_object()) {
        for (const auto& [op, v] : cond.items()) {
          FieldCondition fc;
          if (op == "$eq") fc.op = CmpOp::eq;
          else if (op == "$ne") fc.op = CmpOp::ne;
          else if (op == "$lt") fc.op = CmpOp::lt;
          else if (op == "$lte") fc.op = CmpOp::le;
          else if (op == "$gt") fc.op = CmpOp::gt;
          else if (op == "$gte") fc.op = CmpOp::ge;
          else throw Error(Errc::unsupported, "unsupported filter operator '" + op + "'");
          fc.value = literal(v, start);
          q.filter.emplace_back(key, std::move(fc));
        }
      } else {
        q.filter.emplace_back(key, FieldCondition{CmpOp::eq, literal(cond, start)});
      }
    }
    std::size_t i = end + 1;
    while (i < text_.size() && std::isspace(static_cast<unsigned char>(text_[i]))) ++i;
    if (i >= text_.size() || text_[i] != ')') throw SyntaxError(i, "expected ')'");
    return i + 1;
  }

  static Value literal(const nlohmann::json& v, std::size_t pos) {
    if (v.is_number()) return v.get<double>();
    if (v.is_string()) return v.get<std::string>();
    throw SyntaxError(pos, "filter values must be numbers or strings");
  }

  std::string_view text_;
  std::vector<Token> toks_;
  std::size_t pos_ = 0;
};

bool compare(const Value& a, CmpOp op, const Value& b) {
  switch (op) {
    case CmpOp::eq: return a == b;
    case CmpOp::ne: return a != b;
    case CmpOp::lt: return a < b;
    case CmpOp::le: return a <= b;
    case CmpOp::gt: return a > b;
    case CmpOp::ge: return a >= b;
  }
  return false;
}

// Resolves column references to indices and checks operand kinds once,
// before any row is scanned.
class BoundPredicate {
 public:
  BoundPredicate(const TableStore& store, const ExprPtr& root) : store_(store) {
    if (root) check(*root);
  }

  bool eval(const ExprPtr& e, const Row& row) const {
    return std::visit(
        [&](const auto& n) -> bool {
          using T = std::decay_t<decltype(n)>;
          if constexpr (std::is_same_v<T, Comparison>) {
            return compare(value(n.lhs, row), n.op, value(n.rhs, row));
          } else if constexpr (std::is_same_v<T, NotExpr>) {
            return !eval(n.inner, row);
          } else if constexpr (std::is_same_v<T, AndExpr>) {
            return eval(n.lhs, row) && eval(n.rhs, row);
          } else {
            return eval(n.lhs, row) || eval(n.rhs, row);
          }
        },
        e->node);
  }

 private:
  const Value& value(const Operand& o, const Row& row) const {
    if (const auto* ref = std::get_if<ColumnRef>(&o)) {
      return row[static_cast<std::size_t>(store_.column_index(ref->name))];
    }
    return std::get<Value>(o);
  }
  ColumnKind kind(const Operand& o) const {
    if (const auto* ref = std::get_if<ColumnRef>(&o)) {
      const int idx = store_.column_index(ref->name);
      if (idx < 0) {
        throw Error(Errc::not_found, "unknown column '" + ref->name + "' in table '" +
                                         store_.name + "'");
      }
      return store_.columns[static_cast<std::size_t>(idx)].kind;
    }
    return kind_of(std::get<Value>(o));
  }
  void check(const Expr& e) const {
    std::visit(
        [&](const auto& n) {
          using T = std::decay_t<decltype(n)>;
          if constexpr (std::is_same_v<T, Comparison>) {
            const auto l = kind(n.lhs);
            const auto r = kind(n.rhs);
            if (l != r) {
              throw Error(Errc::invalid_argument,
                          "kind mismatch: cannot compare " + std::string(kind_name(l)) +
                              " with " + std::string(kind_name(r)));
            }
          } else if constexpr (std::is_same_v<T, NotExpr>) {
            check(*n.inner);
          } else {
            check(*n.lhs);
            check(*n.rhs);
          }
        },
        e.node);
  }

  const TableStore& store_;
};

}  // namespace

Query parse_query(std::string_view text) { return Parser(text).parse(); }

TableResult execute_query(const TableStore& store, const TabularQuery& q) {
  if (q.source != store.name) {
    throw Error(Errc::not_found, "unknown table '" + q.source + "'");
  }
  std::vector<std::size_t> cols;
  TableResult out;
  if (q.projection.empty()) {
    for (std::size_t i = 0; i < store.columns.size(); ++i) {
      cols.push_back(i);
      out.columns.push_back(store.columns[i].name);
    }
  } else {
    for (const auto& name : q.projection) {
      const int idx = store.column_index(name);
      if (idx < 0) {
        throw Error(Errc::not_found,
                    "unknown column '" + name + "' in table '" + store.name + "'");
      }
      cols.push_back(static_cast<std::size_t>(idx));
      out.columns.push_back(name);
    }
  }
  const BoundPredicate pred(store, q.predicate);
  const std::uint64_t limit = q.limit.value_or(UINT64_MAX);
  for (const auto& row : store.rows) {
    if (out.rows.size() >= limit) break;
    if (q.predicate && !pred.eval(q.predicate, row)) continue;
    Row projected;
    projected.reserve(cols.size());
    for (auto c : cols) projected.push_back(row[c]);
    out.rows.push_back(std::move(projected));
  }
  return out;
}

DocumentResult execute_query(const DocumentStore& store, const DocumentQuery& q) {
  if (q.collection != store.name) {
    throw Error(Errc::not_found, "unknown collection '" + q.collection + "'");
  }
  DocumentResult out;
  const std::uint64_t limit = q.limit.value_or(UINT64_MAX);
  for (const auto& doc : store.documents) {
    if (out.documents.size() >= limit) break;
    const bool match = std::all_of(q.filter.begin(), q.filter.end(), [&](const auto& kv) {
      const auto& [key, cond] = kv;
      auto it = doc.find(key);
      if (it == doc.end() || kind_of(it->second) != kind_of(cond.value)) {
        return cond.op == CmpOp::ne;
      }
      return compare(it->second, cond.op, cond.value);
    });
    if (match) out.documents.push_back(doc);
  }
  return out;
}

}  // namespace n2sky::datastream
