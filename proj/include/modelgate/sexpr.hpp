#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace modelgate {

/// 1-based position of a token in its source text. Columns count code
/// points; `length` counts bytes and is at least 1.
struct SourceSpan {
  int line = 1;
  int column = 1;
  int length = 1;

  friend bool operator==(const SourceSpan&, const SourceSpan&) = default;
};

struct ParseError {
  SourceSpan span;
  std::string message;
  std::vector<std::string> expected;
};

inline std::string format_error(const ParseError& e, std::string_view file = {}) {
  std::string out;
  if (!file.empty()) out += std::string(file) + ":";
  out += std::to_string(e.span.line) + ":" + std::to_string(e.span.column) + ": error: " + e.message;
  if (!e.expected.empty()) {
    out += " (expected ";
    for (std::size_t i = 0; i < e.expected.size(); ++i) {
      if (i) out += i + 1 == e.expected.size() ? " or " : ", ";
      out += e.expected[i];
    }
    out += ")";
  }
  return out;
}

struct SExpr {
  enum class Kind { atom, string, list };

  Kind kind = Kind::list;
  std::string text;
  std::vector<SExpr> items;
  SourceSpan span;

  bool is_list() const { return kind == Kind::list; }
  bool is_atom() const { return kind == Kind::atom; }
  bool is_atom(std::string_view t) const { return kind == Kind::atom && text == t; }
  bool head_is(std::string_view t) const { return is_list() && !items.empty() && items[0].is_atom(t); }
};

struct ReadOptions {
  std::size_t max_depth = 256;
  std::size_t max_errors = 64;
};

namespace detail {

class SExprReader {
 public:
  SExprReader(std::string_view src, std::vector<ParseError>& errors, ReadOptions opts)
      : src_(src), errors_(errors), opts_(opts) {}

  std::vector<SExpr> read_all() {
    // Explicit stack; nesting depth is bounded only by max_depth, never by
    // the call stack.
    std::vector<SExpr> top;
    std::vector<SExpr> open;
    std::size_t discarded_depth = 0;  // lists opened beyond max_depth

    while (!too_many_errors()) {
      skip_space_and_comments();
      if (pos_ >= src_.size()) break;
      const char c = src_[pos_];
      const SourceSpan start = here(1);

      if (c == '(') {
        advance();
        if (discarded_depth > 0 || open.size() >= opts_.max_depth) {
          if (discarded_depth == 0) error(start, "nesting deeper than " + std::to_string(opts_.max_depth) + " levels");
          ++discarded_depth;
          continue;
        }
        SExpr list;
        list.kind = SExpr::Kind::list;
        list.span = start;
        open.push_back(std::move(list));
        continue;
      }
      if (c == ')') {
        advance();
        if (discarded_depth > 0) {
          --discarded_depth;
          continue;
        }
        if (open.empty()) {
          error(start, "unexpected ')'");
          continue;
        }
        SExpr done = std::move(open.back());
        open.pop_back();
        push(std::move(done), top, open);
        continue;
      }

      SExpr atom = c == '"' ? read_string() : c == '|' ? read_quoted_symbol() : read_atom();
      if (atom.text.empty() && atom.kind == SExpr::Kind::atom) continue;  // lexical error already reported
      if (discarded_depth == 0) push(std::move(atom), top, open);
    }

    if (too_many_errors()) return top;
    while (!open.empty()) {
      SExpr unclosed = std::move(open.back());
      open.pop_back();
      error(unclosed.span, "unclosed '('", {"')'"});
      push(std::move(unclosed), top, open);
    }
    return top;
  }

 private:
  bool too_many_errors() const { return errors_.size() >= opts_.max_errors; }

  void push(SExpr e, std::vector<SExpr>& top, std::vector<SExpr>& open) {
    if (open.empty()) {
      top.push_back(std::move(e));
    } else {
      open.back().items.push_back(std::move(e));
    }
  }

  SourceSpan here(int length) const { return SourceSpan{line_, column_, length < 1 ? 1 : length}; }

  void error(SourceSpan span, std::string message, std::vector<std::string> expected = {}) {
    if (too_many_errors()) return;
    errors_.push_back(ParseError{span, std::move(message), std::move(expected)});
  }

  void advance() {
    const auto byte = static_cast<unsigned char>(src_[pos_]);
    ++pos_;
    if (byte == '\n') {
      ++line_;
      column_ = 1;
    } else if ((byte & 0xC0) != 0x80) {
      ++column_;
    }
  }

  void skip_space_and_comments() {
    while (pos_ < src_.size()) {
      const char c = src_[pos_];
      if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
        advance();
      } else if (c == ';') {
        while (pos_ < src_.size() && src_[pos_] != '\n') advance();
      } else {
        break;
      }
    }
  }

  static bool is_delimiter(char c) {
    return c == '(' || c == ')' || c == ';' || c == '"' || c == '|' || c == ' ' || c == '\t' || c == '\n' ||
           c == '\r';
  }

  SExpr read_atom() {
    SExpr atom;
    atom.kind = SExpr::Kind::atom;
    const SourceSpan start = here(1);
    const std::size_t begin = pos_;
    bool bad = false;
    SourceSpan bad_span;
    while (pos_ < src_.size() && !is_delimiter(src_[pos_])) {
      const auto byte = static_cast<unsigned char>(src_[pos_]);
      if (!bad && (byte < 0x20 || byte >= 0x7F)) {
        bad = true;
        bad_span = here(1);
      }
      advance();
    }
    if (bad) {
      error(bad_span, "invalid character in symbol");
      return atom;
    }
    atom.text = std::string(src_.substr(begin, pos_ - begin));
    atom.span = start;
    atom.span.length = static_cast<int>(pos_ - begin);
    return atom;
  }

  SExpr read_string() {
    SExpr s;
    s.kind = SExpr::Kind::string;
    s.span = here(1);
    const std::size_t begin = pos_;
    advance();
    while (pos_ < src_.size()) {
      if (src_[pos_] == '"') {
        // SMT-LIB escapes a quote by doubling it.
        if (pos_ + 1 < src_.size() && src_[pos_ + 1] == '"') {
          s.text += '"';
          advance();
          advance();
          continue;
        }
        advance();
        s.span.length = static_cast<int>(pos_ - begin);
        return s;
      }
      s.text += src_[pos_];
      advance();
    }
    error(s.span, "unterminated string literal", {"'\"'"});
    s.span.length = static_cast<int>(pos_ - begin);
    return s;
  }

  SExpr read_quoted_symbol() {
    SExpr atom;
    atom.kind = SExpr::Kind::atom;
    atom.span = here(1);
    const std::size_t begin = pos_;
    advance();
    while (pos_ < src_.size() && src_[pos_] != '|') {
      atom.text += src_[pos_];
      advance();
    }
    if (pos_ >= src_.size()) {
      error(atom.span, "unterminated quoted symbol", {"'|'"});
      atom.text.clear();
      return atom;
    }
    advance();
    atom.span.length = static_cast<int>(pos_ - begin);
    if (atom.text.empty()) atom.text = "||";
    return atom;
  }

  std::string_view src_;
  std::vector<ParseError>& errors_;
  ReadOptions opts_;
  std::size_t pos_ = 0;
  int line_ = 1;
  int column_ = 1;
};

}  // namespace detail

/// Reads every top-level s-expression in `src`. Problems are appended to
/// `errors`; reading always terminates and returns what could be recovered.
inline std::vector<SExpr> read_sexprs(std::string_view src, std::vector<ParseError>& errors, ReadOptions opts = {}) {
  return detail::SExprReader(src, errors, opts).read_all();
}

inline void write_sexpr(std::string& out, const SExpr& e) {
  switch (e.kind) {
    case SExpr::Kind::atom: out += e.text; return;
    case SExpr::Kind::string: {
      out += '"';
      for (char c : e.text) {
        if (c == '"') out += '"';
        out += c;
      }
      out += '"';
      return;
    }
    case SExpr::Kind::list:
      out += '(';
      for (std::size_t i = 0; i < e.items.size(); ++i) {
        if (i) out += ' ';
        write_sexpr(out, e.items[i]);
      }
      out += ')';
      return;
  }
}

inline std::string to_string(const SExpr& e) {
  std::string out;
  write_sexpr(out, e);
  return out;
}

}  // namespace modelgate
