#include "gnce/ntriples.hpp"

#include <cctype>
#include <fstream>
#include <istream>
#include <ostream>

#include "gnce/error.hpp"

namespace gnce {

namespace {

class LineCursor {
 public:
  LineCursor(std::string_view line, std::size_t line_no) : s_(line), line_no_(line_no) {}

  void skip_ws() {
    while (pos_ < s_.size() && (s_[pos_] == ' ' || s_[pos_] == '\t' || s_[pos_] == '\r')) ++pos_;
  }
  bool at_end() const { return pos_ >= s_.size(); }
  char peek() const { return pos_ < s_.size() ? s_[pos_] : '\0'; }

  [[noreturn]] void fail(const std::string& what) const {
    throw ParseError(line_no_, what + " at column " + std::to_string(pos_ + 1));
  }

  std::string iri() {
    // at '<'
    std::size_t start = ++pos_;
    while (pos_ < s_.size() && s_[pos_] != '>') {
      char c = s_[pos_];
      if (c == ' ' || c == '<' || c == '"' || c == '{' || c == '}' || c == '|' || c == '^' || c == '`')
        fail("invalid character in IRI");
      ++pos_;
    }
    if (pos_ >= s_.size()) fail("unterminated IRI");
    std::string value(s_.substr(start, pos_ - start));
    ++pos_;
    if (value.empty()) fail("empty IRI");
    return value;
  }

  std::string blank_label() {
    // at '_'
    if (pos_ + 1 >= s_.size() || s_[pos_ + 1] != ':') fail("malformed blank node");
    pos_ += 2;
    std::size_t start = pos_;
    while (pos_ < s_.size() && s_[pos_] != ' ' && s_[pos_] != '\t' && s_[pos_] != '.') ++pos_;
    // A label may contain '.', but not as its last character.
    while (pos_ < s_.size() && s_[pos_] == '.' && pos_ + 1 < s_.size() && s_[pos_ + 1] != ' ' &&
           s_[pos_ + 1] != '\t' && s_[pos_ + 1] != '\r') {
      ++pos_;
      while (pos_ < s_.size() && s_[pos_] != ' ' && s_[pos_] != '\t' && s_[pos_] != '.') ++pos_;
    }
    if (pos_ == start) fail("empty blank node label");
    return std::string(s_.substr(start, pos_ - start));
  }

  std::string literal() {
    // at '"'; keeps the raw token
    std::size_t start = pos_++;
    while (pos_ < s_.size() && s_[pos_] != '"') {
      if (s_[pos_] == '\\') {
        if (pos_ + 1 >= s_.size()) fail("dangling escape");
        ++pos_;
      }
      ++pos_;
    }
    if (pos_ >= s_.size()) fail("unterminated literal");
    ++pos_;
    if (peek() == '@') {
      ++pos_;
      std::size_t tag = pos_;
      while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '-')) ++pos_;
      if (pos_ == tag) fail("empty language tag");
    } else if (peek() == '^') {
      if (pos_ + 2 >= s_.size() || s_[pos_ + 1] != '^' || s_[pos_ + 2] != '<') fail("malformed datatype");
      pos_ += 2;
      iri();
    }
    return std::string(s_.substr(start, pos_ - start));
  }

  // Consumes the terminating '.', allowing trailing whitespace or a comment.
  void finish() {
    ++pos_;
    skip_ws();
    if (!at_end() && peek() != '#') fail("trailing characters after '.'");
  }

  Atom term(bool allow_literal, bool allow_blank) {
    skip_ws();
    char c = peek();
    if (c == '<') return Atom::iri(iri());
    if (c == '_' && allow_blank) return Atom::blank(blank_label());
    if (c == '"' && allow_literal) return Atom::literal(literal());
    if (at_end()) fail("unexpected end of line");
    fail(std::string("unexpected character '") + c + "'");
  }

 private:
  std::string_view s_;
  std::size_t pos_ = 0;
  std::size_t line_no_;
};

}  // namespace

bool parse_ntriples_line(std::string_view line, std::size_t line_no, Triple& out) {
  LineCursor cur(line, line_no);
  cur.skip_ws();
  if (cur.at_end() || cur.peek() == '#') return false;
  out.s = cur.term(false, true);
  out.p = cur.term(false, false);
  out.o = cur.term(true, true);
  cur.skip_ws();
  if (cur.peek() != '.') cur.fail("expected '.'");
  cur.finish();
  return true;
}

TripleStore parse_ntriples(std::istream& in, ParseMode mode, ParseStats* stats) {
  TripleStore::Builder builder;
  ParseStats local;
  ParseStats& st = stats ? *stats : local;
  std::string line;
  Triple t;
  while (std::getline(in, line)) {
    ++st.lines;
    try {
      if (!parse_ntriples_line(line, st.lines, t)) continue;
    } catch (const ParseError& e) {
      if (mode == ParseMode::Strict) throw;
      ++st.skipped;
      if (st.errors.size() < 20) st.errors.emplace_back(e.what());
      continue;
    }
    ++st.triples_read;
    if (!builder.add(t)) ++st.duplicates;
  }
  return std::move(builder).build();
}

TripleStore parse_ntriples_file(const std::filesystem::path& path, ParseMode mode, ParseStats* stats) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  return parse_ntriples(in, mode, stats);
}

void write_ntriples(const TripleStore& store, std::ostream& out) {
  for (const auto& t : store.triples()) {
    out << to_ntriples_term(store.atom(t.s)) << ' ' << to_ntriples_term(store.atom(t.p)) << ' '
        << to_ntriples_term(store.atom(t.o)) << " .\n";
  }
}

}  // namespace gnce
