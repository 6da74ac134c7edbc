#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "gnce/kg_store.hpp"

namespace gnce {

enum class ParseMode { Strict, Lenient };

struct ParseStats {
  std::size_t lines = 0;
  std::size_t triples_read = 0;
  std::size_t duplicates = 0;
  std::size_t skipped = 0;
  // First few lenient-mode errors, "line N: message".
  std::vector<std::string> errors;
};

// Line-oriented N-Triples reader. Strict mode throws ParseError on the first
// malformed line; lenient mode skips it and counts it in `stats`.
TripleStore parse_ntriples(std::istream& in, ParseMode mode = ParseMode::Strict, ParseStats* stats = nullptr);
TripleStore parse_ntriples_file(const std::filesystem::path& path, ParseMode mode = ParseMode::Strict,
                                ParseStats* stats = nullptr);

// Parses one N-Triples statement (without trailing newline). Returns false
// for blank and comment lines; throws ParseError(line_no) otherwise.
bool parse_ntriples_line(std::string_view line, std::size_t line_no, Triple& out);

// Writes every triple in store order.
void write_ntriples(const TripleStore& store, std::ostream& out);

}  // namespace gnce
