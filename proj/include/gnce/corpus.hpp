#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "gnce/query.hpp"

namespace gnce {

// Strict readers reject unknown fields; lenient readers keep them on the
// query (QueryGraph::extra) and write them back unchanged.
enum class CorpusStrictness { Strict, Lenient };

// JSON corpus: an array of
//   {"triples": [[{"kind": "iri"|"literal"|"var", "value": "..."} x3], ...],
//    "cardinality": <int, optional>, "shape": "<tag, optional>"}
std::vector<QueryGraph> parse_corpus(std::string_view json_text,
                                     CorpusStrictness strictness = CorpusStrictness::Lenient);
std::vector<QueryGraph> read_corpus(const std::filesystem::path& path,
                                    CorpusStrictness strictness = CorpusStrictness::Lenient);

// One query per line, keys in fixed order; output is byte-stable.
std::string serialize_corpus(std::span<const QueryGraph> queries);
void write_corpus(std::span<const QueryGraph> queries, const std::filesystem::path& path);

// Single-query JSON object (same schema as a corpus element).
std::string serialize_query(const QueryGraph& query);

}  // namespace gnce
