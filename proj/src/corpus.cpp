#include "gnce/corpus.hpp"

#include <fstream>
#include <sstream>

#include "gnce/error.hpp"
#include "json.hpp"

namespace gnce {

using nlohmann::json;

namespace {

QueryAtom parse_term(const json& j, const std::string& path) {
  if (!j.is_object()) throw SchemaError(path, "expected an object with \"kind\" and \"value\"");
  auto kind_it = j.find("kind");
  auto value_it = j.find("value");
  if (kind_it == j.end() || !kind_it->is_string()) throw SchemaError(path + ".kind", "expected a string");
  if (value_it == j.end() || !value_it->is_string()) throw SchemaError(path + ".value", "expected a string");
  const auto& kind = kind_it->get_ref<const std::string&>();
  const auto& value = value_it->get_ref<const std::string&>();
  if (value.empty()) throw SchemaError(path + ".value", "must be non-empty");
  if (j.size() != 2) throw SchemaError(path, "unexpected fields in term");
  if (kind == "iri") return QueryAtom::bound(Atom::iri(value));
  if (kind == "literal") return QueryAtom::bound(Atom::literal(value));
  if (kind == "var") return QueryAtom::var(value);
  throw SchemaError(path + ".kind", "unknown kind \"" + kind + "\"");
}

json term_json(const QueryAtom& a) {
  json t = json::object();
  if (a.is_var()) {
    t["kind"] = "var";
    t["value"] = a.var_name();
  } else {
    t["kind"] = a.atom().kind == AtomKind::Literal ? "literal" : "iri";
    t["value"] = a.atom().value;
  }
  return t;
}

QueryGraph parse_entry(const json& e, const std::string& path, CorpusStrictness strictness) {
  if (!e.is_object()) throw SchemaError(path, "expected an object");
  auto triples_it = e.find("triples");
  if (triples_it == e.end()) throw SchemaError(path + ".triples", "missing required field");
  if (!triples_it->is_array()) throw SchemaError(path + ".triples", "expected an array");
  std::vector<TriplePattern> patterns;
  for (std::size_t i = 0; i < triples_it->size(); ++i) {
    const auto& tj = (*triples_it)[i];
    std::string tpath = path + ".triples[" + std::to_string(i) + "]";
    if (!tj.is_array() || tj.size() != 3) throw SchemaError(tpath, "expected an array of 3 terms");
    patterns.push_back({parse_term(tj[0], tpath + "[0]"), parse_term(tj[1], tpath + "[1]"),
                        parse_term(tj[2], tpath + "[2]")});
  }
  std::optional<std::uint64_t> card;
  if (auto it = e.find("cardinality"); it != e.end() && !it->is_null()) {
    if (!it->is_number_integer() || it->get<std::int64_t>() < 0)
      throw SchemaError(path + ".cardinality", "expected a non-negative integer");
    card = it->get<std::uint64_t>();
  }
  std::optional<QueryShape> shape;
  if (auto it = e.find("shape"); it != e.end() && !it->is_null()) {
    if (!it->is_string()) throw SchemaError(path + ".shape", "expected a string");
    shape = parse_shape(it->get<std::string>());
    if (!shape) throw SchemaError(path + ".shape", "unknown shape \"" + it->get<std::string>() + "\"");
  }
  std::map<std::string, std::string> extra;
  for (auto it = e.begin(); it != e.end(); ++it) {
    if (it.key() == "triples" || it.key() == "cardinality" || it.key() == "shape") continue;
    if (strictness == CorpusStrictness::Strict) throw SchemaError(path + "." + it.key(), "unknown field");
    extra[it.key()] = it.value().dump();
  }
  try {
    return QueryGraph(std::move(patterns), card, shape).with_extra(std::move(extra));
  } catch (const PreconditionError& err) {
    throw SchemaError(path, err.what());
  }
}

}  // namespace

std::vector<QueryGraph> parse_corpus(std::string_view json_text, CorpusStrictness strictness) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw SchemaError("$", std::string("invalid JSON: ") + e.what());
  }
  if (!doc.is_array()) throw SchemaError("$", "expected a JSON array");
  std::vector<QueryGraph> out;
  out.reserve(doc.size());
  for (std::size_t i = 0; i < doc.size(); ++i)
    out.push_back(parse_entry(doc[i], "$[" + std::to_string(i) + "]", strictness));
  return out;
}

std::vector<QueryGraph> read_corpus(const std::filesystem::path& path, CorpusStrictness strictness) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open corpus " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_corpus(ss.str(), strictness);
}

std::string serialize_query(const QueryGraph& q) {
  // Built by hand so the key order is fixed: triples, cardinality, shape, extras.
  std::string out = "{\"triples\":[";
  for (std::size_t i = 0; i < q.patterns().size(); ++i) {
    const auto& tp = q.patterns()[i];
    if (i) out += ",";
    out += "[" + term_json(tp.s).dump() + "," + term_json(tp.p).dump() + "," + term_json(tp.o).dump() + "]";
  }
  out += "]";
  if (q.true_cardinality()) out += ",\"cardinality\":" + std::to_string(*q.true_cardinality());
  if (q.shape()) out += ",\"shape\":\"" + std::string(shape_name(*q.shape())) + "\"";
  for (const auto& [k, v] : q.extra()) out += "," + json(k).dump() + ":" + v;
  out += "}";
  return out;
}

std::string serialize_corpus(std::span<const QueryGraph> queries) {
  std::string out = "[\n";
  for (std::size_t i = 0; i < queries.size(); ++i) {
    out += serialize_query(queries[i]);
    out += (i + 1 < queries.size()) ? ",\n" : "\n";
  }
  out += "]\n";
  return out;
}

void write_corpus(std::span<const QueryGraph> queries, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ResourceError("cannot open " + path.string() + " for writing");
  out << serialize_corpus(queries);
  if (!out) throw ResourceError("failed writing " + path.string());
}

}  // namespace gnce
