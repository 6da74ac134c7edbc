#pragma once

#include <cstdint>

#include "gnce/kg_store.hpp"

namespace gnce {

// Synthetic Zipf-skewed knowledge graph. Entities belong to classes (one
// rdf:type triple each); every other predicate has a domain and a range class,
// or a literal range. Predicates, subjects and objects are drawn with Zipf
// weights, so a few hubs carry most edges.
struct DemoKgConfig {
  std::size_t triples = 10'000;
  std::size_t entities = 2'000;
  std::size_t predicates = 20;  // including rdf:type
  std::size_t classes = 8;
  double literal_predicate_fraction = 0.2;
  std::size_t literal_values = 200;
  double zipf_exponent = 1.0;
  std::uint64_t seed = 42;

  void validate() const;
};

inline constexpr std::string_view kDemoNamespace = "http://gnce.demo/";
inline constexpr std::string_view kRdfType = "http://www.w3.org/1999/02/22-rdf-syntax-ns#type";

// Stops early (with fewer triples) when duplicates make the target unreachable.
TripleStore generate_demo_kg(const DemoKgConfig& config);

}  // namespace gnce
