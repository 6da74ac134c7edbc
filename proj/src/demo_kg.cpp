#include "gnce/demo_kg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "gnce/error.hpp"
#include "gnce/rng.hpp"

namespace gnce {

namespace {

class Zipf {
 public:
  Zipf(std::size_t n, double s) : cdf_(n) {
    double total = 0.0;
    for (std::size_t r = 0; r < n; ++r) cdf_[r] = total += 1.0 / std::pow(static_cast<double>(r + 1), s);
    for (auto& c : cdf_) c /= total;
  }
  std::size_t draw(Rng& rng) const {
    auto it = std::upper_bound(cdf_.begin(), cdf_.end(), rng.uniform01());
    return std::min(static_cast<std::size_t>(it - cdf_.begin()), cdf_.size() - 1);
  }

 private:
  std::vector<double> cdf_;
};

// Members of one class, in a class-specific random order for subjects and
// another for objects, so subject hubs and object hubs differ.
struct ClassMembers {
  std::vector<std::size_t> as_subject;
  std::vector<std::size_t> as_object;
};

}  // namespace

void DemoKgConfig::validate() const {
  if (entities < classes || classes == 0) throw PreconditionError("demo kg needs at least one entity per class");
  if (predicates < 2) throw PreconditionError("demo kg needs at least two predicates");
  if (!(literal_predicate_fraction >= 0.0 && literal_predicate_fraction < 1.0))
    throw PreconditionError("literal predicate fraction must lie in [0, 1)");
  if (literal_values == 0) throw PreconditionError("demo kg needs at least one literal value");
  if (!(zipf_exponent >= 0.0)) throw PreconditionError("zipf exponent must be non-negative");
}

TripleStore generate_demo_kg(const DemoKgConfig& config) {
  config.validate();
  Rng rng(mix_seed({config.seed, 0xde70}));
  const std::string ns(kDemoNamespace);
  auto entity = [&](std::size_t i) { return Atom::iri(ns + "entity/" + std::to_string(i)); };
  auto klass = [&](std::size_t c) { return Atom::iri(ns + "class/" + std::to_string(c)); };
  auto predicate = [&](std::size_t p) { return Atom::iri(ns + "predicate/" + std::to_string(p)); };
  auto literal = [&](std::size_t v) { return Atom::literal("\"value " + std::to_string(v) + "\""); };

  std::vector<ClassMembers> members(config.classes);
  std::vector<std::size_t> class_of(config.entities);
  for (std::size_t i = 0; i < config.entities; ++i) {
    class_of[i] = i < config.classes ? i : static_cast<std::size_t>(rng.index(config.classes));
    members[class_of[i]].as_subject.push_back(i);
  }
  for (auto& m : members) {
    rng.shuffle(std::span<std::size_t>(m.as_subject));
    m.as_object = m.as_subject;
    rng.shuffle(std::span<std::size_t>(m.as_object));
  }

  // Predicate 0 is rdf:type; the others get a domain and a range.
  const std::size_t n_pred = config.predicates - 1;
  std::vector<std::size_t> domain(n_pred), range(n_pred);
  std::vector<bool> literal_range(n_pred);
  for (std::size_t p = 0; p < n_pred; ++p) {
    domain[p] = static_cast<std::size_t>(rng.index(config.classes));
    range[p] = static_cast<std::size_t>(rng.index(config.classes));
    literal_range[p] = rng.bernoulli(config.literal_predicate_fraction);
  }

  TripleStore::Builder builder;
  std::size_t added = 0;
  for (std::size_t i = 0; i < config.entities && added < config.triples; ++i)
    added += builder.add(Triple{entity(i), Atom::iri(std::string(kRdfType)), klass(class_of[i])}) ? 1 : 0;

  Zipf pred_zipf(n_pred, config.zipf_exponent);
  Zipf literal_zipf(config.literal_values, config.zipf_exponent);
  std::vector<Zipf> class_zipf;
  for (const auto& m : members) class_zipf.emplace_back(m.as_subject.size(), config.zipf_exponent);

  std::size_t misses = 0;
  const std::size_t max_misses = 20 * config.triples + 1000;
  while (added < config.triples && misses < max_misses) {
    const std::size_t p = pred_zipf.draw(rng);
    const auto& dm = members[domain[p]];
    const std::size_t s = dm.as_subject[class_zipf[domain[p]].draw(rng)];
    Atom o;
    if (literal_range[p]) {
      o = literal(literal_zipf.draw(rng));
    } else {
      const auto& rm = members[range[p]];
      o = entity(rm.as_object[class_zipf[range[p]].draw(rng)]);
    }
    if (builder.add(Triple{entity(s), predicate(p + 1), std::move(o)}))
      ++added;
    else
      ++misses;
  }
  return std::move(builder).build();
}

}  // namespace gnce
