#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "spateval/graph.hpp"
#include "spateval/parser.hpp"
#include "spateval/relation.hpp"

#include "json.hpp"

namespace spateval {

/// One benchmark sample: prompt text plus its ground-truth relation
/// structure and reference sphere.
struct PromptSpec {
  std::string id;
  std::string text;
  std::vector<ObjectName> objects;
  std::vector<SpatialTriple> triples;
  ObjectName center;
  SpatialSphere reference_sphere;
  Relation relation_tag = Relation::Front;
  std::string background;

  nlohmann::json to_json() const;  // one prompt-file record
};

/// The 80 object categories bundled as the default generation vocabulary.
const std::vector<std::string>& default_categories();

/// Ten scene backgrounds bundled as the default background vocabulary.
const std::vector<std::string>& default_backgrounds();

/// Lowercase id slug: non-alphanumeric runs become single hyphens.
std::string slugify(std::string_view s);

/// Render the versioned prompt template
///   "A {obj1} is {relation phrase} a {obj2} in a {background}."
/// with a/an chosen by leading vowel.
std::string make_prompt_text(const std::string& obj1, Relation rel,
                             const std::string& obj2,
                             const std::string& background);

/// Full combinatoric product |categories| x |relations| x |backgrounds|.
/// The partner object for category k is categories[(k + offset) % N] with the
/// offset drawn from a fixed SplitMix64 stream keyed by the combination, so
/// generation is deterministic and order-independent. Output sorted by id.
/// Every emitted spec round-trips through parse_spatial_text.
std::vector<PromptSpec> generate_combinations(
    const std::vector<std::string>& categories,
    const std::vector<Relation>& relations,
    const std::vector<std::string>& backgrounds);

/// Uniform sample without replacement (SplitMix64, Fisher-Yates), a pure
/// function of (spec ids, n, seed). Output sorted by id.
std::vector<PromptSpec> sample_specs(const std::vector<PromptSpec>& specs,
                                     std::size_t n, std::uint64_t seed);

/// One JSON record per line. Each record is re-parsed and cross-checked
/// against its declared objects and triples before being accepted.
std::vector<PromptSpec> load_prompt_file(const std::string& path);

void save_prompt_file(const std::vector<PromptSpec>& specs,
                      const std::string& path);

/// Build a PromptSpec from raw pieces, validating the round-trip invariant.
/// Used by both the generator and the prompt-file loader.
PromptSpec make_prompt_spec(std::string id, std::string text,
                            std::vector<ObjectName> objects,
                            std::vector<SpatialTriple> triples,
                            ObjectName center, std::string background);

}  // namespace spateval
