#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace spateval {

/// The eight spatial relations the grammar and the lattice embedding cover.
enum class Relation { Front, Behind, Left, Right, On, Under, Above, Below };

inline constexpr int kRelationCount = 8;

struct Vec3 {
  int x = 0;
  int y = 0;
  int z = 0;

  friend bool operator==(const Vec3&, const Vec3&) = default;
  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
};

double euclidean_distance(const Vec3& a, const Vec3& b);

/// Unit lattice step for a relation. On/Above share +y and Under/Below share
/// -y: the lattice has six directions for the eight surface terms, and the
/// worked coordinates require the merge. Relation labels stay on graph edges
/// so reports can still distinguish the surface term.
Vec3 relation_vector(Relation rel);

/// Canonical surface phrase, e.g. Front -> "in front of".
std::string_view relation_phrase(Relation rel);

/// Short lowercase tag, e.g. Front -> "front". Used in ids and CLI flags.
std::string_view relation_slug(Relation rel);

std::optional<Relation> relation_from_phrase(std::string_view phrase);
std::optional<Relation> relation_from_slug(std::string_view slug);

std::vector<Relation> all_relations();

/// One lexicon entry: a surface phrase split into lowercase words.
/// Entries are ordered longest-first so "on top of" wins over "on".
struct RelationPhrase {
  std::vector<std::string> words;
  Relation rel;
};

const std::vector<RelationPhrase>& relation_lexicon();

}  // namespace spateval
