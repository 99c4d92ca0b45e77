#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "spateval/relation.hpp"

namespace spateval {

/// A noun phrase reduced to its normalized name. `raw` keeps the original
/// surface text for diagnostics; equality and all matching use `name` only.
struct ObjectName {
  std::string name;
  std::string raw;

  friend bool operator==(const ObjectName& a, const ObjectName& b) {
    return a.name == b.name;
  }
};

inline ObjectName make_object(std::string name) {
  ObjectName o;
  o.raw = name;
  o.name = std::move(name);
  return o;
}

/// One (subject, relation, reference) assertion. subject.name never equals
/// reference.name.
struct SpatialTriple {
  ObjectName subject;
  Relation relation;
  ObjectName reference;

  friend bool operator==(const SpatialTriple& a, const SpatialTriple& b) {
    return a.subject == b.subject && a.relation == b.relation &&
           a.reference == b.reference;
  }
};

struct ParseResult {
  std::vector<ObjectName> objects;  // dedup union, first-mention order
  std::vector<SpatialTriple> triples;
};

/// Lowercase, strip leading articles (a/an/the), collapse whitespace.
/// Idempotent. Throws EmptyObject when nothing remains.
ObjectName normalize_object(std::string_view raw);

/// Parse a sentence of the constrained spatial grammar:
///   sentence := clause (sep clause)* ["."]
///   clause   := NP copula REL_PHRASE NP [trailing-PP]
///   NP       := [article] NOUN_WORDS
/// Relation phrases match longest-first against the lexicon; matching is
/// case-insensitive. A trailing prepositional phrase ("in/at/on" + article
/// + nouns, e.g. "... in a park") is consumed and discarded so scene
/// backgrounds do not leak into the reference object.
///
/// Throws NoRelationFound when no clause matches, MalformedClause (with the
/// byte offset of the offending relation phrase) when a clause starts a
/// relation phrase it cannot complete.
ParseResult parse_spatial_text(std::string_view text);

/// Center object: maximum in-degree over the triples (in-degree = times used
/// as reference), ties broken by earliest mention as a reference.
ObjectName select_center(const std::vector<SpatialTriple>& triples);

}  // namespace spateval
