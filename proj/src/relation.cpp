#include "spateval/relation.hpp"

#include <cmath>
#include <sstream>

#include "spateval/error.hpp"

namespace spateval {

double euclidean_distance(const Vec3& a, const Vec3& b) {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  const double dz = a.z - b.z;
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

Vec3 relation_vector(Relation rel) {
  switch (rel) {
    case Relation::Left:   return {-1, 0, 0};
    case Relation::Right:  return {+1, 0, 0};
    case Relation::On:     return {0, +1, 0};
    case Relation::Above:  return {0, +1, 0};
    case Relation::Under:  return {0, -1, 0};
    case Relation::Below:  return {0, -1, 0};
    case Relation::Front:  return {0, 0, +1};
    case Relation::Behind: return {0, 0, -1};
  }
  throw Error(ErrorCode::InvalidArgument, "unknown relation");
}

std::string_view relation_phrase(Relation rel) {
  switch (rel) {
    case Relation::Front:  return "in front of";
    case Relation::Behind: return "behind";
    case Relation::Left:   return "to the left of";
    case Relation::Right:  return "to the right of";
    case Relation::On:     return "on";
    case Relation::Under:  return "under";
    case Relation::Above:  return "above";
    case Relation::Below:  return "below";
  }
  throw Error(ErrorCode::InvalidArgument, "unknown relation");
}

std::string_view relation_slug(Relation rel) {
  switch (rel) {
    case Relation::Front:  return "front";
    case Relation::Behind: return "behind";
    case Relation::Left:   return "left";
    case Relation::Right:  return "right";
    case Relation::On:     return "on";
    case Relation::Under:  return "under";
    case Relation::Above:  return "above";
    case Relation::Below:  return "below";
  }
  throw Error(ErrorCode::InvalidArgument, "unknown relation");
}

std::optional<Relation> relation_from_phrase(std::string_view phrase) {
  for (const auto& entry : relation_lexicon()) {
    std::string joined;
    for (const auto& w : entry.words) {
      if (!joined.empty()) joined += ' ';
      joined += w;
    }
    if (joined == phrase) return entry.rel;
  }
  return std::nullopt;
}

std::optional<Relation> relation_from_slug(std::string_view slug) {
  for (Relation r : all_relations()) {
    if (relation_slug(r) == slug) return r;
  }
  return std::nullopt;
}

std::vector<Relation> all_relations() {
  return {Relation::Front, Relation::Behind, Relation::Left, Relation::Right,
          Relation::On,    Relation::Under,  Relation::Above, Relation::Below};
}

namespace {

std::vector<RelationPhrase> make_lexicon() {
  auto split = [](std::string_view phrase) {
    std::vector<std::string> words;
    std::istringstream in{std::string(phrase)};
    std::string w;
    while (in >> w) words.push_back(w);
    return words;
  };
  // Canonical phrases and accepted synonyms, longest (word count) first.
  std::vector<RelationPhrase> lex = {
      {split("to the left of"), Relation::Left},
      {split("to the right of"), Relation::Right},
      {split("in front of"), Relation::Front},
      {split("on top of"), Relation::On},
      {split("left of"), Relation::Left},
      {split("right of"), Relation::Right},
      {split("behind"), Relation::Behind},
      {split("underneath"), Relation::Under},
      {split("beneath"), Relation::Under},
      {split("under"), Relation::Under},
      {split("above"), Relation::Above},
      {split("over"), Relation::Above},
      {split("below"), Relation::Below},
      {split("on"), Relation::On},
  };
  return lex;
}

}  // namespace

const std::vector<RelationPhrase>& relation_lexicon() {
  static const std::vector<RelationPhrase> lex = make_lexicon();
  return lex;
}

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument:          return "InvalidArgument";
    case ErrorCode::NoRelationFound:          return "NoRelationFound";
    case ErrorCode::MalformedClause:          return "MalformedClause";
    case ErrorCode::EmptyObject:              return "EmptyObject";
    case ErrorCode::SelfLoop:                 return "SelfLoop";
    case ErrorCode::CenterNotInGraph:         return "CenterNotInGraph";
    case ErrorCode::EmptyPrompt:              return "EmptyPrompt";
    case ErrorCode::DegeneratePrompt:         return "DegeneratePrompt";
    case ErrorCode::EmptyBatch:               return "EmptyBatch";
    case ErrorCode::DuplicateCategory:        return "DuplicateCategory";
    case ErrorCode::SampleTooLarge:           return "SampleTooLarge";
    case ErrorCode::Io:                       return "IoError";
    case ErrorCode::Schema:                   return "SchemaError";
    case ErrorCode::TripleMismatch:           return "TripleMismatch";
    case ErrorCode::Network:                  return "NetworkError";
    case ErrorCode::Auth:                     return "AuthError";
    case ErrorCode::Timeout:                  return "TimeoutError";
    case ErrorCode::MalformedResponse:        return "MalformedResponse";
    case ErrorCode::CassetteDecode:           return "CassetteDecodeError";
    case ErrorCode::CassetteMiss:             return "CassetteMiss";
    case ErrorCode::NonFiniteInput:           return "NonFiniteInput";
    case ErrorCode::ZeroAttentionDenominator: return "ZeroAttentionDenominator";
    case ErrorCode::NonFiniteLoss:            return "NonFiniteLoss";
    case ErrorCode::Internal:                 return "InternalError";
  }
  return "UnknownError";
}

}  // namespace spateval
