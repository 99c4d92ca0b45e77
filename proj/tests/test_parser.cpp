#include "doctest.h"

#include <algorithm>

#include "spateval/error.hpp"
#include "spateval/parser.hpp"
#include "spateval/rng.hpp"

using namespace spateval;

namespace {

std::vector<std::string> names(const std::vector<ObjectName>& objects) {
  std::vector<std::string> out;
  for (const auto& o : objects) out.push_back(o.name);
  return out;
}

}  // namespace

TEST_CASE("normalize_object strips articles and whitespace") {
  CHECK(normalize_object("The ball").name == "ball");
  CHECK(normalize_object("chair").name == "chair");
  CHECK(normalize_object("  A   traffic   Light ").name == "traffic light");
  CHECK(normalize_object("an apple").name == "apple");
  CHECK(normalize_object("DOG").name == "dog");
}

TEST_CASE("normalize_object rejects empty results") {
  CHECK_THROWS_AS(normalize_object("   "), Error);
  CHECK_THROWS_AS(normalize_object("the"), Error);
  try {
    normalize_object("a");
    FAIL("expected EmptyObject");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::EmptyObject);
  }
}

TEST_CASE("normalize_object is idempotent on random word soup") {
  SplitMix64 rng(2024);
  const std::vector<std::string> words = {"a",    "an",   "the",  "Dog",
                                          "ball", "BOX",  "cup",  "  ",
                                          "tRee", "lamp", "sofa", "rug"};
  int checked = 0;
  for (int i = 0; i < 500; ++i) {
    std::string raw;
    const int k = 1 + static_cast<int>(rng.below(4));
    for (int j = 0; j < k; ++j) {
      raw += words[rng.below(words.size())];
      raw += (rng.below(3) == 0) ? "  " : " ";
    }
    try {
      const ObjectName once = normalize_object(raw);
      const ObjectName twice = normalize_object(once.name);
      CHECK(once.name == twice.name);
      ++checked;
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::EmptyObject);
    }
  }
  CHECK(checked > 100);
}

TEST_CASE("parse recovers the two-clause example sentence") {
  const auto result = parse_spatial_text(
      "A dog is to the left of a chair, and a cup is on the chair");
  CHECK(names(result.objects) ==
        std::vector<std::string>{"dog", "chair", "cup"});
  REQUIRE(result.triples.size() == 2);
  CHECK(result.triples[0].subject.name == "dog");
  CHECK(result.triples[0].relation == Relation::Left);
  CHECK(result.triples[0].reference.name == "chair");
  CHECK(result.triples[1].subject.name == "cup");
  CHECK(result.triples[1].relation == Relation::On);
  CHECK(result.triples[1].reference.name == "chair");
}

TEST_CASE("parse handles a single clause") {
  const auto result = parse_spatial_text("The ball is behind the box");
  CHECK(names(result.objects) == std::vector<std::string>{"ball", "box"});
  REQUIRE(result.triples.size() == 1);
  CHECK(result.triples[0] ==
        SpatialTriple{make_object("ball"), Relation::Behind, make_object("box")});
}

TEST_CASE("text without any relation clause raises NoRelationFound") {
  try {
    parse_spatial_text("A sunny park");
    FAIL("expected NoRelationFound");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NoRelationFound);
  }
  CHECK_THROWS_AS(parse_spatial_text("hello world"), Error);
  CHECK_THROWS_AS(parse_spatial_text(""), Error);
}

TEST_CASE("relation phrases and synonyms") {
  auto rel_of = [](const std::string& text) {
    return parse_spatial_text(text).triples.at(0).relation;
  };
  CHECK(rel_of("A cat is in front of a box") == Relation::Front);
  CHECK(rel_of("A cat is behind a box") == Relation::Behind);
  CHECK(rel_of("A cat is to the left of a box") == Relation::Left);
  CHECK(rel_of("A cat is left of a box") == Relation::Left);
  CHECK(rel_of("A cat is to the right of a box") == Relation::Right);
  CHECK(rel_of("A cat is right of a box") == Relation::Right);
  CHECK(rel_of("A cat is on a box") == Relation::On);
  CHECK(rel_of("A cat is on top of a box") == Relation::On);
  CHECK(rel_of("A cat is under a box") == Relation::Under);
  CHECK(rel_of("A cat is underneath a box") == Relation::Under);
  CHECK(rel_of("A cat is beneath a box") == Relation::Under);
  CHECK(rel_of("A cat is above a box") == Relation::Above);
  CHECK(rel_of("A cat is over a box") == Relation::Above);
  CHECK(rel_of("A cat is below a box") == Relation::Below);
}

TEST_CASE("parsing is case-insensitive") {
  const std::string text =
      "A dog is to the left of a chair, and a cup is on the chair";
  std::string upper = text;
  std::transform(upper.begin(), upper.end(), upper.begin(), ::toupper);
  const auto a = parse_spatial_text(text);
  const auto b = parse_spatial_text(upper);
  CHECK(a.triples == b.triples);
  CHECK(names(a.objects) == names(b.objects));
}

TEST_CASE("trailing background phrase is discarded") {
  const auto result =
      parse_spatial_text("A dog is in front of a cat in a park.");
  CHECK(names(result.objects) == std::vector<std::string>{"dog", "cat"});
  REQUIRE(result.triples.size() == 1);
  CHECK(result.triples[0].reference.name == "cat");

  const auto signal =
      parse_spatial_text("A bicycle is in front of a car at a traffic signal.");
  CHECK(names(signal.objects) == std::vector<std::string>{"bicycle", "car"});

  const auto farm =
      parse_spatial_text("An orange is in front of a cow on a farm.");
  CHECK(names(farm.objects) == std::vector<std::string>{"orange", "cow"});
}

TEST_CASE("incomplete relation phrases are malformed with a byte offset") {
  try {
    parse_spatial_text("The dog is to the left the chair");
    FAIL("expected MalformedClause");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MalformedClause);
    CHECK(e.offset() == 11);  // offset of "to"
  }
  CHECK_THROWS_AS(parse_spatial_text("The dog is behind"), Error);
  CHECK_THROWS_AS(parse_spatial_text("The dog is in front"), Error);
  CHECK_THROWS_AS(parse_spatial_text("is behind the box"), Error);
}

TEST_CASE("self-relations are rejected") {
  try {
    parse_spatial_text("The dog is behind the dog");
    FAIL("expected MalformedClause");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MalformedClause);
  }
}

TEST_CASE("parse never produces subject == reference") {
  SplitMix64 rng(7);
  const std::vector<std::string> nouns = {"dog", "cat", "box", "cup", "chair"};
  const std::vector<std::string> rels = {"on",     "under", "behind",
                                         "above",  "below", "in front of",
                                         "to the left of"};
  for (int i = 0; i < 300; ++i) {
    std::string text;
    const int clauses = 1 + static_cast<int>(rng.below(3));
    for (int c = 0; c < clauses; ++c) {
      if (c > 0) text += ", and ";
      text += "the " + nouns[rng.below(nouns.size())] + " is " +
              rels[rng.below(rels.size())] + " the " +
              nouns[rng.below(nouns.size())];
    }
    try {
      const auto result = parse_spatial_text(text);
      for (const auto& t : result.triples)
        CHECK(t.subject.name != t.reference.name);
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::MalformedClause);  // the self-relation draws
    }
  }
}

TEST_CASE("select_center picks the most-referenced object") {
  const auto example = parse_spatial_text(
      "A dog is to the left of a chair, and a cup is on the chair");
  CHECK(select_center(example.triples).name == "chair");

  const auto single = parse_spatial_text("The ball is behind the box");
  CHECK(select_center(single.triples).name == "box");
}

TEST_CASE("select_center breaks in-degree ties by first reference mention") {
  const auto t = [](const char* s, Relation r, const char* ref) {
    return SpatialTriple{make_object(s), r, make_object(ref)};
  };
  const std::vector<SpatialTriple> triples = {t("a", Relation::Front, "b"),
                                              t("c", Relation::On, "d")};
  CHECK(select_center(triples).name == "b");
  CHECK_THROWS_AS(select_center({}), Error);
}

TEST_CASE("select_center in-degrees are permutation invariant") {
  const auto t = [](const char* s, Relation r, const char* ref) {
    return SpatialTriple{make_object(s), r, make_object(ref)};
  };
  // d is referenced twice; no permutation changes that.
  std::vector<SpatialTriple> triples = {t("a", Relation::Front, "d"),
                                        t("b", Relation::On, "d"),
                                        t("c", Relation::Under, "e")};
  SplitMix64 rng(99);
  for (int i = 0; i < 20; ++i) {
    for (std::size_t j = triples.size(); j > 1; --j)
      std::swap(triples[j - 1], triples[rng.below(j)]);
    CHECK(select_center(triples).name == "d");
  }
}
