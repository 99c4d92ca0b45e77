#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "spateval/dataset.hpp"
#include "spateval/graph.hpp"
#include "spateval/parser.hpp"

namespace spateval {

/// Matching knobs shared by all three scores. The synonym map canonicalizes
/// surface names before comparison; unmapped names match exactly. A missing
/// object counts as a fixed distance, the configurable stand-in for placing
/// it at a distant outlier location.
struct MatchConfig {
  std::map<std::string, std::string> synonym_map;
  double missing_penalty = 10.0;
};

struct EvalScores {
  double or_score = 0.0;
  double op_score = 0.0;
  double sr_score = 0.0;
  double op_or = 0.0;  // always (op_score + or_score) / 2 on the raw doubles

  static EvalScores make(double or_s, double op_s, double sr_s) {
    return {or_s, op_s, sr_s, (op_s + or_s) / 2.0};
  }
};

/// Fraction of prompt objects present among the described objects.
double object_recognition(const std::vector<ObjectName>& prompt_objects,
                          const std::vector<ObjectName>& image_objects,
                          const MatchConfig& cfg);

/// 1 / (1 + total Euclidean distance) over every object of the reference
/// sphere; the center contributes 0 when placed, and any object missing from
/// `gen` contributes cfg.missing_penalty.
double object_proximity(const SpatialSphere& ref, const SpatialSphere& gen,
                        const MatchConfig& cfg);

/// M / (N - 1): the fraction of non-center reference objects whose lattice
/// position in `gen` exactly equals the reference position. Zero whenever the
/// center itself is absent from `gen`.
double spatial_relationship(const SpatialSphere& ref, const SpatialSphere& gen,
                            const MatchConfig& cfg);

struct SampleEvaluation {
  EvalScores scores;
  bool parse_failed = false;
  bool inconsistent = false;
  std::vector<std::string> missing_objects;  // prompt objects not recognized
};

/// Full pipeline for one sample: parse the description, embed it as a sphere
/// centered on the prompt's center object, score. Unparseable descriptions
/// never throw; they score OR = 0, OP = 1/(1 + N*penalty), SR = 0 with
/// parse_failed set.
SampleEvaluation evaluate(const PromptSpec& spec, std::string_view description,
                          const MatchConfig& cfg);

struct AggregateRow {
  double or_mean = 0.0;
  double op_mean = 0.0;
  double sr_mean = 0.0;
  double op_or = 0.0;  // (op_mean + or_mean) / 2
  std::size_t count = 0;
};

AggregateRow aggregate(const std::vector<EvalScores>& rows);

/// Report rounding: round half to even at `digits` decimal places.
double round_half_even(double value, int digits);

/// Fixed-point formatting of an already-rounded score, e.g. 0.2612 -> "0.2612".
std::string format_score(double value, int digits = 4);

}  // namespace spateval
