#include "spateval/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <unordered_map>
#include <unordered_set>

#include "spateval/error.hpp"

namespace spateval {

namespace {

std::string canonical(const std::string& name, const MatchConfig& cfg) {
  const auto it = cfg.synonym_map.find(name);
  return it == cfg.synonym_map.end() ? name : it->second;
}

// Canonical-name -> position lookup; first occurrence wins when two surface
// names collapse to the same canonical name.
std::unordered_map<std::string, Vec3> canonical_positions(
    const SpatialSphere& sphere, const MatchConfig& cfg) {
  std::unordered_map<std::string, Vec3> out;
  for (const auto& [name, pos] : sphere.positions)
    out.emplace(canonical(name, cfg), pos);
  return out;
}

}  // namespace

double object_recognition(const std::vector<ObjectName>& prompt_objects,
                          const std::vector<ObjectName>& image_objects,
                          const MatchConfig& cfg) {
  if (prompt_objects.empty())
    throw Error(ErrorCode::EmptyPrompt, "prompt has no objects");
  std::unordered_set<std::string> present;
  for (const auto& o : image_objects) present.insert(canonical(o.name, cfg));
  std::size_t found = 0;
  for (const auto& o : prompt_objects)
    if (present.count(canonical(o.name, cfg))) ++found;
  return static_cast<double>(found) / static_cast<double>(prompt_objects.size());
}

double object_proximity(const SpatialSphere& ref, const SpatialSphere& gen,
                        const MatchConfig& cfg) {
  if (cfg.missing_penalty <= 0.0)
    throw Error(ErrorCode::InvalidArgument, "missing_penalty must be > 0");
  const auto gen_pos = canonical_positions(gen, cfg);
  double total = 0.0;
  for (const auto& [name, ref_position] : ref.positions) {
    const auto it = gen_pos.find(canonical(name, cfg));
    if (it == gen_pos.end()) {
      total += cfg.missing_penalty;
    } else {
      total += euclidean_distance(ref_position, it->second);
    }
  }
  return 1.0 / (1.0 + total);
}

double spatial_relationship(const SpatialSphere& ref, const SpatialSphere& gen,
                            const MatchConfig& cfg) {
  const std::size_t n = ref.positions.size();
  if (n < 2)
    throw Error(ErrorCode::DegeneratePrompt,
                "reference sphere needs at least two positioned objects");

  const auto gen_pos = canonical_positions(gen, cfg);
  const std::string center = canonical(ref.center.name, cfg);
  if (!gen_pos.count(center)) return 0.0;

  std::size_t correct = 0;
  for (const auto& [name, ref_position] : ref.positions) {
    const std::string canon = canonical(name, cfg);
    if (canon == center) continue;
    const auto it = gen_pos.find(canon);
    if (it != gen_pos.end() && it->second == ref_position) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(n - 1);
}

SampleEvaluation evaluate(const PromptSpec& spec, std::string_view description,
                          const MatchConfig& cfg) {
  if (cfg.missing_penalty <= 0.0)
    throw Error(ErrorCode::InvalidArgument, "missing_penalty must be > 0");
  SampleEvaluation out;
  const std::size_t n_ref = spec.reference_sphere.positions.size();

  ParseResult parsed;
  try {
    parsed = parse_spatial_text(description);
  } catch (const Error&) {
    out.parse_failed = true;
    const double op =
        1.0 / (1.0 + static_cast<double>(n_ref) * cfg.missing_penalty);
    out.scores = EvalScores::make(0.0, op, 0.0);
    for (const auto& o : spec.objects) out.missing_objects.push_back(o.name);
    return out;
  }

  const double or_score = object_recognition(spec.objects, parsed.objects, cfg);
  {
    std::unordered_set<std::string> present;
    for (const auto& o : parsed.objects) present.insert(canonical(o.name, cfg));
    for (const auto& o : spec.objects)
      if (!present.count(canonical(o.name, cfg)))
        out.missing_objects.push_back(o.name);
  }

  // The generated sphere is anchored on the prompt's center object; when the
  // description never mentions it, no object has a comparable position and
  // the sphere stays empty.
  const SpatialGraph gen_graph = build_graph(parsed.objects, parsed.triples);
  SpatialSphere gen_sphere;
  const std::string center = canonical(spec.center.name, cfg);
  const ObjectName* gen_center = nullptr;
  for (const auto& node : gen_graph.nodes)
    if (canonical(node.name, cfg) == center) {
      gen_center = &node;
      break;
    }
  if (gen_center) gen_sphere = build_sphere(gen_graph, *gen_center);

  const double op = object_proximity(spec.reference_sphere, gen_sphere, cfg);
  const double sr = spatial_relationship(spec.reference_sphere, gen_sphere, cfg);
  out.scores = EvalScores::make(or_score, op, sr);
  out.inconsistent =
      gen_sphere.inconsistent || spec.reference_sphere.inconsistent;
  return out;
}

AggregateRow aggregate(const std::vector<EvalScores>& rows) {
  if (rows.empty()) throw Error(ErrorCode::EmptyBatch, "no rows to aggregate");
  AggregateRow agg;
  for (const auto& r : rows) {
    agg.or_mean += r.or_score;
    agg.op_mean += r.op_score;
    agg.sr_mean += r.sr_score;
  }
  const auto n = static_cast<double>(rows.size());
  agg.or_mean /= n;
  agg.op_mean /= n;
  agg.sr_mean /= n;
  agg.op_or = (agg.op_mean + agg.or_mean) / 2.0;
  agg.count = rows.size();
  return agg;
}

double round_half_even(double value, int digits) {
  const double scale = std::pow(10.0, digits);
  const double scaled = value * scale;
  const double floor_value = std::floor(scaled);
  const double fraction = scaled - floor_value;
  double rounded;
  if (fraction > 0.5) {
    rounded = floor_value + 1.0;
  } else if (fraction < 0.5) {
    rounded = floor_value;
  } else {
    rounded = (std::fmod(floor_value, 2.0) == 0.0) ? floor_value
                                                   : floor_value + 1.0;
  }
  return rounded / scale;
}

std::string format_score(double value, int digits) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, round_half_even(value, digits));
  return buf;
}

}  // namespace spateval
