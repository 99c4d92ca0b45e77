#include "spateval/spateval.h"

#include <cstdlib>
#include <cstring>
#include <memory>
#include <new>
#include <string>
#include <vector>

#include "json.hpp"

#include "spateval/batch.hpp"
#include "spateval/dataset.hpp"
#include "spateval/error.hpp"
#include "spateval/graph.hpp"
#include "spateval/guidance.hpp"
#include "spateval/metrics.hpp"
#include "spateval/parser.hpp"
#include "spateval/relation.hpp"
#include "spateval/vlm.hpp"

using namespace spateval;

namespace {

thread_local std::string t_last_error;

spateval_status status_from_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument:          return SPATEVAL_ERR_INVALID_ARGUMENT;
    case ErrorCode::NoRelationFound:          return SPATEVAL_ERR_NO_RELATION;
    case ErrorCode::MalformedClause:          return SPATEVAL_ERR_MALFORMED_CLAUSE;
    case ErrorCode::EmptyObject:              return SPATEVAL_ERR_EMPTY_OBJECT;
    case ErrorCode::SelfLoop:                 return SPATEVAL_ERR_SELF_LOOP;
    case ErrorCode::CenterNotInGraph:         return SPATEVAL_ERR_CENTER_NOT_IN_GRAPH;
    case ErrorCode::EmptyPrompt:              return SPATEVAL_ERR_EMPTY_PROMPT;
    case ErrorCode::DegeneratePrompt:         return SPATEVAL_ERR_DEGENERATE_PROMPT;
    case ErrorCode::EmptyBatch:               return SPATEVAL_ERR_EMPTY_BATCH;
    case ErrorCode::DuplicateCategory:        return SPATEVAL_ERR_DUPLICATE_CATEGORY;
    case ErrorCode::SampleTooLarge:           return SPATEVAL_ERR_SAMPLE_TOO_LARGE;
    case ErrorCode::Io:                       return SPATEVAL_ERR_IO;
    case ErrorCode::Schema:                   return SPATEVAL_ERR_SCHEMA;
    case ErrorCode::TripleMismatch:           return SPATEVAL_ERR_TRIPLE_MISMATCH;
    case ErrorCode::Network:                  return SPATEVAL_ERR_NETWORK;
    case ErrorCode::Auth:                     return SPATEVAL_ERR_AUTH;
    case ErrorCode::Timeout:                  return SPATEVAL_ERR_TIMEOUT;
    case ErrorCode::MalformedResponse:        return SPATEVAL_ERR_MALFORMED_RESPONSE;
    case ErrorCode::CassetteDecode:           return SPATEVAL_ERR_CASSETTE_DECODE;
    case ErrorCode::CassetteMiss:             return SPATEVAL_ERR_CASSETTE_MISS;
    case ErrorCode::NonFiniteInput:           return SPATEVAL_ERR_NONFINITE;
    case ErrorCode::ZeroAttentionDenominator: return SPATEVAL_ERR_ZERO_ATTENTION;
    case ErrorCode::NonFiniteLoss:            return SPATEVAL_ERR_DIVERGED;
    case ErrorCode::Internal:                 return SPATEVAL_ERR_INTERNAL;
  }
  return SPATEVAL_ERR_INTERNAL;
}

template <typename Fn>
spateval_status guarded(Fn&& fn) {
  try {
    fn();
    return SPATEVAL_OK;
  } catch (const Error& e) {
    t_last_error = e.what();
    return status_from_code(e.code());
  } catch (const std::bad_alloc&) {
    t_last_error = "out of memory";
    return SPATEVAL_ERR_INTERNAL;
  } catch (const std::exception& e) {
    t_last_error = e.what();
    return SPATEVAL_ERR_INTERNAL;
  }
}

spateval_status invalid(const char* message) {
  t_last_error = message;
  return SPATEVAL_ERR_INVALID_ARGUMENT;
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out != nullptr) std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

Relation to_relation(spateval_relation rel) {
  switch (rel) {
    case SPATEVAL_REL_FRONT:  return Relation::Front;
    case SPATEVAL_REL_BEHIND: return Relation::Behind;
    case SPATEVAL_REL_LEFT:   return Relation::Left;
    case SPATEVAL_REL_RIGHT:  return Relation::Right;
    case SPATEVAL_REL_ON:     return Relation::On;
    case SPATEVAL_REL_UNDER:  return Relation::Under;
    case SPATEVAL_REL_ABOVE:  return Relation::Above;
    case SPATEVAL_REL_BELOW:  return Relation::Below;
  }
  throw Error(ErrorCode::InvalidArgument, "relation value out of range");
}

spateval_relation from_relation(Relation rel) {
  switch (rel) {
    case Relation::Front:  return SPATEVAL_REL_FRONT;
    case Relation::Behind: return SPATEVAL_REL_BEHIND;
    case Relation::Left:   return SPATEVAL_REL_LEFT;
    case Relation::Right:  return SPATEVAL_REL_RIGHT;
    case Relation::On:     return SPATEVAL_REL_ON;
    case Relation::Under:  return SPATEVAL_REL_UNDER;
    case Relation::Above:  return SPATEVAL_REL_ABOVE;
    case Relation::Below:  return SPATEVAL_REL_BELOW;
  }
  return SPATEVAL_REL_FRONT;
}

MatchConfig to_match_config(const spateval_match_config* cfg) {
  MatchConfig out;
  if (cfg == nullptr) return out;
  out.missing_penalty = cfg->missing_penalty;
  if (cfg->synonyms_json != nullptr && *cfg->synonyms_json != '\0') {
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(cfg->synonyms_json);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::Schema,
                  std::string("synonyms_json is not valid JSON: ") + e.what());
    }
    if (!doc.is_object())
      throw Error(ErrorCode::Schema, "synonyms_json must be a JSON object");
    for (const auto& [key, value] : doc.items()) {
      if (!value.is_string())
        throw Error(ErrorCode::Schema,
                    "synonym entry '" + key + "' is not a string");
      out.synonym_map[key] = value.get<std::string>();
    }
  }
  if (out.missing_penalty <= 0.0)
    throw Error(ErrorCode::InvalidArgument, "missing_penalty must be > 0");
  return out;
}

VlmConfig to_vlm_config(const spateval_vlm_options& options) {
  VlmConfig cfg;
  if (options.endpoint_url) cfg.endpoint_url = options.endpoint_url;
  if (options.api_key_env && *options.api_key_env)
    cfg.api_key_env = options.api_key_env;
  if (options.model_id && *options.model_id) cfg.model_id = options.model_id;
  if (options.timeout_s > 0) cfg.timeout_s = options.timeout_s;
  cfg.max_retries = options.max_retries >= 0 ? options.max_retries : 2;
  cfg.parallelism = options.parallelism > 0 ? options.parallelism : 4;
  return cfg;
}

nlohmann::json scene_json(const std::string& text) {
  const ParseResult parsed = parse_spatial_text(text);
  const ObjectName center = select_center(parsed.triples);
  const SpatialSphere sphere =
      build_sphere(build_graph(parsed.objects, parsed.triples), center);

  nlohmann::json objects = nlohmann::json::array();
  for (const auto& o : parsed.objects) objects.push_back(o.name);
  nlohmann::json triples = nlohmann::json::array();
  for (const auto& t : parsed.triples)
    triples.push_back({{"subject", t.subject.name},
                       {"relation", std::string(relation_phrase(t.relation))},
                       {"reference", t.reference.name}});
  return {{"objects", objects},
          {"triples", triples},
          {"center", center.name},
          {"sphere", sphere.to_json()}};
}

}  // namespace

struct spateval_parse_result {
  ParseResult parsed;
  std::string center;
};

struct spateval_prompt_set {
  std::vector<PromptSpec> specs;
};

struct spateval_guidance_result {
  GuidanceState state;
  std::vector<BoundingBox> unet_boxes;
};

struct spateval_vlm_client {
  std::unique_ptr<VlmClient> client;
};

extern "C" {

const char* spateval_version(void) { return "0.1.0"; }

const char* spateval_status_name(spateval_status status) {
  switch (status) {
    case SPATEVAL_OK:                       return "ok";
    case SPATEVAL_ERR_INVALID_ARGUMENT:     return "invalid_argument";
    case SPATEVAL_ERR_NO_RELATION:          return "no_relation_found";
    case SPATEVAL_ERR_MALFORMED_CLAUSE:     return "malformed_clause";
    case SPATEVAL_ERR_EMPTY_OBJECT:         return "empty_object";
    case SPATEVAL_ERR_SELF_LOOP:            return "self_loop";
    case SPATEVAL_ERR_CENTER_NOT_IN_GRAPH:  return "center_not_in_graph";
    case SPATEVAL_ERR_EMPTY_PROMPT:         return "empty_prompt";
    case SPATEVAL_ERR_DEGENERATE_PROMPT:    return "degenerate_prompt";
    case SPATEVAL_ERR_EMPTY_BATCH:          return "empty_batch";
    case SPATEVAL_ERR_DUPLICATE_CATEGORY:   return "duplicate_category";
    case SPATEVAL_ERR_SAMPLE_TOO_LARGE:     return "sample_too_large";
    case SPATEVAL_ERR_IO:                   return "io_error";
    case SPATEVAL_ERR_SCHEMA:               return "schema_error";
    case SPATEVAL_ERR_TRIPLE_MISMATCH:      return "triple_mismatch";
    case SPATEVAL_ERR_NETWORK:              return "network_error";
    case SPATEVAL_ERR_AUTH:                 return "auth_error";
    case SPATEVAL_ERR_TIMEOUT:              return "timeout";
    case SPATEVAL_ERR_MALFORMED_RESPONSE:   return "malformed_response";
    case SPATEVAL_ERR_CASSETTE_DECODE:      return "cassette_decode_error";
    case SPATEVAL_ERR_CASSETTE_MISS:        return "cassette_miss";
    case SPATEVAL_ERR_NONFINITE:            return "non_finite_input";
    case SPATEVAL_ERR_ZERO_ATTENTION:       return "zero_attention_denominator";
    case SPATEVAL_ERR_DIVERGED:             return "diverged";
    case SPATEVAL_ERR_INTERNAL:             return "internal_error";
  }
  return "unknown";
}

const char* spateval_last_error(void) { return t_last_error.c_str(); }

void spateval_string_free(char* s) { std::free(s); }

/* ------------------------------------------------------------- relations */

const char* spateval_relation_phrase(spateval_relation rel) {
  try {
    return relation_phrase(to_relation(rel)).data();
  } catch (...) {
    return nullptr;
  }
}

const char* spateval_relation_slug(spateval_relation rel) {
  try {
    return relation_slug(to_relation(rel)).data();
  } catch (...) {
    return nullptr;
  }
}

spateval_status spateval_relation_vector(spateval_relation rel, int out_xyz[3]) {
  if (out_xyz == nullptr) return invalid("out_xyz is NULL");
  return guarded([&] {
    const Vec3 v = relation_vector(to_relation(rel));
    out_xyz[0] = v.x;
    out_xyz[1] = v.y;
    out_xyz[2] = v.z;
  });
}

spateval_status spateval_relation_from_phrase(const char* phrase,
                                              spateval_relation* out) {
  if (phrase == nullptr || out == nullptr)
    return invalid("phrase or out is NULL");
  const auto rel = relation_from_phrase(phrase);
  if (!rel) {
    const auto by_slug = relation_from_slug(phrase);
    if (!by_slug) {
      t_last_error = std::string("unknown relation phrase '") + phrase + "'";
      return SPATEVAL_ERR_INVALID_ARGUMENT;
    }
    *out = from_relation(*by_slug);
    return SPATEVAL_OK;
  }
  *out = from_relation(*rel);
  return SPATEVAL_OK;
}

/* --------------------------------------------------------------- parsing */

spateval_status spateval_parse_text(const char* text,
                                    spateval_parse_result** out) {
  if (text == nullptr || out == nullptr) return invalid("text or out is NULL");
  return guarded([&] {
    auto result = std::make_unique<spateval_parse_result>();
    result->parsed = parse_spatial_text(text);
    result->center = select_center(result->parsed.triples).name;
    *out = result.release();
  });
}

void spateval_parse_result_free(spateval_parse_result* result) {
  delete result;
}

size_t spateval_parse_object_count(const spateval_parse_result* result) {
  return result == nullptr ? 0 : result->parsed.objects.size();
}

const char* spateval_parse_object_name(const spateval_parse_result* result,
                                       size_t index) {
  if (result == nullptr || index >= result->parsed.objects.size())
    return nullptr;
  return result->parsed.objects[index].name.c_str();
}

size_t spateval_parse_triple_count(const spateval_parse_result* result) {
  return result == nullptr ? 0 : result->parsed.triples.size();
}

spateval_status spateval_parse_triple(const spateval_parse_result* result,
                                      size_t index, const char** subject,
                                      spateval_relation* relation,
                                      const char** reference) {
  if (result == nullptr || index >= result->parsed.triples.size())
    return invalid("triple index out of range");
  const auto& t = result->parsed.triples[index];
  if (subject) *subject = t.subject.name.c_str();
  if (relation) *relation = from_relation(t.relation);
  if (reference) *reference = t.reference.name.c_str();
  return SPATEVAL_OK;
}

const char* spateval_parse_center(const spateval_parse_result* result) {
  return result == nullptr ? nullptr : result->center.c_str();
}

spateval_status spateval_parse_scene_json(const char* text, char** json_out) {
  if (text == nullptr || json_out == nullptr)
    return invalid("text or json_out is NULL");
  return guarded([&] { *json_out = dup_string(scene_json(text).dump(2)); });
}

spateval_status spateval_normalize_object(const char* raw, char** out) {
  if (raw == nullptr || out == nullptr) return invalid("raw or out is NULL");
  return guarded([&] { *out = dup_string(normalize_object(raw).name); });
}

/* ------------------------------------------------------------ evaluation */

void spateval_match_config_init(spateval_match_config* cfg) {
  if (cfg == nullptr) return;
  cfg->missing_penalty = 10.0;
  cfg->synonyms_json = nullptr;
}

spateval_status spateval_evaluate_record(const char* prompt_record_json,
                                         const char* description,
                                         const spateval_match_config* cfg,
                                         spateval_scores* out) {
  if (prompt_record_json == nullptr || description == nullptr || out == nullptr)
    return invalid("prompt_record_json, description or out is NULL");
  return guarded([&] {
    nlohmann::json record;
    try {
      record = nlohmann::json::parse(prompt_record_json);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::Schema,
                  std::string("prompt record is not valid JSON: ") + e.what());
    }
    // The record's text is authoritative; a declared center is honored.
    if (!record.is_object() || !record.contains("text") ||
        !record["text"].is_string())
      throw Error(ErrorCode::Schema, "prompt record needs a 'text' string");
    const std::string text = record["text"].get<std::string>();
    const ParseResult parsed = parse_spatial_text(text);
    ObjectName center =
        (record.contains("center") && record["center"].is_string())
            ? make_object(record["center"].get<std::string>())
            : select_center(parsed.triples);
    PromptSpec spec = make_prompt_spec(
        record.value("id", std::string("sample")), text, parsed.objects,
        parsed.triples, center, record.value("background", std::string()));

    const MatchConfig match = to_match_config(cfg);
    const SampleEvaluation result = evaluate(spec, description, match);
    out->or_score = result.scores.or_score;
    out->op_score = result.scores.op_score;
    out->sr_score = result.scores.sr_score;
    out->op_or = result.scores.op_or;
    out->parse_failed = result.parse_failed ? 1 : 0;
    out->inconsistent = result.inconsistent ? 1 : 0;
  });
}

/* ------------------------------------------------------------ prompt sets */

spateval_status spateval_prompt_set_generate(
    const char* const* categories, size_t n_categories,
    const spateval_relation* relations, size_t n_relations,
    const char* const* backgrounds, size_t n_backgrounds,
    spateval_prompt_set** out) {
  if (out == nullptr) return invalid("out is NULL");
  return guarded([&] {
    std::vector<std::string> cats;
    if (categories != nullptr && n_categories > 0) {
      for (size_t i = 0; i < n_categories; ++i) cats.emplace_back(categories[i]);
    } else {
      cats = default_categories();
    }
    std::vector<Relation> rels;
    if (relations != nullptr && n_relations > 0) {
      for (size_t i = 0; i < n_relations; ++i)
        rels.push_back(to_relation(relations[i]));
    } else {
      rels = all_relations();
    }
    std::vector<std::string> bgs;
    if (backgrounds != nullptr && n_backgrounds > 0) {
      for (size_t i = 0; i < n_backgrounds; ++i)
        bgs.emplace_back(backgrounds[i]);
    } else {
      bgs = default_backgrounds();
    }
    auto set = std::make_unique<spateval_prompt_set>();
    set->specs = generate_combinations(cats, rels, bgs);
    *out = set.release();
  });
}

spateval_status spateval_prompt_set_sample(const spateval_prompt_set* set,
                                           size_t n, uint64_t seed,
                                           spateval_prompt_set** out) {
  if (set == nullptr || out == nullptr) return invalid("set or out is NULL");
  return guarded([&] {
    auto sampled = std::make_unique<spateval_prompt_set>();
    sampled->specs = sample_specs(set->specs, n, seed);
    *out = sampled.release();
  });
}

spateval_status spateval_prompt_set_load(const char* path,
                                         spateval_prompt_set** out) {
  if (path == nullptr || out == nullptr) return invalid("path or out is NULL");
  return guarded([&] {
    auto set = std::make_unique<spateval_prompt_set>();
    set->specs = load_prompt_file(path);
    *out = set.release();
  });
}

spateval_status spateval_prompt_set_save(const spateval_prompt_set* set,
                                         const char* path) {
  if (set == nullptr || path == nullptr) return invalid("set or path is NULL");
  return guarded([&] { save_prompt_file(set->specs, path); });
}

size_t spateval_prompt_set_size(const spateval_prompt_set* set) {
  return set == nullptr ? 0 : set->specs.size();
}

const char* spateval_prompt_set_id(const spateval_prompt_set* set,
                                   size_t index) {
  if (set == nullptr || index >= set->specs.size()) return nullptr;
  return set->specs[index].id.c_str();
}

spateval_status spateval_prompt_set_record_json(const spateval_prompt_set* set,
                                                size_t index, char** json_out) {
  if (set == nullptr || json_out == nullptr || index >= set->specs.size())
    return invalid("set or json_out is NULL, or index out of range");
  return guarded([&] {
    *json_out = dup_string(set->specs[index].to_json().dump());
  });
}

void spateval_prompt_set_free(spateval_prompt_set* set) { delete set; }

/* -------------------------------------------------------------- guidance */

void spateval_guidance_config_init(spateval_guidance_config* cfg) {
  if (cfg == nullptr) return;
  cfg->momentum = 0.9;
  cfg->learning_rate = 0.1;
  cfg->max_iters = 50;
  cfg->loss_threshold = 0.5;
  cfg->alpha = 1.0;
  cfg->beta = 1.0;
}

namespace {

Grid grid_from(const double* values, int tokens, int height, int width) {
  if (tokens <= 0 || height <= 0 || width <= 0)
    throw Error(ErrorCode::InvalidArgument, "grid dimensions must be positive");
  Grid g(tokens, height, width);
  std::memcpy(g.values.data(), values, g.values.size() * sizeof(double));
  return g;
}

std::vector<BoundingBox> boxes_from(const spateval_box* boxes, size_t n) {
  std::vector<BoundingBox> out;
  out.reserve(n);
  for (size_t i = 0; i < n; ++i)
    out.push_back({boxes[i].x0, boxes[i].y0, boxes[i].x1, boxes[i].y1,
                   boxes[i].token});
  return out;
}

GuidanceConfig guidance_config_from(const spateval_guidance_config* cfg) {
  GuidanceConfig out;
  if (cfg == nullptr) return out;
  out.momentum = cfg->momentum;
  out.learning_rate = cfg->learning_rate;
  out.max_iters = cfg->max_iters;
  out.loss_threshold = cfg->loss_threshold;
  out.alpha = cfg->alpha;
  out.beta = cfg->beta;
  return out;
}

spateval_guidance_result* wrap_state(GuidanceState state,
                                     std::vector<BoundingBox> unet_boxes) {
  auto result = std::make_unique<spateval_guidance_result>();
  result->state = std::move(state);
  result->unet_boxes = std::move(unet_boxes);
  return result.release();
}

}  // namespace

spateval_status spateval_box_focus_loss(const double* attention, int tokens,
                                        int height, int width,
                                        const spateval_box* boxes,
                                        size_t n_boxes, double* out) {
  if (attention == nullptr || out == nullptr ||
      (boxes == nullptr && n_boxes > 0))
    return invalid("attention, boxes or out is NULL");
  return guarded([&] {
    *out = box_focus_loss(grid_from(attention, tokens, height, width),
                          boxes_from(boxes, n_boxes));
  });
}

spateval_status spateval_loss_gradient(const double* scores, int tokens,
                                       int height, int width,
                                       const spateval_box* boxes,
                                       size_t n_boxes, double* grad_out) {
  if (scores == nullptr || grad_out == nullptr ||
      (boxes == nullptr && n_boxes > 0))
    return invalid("scores, boxes or grad_out is NULL");
  return guarded([&] {
    const Grid g = loss_gradient(grid_from(scores, tokens, height, width),
                                 boxes_from(boxes, n_boxes));
    std::memcpy(grad_out, g.values.data(), g.values.size() * sizeof(double));
  });
}

spateval_status spateval_guidance_run(
    const double* z0, int tokens, int height, int width,
    const spateval_box* unet_boxes, size_t n_unet,
    const spateval_box* control_boxes, size_t n_control,
    const spateval_guidance_config* cfg, spateval_guidance_result** out) {
  if (z0 == nullptr || out == nullptr || (unet_boxes == nullptr && n_unet > 0) ||
      (control_boxes == nullptr && n_control > 0))
    return invalid("z0, boxes or out is NULL");
  return guarded([&] {
    auto unet = boxes_from(unet_boxes, n_unet);
    auto control = boxes_from(control_boxes, n_control);
    GuidanceState state = run_guidance(grid_from(z0, tokens, height, width),
                                       unet, control,
                                       guidance_config_from(cfg));
    *out = wrap_state(std::move(state), std::move(unet));
  });
}

spateval_status spateval_guidance_run_scenario(
    const char* scenario, const spateval_guidance_config* cfg,
    spateval_guidance_result** out) {
  if (scenario == nullptr || out == nullptr)
    return invalid("scenario or out is NULL");
  return guarded([&] {
    const GuidanceScenario s = make_scenario(scenario);
    GuidanceState state = run_guidance(s.z0, s.unet_boxes, s.control_boxes,
                                       guidance_config_from(cfg));
    *out = wrap_state(std::move(state), s.unet_boxes);
  });
}

spateval_guidance_outcome spateval_guidance_result_outcome(
    const spateval_guidance_result* result) {
  if (result == nullptr) return SPATEVAL_GUIDANCE_DIVERGED;
  switch (result->state.outcome) {
    case GuidanceOutcome::Converged: return SPATEVAL_GUIDANCE_CONVERGED;
    case GuidanceOutcome::MaxIters:  return SPATEVAL_GUIDANCE_MAX_ITERS;
    case GuidanceOutcome::Diverged:  return SPATEVAL_GUIDANCE_DIVERGED;
  }
  return SPATEVAL_GUIDANCE_DIVERGED;
}

size_t spateval_guidance_result_iterations(
    const spateval_guidance_result* result) {
  return result == nullptr ? 0
                           : static_cast<size_t>(result->state.iterations);
}

size_t spateval_guidance_result_trace_length(
    const spateval_guidance_result* result) {
  return result == nullptr ? 0 : result->state.trace.size();
}

spateval_status spateval_guidance_result_trace_entry(
    const spateval_guidance_result* result, size_t index, double* l_unet,
    double* l_control, double* l_total) {
  if (result == nullptr || index >= result->state.trace.size())
    return invalid("result is NULL or trace index out of range");
  const auto& e = result->state.trace[index];
  if (l_unet) *l_unet = e.unet;
  if (l_control) *l_control = e.control;
  if (l_total) *l_total = e.total;
  return SPATEVAL_OK;
}

int spateval_guidance_result_tokens(const spateval_guidance_result* result) {
  return result == nullptr ? 0 : result->state.latent.tokens;
}

spateval_status spateval_guidance_result_in_box_mass(
    const spateval_guidance_result* result, int token, double* out) {
  if (result == nullptr || out == nullptr)
    return invalid("result or out is NULL");
  if (token < 0 || token >= result->state.latent.tokens)
    return invalid("token out of range");
  return guarded([&] {
    const Grid attn = attention_from_scores(result->state.latent);
    *out = in_box_mass(attn, result->unet_boxes, token);
  });
}

void spateval_guidance_result_free(spateval_guidance_result* result) {
  delete result;
}

/* ------------------------------------------------------------ vlm client */

void spateval_vlm_options_init(spateval_vlm_options* options) {
  if (options == nullptr) return;
  options->backend = "stub";
  options->endpoint_url = nullptr;
  options->api_key_env = "SPATEVAL_API_KEY";
  options->model_id = "gpt-4o";
  options->timeout_s = 60.0;
  options->max_retries = 2;
  options->parallelism = 4;
  options->stub_file = nullptr;
  options->cassette_dir = nullptr;
  options->record = 0;
}

namespace {

std::shared_ptr<VlmBackend> backend_from_options(
    const spateval_vlm_options& options, const VlmConfig& cfg) {
  const std::string kind = options.backend ? options.backend : "stub";
  if (kind == "stub") {
    if (options.stub_file && *options.stub_file)
      return StubBackend::from_file(options.stub_file);
    return std::make_shared<StubBackend>();
  }
  if (kind == "replay") {
    if (options.cassette_dir == nullptr || *options.cassette_dir == '\0')
      throw Error(ErrorCode::InvalidArgument,
                  "replay backend needs a cassette directory");
    return std::make_shared<ReplayBackend>(options.cassette_dir);
  }
  if (kind == "live") {
    std::shared_ptr<VlmBackend> live = std::make_shared<LiveBackend>(cfg);
    if (options.record != 0) {
      if (options.cassette_dir == nullptr || *options.cassette_dir == '\0')
        throw Error(ErrorCode::InvalidArgument,
                    "recording needs a cassette directory");
      live = std::make_shared<RecordingBackend>(live, options.cassette_dir,
                                                cfg.model_id);
    }
    return live;
  }
  throw Error(ErrorCode::InvalidArgument, "unknown backend '" + kind + "'");
}

}  // namespace

spateval_status spateval_vlm_client_new(const spateval_vlm_options* options,
                                        spateval_vlm_client** out) {
  if (options == nullptr || out == nullptr)
    return invalid("options or out is NULL");
  return guarded([&] {
    const VlmConfig cfg = to_vlm_config(*options);
    auto backend = backend_from_options(*options, cfg);
    auto client = std::make_unique<spateval_vlm_client>();
    client->client = std::make_unique<VlmClient>(std::move(backend), cfg);
    *out = client.release();
  });
}

void spateval_vlm_client_free(spateval_vlm_client* client) { delete client; }

spateval_status spateval_vlm_describe(spateval_vlm_client* client,
                                      const char* image_path,
                                      const char* const* objects,
                                      size_t n_objects, char** raw_text_out) {
  if (client == nullptr || image_path == nullptr || objects == nullptr ||
      raw_text_out == nullptr)
    return invalid("client, image_path, objects or raw_text_out is NULL");
  return guarded([&] {
    std::vector<ObjectName> names;
    names.reserve(n_objects);
    for (size_t i = 0; i < n_objects; ++i)
      names.push_back(make_object(objects[i]));
    const SceneDescription desc = client->client->describe_image(image_path, names);
    *raw_text_out = dup_string(desc.raw_text);
  });
}

/* ------------------------------------------------------------ batch eval */

void spateval_eval_options_init(spateval_eval_options* options) {
  if (options == nullptr) return;
  options->prompts_path = nullptr;
  options->descriptions_path = nullptr;
  options->images_dir = nullptr;
  options->manifest_path = nullptr;
  options->out_dir = nullptr;
  spateval_vlm_options_init(&options->vlm);
  spateval_match_config_init(&options->match);
  options->workers = 4;
}

spateval_status spateval_eval_batch(const spateval_eval_options* options,
                                    spateval_batch_summary* out) {
  if (options == nullptr || out == nullptr)
    return invalid("options or out is NULL");
  if (options->prompts_path == nullptr)
    return invalid("prompts_path is NULL");
  return guarded([&] {
    BatchOptions batch;
    batch.prompts_path = options->prompts_path;
    if (options->descriptions_path)
      batch.descriptions_path = options->descriptions_path;
    if (options->images_dir) batch.images_dir = options->images_dir;
    if (options->manifest_path) batch.manifest_path = options->manifest_path;
    batch.backend = backend_kind_from_name(
        options->vlm.backend ? options->vlm.backend : "stub");
    if (options->vlm.stub_file) batch.stub_file = options->vlm.stub_file;
    if (options->vlm.cassette_dir)
      batch.cassette_dir = options->vlm.cassette_dir;
    batch.record = options->vlm.record != 0;
    batch.vlm = to_vlm_config(options->vlm);
    batch.match = to_match_config(&options->match);
    batch.workers = options->workers > 0 ? options->workers : 4;

    const BatchReport report = run_batch(batch);
    if (options->out_dir && *options->out_dir)
      write_reports(report, options->out_dir);

    out->samples = report.rows.size();
    out->failures = report.failures;
    out->or_mean = report.aggregate.or_mean;
    out->op_mean = report.aggregate.op_mean;
    out->sr_mean = report.aggregate.sr_mean;
    out->op_or = report.aggregate.op_or;
  });
}

spateval_status spateval_reaggregate(const char* const* csv_paths,
                                     size_t n_paths, char** csv_out) {
  if (csv_paths == nullptr || n_paths == 0 || csv_out == nullptr)
    return invalid("csv_paths or csv_out is NULL or empty");
  return guarded([&] {
    std::vector<std::string> paths;
    paths.reserve(n_paths);
    for (size_t i = 0; i < n_paths; ++i) paths.emplace_back(csv_paths[i]);
    *csv_out = dup_string(reaggregate_csv(paths));
  });
}

} /* extern "C" */
