/*
 * spateval — spatial-relationship evaluation for text-to-image output.
 *
 * C interface to the spateval core: prompt parsing, lattice spheres, the
 * OR/OP/SR scores, combinatoric benchmark generation, batch evaluation, and
 * the attention-guidance demo kernel.
 *
 * Conventions:
 *   - Every fallible function returns spateval_status; SPATEVAL_OK is 0.
 *   - spateval_last_error() returns a thread-local message for the most
 *     recent failure on the calling thread.
 *   - Objects returned through out-parameters are owned by the caller and
 *     released with the matching *_free function. Strings returned as char*
 *     are released with spateval_string_free.
 *   - const char* accessors on handles stay valid until the handle is freed.
 */

#ifndef SPATEVAL_H
#define SPATEVAL_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  define SPATEVAL_API __declspec(dllexport)
#else
#  define SPATEVAL_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum spateval_status {
  SPATEVAL_OK = 0,
  SPATEVAL_ERR_INVALID_ARGUMENT,
  SPATEVAL_ERR_NO_RELATION,
  SPATEVAL_ERR_MALFORMED_CLAUSE,
  SPATEVAL_ERR_EMPTY_OBJECT,
  SPATEVAL_ERR_SELF_LOOP,
  SPATEVAL_ERR_CENTER_NOT_IN_GRAPH,
  SPATEVAL_ERR_EMPTY_PROMPT,
  SPATEVAL_ERR_DEGENERATE_PROMPT,
  SPATEVAL_ERR_EMPTY_BATCH,
  SPATEVAL_ERR_DUPLICATE_CATEGORY,
  SPATEVAL_ERR_SAMPLE_TOO_LARGE,
  SPATEVAL_ERR_IO,
  SPATEVAL_ERR_SCHEMA,
  SPATEVAL_ERR_TRIPLE_MISMATCH,
  SPATEVAL_ERR_NETWORK,
  SPATEVAL_ERR_AUTH,
  SPATEVAL_ERR_TIMEOUT,
  SPATEVAL_ERR_MALFORMED_RESPONSE,
  SPATEVAL_ERR_CASSETTE_DECODE,
  SPATEVAL_ERR_CASSETTE_MISS,
  SPATEVAL_ERR_NONFINITE,
  SPATEVAL_ERR_ZERO_ATTENTION,
  SPATEVAL_ERR_DIVERGED,
  SPATEVAL_ERR_INTERNAL
} spateval_status;

typedef enum spateval_relation {
  SPATEVAL_REL_FRONT = 0,
  SPATEVAL_REL_BEHIND,
  SPATEVAL_REL_LEFT,
  SPATEVAL_REL_RIGHT,
  SPATEVAL_REL_ON,
  SPATEVAL_REL_UNDER,
  SPATEVAL_REL_ABOVE,
  SPATEVAL_REL_BELOW
} spateval_relation;

SPATEVAL_API const char* spateval_version(void);
SPATEVAL_API const char* spateval_status_name(spateval_status status);
SPATEVAL_API const char* spateval_last_error(void);
SPATEVAL_API void spateval_string_free(char* s);

/* ------------------------------------------------------------- relations */

/* Canonical surface phrase, e.g. SPATEVAL_REL_FRONT -> "in front of". */
SPATEVAL_API const char* spateval_relation_phrase(spateval_relation rel);
/* Short tag used in ids and flags, e.g. "front". */
SPATEVAL_API const char* spateval_relation_slug(spateval_relation rel);
/* Unit lattice step of a relation, written into out_xyz[3]. */
SPATEVAL_API spateval_status spateval_relation_vector(spateval_relation rel,
                                                      int out_xyz[3]);
SPATEVAL_API spateval_status spateval_relation_from_phrase(
    const char* phrase, spateval_relation* out);

/* --------------------------------------------------------------- parsing */

typedef struct spateval_parse_result spateval_parse_result;

SPATEVAL_API spateval_status spateval_parse_text(const char* text,
                                                 spateval_parse_result** out);
SPATEVAL_API void spateval_parse_result_free(spateval_parse_result* result);

SPATEVAL_API size_t spateval_parse_object_count(
    const spateval_parse_result* result);
SPATEVAL_API const char* spateval_parse_object_name(
    const spateval_parse_result* result, size_t index);
SPATEVAL_API size_t spateval_parse_triple_count(
    const spateval_parse_result* result);
SPATEVAL_API spateval_status spateval_parse_triple(
    const spateval_parse_result* result, size_t index, const char** subject,
    spateval_relation* relation, const char** reference);
/* Center object (max in-degree, earliest-reference tie-break). */
SPATEVAL_API const char* spateval_parse_center(
    const spateval_parse_result* result);

/* Full diagnostic document for a sentence:
 * {"objects": [...], "triples": [...], "center": ..., "sphere": {...}}. */
SPATEVAL_API spateval_status spateval_parse_scene_json(const char* text,
                                                       char** json_out);

/* Lowercase, strip leading articles, collapse whitespace. */
SPATEVAL_API spateval_status spateval_normalize_object(const char* raw,
                                                       char** out);

/* ------------------------------------------------------------ evaluation */

typedef struct spateval_match_config {
  double missing_penalty;     /* distance charged for a missing object */
  const char* synonyms_json;  /* optional {"surface": "canonical", ...} */
} spateval_match_config;

SPATEVAL_API void spateval_match_config_init(spateval_match_config* cfg);

typedef struct spateval_scores {
  double or_score;
  double op_score;
  double sr_score;
  double op_or;
  int parse_failed;
  int inconsistent;
} spateval_scores;

/* Scores one prompt record (a prompt-file JSON line) against a scene
 * description. Unparseable descriptions score with the documented fallback
 * instead of failing. */
SPATEVAL_API spateval_status spateval_evaluate_record(
    const char* prompt_record_json, const char* description,
    const spateval_match_config* cfg, spateval_scores* out);

/* ------------------------------------------------------------ prompt sets */

typedef struct spateval_prompt_set spateval_prompt_set;

/* Full combinatoric product. Passing NULL/0 for a list selects the bundled
 * default (80 object categories, 8 relations, 10 backgrounds). */
SPATEVAL_API spateval_status spateval_prompt_set_generate(
    const char* const* categories, size_t n_categories,
    const spateval_relation* relations, size_t n_relations,
    const char* const* backgrounds, size_t n_backgrounds,
    spateval_prompt_set** out);

/* Uniform sample without replacement (SplitMix64 PRNG, Fisher-Yates). */
SPATEVAL_API spateval_status spateval_prompt_set_sample(
    const spateval_prompt_set* set, size_t n, uint64_t seed,
    spateval_prompt_set** out);

SPATEVAL_API spateval_status spateval_prompt_set_load(const char* path,
                                                      spateval_prompt_set** out);
SPATEVAL_API spateval_status spateval_prompt_set_save(
    const spateval_prompt_set* set, const char* path);
SPATEVAL_API size_t spateval_prompt_set_size(const spateval_prompt_set* set);
SPATEVAL_API const char* spateval_prompt_set_id(const spateval_prompt_set* set,
                                                size_t index);
SPATEVAL_API spateval_status spateval_prompt_set_record_json(
    const spateval_prompt_set* set, size_t index, char** json_out);
SPATEVAL_API void spateval_prompt_set_free(spateval_prompt_set* set);

/* -------------------------------------------------------------- guidance */

typedef struct spateval_guidance_config {
  double momentum;       /* default 0.9 */
  double learning_rate;  /* default 0.1 */
  int max_iters;         /* default 50 */
  double loss_threshold; /* default 0.5 */
  double alpha;          /* default 1.0 */
  double beta;           /* default 1.0 */
} spateval_guidance_config;

SPATEVAL_API void spateval_guidance_config_init(spateval_guidance_config* cfg);

typedef struct spateval_box {
  int x0, y0, x1, y1; /* half-open pixel bounds */
  int token;
} spateval_box;

/* Box-focus loss of a (possibly unnormalized) tokens x height x width
 * attention grid, laid out row-major per token. */
SPATEVAL_API spateval_status spateval_box_focus_loss(
    const double* attention, int tokens, int height, int width,
    const spateval_box* boxes, size_t n_boxes, double* out);

/* Analytic gradient of the loss through the per-token exp-normalization,
 * written into grad_out (same layout and size as scores). */
SPATEVAL_API spateval_status spateval_loss_gradient(
    const double* scores, int tokens, int height, int width,
    const spateval_box* boxes, size_t n_boxes, double* grad_out);

typedef enum spateval_guidance_outcome {
  SPATEVAL_GUIDANCE_CONVERGED = 0,
  SPATEVAL_GUIDANCE_MAX_ITERS = 1,
  SPATEVAL_GUIDANCE_DIVERGED = 2
} spateval_guidance_outcome;

typedef struct spateval_guidance_result spateval_guidance_result;

SPATEVAL_API spateval_status spateval_guidance_run(
    const double* z0, int tokens, int height, int width,
    const spateval_box* unet_boxes, size_t n_unet,
    const spateval_box* control_boxes, size_t n_control,
    const spateval_guidance_config* cfg, spateval_guidance_result** out);

/* Built-in scenarios: "standard", "single". */
SPATEVAL_API spateval_status spateval_guidance_run_scenario(
    const char* scenario, const spateval_guidance_config* cfg,
    spateval_guidance_result** out);

SPATEVAL_API spateval_guidance_outcome spateval_guidance_result_outcome(
    const spateval_guidance_result* result);
SPATEVAL_API size_t spateval_guidance_result_iterations(
    const spateval_guidance_result* result);
SPATEVAL_API size_t spateval_guidance_result_trace_length(
    const spateval_guidance_result* result);
SPATEVAL_API spateval_status spateval_guidance_result_trace_entry(
    const spateval_guidance_result* result, size_t index, double* l_unet,
    double* l_control, double* l_total);
SPATEVAL_API int spateval_guidance_result_tokens(
    const spateval_guidance_result* result);
/* Final fraction of a token's attention mass inside its (unet) boxes. */
SPATEVAL_API spateval_status spateval_guidance_result_in_box_mass(
    const spateval_guidance_result* result, int token, double* out);
SPATEVAL_API void spateval_guidance_result_free(spateval_guidance_result* result);

/* ------------------------------------------------------------ vlm client */

typedef struct spateval_vlm_options {
  const char* backend;      /* "stub" | "replay" | "live" */
  const char* endpoint_url; /* live: full chat-completions URL */
  const char* api_key_env;  /* default "SPATEVAL_API_KEY" */
  const char* model_id;     /* default "gpt-4o" */
  double timeout_s;         /* default 60 */
  int max_retries;          /* default 2 */
  int parallelism;          /* default 4 */
  const char* stub_file;    /* stub: optional script JSON */
  const char* cassette_dir; /* replay source / recording target */
  int record;               /* live: record cassettes when nonzero */
} spateval_vlm_options;

SPATEVAL_API void spateval_vlm_options_init(spateval_vlm_options* options);

typedef struct spateval_vlm_client spateval_vlm_client;

SPATEVAL_API spateval_status spateval_vlm_client_new(
    const spateval_vlm_options* options, spateval_vlm_client** out);
SPATEVAL_API void spateval_vlm_client_free(spateval_vlm_client* client);

/* Describes an image (by path) in terms of the given objects. The returned
 * raw_text is the verbatim model output. */
SPATEVAL_API spateval_status spateval_vlm_describe(
    spateval_vlm_client* client, const char* image_path,
    const char* const* objects, size_t n_objects, char** raw_text_out);

/* ------------------------------------------------------------ batch eval */

typedef struct spateval_eval_options {
  const char* prompts_path;
  const char* descriptions_path; /* exclusive with images_dir */
  const char* images_dir;
  const char* manifest_path;
  const char* out_dir; /* scores.csv, scores.jsonl, run_meta.json */
  spateval_vlm_options vlm;
  spateval_match_config match;
  int workers; /* default 4 */
} spateval_eval_options;

SPATEVAL_API void spateval_eval_options_init(spateval_eval_options* options);

typedef struct spateval_batch_summary {
  size_t samples;
  size_t failures;
  double or_mean;
  double op_mean;
  double sr_mean;
  double op_or;
} spateval_batch_summary;

SPATEVAL_API spateval_status spateval_eval_batch(
    const spateval_eval_options* options, spateval_batch_summary* out);

/* Re-aggregate per-sample rows from existing score CSVs into one merged CSV
 * document (returned as a string). */
SPATEVAL_API spateval_status spateval_reaggregate(const char* const* csv_paths,
                                                  size_t n_paths,
                                                  char** csv_out);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* SPATEVAL_H */
