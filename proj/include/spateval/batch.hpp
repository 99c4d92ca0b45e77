#pragma once

#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "spateval/dataset.hpp"
#include "spateval/metrics.hpp"
#include "spateval/vlm.hpp"

namespace spateval {

enum class BackendKind { Stub, Replay, Live };

BackendKind backend_kind_from_name(const std::string& name);
const char* backend_kind_name(BackendKind kind);

/// Resolved batch-evaluation run configuration. Exactly one description
/// source is active: a descriptions file, or images plus a VLM backend
/// (the stub backend also runs without an images directory, keyed by id).
struct BatchOptions {
  std::string prompts_path;
  std::string descriptions_path;
  std::string images_dir;
  std::string manifest_path;  // optional JSON {"id": "image path", ...}
  BackendKind backend = BackendKind::Stub;
  std::string stub_file;
  std::string cassette_dir;
  bool record = false;  // record live responses as cassettes
  VlmConfig vlm;
  MatchConfig match;
  int workers = 4;
};

struct SampleRow {
  std::string id;
  EvalScores scores;
  bool parse_failed = false;
  bool inconsistent = false;
  std::vector<std::string> missing_objects;
  bool failed = false;   // operational failure (missing image, backend error)
  std::string error;
};

struct BatchReport {
  std::vector<SampleRow> rows;  // sorted by id
  AggregateRow aggregate;
  std::size_t failures = 0;
  std::string config_hash;
  std::string backend_name;
  std::string model_id;
};

/// Evaluates every sample of the prompt file with a bounded worker pool.
/// Per-sample failures are scored with the parse-failure fallback and
/// counted, never propagated. `backend_override` substitutes the backend
/// (tests inject counting or scripted backends through it).
BatchReport run_batch(const BatchOptions& options,
                      std::shared_ptr<VlmBackend> backend_override = nullptr);

/// Deterministic digest of everything that influences scores.
std::string batch_config_hash(const BatchOptions& options);

/// "id,or,op,sr,op_or" rows sorted by id plus a final AGGREGATE row,
/// all values rounded half-to-even at 4 decimals.
void write_score_csv(const BatchReport& report, std::ostream& out);

/// Writes scores.csv, scores.jsonl and run_meta.json into out_dir. Wall-clock
/// timestamps go only into run_meta.json so score files stay reproducible.
void write_reports(const BatchReport& report, const std::string& out_dir);

/// Re-aggregates per-sample rows from existing score CSVs (AGGREGATE rows are
/// ignored) and returns a merged CSV document.
std::string reaggregate_csv(const std::vector<std::string>& csv_paths);

}  // namespace spateval
