#include "spateval/batch.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>

#include "json.hpp"

#include "spateval/error.hpp"

namespace spateval {

namespace fs = std::filesystem;

BackendKind backend_kind_from_name(const std::string& name) {
  if (name == "stub") return BackendKind::Stub;
  if (name == "replay") return BackendKind::Replay;
  if (name == "live") return BackendKind::Live;
  throw Error(ErrorCode::InvalidArgument, "unknown backend '" + name + "'");
}

const char* backend_kind_name(BackendKind kind) {
  switch (kind) {
    case BackendKind::Stub:   return "stub";
    case BackendKind::Replay: return "replay";
    case BackendKind::Live:   return "live";
  }
  return "unknown";
}

namespace {

std::map<std::string, std::string> load_string_map(const std::string& path,
                                                   const char* what) {
  std::ifstream in(path);
  if (!in)
    throw Error(ErrorCode::Io,
                std::string("cannot open ") + what + " '" + path + "'");
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Schema, std::string(what) + " '" + path +
                                       "' is not valid JSON: " + e.what());
  }
  if (!doc.is_object())
    throw Error(ErrorCode::Schema,
                std::string(what) + " '" + path + "' must be a JSON object");
  std::map<std::string, std::string> out;
  for (const auto& [key, value] : doc.items()) {
    if (!value.is_string())
      throw Error(ErrorCode::Schema, std::string(what) + " entry '" + key +
                                         "' is not a string");
    out[key] = value.get<std::string>();
  }
  return out;
}

// Descriptions file: one JSON record per line, {"id": ..., "description": ...}.
std::map<std::string, std::string> load_descriptions(const std::string& path) {
  std::ifstream in(path);
  if (!in)
    throw Error(ErrorCode::Io, "cannot open descriptions file '" + path + "'");
  std::map<std::string, std::string> out;
  std::string line_text;
  int line = 0;
  while (std::getline(in, line_text)) {
    ++line;
    if (line_text.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json record;
    try {
      record = nlohmann::json::parse(line_text);
    } catch (const nlohmann::json::exception& e) {
      throw Error::at_line(ErrorCode::Schema,
                           std::string("invalid JSON: ") + e.what(), line);
    }
    if (!record.is_object() || !record.contains("id") ||
        !record.contains("description"))
      throw Error::at_line(ErrorCode::Schema,
                           "description record needs id and description", line);
    out[record["id"].get<std::string>()] =
        record["description"].get<std::string>();
  }
  return out;
}

std::shared_ptr<VlmBackend> make_backend(const BatchOptions& options) {
  switch (options.backend) {
    case BackendKind::Stub:
      if (!options.stub_file.empty())
        return StubBackend::from_file(options.stub_file);
      return std::make_shared<StubBackend>();
    case BackendKind::Replay:
      if (options.cassette_dir.empty())
        throw Error(ErrorCode::InvalidArgument,
                    "replay backend needs a cassette directory");
      return std::make_shared<ReplayBackend>(options.cassette_dir);
    case BackendKind::Live: {
      std::shared_ptr<VlmBackend> live =
          std::make_shared<LiveBackend>(options.vlm);
      if (options.record) {
        if (options.cassette_dir.empty())
          throw Error(ErrorCode::InvalidArgument,
                      "recording needs a cassette directory");
        live = std::make_shared<RecordingBackend>(live, options.cassette_dir,
                                                  options.vlm.model_id);
      }
      return live;
    }
  }
  throw Error(ErrorCode::Internal, "unreachable backend kind");
}

SampleRow fallback_row(const PromptSpec& spec, const MatchConfig& match,
                       std::string error) {
  SampleRow row;
  row.id = spec.id;
  const auto n = static_cast<double>(spec.reference_sphere.positions.size());
  row.scores = EvalScores::make(
      0.0, 1.0 / (1.0 + n * match.missing_penalty), 0.0);
  row.parse_failed = true;
  for (const auto& o : spec.objects) row.missing_objects.push_back(o.name);
  row.failed = true;
  row.error = std::move(error);
  return row;
}

}  // namespace

std::string batch_config_hash(const BatchOptions& options) {
  nlohmann::json synonyms = nlohmann::json::object();
  for (const auto& [k, v] : options.match.synonym_map) synonyms[k] = v;
  const nlohmann::json doc = {
      {"prompts", options.prompts_path},
      {"descriptions", options.descriptions_path},
      {"images", options.images_dir},
      {"manifest", options.manifest_path},
      {"backend", backend_kind_name(options.backend)},
      {"stub_file", options.stub_file},
      {"cassette_dir", options.cassette_dir},
      {"record", options.record},
      {"model_id", options.vlm.model_id},
      {"endpoint", options.vlm.endpoint_url},
      {"template_version", std::string(kTemplateVersion)},
      {"missing_penalty", options.match.missing_penalty},
      {"synonyms", synonyms},
      {"workers", options.workers},
  };
  return sha256_hex(doc.dump());
}

BatchReport run_batch(const BatchOptions& options,
                      std::shared_ptr<VlmBackend> backend_override) {
  if (options.prompts_path.empty())
    throw Error(ErrorCode::InvalidArgument, "no prompt file given");
  const bool use_descriptions = !options.descriptions_path.empty();
  if (use_descriptions && !options.images_dir.empty())
    throw Error(ErrorCode::InvalidArgument,
                "descriptions file and images directory are exclusive");
  if (!use_descriptions && options.images_dir.empty() &&
      options.backend != BackendKind::Stub)
    throw Error(ErrorCode::InvalidArgument,
                "live and replay backends need an images directory");
  if (options.workers < 1)
    throw Error(ErrorCode::InvalidArgument, "workers must be >= 1");

  std::vector<PromptSpec> specs = load_prompt_file(options.prompts_path);
  std::sort(specs.begin(), specs.end(),
            [](const PromptSpec& a, const PromptSpec& b) { return a.id < b.id; });

  std::map<std::string, std::string> descriptions;
  if (use_descriptions) descriptions = load_descriptions(options.descriptions_path);

  std::map<std::string, std::string> manifest;
  if (!options.manifest_path.empty())
    manifest = load_string_map(options.manifest_path, "image manifest");

  std::shared_ptr<VlmBackend> backend =
      backend_override ? backend_override : make_backend(options);
  VlmClient client(backend, options.vlm);

  BatchReport report;
  report.rows.resize(specs.size());
  report.config_hash = batch_config_hash(options);
  report.backend_name = use_descriptions ? "file" : backend->source_name();
  report.model_id = options.vlm.model_id;

  const auto evaluate_one = [&](std::size_t i) {
    const PromptSpec& spec = specs[i];
    std::string description;
    try {
      if (use_descriptions) {
        const auto it = descriptions.find(spec.id);
        if (it == descriptions.end())
          throw Error(ErrorCode::Io, "no description for sample");
        description = it->second;
      } else {
        std::string image_path;
        const auto it = manifest.find(spec.id);
        if (it != manifest.end())
          image_path = it->second;
        else if (!options.images_dir.empty())
          image_path = (fs::path(options.images_dir) / (spec.id + ".png")).string();

        SceneDescription desc;
        if (options.backend == BackendKind::Stub &&
            (image_path.empty() || !fs::exists(image_path))) {
          // The stub backend runs without image files; key it by sample id.
          desc = client.describe_bytes("", spec.id, spec.objects);
        } else {
          desc = client.describe_image(image_path, spec.objects);
        }
        description = desc.raw_text;
      }
    } catch (const Error& e) {
      report.rows[i] = fallback_row(spec, options.match,
                                    std::string(error_code_name(e.code())) +
                                        ": " + e.what());
      return;
    }

    SampleRow row;
    row.id = spec.id;
    const SampleEvaluation result = evaluate(spec, description, options.match);
    row.scores = result.scores;
    row.parse_failed = result.parse_failed;
    row.inconsistent = result.inconsistent;
    row.missing_objects = result.missing_objects;
    report.rows[i] = std::move(row);
  };

  const int workers =
      std::min<int>(options.workers, static_cast<int>(specs.size()) > 0
                                         ? static_cast<int>(specs.size())
                                         : 1);
  if (workers <= 1) {
    for (std::size_t i = 0; i < specs.size(); ++i) evaluate_one(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next.fetch_add(1); i < specs.size();
             i = next.fetch_add(1))
          evaluate_one(i);
      });
    }
    for (auto& t : pool) t.join();
  }

  std::vector<EvalScores> scores;
  scores.reserve(report.rows.size());
  for (const auto& row : report.rows) {
    scores.push_back(row.scores);
    if (row.failed) ++report.failures;
  }
  if (!scores.empty()) report.aggregate = aggregate(scores);
  report.aggregate.count = scores.size();
  return report;
}

void write_score_csv(const BatchReport& report, std::ostream& out) {
  out << "id,or,op,sr,op_or\n";
  for (const auto& row : report.rows) {
    out << row.id << ',' << format_score(row.scores.or_score) << ','
        << format_score(row.scores.op_score) << ','
        << format_score(row.scores.sr_score) << ','
        << format_score(row.scores.op_or) << '\n';
  }
  if (report.rows.empty()) return;
  const auto& agg = report.aggregate;
  out << "AGGREGATE," << format_score(agg.or_mean) << ','
      << format_score(agg.op_mean) << ',' << format_score(agg.sr_mean) << ','
      << format_score(agg.op_or) << '\n';
}

void write_reports(const BatchReport& report, const std::string& out_dir) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);

  {
    std::ofstream csv(fs::path(out_dir) / "scores.csv", std::ios::binary);
    if (!csv)
      throw Error(ErrorCode::Io, "cannot write scores.csv in '" + out_dir + "'");
    write_score_csv(report, csv);
  }
  {
    std::ofstream jsonl(fs::path(out_dir) / "scores.jsonl", std::ios::binary);
    if (!jsonl)
      throw Error(ErrorCode::Io,
                  "cannot write scores.jsonl in '" + out_dir + "'");
    for (const auto& row : report.rows) {
      const nlohmann::json doc = {
          {"id", row.id},
          {"or", round_half_even(row.scores.or_score, 4)},
          {"op", round_half_even(row.scores.op_score, 4)},
          {"sr", round_half_even(row.scores.sr_score, 4)},
          {"op_or", round_half_even(row.scores.op_or, 4)},
          {"parse_failed", row.parse_failed},
          {"inconsistent", row.inconsistent},
          {"missing_objects", row.missing_objects},
      };
      jsonl << doc.dump() << "\n";
    }
  }
  {
    const auto now = std::chrono::system_clock::now();
    const auto t = std::chrono::system_clock::to_time_t(now);
    char stamp[32];
    std::strftime(stamp, sizeof(stamp), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    const nlohmann::json meta = {
        {"config_hash", report.config_hash},
        {"template_version", std::string(kTemplateVersion)},
        {"model_id", report.model_id},
        {"backend", report.backend_name},
        {"samples", report.rows.size()},
        {"failures", report.failures},
        {"finished_at", stamp},
    };
    std::ofstream out(fs::path(out_dir) / "run_meta.json", std::ios::binary);
    if (!out)
      throw Error(ErrorCode::Io,
                  "cannot write run_meta.json in '" + out_dir + "'");
    out << meta.dump(2) << "\n";
  }
}

std::string reaggregate_csv(const std::vector<std::string>& csv_paths) {
  struct Row {
    std::string id;
    EvalScores scores;
  };
  std::vector<Row> rows;

  for (const auto& path : csv_paths) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Io, "cannot open CSV '" + path + "'");
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty() || line == "\r") continue;
      if (line.back() == '\r') line.pop_back();
      if (line_no == 1 && line.rfind("id,", 0) == 0) continue;  // header
      std::istringstream fields(line);
      std::string id, or_s, op_s, sr_s, op_or_s;
      if (!std::getline(fields, id, ',') || !std::getline(fields, or_s, ',') ||
          !std::getline(fields, op_s, ',') || !std::getline(fields, sr_s, ',') ||
          !std::getline(fields, op_or_s))
        throw Error::at_line(ErrorCode::Schema,
                             "malformed CSV row in '" + path + "'", line_no);
      if (id == "AGGREGATE") continue;
      try {
        rows.push_back(
            {id, EvalScores{std::stod(or_s), std::stod(op_s), std::stod(sr_s),
                            std::stod(op_or_s)}});
      } catch (const std::exception&) {
        throw Error::at_line(ErrorCode::Schema,
                             "non-numeric score in '" + path + "'", line_no);
      }
    }
  }
  if (rows.empty())
    throw Error(ErrorCode::EmptyBatch, "no per-sample rows found");

  std::sort(rows.begin(), rows.end(),
            [](const Row& a, const Row& b) { return a.id < b.id; });

  BatchReport report;
  std::vector<EvalScores> scores;
  for (auto& r : rows) {
    SampleRow row;
    row.id = std::move(r.id);
    row.scores = r.scores;
    report.rows.push_back(std::move(row));
    scores.push_back(r.scores);
  }
  report.aggregate = aggregate(scores);

  std::ostringstream out;
  write_score_csv(report, out);
  return out.str();
}

}  // namespace spateval
