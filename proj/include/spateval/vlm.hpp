#pragma once

#include <condition_variable>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include "spateval/parser.hpp"

namespace spateval {

struct SceneDescription {
  std::string raw_text;   // verbatim model output
  std::string source;     // "live" | "replay" | "stub"
  std::string model_id;
  int latency_ms = 0;
};

struct VlmConfig {
  std::string endpoint_url;  // full chat-completions URL
  std::string api_key_env = "SPATEVAL_API_KEY";
  std::string model_id = "gpt-4o";
  double timeout_s = 60.0;
  int max_retries = 2;
  int parallelism = 4;
};

inline constexpr std::string_view kTemplateVersion = "v1";

/// The versioned instruction sent with every image.
std::string build_instruction(const std::vector<ObjectName>& objects);

/// Re-prompt used after an unparseable answer: the instruction plus the
/// sentence grammar spelled out.
std::string build_strict_instruction(const std::vector<ObjectName>& objects);

struct DescribeRequest {
  std::string image_ref;    // path or sample id, used by the stub backend
  std::string image_bytes;  // may be empty for the stub backend
  std::string image_mime = "image/png";
  std::vector<std::string> objects;
  std::string instruction;
  std::string model_id;
  std::string request_id;
};

struct DescribeResponse {
  std::string raw_text;
  int latency_ms = 0;
};

class VlmBackend {
 public:
  virtual ~VlmBackend() = default;
  virtual DescribeResponse describe(const DescribeRequest& request) = 0;
  virtual std::string source_name() const = 0;
};

/// Scripted backend for offline runs and tests. Lookup order: full image_ref,
/// then its filename stem, then the "*" default entry.
class StubBackend : public VlmBackend {
 public:
  StubBackend() = default;
  explicit StubBackend(std::map<std::string, std::string> script,
                       std::string default_text = "");
  /// Loads a JSON object file {"id-or-path": "description", ...}.
  static std::shared_ptr<StubBackend> from_file(const std::string& path);

  DescribeResponse describe(const DescribeRequest& request) override;
  std::string source_name() const override { return "stub"; }

 private:
  std::map<std::string, std::string> script_;
  std::string default_text_;
};

/// Content-hash key for a request: SHA-256 over image bytes, object list, and
/// template version.
std::string cassette_key(const std::string& image_bytes,
                         const std::vector<std::string>& objects,
                         std::string_view template_version = kTemplateVersion);

struct Cassette {
  std::string key;
  std::string template_version;
  std::string model_id;
  std::string raw_text;
  std::string timestamp;
};

/// Writes {dir}/{key}.json. Returns the file path.
std::string write_cassette(const std::string& dir, const Cassette& cassette);

/// Throws CassetteDecodeError naming the path when the file is unreadable or
/// missing required fields.
Cassette read_cassette(const std::string& path);

/// Replays recorded responses; throws CassetteMiss when no cassette matches
/// the request key.
class ReplayBackend : public VlmBackend {
 public:
  explicit ReplayBackend(std::string cassette_dir);
  DescribeResponse describe(const DescribeRequest& request) override;
  std::string source_name() const override { return "replay"; }

 private:
  std::string dir_;
};

/// OpenAI-style chat-completions-with-vision client. Reads the API key from
/// the configured environment variable and fails with AuthError before any
/// network I/O when it is unset.
class LiveBackend : public VlmBackend {
 public:
  explicit LiveBackend(VlmConfig cfg);
  DescribeResponse describe(const DescribeRequest& request) override;
  std::string source_name() const override { return "live"; }

 private:
  VlmConfig cfg_;
};

/// Decorator recording every successful response as a cassette.
class RecordingBackend : public VlmBackend {
 public:
  RecordingBackend(std::shared_ptr<VlmBackend> inner, std::string cassette_dir,
                   std::string model_id);
  DescribeResponse describe(const DescribeRequest& request) override;
  std::string source_name() const override { return inner_->source_name(); }

 private:
  std::shared_ptr<VlmBackend> inner_;
  std::string dir_;
  std::string model_id_;
};

/// Front end over a backend: builds the instruction, enforces the
/// parallelism cap, and re-prompts (stricter instruction) when the answer
/// does not parse, up to cfg.max_retries times. After exhausting retries the
/// last raw text is returned for downstream parse-failure scoring.
class VlmClient {
 public:
  VlmClient(std::shared_ptr<VlmBackend> backend, VlmConfig cfg);

  SceneDescription describe_image(const std::string& image_path,
                                  const std::vector<ObjectName>& objects);
  SceneDescription describe_bytes(std::string image_bytes,
                                  const std::string& image_ref,
                                  const std::vector<ObjectName>& objects);

  const VlmConfig& config() const { return cfg_; }

 private:
  class Slot;
  std::shared_ptr<VlmBackend> backend_;
  VlmConfig cfg_;

  std::mutex mutex_;
  std::condition_variable slot_free_;
  int in_flight_ = 0;
};

std::string base64_encode(std::string_view bytes);
std::string sha256_hex(std::string_view bytes);
std::string new_request_id();

}  // namespace spateval
