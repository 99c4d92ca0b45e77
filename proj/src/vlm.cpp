#include "spateval/vlm.hpp"

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <openssl/evp.h>

#include "httplib.h"
#include "json.hpp"

#include "spateval/error.hpp"

namespace spateval {

namespace fs = std::filesystem;

std::string build_instruction(const std::vector<ObjectName>& objects) {
  std::string list;
  for (const auto& o : objects) {
    if (!list.empty()) list += ", ";
    list += o.name;
  }
  return "You see an image containing these objects: " + list +
         ". Describe the spatial relationship between the objects using only "
         "sentences of the form '<object> is <relation> <object>', where "
         "<relation> is one of: in front of, behind, to the left of, to the "
         "right of, on, under, above, below. Use the exact object names "
         "given. Output only these sentences.";
}

std::string build_strict_instruction(const std::vector<ObjectName>& objects) {
  return build_instruction(objects) +
         " Every sentence must match exactly: [a|an|the] <object> is "
         "<relation> [a|an|the] <object>. Separate sentences with periods and "
         "write nothing else.";
}

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr);
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 0xF];
  }
  return out;
}

std::string base64_encode(std::string_view bytes) {
  static const char* alphabet =
      "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  std::size_t i = 0;
  while (i + 2 < bytes.size()) {
    const unsigned v = (static_cast<unsigned char>(bytes[i]) << 16) |
                       (static_cast<unsigned char>(bytes[i + 1]) << 8) |
                       static_cast<unsigned char>(bytes[i + 2]);
    out += alphabet[(v >> 18) & 63];
    out += alphabet[(v >> 12) & 63];
    out += alphabet[(v >> 6) & 63];
    out += alphabet[v & 63];
    i += 3;
  }
  const std::size_t rest = bytes.size() - i;
  if (rest == 1) {
    const unsigned v = static_cast<unsigned char>(bytes[i]) << 16;
    out += alphabet[(v >> 18) & 63];
    out += alphabet[(v >> 12) & 63];
    out += "==";
  } else if (rest == 2) {
    const unsigned v = (static_cast<unsigned char>(bytes[i]) << 16) |
                       (static_cast<unsigned char>(bytes[i + 1]) << 8);
    out += alphabet[(v >> 18) & 63];
    out += alphabet[(v >> 12) & 63];
    out += alphabet[(v >> 6) & 63];
    out += '=';
  }
  return out;
}

std::string new_request_id() {
  static std::atomic<std::uint64_t> counter{0};
  const auto now = std::chrono::steady_clock::now().time_since_epoch().count();
  std::ostringstream out;
  out << "req-" << std::hex << (reinterpret_cast<std::uintptr_t>(&counter) ^ now)
      << "-" << std::dec << counter.fetch_add(1);
  return out.str();
}

std::string cassette_key(const std::string& image_bytes,
                         const std::vector<std::string>& objects,
                         std::string_view template_version) {
  std::string blob = image_bytes;
  blob += '\0';
  for (const auto& o : objects) {
    blob += o;
    blob += '\x1f';
  }
  blob += '\0';
  blob += template_version;
  return sha256_hex(blob);
}

// ---------------------------------------------------------------- StubBackend

StubBackend::StubBackend(std::map<std::string, std::string> script,
                         std::string default_text)
    : script_(std::move(script)), default_text_(std::move(default_text)) {}

std::shared_ptr<StubBackend> StubBackend::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open stub file '" + path + "'");
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Schema,
                "stub file '" + path + "' is not valid JSON: " + e.what());
  }
  if (!doc.is_object())
    throw Error(ErrorCode::Schema,
                "stub file '" + path + "' must be a JSON object");
  std::map<std::string, std::string> script;
  std::string default_text;
  for (const auto& [key, value] : doc.items()) {
    if (!value.is_string())
      throw Error(ErrorCode::Schema, "stub entry '" + key + "' is not a string");
    if (key == "*")
      default_text = value.get<std::string>();
    else
      script[key] = value.get<std::string>();
  }
  return std::make_shared<StubBackend>(std::move(script),
                                       std::move(default_text));
}

DescribeResponse StubBackend::describe(const DescribeRequest& request) {
  auto it = script_.find(request.image_ref);
  if (it == script_.end())
    it = script_.find(fs::path(request.image_ref).stem().string());
  const std::string& text =
      it != script_.end() ? it->second : default_text_;
  return {text, 0};
}

// ------------------------------------------------------------------ cassettes

std::string write_cassette(const std::string& dir, const Cassette& cassette) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  const std::string path = (fs::path(dir) / (cassette.key + ".json")).string();
  nlohmann::json doc = {{"key", cassette.key},
                        {"template_version", cassette.template_version},
                        {"model_id", cassette.model_id},
                        {"raw_text", cassette.raw_text},
                        {"timestamp", cassette.timestamp}};
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write cassette '" + path + "'");
  out << doc.dump(2) << "\n";
  return path;
}

Cassette read_cassette(const std::string& path) {
  std::ifstream in(path);
  if (!in)
    throw Error(ErrorCode::CassetteDecode,
                "cannot open cassette '" + path + "'");
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::CassetteDecode,
                "cassette '" + path + "' is not valid JSON: " + e.what());
  }
  Cassette c;
  try {
    c.key = doc.at("key").get<std::string>();
    c.template_version = doc.at("template_version").get<std::string>();
    c.model_id = doc.at("model_id").get<std::string>();
    c.raw_text = doc.at("raw_text").get<std::string>();
    c.timestamp = doc.value("timestamp", std::string());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::CassetteDecode,
                "cassette '" + path + "' is missing fields: " + e.what());
  }
  return c;
}

ReplayBackend::ReplayBackend(std::string cassette_dir)
    : dir_(std::move(cassette_dir)) {}

DescribeResponse ReplayBackend::describe(const DescribeRequest& request) {
  const std::string key = cassette_key(request.image_bytes, request.objects);
  const std::string path = (fs::path(dir_) / (key + ".json")).string();
  if (!fs::exists(path))
    throw Error(ErrorCode::CassetteMiss,
                "no cassette " + key + " in '" + dir_ + "' (request " +
                    request.request_id + ")");
  const Cassette c = read_cassette(path);
  return {c.raw_text, 0};
}

// ---------------------------------------------------------------- LiveBackend

namespace {

struct ParsedUrl {
  bool https = false;
  std::string host;
  int port = 80;
  std::string path;
};

ParsedUrl parse_url(const std::string& url) {
  ParsedUrl out;
  std::string rest;
  if (url.rfind("https://", 0) == 0) {
    out.https = true;
    out.port = 443;
    rest = url.substr(8);
  } else if (url.rfind("http://", 0) == 0) {
    rest = url.substr(7);
  } else {
    throw Error(ErrorCode::InvalidArgument,
                "endpoint URL must start with http:// or https://: " + url);
  }
  const auto slash = rest.find('/');
  std::string host_port = slash == std::string::npos ? rest : rest.substr(0, slash);
  out.path = slash == std::string::npos ? "/" : rest.substr(slash);
  const auto colon = host_port.rfind(':');
  if (colon != std::string::npos) {
    try {
      out.port = std::stoi(host_port.substr(colon + 1));
    } catch (const std::exception&) {
      throw Error(ErrorCode::InvalidArgument, "bad port in endpoint URL: " + url);
    }
    host_port.resize(colon);
  }
  out.host = host_port;
  if (out.host.empty())
    throw Error(ErrorCode::InvalidArgument, "endpoint URL has no host: " + url);
  return out;
}

}  // namespace

LiveBackend::LiveBackend(VlmConfig cfg) : cfg_(std::move(cfg)) {}

DescribeResponse LiveBackend::describe(const DescribeRequest& request) {
  const char* key = std::getenv(cfg_.api_key_env.c_str());
  if (key == nullptr || *key == '\0')
    throw Error(ErrorCode::Auth, "environment variable " + cfg_.api_key_env +
                                     " is not set (request " +
                                     request.request_id + ")");
  if (cfg_.endpoint_url.empty())
    throw Error(ErrorCode::InvalidArgument,
                "no endpoint URL configured for the live backend");

  const ParsedUrl url = parse_url(cfg_.endpoint_url);

  nlohmann::json content = nlohmann::json::array();
  content.push_back({{"type", "text"}, {"text", request.instruction}});
  if (!request.image_bytes.empty()) {
    content.push_back(
        {{"type", "image_url"},
         {"image_url",
          {{"url", "data:" + request.image_mime + ";base64," +
                       base64_encode(request.image_bytes)}}}});
  }
  const nlohmann::json body = {
      {"model", request.model_id},
      {"messages",
       nlohmann::json::array({{{"role", "user"}, {"content", content}}})}};

  httplib::Headers headers = {
      {"Authorization", std::string("Bearer ") + key},
  };

  const auto run = [&](auto& client) -> httplib::Result {
    const auto seconds = static_cast<time_t>(cfg_.timeout_s);
    const auto usec = static_cast<time_t>(
        (cfg_.timeout_s - static_cast<double>(seconds)) * 1e6);
    client.set_connection_timeout(seconds, usec);
    client.set_read_timeout(seconds, usec);
    client.set_write_timeout(seconds, usec);
    return client.Post(url.path, headers, body.dump(), "application/json");
  };

  const auto start = std::chrono::steady_clock::now();
  httplib::Result result;
#ifdef CPPHTTPLIB_OPENSSL_SUPPORT
  if (url.https) {
    httplib::SSLClient client(url.host, url.port);
    result = run(client);
  } else {
    httplib::Client client(url.host, url.port);
    result = run(client);
  }
#else
  if (url.https)
    throw Error(ErrorCode::InvalidArgument,
                "built without TLS support; use an http:// endpoint");
  httplib::Client client(url.host, url.port);
  result = run(client);
#endif
  const auto latency = std::chrono::duration_cast<std::chrono::milliseconds>(
                           std::chrono::steady_clock::now() - start)
                           .count();

  if (!result) {
    const auto err = result.error();
    const std::string what =
        "request " + request.request_id + ": " + httplib::to_string(err);
    if (err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read ||
        err == httplib::Error::Write)
      throw Error(ErrorCode::Timeout, what);
    throw Error(ErrorCode::Network, what);
  }
  if (result->status == 401 || result->status == 403)
    throw Error(ErrorCode::Auth, "request " + request.request_id +
                                     ": endpoint rejected the API key (HTTP " +
                                     std::to_string(result->status) + ")");
  if (result->status < 200 || result->status >= 300)
    throw Error(ErrorCode::MalformedResponse,
                "request " + request.request_id + ": HTTP " +
                    std::to_string(result->status));

  try {
    const nlohmann::json doc = nlohmann::json::parse(result->body);
    return {doc.at("choices").at(0).at("message").at("content")
                .get<std::string>(),
            static_cast<int>(latency)};
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedResponse,
                "request " + request.request_id +
                    ": cannot extract message content: " + e.what());
  }
}

// ----------------------------------------------------------- RecordingBackend

RecordingBackend::RecordingBackend(std::shared_ptr<VlmBackend> inner,
                                   std::string cassette_dir,
                                   std::string model_id)
    : inner_(std::move(inner)),
      dir_(std::move(cassette_dir)),
      model_id_(std::move(model_id)) {}

DescribeResponse RecordingBackend::describe(const DescribeRequest& request) {
  const DescribeResponse response = inner_->describe(request);
  Cassette c;
  c.key = cassette_key(request.image_bytes, request.objects);
  c.template_version = std::string(kTemplateVersion);
  c.model_id = model_id_;
  c.raw_text = response.raw_text;
  {
    const auto now = std::chrono::system_clock::now();
    const auto t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    c.timestamp = buf;
  }
  write_cassette(dir_, c);
  return response;
}

// ------------------------------------------------------------------ VlmClient

VlmClient::VlmClient(std::shared_ptr<VlmBackend> backend, VlmConfig cfg)
    : backend_(std::move(backend)), cfg_(std::move(cfg)) {
  if (cfg_.parallelism < 1)
    throw Error(ErrorCode::InvalidArgument, "parallelism must be >= 1");
}

SceneDescription VlmClient::describe_image(
    const std::string& image_path, const std::vector<ObjectName>& objects) {
  std::ifstream in(image_path, std::ios::binary);
  if (!in)
    throw Error(ErrorCode::Io, "cannot read image '" + image_path + "'");
  std::ostringstream bytes;
  bytes << in.rdbuf();
  return describe_bytes(bytes.str(), image_path, objects);
}

SceneDescription VlmClient::describe_bytes(
    std::string image_bytes, const std::string& image_ref,
    const std::vector<ObjectName>& objects) {
  if (objects.empty())
    throw Error(ErrorCode::InvalidArgument, "object list must be non-empty");

  DescribeRequest request;
  request.image_ref = image_ref;
  request.image_bytes = std::move(image_bytes);
  if (image_ref.size() >= 4) {
    const std::string ext = fs::path(image_ref).extension().string();
    if (ext == ".jpg" || ext == ".jpeg") request.image_mime = "image/jpeg";
  }
  for (const auto& o : objects) request.objects.push_back(o.name);
  request.model_id = cfg_.model_id;
  request.instruction = build_instruction(objects);

  SceneDescription out;
  out.source = backend_->source_name();
  out.model_id = cfg_.model_id;

  // Parallelism cap: at most cfg_.parallelism requests in flight, including
  // re-prompt attempts.
  for (int attempt = 0; attempt <= cfg_.max_retries; ++attempt) {
    if (attempt > 0) request.instruction = build_strict_instruction(objects);
    request.request_id = new_request_id();

    DescribeResponse response;
    {
      std::unique_lock lock(mutex_);
      slot_free_.wait(lock, [&] { return in_flight_ < cfg_.parallelism; });
      ++in_flight_;
      lock.unlock();
      try {
        response = backend_->describe(request);
      } catch (...) {
        lock.lock();
        --in_flight_;
        slot_free_.notify_one();
        throw;
      }
      lock.lock();
      --in_flight_;
      slot_free_.notify_one();
    }

    out.raw_text = response.raw_text;
    out.latency_ms += response.latency_ms;
    try {
      parse_spatial_text(out.raw_text);
      return out;  // parseable, done
    } catch (const Error&) {
      // fall through to a stricter re-prompt
    }
  }
  return out;  // last raw text; downstream scoring flags the parse failure
}

}  // namespace spateval
