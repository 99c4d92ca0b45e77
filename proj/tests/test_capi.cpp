// Exercises the shared-library C surface end to end.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "spateval/spateval.h"

namespace {

namespace fs = std::filesystem;

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("spateval_capi_" + std::to_string(::getpid()) + "_" +
            std::to_string(std::chrono::steady_clock::now()
                               .time_since_epoch()
                               .count()));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

const char* kPrompt = "A dog is to the left of a chair, and a cup is on the chair";
const char* kMisplaced =
    "The dog is under the chair, and the cup is in front of the chair";

}  // namespace

TEST_CASE("version and status names") {
  CHECK(std::string(spateval_version()) == "0.1.0");
  CHECK(std::string(spateval_status_name(SPATEVAL_OK)) == "ok");
  CHECK(std::string(spateval_status_name(SPATEVAL_ERR_NO_RELATION)) ==
        "no_relation_found");
}

TEST_CASE("relation table") {
  CHECK(std::string(spateval_relation_phrase(SPATEVAL_REL_FRONT)) ==
        "in front of");
  CHECK(std::string(spateval_relation_slug(SPATEVAL_REL_UNDER)) == "under");
  int v[3] = {9, 9, 9};
  REQUIRE(spateval_relation_vector(SPATEVAL_REL_LEFT, v) == SPATEVAL_OK);
  CHECK(v[0] == -1);
  CHECK(v[1] == 0);
  CHECK(v[2] == 0);
  spateval_relation rel;
  REQUIRE(spateval_relation_from_phrase("on top of", &rel) == SPATEVAL_OK);
  CHECK(rel == SPATEVAL_REL_ON);
  REQUIRE(spateval_relation_from_phrase("front", &rel) == SPATEVAL_OK);
  CHECK(rel == SPATEVAL_REL_FRONT);
  CHECK(spateval_relation_from_phrase("sideways", &rel) ==
        SPATEVAL_ERR_INVALID_ARGUMENT);
}

TEST_CASE("parse handle exposes objects, triples, and the center") {
  spateval_parse_result* result = nullptr;
  REQUIRE(spateval_parse_text(kPrompt, &result) == SPATEVAL_OK);
  REQUIRE(result != nullptr);
  CHECK(spateval_parse_object_count(result) == 3);
  CHECK(std::string(spateval_parse_object_name(result, 0)) == "dog");
  CHECK(std::string(spateval_parse_object_name(result, 1)) == "chair");
  CHECK(std::string(spateval_parse_object_name(result, 2)) == "cup");
  REQUIRE(spateval_parse_triple_count(result) == 2);
  const char* subject = nullptr;
  const char* reference = nullptr;
  spateval_relation rel;
  REQUIRE(spateval_parse_triple(result, 0, &subject, &rel, &reference) ==
          SPATEVAL_OK);
  CHECK(std::string(subject) == "dog");
  CHECK(rel == SPATEVAL_REL_LEFT);
  CHECK(std::string(reference) == "chair");
  CHECK(std::string(spateval_parse_center(result)) == "chair");
  spateval_parse_result_free(result);
}

TEST_CASE("parse errors set the thread-local message") {
  spateval_parse_result* result = nullptr;
  CHECK(spateval_parse_text("a sunny park", &result) ==
        SPATEVAL_ERR_NO_RELATION);
  CHECK(std::strlen(spateval_last_error()) > 0);
  CHECK(spateval_parse_text(nullptr, &result) ==
        SPATEVAL_ERR_INVALID_ARGUMENT);
  CHECK(spateval_parse_text("the dog is to the left the chair", &result) ==
        SPATEVAL_ERR_MALFORMED_CLAUSE);
}

TEST_CASE("scene JSON document") {
  char* json = nullptr;
  REQUIRE(spateval_parse_scene_json("The ball is behind the box", &json) ==
          SPATEVAL_OK);
  const std::string doc(json);
  spateval_string_free(json);
  CHECK(doc.find("\"center\": \"box\"") != std::string::npos);
  CHECK(doc.find("\"ball\"") != std::string::npos);
}

TEST_CASE("normalize through the C API") {
  char* out = nullptr;
  REQUIRE(spateval_normalize_object("  The   Ball ", &out) == SPATEVAL_OK);
  CHECK(std::string(out) == "ball");
  spateval_string_free(out);
  CHECK(spateval_normalize_object("the", &out) == SPATEVAL_ERR_EMPTY_OBJECT);
}

TEST_CASE("evaluate_record reproduces the worked example") {
  const std::string record =
      std::string("{\"id\":\"ex\",\"text\":\"") + kPrompt +
      "\",\"center\":\"chair\"}";
  spateval_match_config cfg;
  spateval_match_config_init(&cfg);
  spateval_scores scores;
  REQUIRE(spateval_evaluate_record(record.c_str(), kMisplaced, &cfg, &scores) ==
          SPATEVAL_OK);
  CHECK(scores.or_score == 1.0);
  CHECK(std::abs(scores.op_score - 0.2612) < 1e-4);
  CHECK(scores.sr_score == 0.0);
  CHECK(scores.parse_failed == 0);

  REQUIRE(spateval_evaluate_record(record.c_str(), "static noise", &cfg,
                                   &scores) == SPATEVAL_OK);
  CHECK(scores.parse_failed == 1);
  CHECK(scores.or_score == 0.0);
}

TEST_CASE("prompt set generate, sample, save, load") {
  const char* categories[] = {"dog", "cat", "cup", "box"};
  const spateval_relation rels[] = {SPATEVAL_REL_ON, SPATEVAL_REL_BEHIND};
  const char* backgrounds[] = {"park"};

  spateval_prompt_set* set = nullptr;
  REQUIRE(spateval_prompt_set_generate(categories, 4, rels, 2, backgrounds, 1,
                                       &set) == SPATEVAL_OK);
  CHECK(spateval_prompt_set_size(set) == 8);

  spateval_prompt_set* sampled = nullptr;
  REQUIRE(spateval_prompt_set_sample(set, 4, 42, &sampled) == SPATEVAL_OK);
  CHECK(spateval_prompt_set_size(sampled) == 4);

  spateval_prompt_set* too_many = nullptr;
  CHECK(spateval_prompt_set_sample(set, 99, 42, &too_many) ==
        SPATEVAL_ERR_SAMPLE_TOO_LARGE);

  TempDir dir;
  const std::string path = (dir.path / "set.jsonl").string();
  REQUIRE(spateval_prompt_set_save(sampled, path.c_str()) == SPATEVAL_OK);

  spateval_prompt_set* loaded = nullptr;
  REQUIRE(spateval_prompt_set_load(path.c_str(), &loaded) == SPATEVAL_OK);
  REQUIRE(spateval_prompt_set_size(loaded) == 4);
  for (size_t i = 0; i < 4; ++i)
    CHECK(std::string(spateval_prompt_set_id(loaded, i)) ==
          spateval_prompt_set_id(sampled, i));

  char* record = nullptr;
  REQUIRE(spateval_prompt_set_record_json(loaded, 0, &record) == SPATEVAL_OK);
  CHECK(std::string(record).find("\"triples\"") != std::string::npos);
  spateval_string_free(record);

  spateval_prompt_set_free(set);
  spateval_prompt_set_free(sampled);
  spateval_prompt_set_free(loaded);
}

TEST_CASE("default generation through the C API yields 6400") {
  spateval_prompt_set* set = nullptr;
  REQUIRE(spateval_prompt_set_generate(nullptr, 0, nullptr, 0, nullptr, 0,
                                       &set) == SPATEVAL_OK);
  CHECK(spateval_prompt_set_size(set) == 6400);
  spateval_prompt_set_free(set);
}

TEST_CASE("guidance kernel through the C API") {
  spateval_guidance_config cfg;
  spateval_guidance_config_init(&cfg);
  CHECK(cfg.momentum == 0.9);
  CHECK(cfg.learning_rate == 0.1);
  CHECK(cfg.max_iters == 50);
  CHECK(cfg.loss_threshold == 0.5);

  spateval_guidance_result* result = nullptr;
  REQUIRE(spateval_guidance_run_scenario("standard", &cfg, &result) ==
          SPATEVAL_OK);
  CHECK(spateval_guidance_result_outcome(result) == SPATEVAL_GUIDANCE_CONVERGED);
  const size_t n = spateval_guidance_result_trace_length(result);
  REQUIRE(n >= 2);
  double l0 = 0, lf = 0;
  spateval_guidance_result_trace_entry(result, 0, nullptr, nullptr, &l0);
  spateval_guidance_result_trace_entry(result, n - 1, nullptr, nullptr, &lf);
  CHECK(l0 > lf);
  CHECK(lf < 0.5);
  for (int t = 0; t < spateval_guidance_result_tokens(result); ++t) {
    double mass = 0;
    REQUIRE(spateval_guidance_result_in_box_mass(result, t, &mass) ==
            SPATEVAL_OK);
    CHECK(mass > 1.0 / 16.0);  // above the uniform share
  }
  spateval_guidance_result_free(result);

  CHECK(spateval_guidance_run_scenario("bogus", &cfg, &result) ==
        SPATEVAL_ERR_INVALID_ARGUMENT);
}

TEST_CASE("loss and gradient over raw buffers") {
  const double uniform[4] = {0.25, 0.25, 0.25, 0.25};
  const spateval_box box = {0, 0, 1, 1, 0};
  double loss = 0;
  REQUIRE(spateval_box_focus_loss(uniform, 1, 2, 2, &box, 1, &loss) ==
          SPATEVAL_OK);
  CHECK(std::abs(loss - 0.5625) < 1e-12);

  const double zeros[4] = {0, 0, 0, 0};
  double grad[4] = {0, 0, 0, 0};
  const spateval_box column = {0, 0, 1, 2, 0};
  REQUIRE(spateval_loss_gradient(zeros, 1, 2, 2, &column, 1, grad) ==
          SPATEVAL_OK);
  CHECK(std::abs(grad[0] + 0.125) < 1e-12);
  CHECK(std::abs(grad[1] - 0.125) < 1e-12);

  CHECK(spateval_box_focus_loss(nullptr, 1, 2, 2, &box, 1, &loss) ==
        SPATEVAL_ERR_INVALID_ARGUMENT);
  const double bad[4] = {0, 0, 0, 0};
  CHECK(spateval_box_focus_loss(bad, 1, 2, 2, &box, 1, &loss) ==
        SPATEVAL_ERR_ZERO_ATTENTION);
}

TEST_CASE("vlm client with a stub script") {
  TempDir dir;
  const std::string stub_path = (dir.path / "stub.json").string();
  {
    std::ofstream out(stub_path);
    out << R"({"*": "The dog is under the chair, and the cup is in front of the chair"})";
  }
  spateval_vlm_options options;
  spateval_vlm_options_init(&options);
  options.backend = "stub";
  options.stub_file = stub_path.c_str();

  spateval_vlm_client* client = nullptr;
  REQUIRE(spateval_vlm_client_new(&options, &client) == SPATEVAL_OK);

  // a readable dummy "image"
  const std::string image = (dir.path / "scene.png").string();
  { std::ofstream out(image); out << "not-a-real-png"; }

  const char* objects[] = {"dog", "chair", "cup"};
  char* raw = nullptr;
  REQUIRE(spateval_vlm_describe(client, image.c_str(), objects, 3, &raw) ==
          SPATEVAL_OK);
  CHECK(std::string(raw).find("under the chair") != std::string::npos);
  spateval_string_free(raw);
  spateval_vlm_client_free(client);
}

TEST_CASE("batch evaluation through the C API") {
  TempDir dir;

  spateval_prompt_set* set = nullptr;
  const char* categories[] = {"dog", "cat", "cup"};
  REQUIRE(spateval_prompt_set_generate(categories, 3, nullptr, 0, nullptr, 0,
                                       &set) == SPATEVAL_OK);
  const std::string prompts = (dir.path / "prompts.jsonl").string();
  REQUIRE(spateval_prompt_set_save(set, prompts.c_str()) == SPATEVAL_OK);

  // perfect descriptions: echo each prompt text
  const std::string descriptions = (dir.path / "descriptions.jsonl").string();
  {
    std::ofstream out(descriptions);
    const size_t n = spateval_prompt_set_size(set);
    for (size_t i = 0; i < n; ++i) {
      char* record_json = nullptr;
      REQUIRE(spateval_prompt_set_record_json(set, i, &record_json) ==
              SPATEVAL_OK);
      const std::string record(record_json);
      spateval_string_free(record_json);
      const auto id_pos = record.find("\"id\":\"");
      const auto text_pos = record.find("\"text\":\"");
      REQUIRE(id_pos != std::string::npos);
      REQUIRE(text_pos != std::string::npos);
      const std::string id =
          record.substr(id_pos + 6, record.find('"', id_pos + 6) - id_pos - 6);
      const std::string text = record.substr(
          text_pos + 8, record.find('"', text_pos + 8) - text_pos - 8);
      out << "{\"id\":\"" << id << "\",\"description\":\"" << text << "\"}\n";
    }
  }
  spateval_prompt_set_free(set);

  spateval_eval_options options;
  spateval_eval_options_init(&options);
  options.prompts_path = prompts.c_str();
  options.descriptions_path = descriptions.c_str();
  const std::string out_dir = (dir.path / "out").string();
  options.out_dir = out_dir.c_str();

  spateval_batch_summary summary;
  REQUIRE(spateval_eval_batch(&options, &summary) == SPATEVAL_OK);
  CHECK(summary.samples == 240);  // 3 x 8 x 10
  CHECK(summary.failures == 0);
  CHECK(summary.op_mean == 1.0);
  CHECK(summary.op_or == 1.0);
  CHECK(fs::exists(fs::path(out_dir) / "scores.csv"));
  CHECK(fs::exists(fs::path(out_dir) / "scores.jsonl"));
  CHECK(fs::exists(fs::path(out_dir) / "run_meta.json"));

  // reaggregate the CSV we just wrote
  const std::string csv = (fs::path(out_dir) / "scores.csv").string();
  const char* paths[] = {csv.c_str()};
  char* merged = nullptr;
  REQUIRE(spateval_reaggregate(paths, 1, &merged) == SPATEVAL_OK);
  CHECK(std::string(merged).find("AGGREGATE,1.0000,1.0000,1.0000,1.0000") !=
        std::string::npos);
  spateval_string_free(merged);
}
