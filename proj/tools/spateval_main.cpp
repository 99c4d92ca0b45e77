// spateval command-line front end. Talks to the core exclusively through the
// C API in spateval/spateval.h.

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "spateval/spateval.h"

namespace {

// Exit-code map: 0 ok, 2 config, 3 I/O, 4 parse, 5 backend, 6 divergence.
constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;
constexpr int kExitParse = 4;
constexpr int kExitBackend = 5;
constexpr int kExitDivergence = 6;

int exit_code_for(spateval_status status) {
  switch (status) {
    case SPATEVAL_OK:
      return kExitOk;
    case SPATEVAL_ERR_NO_RELATION:
    case SPATEVAL_ERR_MALFORMED_CLAUSE:
    case SPATEVAL_ERR_EMPTY_OBJECT:
      return kExitParse;
    case SPATEVAL_ERR_IO:
    case SPATEVAL_ERR_SCHEMA:
    case SPATEVAL_ERR_TRIPLE_MISMATCH:
    case SPATEVAL_ERR_CASSETTE_DECODE:
      return kExitIo;
    case SPATEVAL_ERR_NETWORK:
    case SPATEVAL_ERR_AUTH:
    case SPATEVAL_ERR_TIMEOUT:
    case SPATEVAL_ERR_MALFORMED_RESPONSE:
    case SPATEVAL_ERR_CASSETTE_MISS:
      return kExitBackend;
    case SPATEVAL_ERR_NONFINITE:
    case SPATEVAL_ERR_ZERO_ATTENTION:
    case SPATEVAL_ERR_DIVERGED:
      return kExitDivergence;
    default:
      return kExitConfig;
  }
}

int fail(spateval_status status) {
  std::cerr << "error (" << spateval_status_name(status)
            << "): " << spateval_last_error() << "\n";
  return exit_code_for(status);
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' '))
      line.pop_back();
    if (!line.empty()) lines.push_back(line);
  }
  return lines;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

std::vector<const char*> c_strings(const std::vector<std::string>& strings) {
  std::vector<const char*> out;
  out.reserve(strings.size());
  for (const auto& s : strings) out.push_back(s.c_str());
  return out;
}

struct GenPromptsArgs {
  std::string out_path = "prompts.jsonl";
  std::string categories_file;
  std::string backgrounds_file;
  std::vector<std::string> relations;
  std::int64_t sample = -1;
  std::uint64_t seed = 42;
};

int run_gen_prompts(const GenPromptsArgs& args) {
  std::vector<std::string> categories, backgrounds;
  try {
    if (!args.categories_file.empty())
      categories = read_lines(args.categories_file);
    if (!args.backgrounds_file.empty())
      backgrounds = read_lines(args.backgrounds_file);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  }

  std::vector<spateval_relation> relations;
  for (const auto& name : args.relations) {
    spateval_relation rel;
    if (spateval_relation_from_phrase(name.c_str(), &rel) != SPATEVAL_OK) {
      std::cerr << "error: unknown relation '" << name << "'\n";
      return kExitConfig;
    }
    relations.push_back(rel);
  }

  const auto cat_ptrs = c_strings(categories);
  const auto bg_ptrs = c_strings(backgrounds);

  spateval_prompt_set* set = nullptr;
  spateval_status status = spateval_prompt_set_generate(
      cat_ptrs.empty() ? nullptr : cat_ptrs.data(), cat_ptrs.size(),
      relations.empty() ? nullptr : relations.data(), relations.size(),
      bg_ptrs.empty() ? nullptr : bg_ptrs.data(), bg_ptrs.size(), &set);
  if (status != SPATEVAL_OK) return fail(status);

  spateval_prompt_set* final_set = set;
  if (args.sample >= 0) {
    spateval_prompt_set* sampled = nullptr;
    status = spateval_prompt_set_sample(
        set, static_cast<size_t>(args.sample), args.seed, &sampled);
    if (status != SPATEVAL_OK) {
      spateval_prompt_set_free(set);
      return fail(status);
    }
    spateval_prompt_set_free(set);
    final_set = sampled;
  }

  status = spateval_prompt_set_save(final_set, args.out_path.c_str());
  if (status != SPATEVAL_OK) {
    spateval_prompt_set_free(final_set);
    return fail(status);
  }
  std::cout << spateval_prompt_set_size(final_set) << " prompts written to "
            << args.out_path << "\n";
  spateval_prompt_set_free(final_set);
  return kExitOk;
}

int run_parse(const std::string& text) {
  char* json = nullptr;
  const spateval_status status = spateval_parse_scene_json(text.c_str(), &json);
  if (status != SPATEVAL_OK) return fail(status);
  std::cout << json << "\n";
  spateval_string_free(json);
  return kExitOk;
}

struct EvalArgs {
  std::string prompts;
  std::string descriptions;
  std::string images;
  std::string manifest;
  std::string backend = "stub";
  std::string stub_file;
  std::string cassette_dir;
  bool record = false;
  std::string out_dir = "eval_out";
  std::string synonyms_file;
  double missing_penalty = 10.0;
  int workers = 4;
  std::string endpoint;
  std::string api_key_env = "SPATEVAL_API_KEY";
  std::string model_id = "gpt-4o";
  double timeout_s = 60.0;
  int max_retries = 2;
  int vlm_parallelism = 4;
};

int run_eval(const EvalArgs& args) {
  if (args.descriptions.empty() == args.images.empty() &&
      !(args.descriptions.empty() && args.backend == "stub")) {
    std::cerr << "error: exactly one description source required: "
                 "--descriptions, or --images with a VLM backend\n";
    return kExitConfig;
  }

  std::string synonyms_json;
  if (!args.synonyms_file.empty()) {
    try {
      synonyms_json = read_file(args.synonyms_file);
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << "\n";
      return kExitIo;
    }
  }

  spateval_eval_options options;
  spateval_eval_options_init(&options);
  options.prompts_path = args.prompts.c_str();
  if (!args.descriptions.empty())
    options.descriptions_path = args.descriptions.c_str();
  if (!args.images.empty()) options.images_dir = args.images.c_str();
  if (!args.manifest.empty()) options.manifest_path = args.manifest.c_str();
  options.out_dir = args.out_dir.c_str();
  options.workers = args.workers;
  options.match.missing_penalty = args.missing_penalty;
  if (!synonyms_json.empty()) options.match.synonyms_json = synonyms_json.c_str();
  options.vlm.backend = args.backend.c_str();
  if (!args.endpoint.empty()) options.vlm.endpoint_url = args.endpoint.c_str();
  options.vlm.api_key_env = args.api_key_env.c_str();
  options.vlm.model_id = args.model_id.c_str();
  options.vlm.timeout_s = args.timeout_s;
  options.vlm.max_retries = args.max_retries;
  options.vlm.parallelism = args.vlm_parallelism;
  if (!args.stub_file.empty()) options.vlm.stub_file = args.stub_file.c_str();
  if (!args.cassette_dir.empty())
    options.vlm.cassette_dir = args.cassette_dir.c_str();
  options.vlm.record = args.record ? 1 : 0;

  spateval_batch_summary summary;
  const spateval_status status = spateval_eval_batch(&options, &summary);
  if (status != SPATEVAL_OK) return fail(status);

  std::printf("samples=%zu failures=%zu\n", summary.samples, summary.failures);
  std::printf("aggregate or=%.4f op=%.4f sr=%.4f op_or=%.4f\n",
              summary.or_mean, summary.op_mean, summary.sr_mean,
              summary.op_or);
  std::cout << "reports written to " << args.out_dir << "\n";

  // All sample failures on a live backend means the endpoint never answered.
  if (args.backend == "live" && summary.samples > 0 &&
      summary.failures == summary.samples) {
    std::cerr << "error: live backend unreachable for every sample\n";
    return kExitBackend;
  }
  return kExitOk;
}

struct GuideArgs {
  std::string scenario = "standard";
  std::string out_path;
  spateval_guidance_config cfg;
};

int run_guide(const GuideArgs& args) {
  spateval_guidance_result* result = nullptr;
  const spateval_status status =
      spateval_guidance_run_scenario(args.scenario.c_str(), &args.cfg, &result);
  if (status != SPATEVAL_OK) return fail(status);

  std::ostringstream csv;
  csv << "iter,l_unet,l_control,l_total\n";
  const size_t n = spateval_guidance_result_trace_length(result);
  for (size_t i = 0; i < n; ++i) {
    double lu = 0, lc = 0, lt = 0;
    spateval_guidance_result_trace_entry(result, i, &lu, &lc, &lt);
    char line[128];
    std::snprintf(line, sizeof(line), "%zu,%.9f,%.9f,%.9f\n", i, lu, lc, lt);
    csv << line;
  }

  if (args.out_path.empty()) {
    std::cout << csv.str();
  } else {
    std::ofstream out(args.out_path, std::ios::binary);
    if (!out) {
      std::cerr << "error: cannot write '" << args.out_path << "'\n";
      spateval_guidance_result_free(result);
      return kExitIo;
    }
    out << csv.str();
  }

  const spateval_guidance_outcome outcome =
      spateval_guidance_result_outcome(result);
  const char* outcome_name =
      outcome == SPATEVAL_GUIDANCE_CONVERGED   ? "converged"
      : outcome == SPATEVAL_GUIDANCE_MAX_ITERS ? "max_iters"
                                               : "diverged";
  double final_total = 0;
  if (n > 0)
    spateval_guidance_result_trace_entry(result, n - 1, nullptr, nullptr,
                                         &final_total);
  std::ostream& info = args.out_path.empty() ? std::cerr : std::cout;
  info << "outcome=" << outcome_name
       << " iterations=" << spateval_guidance_result_iterations(result)
       << " final_loss=" << final_total << "\n";
  for (int t = 0; t < spateval_guidance_result_tokens(result); ++t) {
    double mass = 0;
    if (spateval_guidance_result_in_box_mass(result, t, &mass) == SPATEVAL_OK)
      info << "token " << t << " in-box mass " << mass << "\n";
  }

  const bool diverged = outcome == SPATEVAL_GUIDANCE_DIVERGED;
  spateval_guidance_result_free(result);
  return diverged ? kExitDivergence : kExitOk;
}

int run_report(const std::vector<std::string>& csvs, const std::string& out) {
  const auto ptrs = c_strings(csvs);
  char* merged = nullptr;
  const spateval_status status =
      spateval_reaggregate(ptrs.data(), ptrs.size(), &merged);
  if (status != SPATEVAL_OK) return fail(status);
  if (out.empty()) {
    std::cout << merged;
  } else {
    std::ofstream file(out, std::ios::binary);
    if (!file) {
      std::cerr << "error: cannot write '" << out << "'\n";
      spateval_string_free(merged);
      return kExitIo;
    }
    file << merged;
  }
  spateval_string_free(merged);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"spateval: spatial-relationship benchmarking and scoring"};
  app.set_config("--config");
  app.fallthrough(true);
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(spateval_version()));

  GenPromptsArgs gen_args;
  auto* gen = app.add_subcommand(
      "gen-prompts", "Generate the combinatoric prompt benchmark");
  gen->add_option("--out", gen_args.out_path, "Output prompt file (JSONL)");
  gen->add_option("--categories-file", gen_args.categories_file,
                  "Object categories, one per line (default: bundled 80)");
  gen->add_option("--backgrounds-file", gen_args.backgrounds_file,
                  "Backgrounds, one per line (default: bundled 10)");
  gen->add_option("--relations", gen_args.relations,
                  "Relation subset (slugs or phrases; default: all eight)")
      ->delimiter(',');
  gen->add_option("--sample", gen_args.sample,
                  "Sample this many prompts without replacement");
  gen->add_option("--seed", gen_args.seed, "Sampling seed (default 42)");

  std::string parse_text;
  auto* parse = app.add_subcommand(
      "parse", "Parse a sentence and print objects, triples, center, sphere");
  parse->add_option("text", parse_text, "Sentence to parse")->required();

  EvalArgs eval_args;
  auto* eval = app.add_subcommand(
      "eval", "Evaluate prompts against descriptions or images");
  eval->add_option("--prompts", eval_args.prompts, "Prompt file (JSONL)")
      ->required();
  eval->add_option("--descriptions", eval_args.descriptions,
                   "Descriptions file (JSONL with id + description)");
  eval->add_option("--images", eval_args.images,
                   "Directory with {id}.png images");
  eval->add_option("--manifest", eval_args.manifest,
                   "JSON map of sample id to image path");
  eval->add_option("--backend", eval_args.backend,
                   "VLM backend: stub | replay | live");
  eval->add_option("--stub-file", eval_args.stub_file,
                   "Stub script JSON {id: description}");
  eval->add_option("--cassette-dir", eval_args.cassette_dir,
                   "Cassette directory (replay source / record target)");
  eval->add_flag("--record", eval_args.record,
                 "Record live responses as cassettes");
  eval->add_option("--out-dir", eval_args.out_dir, "Report directory");
  eval->add_option("--synonyms", eval_args.synonyms_file,
                   "JSON map of surface name to canonical name");
  eval->add_option("--missing-penalty", eval_args.missing_penalty,
                   "Distance charged for missing objects (default 10)");
  eval->add_option("--workers", eval_args.workers, "Worker threads");
  eval->add_option("--endpoint", eval_args.endpoint,
                   "Chat-completions URL for the live backend");
  eval->add_option("--api-key-env", eval_args.api_key_env,
                   "Environment variable holding the API key");
  eval->add_option("--model", eval_args.model_id, "Model identifier");
  eval->add_option("--timeout", eval_args.timeout_s, "Request timeout (s)");
  eval->add_option("--max-retries", eval_args.max_retries,
                   "Re-prompts after unparseable answers");
  eval->add_option("--vlm-parallelism", eval_args.vlm_parallelism,
                   "Max concurrent VLM requests");

  GuideArgs guide_args;
  spateval_guidance_config_init(&guide_args.cfg);
  auto* guide = app.add_subcommand(
      "guide", "Run the attention-guidance demo and emit the loss trace");
  guide->add_option("--scenario", guide_args.scenario,
                    "Built-in scenario: standard | single");
  guide->add_option("--out", guide_args.out_path,
                    "Trace CSV path (default: stdout)");
  guide->add_option("--momentum", guide_args.cfg.momentum, "Momentum m");
  guide->add_option("--eta", guide_args.cfg.learning_rate, "Learning rate");
  guide->add_option("--max-iters", guide_args.cfg.max_iters, "Iteration cap");
  guide->add_option("--threshold", guide_args.cfg.loss_threshold,
                    "Stop once total loss drops below this");
  guide->add_option("--alpha", guide_args.cfg.alpha, "UNet loss weight");
  guide->add_option("--beta", guide_args.cfg.beta, "ControlNet loss weight");

  std::vector<std::string> report_csvs;
  std::string report_out;
  auto* report = app.add_subcommand(
      "report", "Re-aggregate existing per-sample score CSVs");
  report->add_option("csvs", report_csvs, "Score CSV files")->required();
  report->add_option("--out", report_out, "Merged CSV path (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  if (gen->parsed()) return run_gen_prompts(gen_args);
  if (parse->parsed()) return run_parse(parse_text);
  if (eval->parsed()) return run_eval(eval_args);
  if (guide->parsed()) return run_guide(guide_args);
  if (report->parsed()) return run_report(report_csvs, report_out);
  return kExitConfig;
}
