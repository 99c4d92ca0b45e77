#include "spateval/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <unordered_set>

#include "spateval/error.hpp"
#include "spateval/rng.hpp"

namespace spateval {

namespace {

// Stream key for the partner-object draw. Fixed so that
// generate_combinations, which takes no seed, is fully deterministic.
constexpr std::uint64_t kPairingStreamSeed = 42;

bool starts_with_vowel(const std::string& w) {
  if (w.empty()) return false;
  switch (std::tolower(static_cast<unsigned char>(w[0]))) {
    case 'a': case 'e': case 'i': case 'o': case 'u': return true;
    default: return false;
  }
}

std::string article_for(const std::string& noun, bool capitalize) {
  std::string a = starts_with_vowel(noun) ? "an" : "a";
  if (capitalize) a[0] = static_cast<char>(std::toupper(a[0]));
  return a;
}

nlohmann::json triple_to_json(const SpatialTriple& t) {
  return {{"subject", t.subject.name},
          {"relation", std::string(relation_phrase(t.relation))},
          {"reference", t.reference.name}};
}

}  // namespace

const std::vector<std::string>& default_categories() {
  // The 80 COCO 2017 object categories.
  static const std::vector<std::string> categories = {
      "person", "bicycle", "car", "motorcycle", "airplane", "bus", "train",
      "truck", "boat", "traffic light", "fire hydrant", "stop sign",
      "parking meter", "bench", "bird", "cat", "dog", "horse", "sheep", "cow",
      "elephant", "bear", "zebra", "giraffe", "backpack", "umbrella",
      "handbag", "tie", "suitcase", "frisbee", "skis", "snowboard",
      "sports ball", "kite", "baseball bat", "baseball glove", "skateboard",
      "surfboard", "tennis racket", "bottle", "wine glass", "cup", "fork",
      "knife", "spoon", "bowl", "banana", "apple", "sandwich", "orange",
      "broccoli", "carrot", "hot dog", "pizza", "donut", "cake", "chair",
      "couch", "potted plant", "bed", "dining table", "toilet", "tv",
      "laptop", "mouse", "remote", "keyboard", "cell phone", "microwave",
      "oven", "toaster", "sink", "refrigerator", "book", "clock", "vase",
      "scissors", "teddy bear", "hair drier", "toothbrush"};
  return categories;
}

const std::vector<std::string>& default_backgrounds() {
  static const std::vector<std::string> backgrounds = {
      "park",   "library",   "kitchen", "beach",  "street",
      "garden", "classroom", "office",  "museum", "farm"};
  return backgrounds;
}

std::string slugify(std::string_view s) {
  std::string out;
  bool pending_dash = false;
  for (char c : s) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      if (pending_dash && !out.empty()) out += '-';
      pending_dash = false;
      out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    } else {
      pending_dash = true;
    }
  }
  return out;
}

std::string make_prompt_text(const std::string& obj1, Relation rel,
                             const std::string& obj2,
                             const std::string& background) {
  std::string text = article_for(obj1, true) + " " + obj1 + " is " +
                     std::string(relation_phrase(rel)) + " " +
                     article_for(obj2, false) + " " + obj2 + " in " +
                     article_for(background, false) + " " + background + ".";
  return text;
}

PromptSpec make_prompt_spec(std::string id, std::string text,
                            std::vector<ObjectName> objects,
                            std::vector<SpatialTriple> triples,
                            ObjectName center, std::string background) {
  PromptSpec spec;
  spec.id = std::move(id);
  spec.text = std::move(text);
  spec.objects = std::move(objects);
  spec.triples = std::move(triples);
  spec.center = std::move(center);
  spec.background = std::move(background);
  spec.relation_tag =
      spec.triples.empty() ? Relation::Front : spec.triples.front().relation;

  const auto parsed = parse_spatial_text(spec.text);
  if (!(parsed.objects == spec.objects && parsed.triples == spec.triples))
    throw Error(ErrorCode::Internal,
                "prompt text does not round-trip to its declared triples: '" +
                    spec.text + "'");

  spec.reference_sphere =
      build_sphere(build_graph(spec.objects, spec.triples), spec.center);
  return spec;
}

nlohmann::json PromptSpec::to_json() const {
  nlohmann::json obj_names = nlohmann::json::array();
  for (const auto& o : objects) obj_names.push_back(o.name);
  nlohmann::json trip = nlohmann::json::array();
  for (const auto& t : triples) trip.push_back(triple_to_json(t));
  return {{"id", id},           {"text", text},     {"objects", obj_names},
          {"triples", trip},    {"center", center.name},
          {"background", background}};
}

std::vector<PromptSpec> generate_combinations(
    const std::vector<std::string>& categories,
    const std::vector<Relation>& relations,
    const std::vector<std::string>& backgrounds) {
  if (categories.size() < 2)
    throw Error(ErrorCode::InvalidArgument,
                "need at least two object categories");
  if (relations.empty() || backgrounds.empty())
    throw Error(ErrorCode::InvalidArgument,
                "relations and backgrounds must be non-empty");

  // Category and background inputs may come from user files; normalize them
  // the same way the parser will so the round-trip invariant can hold.
  std::vector<std::string> cats;
  cats.reserve(categories.size());
  for (const auto& c : categories) cats.push_back(normalize_object(c).name);
  std::vector<std::string> bgs;
  bgs.reserve(backgrounds.size());
  for (const auto& b : backgrounds) bgs.push_back(normalize_object(b).name);
  {
    std::unordered_set<std::string> seen;
    for (const auto& c : cats)
      if (!seen.insert(c).second)
        throw Error(ErrorCode::DuplicateCategory,
                    "duplicate category '" + c + "'");
  }

  const std::size_t n = cats.size();
  std::vector<PromptSpec> specs;
  specs.reserve(n * relations.size() * backgrounds.size());

  for (std::size_t ci = 0; ci < n; ++ci) {
    for (std::size_t ri = 0; ri < relations.size(); ++ri) {
      for (std::size_t bi = 0; bi < backgrounds.size(); ++bi) {
        SplitMix64 stream(mix_seed(kPairingStreamSeed, ci, ri, bi));
        const std::size_t offset = 1 + stream.below(n - 1);
        const std::string& obj1 = cats[ci];
        const std::string& obj2 = cats[(ci + offset) % n];
        const Relation rel = relations[ri];
        const std::string& bg = bgs[bi];

        ObjectName subject = make_object(obj1);
        ObjectName reference = make_object(obj2);
        std::string id = slugify(obj1) + "-" + std::string(relation_slug(rel)) +
                         "-" + slugify(bg);
        specs.push_back(make_prompt_spec(
            std::move(id), make_prompt_text(obj1, rel, obj2, bg),
            {subject, reference}, {SpatialTriple{subject, rel, reference}},
            reference, bg));
      }
    }
  }

  std::sort(specs.begin(), specs.end(),
            [](const PromptSpec& a, const PromptSpec& b) { return a.id < b.id; });
  return specs;
}

std::vector<PromptSpec> sample_specs(const std::vector<PromptSpec>& specs,
                                     std::size_t n, std::uint64_t seed) {
  if (n > specs.size())
    throw Error(ErrorCode::SampleTooLarge,
                "sample size " + std::to_string(n) + " exceeds population " +
                    std::to_string(specs.size()));

  // Order by id first so the draw depends only on (ids, n, seed).
  std::vector<std::size_t> order(specs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return specs[a].id < specs[b].id;
  });

  SplitMix64 rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = i + rng.below(order.size() - i);
    std::swap(order[i], order[j]);
  }

  std::vector<PromptSpec> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(specs[order[i]]);
  std::sort(out.begin(), out.end(),
            [](const PromptSpec& a, const PromptSpec& b) { return a.id < b.id; });
  return out;
}

namespace {

PromptSpec spec_from_record(const nlohmann::json& record, int line) {
  if (!record.is_object())
    throw Error::at_line(ErrorCode::Schema, "record is not a JSON object", line);
  for (const char* field : {"id", "text", "center"})
    if (!record.contains(field) || !record[field].is_string())
      throw Error::at_line(ErrorCode::Schema,
                           std::string("missing string field '") + field + "'",
                           line);
  if (!record.contains("objects") || !record["objects"].is_array() ||
      !record.contains("triples") || !record["triples"].is_array())
    throw Error::at_line(ErrorCode::Schema,
                         "missing array field 'objects' or 'triples'", line);

  std::vector<ObjectName> objects;
  for (const auto& o : record["objects"]) {
    if (!o.is_string())
      throw Error::at_line(ErrorCode::Schema, "object entry is not a string",
                           line);
    objects.push_back(make_object(o.get<std::string>()));
  }

  std::vector<SpatialTriple> triples;
  for (const auto& t : record["triples"]) {
    if (!t.is_object() || !t.contains("subject") || !t.contains("relation") ||
        !t.contains("reference"))
      throw Error::at_line(ErrorCode::Schema,
                           "triple needs subject/relation/reference", line);
    const auto rel = relation_from_phrase(t["relation"].get<std::string>());
    if (!rel)
      throw Error::at_line(ErrorCode::Schema,
                           "unknown relation phrase '" +
                               t["relation"].get<std::string>() + "'",
                           line);
    triples.push_back(SpatialTriple{make_object(t["subject"].get<std::string>()),
                                    *rel,
                                    make_object(t["reference"].get<std::string>())});
  }

  const std::string center_name = record["center"].get<std::string>();
  ObjectName center = make_object(center_name);
  bool center_listed = false;
  for (const auto& o : objects) center_listed |= (o.name == center_name);
  if (!center_listed)
    throw Error::at_line(ErrorCode::Schema,
                         "center '" + center_name + "' not in objects", line);

  const std::string text = record["text"].get<std::string>();
  ParseResult parsed;
  try {
    parsed = parse_spatial_text(text);
  } catch (const Error& e) {
    throw Error::at_line(ErrorCode::TripleMismatch,
                         std::string("text does not parse: ") + e.what(), line);
  }
  if (!(parsed.triples == triples))
    throw Error::at_line(ErrorCode::TripleMismatch,
                         "declared triples disagree with parsed text", line);
  if (!(parsed.objects == objects))
    throw Error::at_line(ErrorCode::TripleMismatch,
                         "declared objects disagree with parsed text", line);

  PromptSpec spec;
  spec.id = record["id"].get<std::string>();
  spec.text = text;
  spec.objects = std::move(objects);
  spec.triples = std::move(triples);
  spec.center = std::move(center);
  spec.background = record.value("background", std::string());
  spec.relation_tag = spec.triples.front().relation;
  spec.reference_sphere =
      build_sphere(build_graph(spec.objects, spec.triples), spec.center);
  return spec;
}

}  // namespace

std::vector<PromptSpec> load_prompt_file(const std::string& path) {
  std::ifstream in(path);
  if (!in)
    throw Error(ErrorCode::Io, "cannot open prompt file '" + path + "'");

  std::vector<PromptSpec> specs;
  std::unordered_set<std::string> ids;
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
    PromptSpec spec = spec_from_record(record, line);
    if (!ids.insert(spec.id).second)
      throw Error::at_line(ErrorCode::Schema, "duplicate id '" + spec.id + "'",
                           line);
    specs.push_back(std::move(spec));
  }
  return specs;
}

void save_prompt_file(const std::vector<PromptSpec>& specs,
                      const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw Error(ErrorCode::Io, "cannot write prompt file '" + path + "'");
  for (const auto& spec : specs) out << spec.to_json().dump() << "\n";
  if (!out)
    throw Error(ErrorCode::Io, "error while writing '" + path + "'");
}

}  // namespace spateval
