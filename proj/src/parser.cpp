#include "spateval/parser.hpp"

#include <algorithm>
#include <cctype>
#include <unordered_map>
#include <unordered_set>

#include "spateval/error.hpp"

namespace spateval {

namespace {

bool is_article(std::string_view w) { return w == "a" || w == "an" || w == "the"; }
bool is_copula(std::string_view w) { return w == "is" || w == "are"; }

std::string ascii_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out)
    c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

struct Token {
  std::string lower;
  std::size_t offset;  // byte offset into the original text
  std::size_t length;
  bool separator;      // ',' '.' ';' '!' '?'
};

bool is_separator_char(char c) {
  return c == ',' || c == '.' || c == ';' || c == '!' || c == '?';
}

// Word characters: alnum, hyphen, apostrophe, and any non-ASCII byte.
bool is_word_char(char c) {
  const auto u = static_cast<unsigned char>(c);
  return u >= 0x80 || std::isalnum(u) || c == '-' || c == '\'';
}

std::vector<Token> tokenize(std::string_view text) {
  std::vector<Token> tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    const char c = text[i];
    if (is_separator_char(c)) {
      tokens.push_back({std::string(1, c), i, 1, true});
      ++i;
    } else if (is_word_char(c)) {
      const std::size_t start = i;
      while (i < text.size() && is_word_char(text[i])) ++i;
      tokens.push_back(
          {ascii_lower(text.substr(start, i - start)), start, i - start, false});
    } else {
      ++i;  // whitespace and stray punctuation
    }
  }
  return tokens;
}

struct RelationMatch {
  Relation rel;
  std::size_t begin;  // token index of the first relation word
  std::size_t length; // matched word count
};

// Longest complete lexicon match starting at `pos`. If the longest *partial*
// prefix of a multi-word phrase beats every complete match, the clause starts
// a relation phrase it cannot finish: MalformedClause.
std::optional<RelationMatch> match_relation(const std::vector<Token>& toks,
                                            std::size_t pos, std::size_t end) {
  std::optional<RelationMatch> best;
  std::size_t best_len = 0;
  std::size_t longest_partial = 0;
  for (const auto& entry : relation_lexicon()) {
    const std::size_t n = entry.words.size();
    std::size_t matched = 0;
    while (matched < n && pos + matched < end &&
           toks[pos + matched].lower == entry.words[matched])
      ++matched;
    if (matched == n) {
      if (!best || n > best_len) {
        best = RelationMatch{entry.rel, pos, n};
        best_len = n;
      }
    } else if (matched > 0 && n > 1) {
      longest_partial = std::max(longest_partial, matched);
    }
  }
  if (longest_partial > best_len) {
    throw Error::at_offset(
        ErrorCode::MalformedClause,
        "incomplete relation phrase starting at '" + toks[pos].lower + "'",
        toks[pos].offset);
  }
  return best;
}

std::string raw_slice(std::string_view text, const std::vector<Token>& toks,
                      std::size_t first, std::size_t last) {
  const std::size_t begin = toks[first].offset;
  const std::size_t end = toks[last].offset + toks[last].length;
  return std::string(text.substr(begin, end - begin));
}

// A trailing PP starts at "in"/"at"/"on" followed by an article; everything
// from there to the clause end is scene background, not part of the object.
bool starts_trailing_pp(const std::vector<Token>& toks, std::size_t i,
                        std::size_t end) {
  if (i + 1 >= end) return false;
  const auto& w = toks[i].lower;
  return (w == "in" || w == "at" || w == "on") && is_article(toks[i + 1].lower);
}

ObjectName object_from_tokens(std::string_view text,
                              const std::vector<Token>& toks, std::size_t first,
                              std::size_t last, std::size_t error_offset) {
  try {
    return normalize_object(raw_slice(text, toks, first, last));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::EmptyObject)
      throw Error::at_offset(ErrorCode::MalformedClause,
                             "clause has no object noun", error_offset);
    throw;
  }
}

std::optional<SpatialTriple> parse_clause(std::string_view text,
                                          const std::vector<Token>& toks,
                                          std::size_t begin, std::size_t end) {
  std::size_t copula = end;
  for (std::size_t i = begin; i < end; ++i) {
    if (is_copula(toks[i].lower)) {
      copula = i;
      break;
    }
  }
  if (copula == end || copula + 1 >= end) return std::nullopt;

  const auto rel = match_relation(toks, copula + 1, end);
  if (!rel) return std::nullopt;
  const std::size_t rel_offset = toks[rel->begin].offset;

  if (copula == begin)
    throw Error::at_offset(ErrorCode::MalformedClause,
                           "relation clause has no subject", rel_offset);

  // Reference NP: words after the relation phrase, minus a trailing PP.
  std::size_t ref_begin = rel->begin + rel->length;
  std::size_t ref_end = ref_begin;
  while (ref_end < end && !starts_trailing_pp(toks, ref_end, end)) ++ref_end;
  if (ref_begin == ref_end)
    throw Error::at_offset(ErrorCode::MalformedClause,
                           "relation phrase has no reference object",
                           rel_offset);

  ObjectName subject =
      object_from_tokens(text, toks, begin, copula - 1, toks[begin].offset);
  ObjectName reference =
      object_from_tokens(text, toks, ref_begin, ref_end - 1, rel_offset);
  if (subject.name == reference.name)
    throw Error::at_offset(ErrorCode::MalformedClause,
                           "subject and reference are the same object",
                           rel_offset);
  return SpatialTriple{std::move(subject), rel->rel, std::move(reference)};
}

}  // namespace

ObjectName normalize_object(std::string_view raw) {
  // Collect lowercase words, dropping leading articles until a noun appears.
  std::vector<std::string> words;
  std::string current;
  auto flush = [&] {
    if (current.empty()) return;
    if (!(words.empty() && is_article(current))) words.push_back(current);
    current.clear();
  };
  for (char c : raw) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      flush();
    } else {
      current += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
  }
  flush();
  if (words.empty())
    throw Error(ErrorCode::EmptyObject,
                "no object remains after normalizing '" + std::string(raw) + "'");

  ObjectName out;
  for (const auto& w : words) {
    if (!out.name.empty()) out.name += ' ';
    out.name += w;
  }
  std::string trimmed(raw);
  const auto first = trimmed.find_first_not_of(" \t\r\n");
  const auto last = trimmed.find_last_not_of(" \t\r\n");
  out.raw = trimmed.substr(first, last - first + 1);
  return out;
}

ParseResult parse_spatial_text(std::string_view text) {
  const auto toks = tokenize(text);

  ParseResult result;
  std::unordered_set<std::string> seen;
  auto add_object = [&](const ObjectName& o) {
    if (seen.insert(o.name).second) result.objects.push_back(o);
  };

  std::size_t clause_begin = 0;
  for (std::size_t i = 0; i <= toks.size(); ++i) {
    const bool boundary =
        i == toks.size() || toks[i].separator || toks[i].lower == "and";
    if (!boundary) continue;
    if (clause_begin < i) {
      if (auto triple = parse_clause(text, toks, clause_begin, i)) {
        add_object(triple->subject);
        add_object(triple->reference);
        result.triples.push_back(std::move(*triple));
      }
    }
    clause_begin = i + 1;
  }

  if (result.triples.empty())
    throw Error(ErrorCode::NoRelationFound,
                "no spatial relation clause found in text");
  return result;
}

ObjectName select_center(const std::vector<SpatialTriple>& triples) {
  if (triples.empty())
    throw Error(ErrorCode::InvalidArgument,
                "select_center requires at least one triple");

  std::unordered_map<std::string, int> in_degree;
  std::vector<ObjectName> reference_order;  // first mention as a reference
  for (const auto& t : triples) {
    if (in_degree.emplace(t.reference.name, 0).second)
      reference_order.push_back(t.reference);
    ++in_degree[t.reference.name];
  }

  const ObjectName* best = nullptr;
  int best_degree = -1;
  for (const auto& obj : reference_order) {
    const int d = in_degree[obj.name];
    if (d > best_degree) {
      best = &obj;
      best_degree = d;
    }
  }
  return *best;
}

}  // namespace spateval
