// Copyright (c) 2026, vprobe contributors
// SPDX-License-Identifier: Apache-2.0

#include "vprobe/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

namespace vprobe::data {
namespace {

bool is_space(unsigned char c) { return std::isspace(c) != 0; }

std::string normalize_whitespace(std::string_view s) {
  std::string out;
  bool pending = false;
  for (unsigned char c : s) {
    if (is_space(c)) {
      pending = !out.empty();
      continue;
    }
    if (pending) out.push_back(' ');
    pending = false;
    out.push_back(static_cast<char>(c));
  }
  return out;
}

bool is_punctuation_only(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](unsigned char c) {
    return std::ispunct(c) != 0;
  });
}

}  // namespace

void WordScoredText::validate() const {
  std::string joined;
  for (std::size_t i = 0; i < words.size(); ++i) {
    const auto& w = words[i];
    require(!w.surface.empty(), ErrorCode::kInvariant, "word " + std::to_string(i) + " is empty");
    require(std::none_of(w.surface.begin(), w.surface.end(),
                         [](unsigned char c) { return is_space(c); }),
            ErrorCode::kInvariant, "word " + std::to_string(i) + " contains whitespace");
    require(w.score >= kMinScore && w.score <= kMaxScore, ErrorCode::kInvariant,
            "word " + std::to_string(i) + " score out of range: " + std::to_string(w.score));
    if (i) joined.push_back(' ');
    joined += w.surface;
  }
  require(joined == normalize_whitespace(raw_text), ErrorCode::kInvariant,
          "words do not reconstruct raw_text");
}

WordScoredText make_word_scored_text(std::string raw_text, std::vector<ScoredWord> words) {
  WordScoredText t{std::move(words), std::move(raw_text)};
  t.validate();
  return t;
}

WordScoredText word_scored_text_from_json(const json& j) {
  std::vector<ScoredWord> words;
  std::string raw;
  try {
    raw = j.at("raw_text").get<std::string>();
    for (const auto& w : j.at("words")) {
      require(w.is_array() && w.size() == 2, ErrorCode::kMalformed,
              "word entry must be [surface, score]");
      words.push_back({w[0].get<std::string>(), w[1].get<int>()});
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::kMalformed, std::string("bad word-scored record: ") + e.what());
  }
  return make_word_scored_text(std::move(raw), std::move(words));
}

std::string strip_marker(std::string_view surface, const AlignOptions& opts) {
  for (const auto& m : opts.leading_markers) {
    if (!m.empty() && surface.starts_with(m)) {
      surface.remove_prefix(m.size());
      break;
    }
  }
  while (!surface.empty() && is_space(static_cast<unsigned char>(surface.front())))
    surface.remove_prefix(1);
  while (!surface.empty() && is_space(static_cast<unsigned char>(surface.back())))
    surface.remove_suffix(1);
  return std::string(surface);
}

AlignedText align_words(const WordScoredText& text, std::span<const TokenSurface> tokens,
                        const AlignOptions& opts) {
  text.validate();
  AlignedText out;
  out.tokens.reserve(tokens.size());
  out.alignment.mapping.assign(text.words.size(), {0, 0});

  std::size_t wi = 0;
  std::size_t off = 0;
  for (std::size_t ti = 0; ti < tokens.size(); ++ti) {
    const auto& tok = tokens[ti];
    ScoredToken st{tok.text, tok.id, 0, tok.special};
    const bool special =
        tok.special || std::find(opts.special_surfaces.begin(), opts.special_surfaces.end(),
                                 tok.text) != opts.special_surfaces.end();
    if (special) {
      require(off == 0, ErrorCode::kAlignment,
              "special token inside word " + std::to_string(wi));
      st.special = true;
      out.tokens.push_back(std::move(st));
      continue;
    }
    const std::string s = strip_marker(tok.text, opts);
    if (s.empty()) {
      require(off == 0, ErrorCode::kAlignment,
              "whitespace token inside word " + std::to_string(wi));
      out.tokens.push_back(std::move(st));
      continue;
    }

    if (wi < text.words.size()) {
      const std::string_view rest = std::string_view(text.words[wi].surface).substr(off);
      if (rest.starts_with(s)) {
        if (off == 0) out.alignment.mapping[wi].first = ti;
        out.alignment.mapping[wi].second = ti + 1;
        st.score = text.words[wi].score;
        off += s.size();
        if (off == text.words[wi].surface.size()) {
          ++wi;
          off = 0;
        }
        out.tokens.push_back(std::move(st));
        continue;
      }
      if (off > 0 || s.starts_with(rest)) {
        fail(ErrorCode::kAlignment,
             "token " + std::to_string(ti) + " '" + tok.text +
                 "' crosses or breaks the boundary of word " + std::to_string(wi) + " '" +
                 text.words[wi].surface + "'");
      }
    }
    require(is_punctuation_only(s), ErrorCode::kAlignment,
            "token " + std::to_string(ti) + " '" + tok.text + "' matches no word (next word " +
                std::to_string(wi) + ")");
    out.tokens.push_back(std::move(st));
  }
  require(wi == text.words.size(), ErrorCode::kAlignment,
          "word " + std::to_string(wi) + " is not covered by any token");
  return out;
}

ScoredSequence align_word_scores(const WordScoredText& text, std::span<const TokenSurface> tokens,
                                 const SequenceMeta& meta, const AlignOptions& opts) {
  ScoredSequence seq;
  seq.tokens = align_words(text, tokens, opts).tokens;
  seq.value = meta.value;
  seq.regime = meta.regime;
  seq.source = meta.source;
  seq.tokenizer_id = meta.tokenizer_id;
  seq.validate();
  return seq;
}

std::size_t train_count(std::size_t n, double train_fraction) {
  require(train_fraction > 0.0 && train_fraction < 1.0, ErrorCode::kInvalidArgument,
          "train_fraction must lie in (0, 1)");
  // The epsilon absorbs representation error in products like 100 * 0.29.
  return static_cast<std::size_t>(std::floor(static_cast<double>(n) * train_fraction + 1e-9));
}

SplitResult split_dataset(std::vector<ScoredSequence> sequences, double train_fraction) {
  require(!sequences.empty(), ErrorCode::kEmpty, "cannot split an empty corpus");
  const std::size_t n_train = train_count(sequences.size(), train_fraction);
  SplitResult out;
  out.train.reserve(n_train);
  out.validation.reserve(sequences.size() - n_train);
  for (std::size_t i = 0; i < sequences.size(); ++i) {
    auto& s = sequences[i];
    if (i < n_train) {
      s.split = Split::kTrain;
      out.train.push_back(std::move(s));
    } else {
      s.split = Split::kValidation;
      out.validation.push_back(std::move(s));
    }
  }
  return out;
}

json CorpusReport::to_json() const {
  json errs = json::array();
  for (const auto& e : errors) errs.push_back({{"line", e.line}, {"error", e.message}});
  return json{{"valid", valid}, {"errors", errs}, {"cross_tokenizer", cross_tokenizer}};
}

CorpusReport validate_corpus_text(std::string_view text) {
  CorpusReport report;
  std::optional<std::string> tokenizer;
  std::size_t lineno = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t nl = text.find('\n', pos);
    const std::string_view line =
        text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    try {
      const auto seq = sequence_from_json(json::parse(line));
      if (!tokenizer) tokenizer = seq.tokenizer_id;
      if (seq.tokenizer_id != *tokenizer) {
        report.cross_tokenizer = true;
        report.errors.push_back({lineno, "cross-tokenizer corpus: tokenizer_id '" +
                                             seq.tokenizer_id + "' differs from '" + *tokenizer +
                                             "'"});
        continue;
      }
      ++report.valid;
    } catch (const json::exception& e) {
      report.errors.push_back({lineno, std::string("invalid JSON: ") + e.what()});
    } catch (const Error& e) {
      report.errors.push_back({lineno, e.what()});
    }
  }
  return report;
}

CorpusReport validate_corpus(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in.good()) {
    CorpusReport r;
    r.errors.push_back({0, "cannot open " + path.string()});
    return r;
  }
  std::stringstream ss;
  ss << in.rdbuf();
  return validate_corpus_text(ss.str());
}

}  // namespace vprobe::data
