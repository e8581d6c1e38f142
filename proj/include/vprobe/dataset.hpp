// Copyright (c) 2026, vprobe contributors
// SPDX-License-Identifier: Apache-2.0
//
// Corpus ingestion: word-level relevance scores mapped onto sub-word tokens,
// index-ordered train/validation splitting and corpus file validation.

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "vprobe/types.hpp"

namespace vprobe::data {

struct ScoredWord {
  std::string surface;
  int score = 0;
};

struct WordScoredText {
  std::vector<ScoredWord> words;
  std::string raw_text;

  // Checks scores and that the words rebuild raw_text modulo whitespace.
  void validate() const;
};

WordScoredText make_word_scored_text(std::string raw_text, std::vector<ScoredWord> words);
WordScoredText word_scored_text_from_json(const json& j);

struct TokenSurface {
  std::string text;
  std::int32_t id = 0;
  bool special = false;
};

struct AlignOptions {
  // Leading markers removed from token surfaces before matching.
  std::vector<std::string> leading_markers{"\xE2\x96\x81", "\xC4\xA0", "_", " "};
  // Surfaces always treated as tokenizer artifacts.
  std::vector<std::string> special_surfaces{"<s>", "</s>", "<bos>", "<eos>", "<pad>",
                                            "<|begin_of_text|>", "<|endoftext|>",
                                            "<|end_of_text|>", "<|im_start|>", "<|im_end|>"};
};

struct TokenAlignment {
  // mapping[w] = [first, last) token indices covered by word w.
  std::vector<std::pair<std::size_t, std::size_t>> mapping;
};

struct AlignedText {
  std::vector<ScoredToken> tokens;
  TokenAlignment alignment;
};

std::string strip_marker(std::string_view surface, const AlignOptions& opts);

// Greedy left-to-right match of marker-stripped token surfaces against word
// characters. Sub-tokens of a word inherit the full word score; tokens that
// match no word (tokenizer-inserted punctuation, specials) score 0.
AlignedText align_words(const WordScoredText& text, std::span<const TokenSurface> tokens,
                        const AlignOptions& opts = {});

struct SequenceMeta {
  std::string value;
  Regime regime = Regime::kAA;
  std::string source;
  std::string tokenizer_id;
};

ScoredSequence align_word_scores(const WordScoredText& text, std::span<const TokenSurface> tokens,
                                 const SequenceMeta& meta, const AlignOptions& opts = {});

struct SplitResult {
  std::vector<ScoredSequence> train;
  std::vector<ScoredSequence> validation;
};

// First floor(n * train_fraction) sequences are train; order is preserved.
SplitResult split_dataset(std::vector<ScoredSequence> sequences, double train_fraction);

std::size_t train_count(std::size_t n, double train_fraction);

struct LineError {
  std::size_t line = 0;
  std::string message;
};

struct CorpusReport {
  std::size_t valid = 0;
  std::vector<LineError> errors;
  bool cross_tokenizer = false;

  json to_json() const;
};

CorpusReport validate_corpus(const std::filesystem::path& path);
CorpusReport validate_corpus_text(std::string_view text);

}  // namespace vprobe::data
