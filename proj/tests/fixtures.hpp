// Copyright (c) 2026, vprobe contributors
// SPDX-License-Identifier: Apache-2.0
//
// Randomized test fixtures whose ground truth is known by construction.

#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "vprobe/dataset.hpp"
#include "vprobe/types.hpp"

namespace fixture {

// A word-scored text plus a tokenization of it. truth[t] is the word index
// token t was cut from, or -1 for specials and stray punctuation.
struct AlignmentCase {
  vprobe::data::WordScoredText text;
  std::vector<vprobe::data::TokenSurface> tokens;
  std::vector<int> truth;
};

inline AlignmentCase random_alignment_case(std::uint64_t seed) {
  std::mt19937_64 g(seed);
  auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(g); };
  const std::string letters = "abcdefghijklmnopqrstuvwxyzAB";
  const std::string tail = "abcdexyz0123.,'-";
  const std::string punct = ".,;:!?";
  const std::vector<std::string> markers{"", "\xE2\x96\x81", "\xC4\xA0", "_"};

  AlignmentCase c;
  std::vector<vprobe::data::ScoredWord> words;
  const int n_words = pick(1, 12);
  std::string raw;
  for (int w = 0; w < n_words; ++w) {
    std::string s(1, letters[static_cast<std::size_t>(pick(0, int(letters.size()) - 1))]);
    const int len = pick(0, 7);
    for (int k = 0; k < len; ++k) s += tail[static_cast<std::size_t>(pick(0, int(tail.size()) - 1))];
    words.push_back({s, pick(0, 6)});
    raw += (w ? std::string(pick(1, 2), ' ') : std::string()) + s;
  }
  c.text = vprobe::data::make_word_scored_text(raw, words);

  std::int32_t next_id = 10;
  auto push = [&](std::string text, bool special, int truth) {
    c.tokens.push_back({std::move(text), next_id++, special});
    c.truth.push_back(truth);
  };
  if (pick(0, 1)) push("<s>", true, -1);
  const std::string marker = markers[static_cast<std::size_t>(pick(0, int(markers.size()) - 1))];
  for (int w = 0; w < n_words; ++w) {
    if (pick(0, 5) == 0) push(std::string(1, punct[static_cast<std::size_t>(pick(0, 5))]), false, -1);
    const std::string& s = words[static_cast<std::size_t>(w)].surface;
    std::size_t pos = 0;
    bool first = true;
    while (pos < s.size()) {
      const std::size_t take = std::min<std::size_t>(s.size() - pos, static_cast<std::size_t>(pick(1, 4)));
      push((first ? marker : std::string()) + s.substr(pos, take), false, w);
      pos += take;
      first = false;
    }
  }
  if (pick(0, 1)) push("</s>", true, -1);
  return c;
}

// n sequences of random scored tokens for split/IO tests.
inline std::vector<vprobe::ScoredSequence> random_corpus(std::size_t n, std::uint64_t seed,
                                                         const std::string& value = "ben") {
  std::mt19937_64 g(seed);
  std::vector<vprobe::ScoredSequence> out;
  for (std::size_t i = 0; i < n; ++i) {
    vprobe::ScoredSequence s;
    s.value = value;
    s.source = "fixture-" + std::to_string(i);
    s.tokenizer_id = "fixture";
    const auto len = 1 + g() % 12;
    for (std::size_t t = 0; t < len; ++t)
      s.tokens.push_back({"w" + std::to_string(t), static_cast<std::int32_t>(g() % 200),
                          static_cast<int>(g() % 7), false});
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace fixture
