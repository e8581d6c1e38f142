// Copyright (c) 2026, vprobe contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <vector>

#include "vprobe/types.hpp"

namespace vprobe {

// Corpus JSONL, one ScoredSequence per line.
std::vector<ScoredSequence> read_corpus(const std::filesystem::path& path);
void write_corpus(const std::filesystem::path& path, std::span<const ScoredSequence> seqs);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_text(const std::filesystem::path& path, std::string_view text);

}  // namespace vprobe
