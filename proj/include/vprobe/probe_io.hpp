// Copyright (c) 2026, vprobe contributors
// SPDX-License-Identifier: Apache-2.0
//
// Probe file: one line of UTF-8 JSON (magic "VPROBE1", value, layer, bias, d,
// readout, weight_norm, train_config_digest, crc32) then d little-endian
// float32 weights.

#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "vprobe/types.hpp"

namespace vprobe {

inline constexpr const char* kProbeMagic = "VPROBE1";

std::vector<std::uint8_t> encode_probe(const LinearProbe& probe);
LinearProbe decode_probe(std::span<const std::uint8_t> bytes);

void save_probe(const LinearProbe& probe, const std::filesystem::path& path,
                bool overwrite = false);
LinearProbe load_probe(const std::filesystem::path& path);

}  // namespace vprobe
