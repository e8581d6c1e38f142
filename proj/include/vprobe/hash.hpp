// Copyright (c) 2026, vprobe contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace vprobe {

std::uint64_t fnv1a64(std::string_view bytes);
std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes);
std::string hex64(std::uint64_t v);

std::uint32_t crc32(std::span<const std::uint8_t> bytes);

}  // namespace vprobe
