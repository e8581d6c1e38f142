// Copyright (c) 2026, vprobe contributors
// SPDX-License-Identifier: Apache-2.0

#include "vprobe/probe_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "vprobe/corpus_io.hpp"
#include "vprobe/hash.hpp"

namespace vprobe {
namespace {

static_assert(std::endian::native == std::endian::little,
              "float payload encoding assumes a little-endian host");

std::vector<std::uint8_t> weights_to_bytes(std::span<const float> w) {
  std::vector<std::uint8_t> out(w.size() * sizeof(float));
  if (!w.empty()) std::memcpy(out.data(), w.data(), out.size());
  return out;
}

}  // namespace

std::vector<std::uint8_t> encode_probe(const LinearProbe& probe) {
  probe.validate();
  auto payload = weights_to_bytes(probe.weight);
  json header{{"magic", kProbeMagic},
              {"value", probe.value},
              {"layer", probe.layer},
              {"bias", probe.bias},
              {"d", probe.weight.size()},
              {"readout", probe.readout},
              {"weight_norm", probe.weight_norm},
              {"train_config_digest", probe.train_config_digest},
              {"crc32", crc32(payload)}};
  const std::string line = header.dump() + "\n";
  std::vector<std::uint8_t> out(line.begin(), line.end());
  out.insert(out.end(), payload.begin(), payload.end());
  return out;
}

LinearProbe decode_probe(std::span<const std::uint8_t> bytes) {
  const auto nl = std::find(bytes.begin(), bytes.end(), std::uint8_t{'\n'});
  require(nl != bytes.end(), ErrorCode::kMalformed, "probe header is not newline-terminated");
  const std::string head(bytes.begin(), nl);
  const auto payload = bytes.subspan(static_cast<std::size_t>(nl - bytes.begin()) + 1);

  json header;
  try {
    header = json::parse(head);
  } catch (const json::exception& e) {
    fail(ErrorCode::kMalformed, std::string("probe header is not JSON: ") + e.what());
  }

  LinearProbe probe;
  std::size_t d = 0;
  std::uint32_t expected_crc = 0;
  try {
    require(header.at("magic").get<std::string>() == kProbeMagic, ErrorCode::kMalformed,
            "bad probe magic");
    probe.value = header.at("value").get<std::string>();
    probe.layer = header.at("layer").get<int>();
    probe.bias = header.at("bias").get<float>();
    d = header.at("d").get<std::size_t>();
    probe.readout = header.at("readout").get<std::string>();
    probe.weight_norm = header.at("weight_norm").get<double>();
    probe.train_config_digest = header.at("train_config_digest").get<std::string>();
    expected_crc = header.at("crc32").get<std::uint32_t>();
  } catch (const json::exception& e) {
    fail(ErrorCode::kMalformed, std::string("probe header field: ") + e.what());
  }
  require(probe.readout == kReadoutRelu, ErrorCode::kUnsupported,
          "unsupported readout: " + probe.readout);

  const std::size_t want = d * sizeof(float);
  require(payload.size() >= want, ErrorCode::kChecksum,
          "probe payload truncated: expected " + std::to_string(want) + " bytes, got " +
              std::to_string(payload.size()));
  require(payload.size() == want, ErrorCode::kDimensionMismatch,
          "probe payload holds " + std::to_string(payload.size()) + " bytes but d=" +
              std::to_string(d));
  require(crc32(payload) == expected_crc, ErrorCode::kChecksum, "probe payload crc32 mismatch");

  probe.weight.resize(d);
  if (d) std::memcpy(probe.weight.data(), payload.data(), want);
  probe.validate();
  return probe;
}

void save_probe(const LinearProbe& probe, const std::filesystem::path& path, bool overwrite) {
  const auto bytes = encode_probe(probe);
  require(overwrite || !std::filesystem::exists(path), ErrorCode::kIo,
          "refusing to overwrite " + path.string());
  write_file(path, bytes);
}

LinearProbe load_probe(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  try {
    return decode_probe(bytes);
  } catch (const Error& e) {
    fail(e.code(), path.string() + ": " + e.what());
  }
}

}  // namespace vprobe
