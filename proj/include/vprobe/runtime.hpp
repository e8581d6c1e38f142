// Copyright (c) 2026, vprobe contributors
// SPDX-License-Identifier: Apache-2.0
//
// Uniform view of a model backend: the in-process toy transformer and any
// wire-protocol peer both implement Runtime.

#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "vprobe/types.hpp"

namespace vprobe {

inline constexpr const char* kCapCapture = "capture";
inline constexpr const char* kCapSteer = "steer";
inline constexpr const char* kCapLogits = "logits";
inline constexpr const char* kCapGenerate = "generate";

struct RuntimeDescriptor {
  std::string model_id;
  int n_layers = 0;
  int hidden_dim = 0;
  int vocab_size = 0;
  std::set<std::string> capabilities;

  bool has(const std::string& cap) const { return capabilities.count(cap) > 0; }
  void validate() const;
  json to_json() const;
  static RuntimeDescriptor from_json(const json& j);

  bool operator==(const RuntimeDescriptor&) const = default;
};

struct CaptureRequest {
  std::vector<int> layers;
  // Applied in order at their own layers. Several specs at one layer add up.
  std::vector<SteeringSpec> steering;
  bool want_logits = false;

  // Checks layer ranges, steering dimensions and token ranges.
  void validate(const RuntimeDescriptor& desc, std::size_t seq_len) const;
  // Throws kCapability when the descriptor lacks something this request needs.
  void check_capabilities(const RuntimeDescriptor& desc) const;
};

struct ForwardResult {
  std::vector<ActivationTensor> activations;  // in request layer order
  std::optional<Matrix> logits;               // T x vocab
};

class Runtime {
 public:
  virtual ~Runtime() = default;
  virtual const RuntimeDescriptor& descriptor() const = 0;
  virtual ForwardResult forward(std::span<const std::int32_t> tokens,
                                const CaptureRequest& request) = 0;
};

}  // namespace vprobe
