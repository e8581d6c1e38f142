// Copyright (c) 2026, vprobe contributors
// SPDX-License-Identifier: Apache-2.0

#include "vprobe/runtime.hpp"

namespace vprobe {

void RuntimeDescriptor::validate() const {
  require(!capabilities.empty(), ErrorCode::kInvariant, "runtime advertises no capabilities");
  require(hidden_dim > 0, ErrorCode::kInvariant, "hidden_dim must be positive");
  require(n_layers > 0, ErrorCode::kInvariant, "n_layers must be positive");
  for (const auto& c : capabilities)
    require(c == kCapCapture || c == kCapSteer || c == kCapLogits || c == kCapGenerate,
            ErrorCode::kInvariant, "unknown capability: " + c);
}

json RuntimeDescriptor::to_json() const {
  return json{{"model_id", model_id},     {"n_layers", n_layers},
              {"hidden_dim", hidden_dim}, {"vocab_size", vocab_size},
              {"capabilities", std::vector<std::string>(capabilities.begin(), capabilities.end())}};
}

RuntimeDescriptor RuntimeDescriptor::from_json(const json& j) {
  RuntimeDescriptor d;
  try {
    d.model_id = j.at("model_id").get<std::string>();
    d.n_layers = j.at("n_layers").get<int>();
    d.hidden_dim = j.at("hidden_dim").get<int>();
    d.vocab_size = j.at("vocab_size").get<int>();
    for (const auto& c : j.at("capabilities")) d.capabilities.insert(c.get<std::string>());
  } catch (const json::exception& e) {
    fail(ErrorCode::kMalformed, std::string("bad runtime descriptor: ") + e.what());
  }
  d.validate();
  return d;
}

void CaptureRequest::check_capabilities(const RuntimeDescriptor& desc) const {
  if (!layers.empty())
    require(desc.has(kCapCapture), ErrorCode::kCapability, "runtime cannot capture activations");
  if (!steering.empty())
    require(desc.has(kCapSteer), ErrorCode::kCapability, "runtime does not support steering");
  if (want_logits)
    require(desc.has(kCapLogits), ErrorCode::kCapability, "runtime does not expose logits");
}

void CaptureRequest::validate(const RuntimeDescriptor& desc, std::size_t seq_len) const {
  require(seq_len > 0, ErrorCode::kInvalidArgument, "forward over zero tokens");
  for (int l : layers)
    require(l >= 0 && l < desc.n_layers, ErrorCode::kOutOfRange,
            "capture layer " + std::to_string(l) + " outside [0, " +
                std::to_string(desc.n_layers) + ")");
  for (const auto& s : steering) {
    require(s.probe.dim() == static_cast<std::size_t>(desc.hidden_dim),
            ErrorCode::kDimensionMismatch,
            "steering direction has dimension " + std::to_string(s.probe.dim()) +
                ", runtime hidden_dim is " + std::to_string(desc.hidden_dim));
    s.validate(desc.n_layers, seq_len);
  }
}

}  // namespace vprobe
