// Copyright (c) 2026, vprobe contributors
// SPDX-License-Identifier: Apache-2.0
//
// A small seeded decoder-only transformer used as a reference runtime, and a
// generator of sparse superposition data with a known feature dictionary.
//
// Block layout (pre-norm):
//   x += Attn(LN1(x))
//   m  = MLP(LN2(x))        <- capture / steering / planted signal act on m
//   x += m
// logits = LN_f(x) E^T (weight-tied), plus any planted readouts on the
// final residual stream.

#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vprobe/dataset.hpp"
#include "vprobe/probe_engine.hpp"
#include "vprobe/runtime.hpp"
#include "vprobe/types.hpp"

namespace vprobe::toy {

struct ToyTransformerConfig {
  int vocab_size = 256;
  int d_model = 64;
  int n_layers = 6;
  int n_heads = 4;
  int d_ff = 256;
  std::uint64_t seed = 0;
  int max_seq_len = 64;
  double init_std = 0.02;

  void validate() const;
  json to_json() const;
  static ToyTransformerConfig from_json(const json& j);
  static ToyTransformerConfig from_json(const json& j, ToyTransformerConfig defaults);
};

// x + alpha * (k0 / ||w||) * w. alpha == 0 returns x untouched.
std::vector<float> apply_steering(std::span<const float> x, std::span<const float> w,
                                  double alpha, double k0);
void apply_steering_inplace(std::span<float> x, std::span<const float> w, double alpha,
                            double k0);

// Label (0..6) of token `pos` in `tokens`.
using TokenLabeler = std::function<int(std::span<const std::int32_t> tokens, std::size_t pos)>;

// Pseudo-random label per (token id, position); carries no information a
// linear readout of earlier layers could recover.
TokenLabeler hashed_labeler(std::uint64_t seed);

struct PlantedSignal {
  int layer = 0;
  std::vector<float> direction;  // unit norm
  TokenLabeler labeler;
  float scale = 1.0f;
};

struct PlantedReadout {
  std::vector<float> direction;  // unit norm
  std::int32_t token_id = 0;
  float gain = 1.0f;
};

struct Capture {
  std::vector<ActivationTensor> activations;
  std::optional<Matrix> logits;
};

class ToyTransformer {
 public:
  explicit ToyTransformer(const ToyTransformerConfig& config);

  const ToyTransformerConfig& config() const noexcept { return config_; }
  std::string model_id() const;
  // FNV-1a over every parameter's bytes, in declaration order.
  std::uint64_t parameter_checksum() const;
  json metadata() const;

  Capture forward_with_hooks(std::span<const std::int32_t> tokens,
                             const CaptureRequest& request) const;

  // Copies share parameters; plants are per-handle.
  ToyTransformer with_signal(PlantedSignal signal) const;
  ToyTransformer with_readout(PlantedReadout readout) const;

 private:
  struct Params;
  ToyTransformerConfig config_;
  std::shared_ptr<const Params> params_;
  std::uint64_t checksum_ = 0;
  std::vector<PlantedSignal> signals_;
  std::vector<PlantedReadout> readouts_;
};

inline ToyTransformer init_model(const ToyTransformerConfig& config) {
  return ToyTransformer(config);
}

// Adds scale * label(t) * direction to the layer's MLP output during forward.
ToyTransformer plant_signal(const ToyTransformer& model, int layer,
                            std::span<const float> direction, TokenLabeler labeler,
                            float scale = 1.0f);

// Adds gain * <direction, x_final(t)> to the logit of token_id.
ToyTransformer plant_readout(const ToyTransformer& model, std::span<const float> direction,
                             std::int32_t token_id, float gain);

RuntimeDescriptor toy_descriptor(const ToyTransformer& model,
                                 std::set<std::string> capabilities = {kCapCapture, kCapSteer,
                                                                       kCapLogits});

class ToyRuntime : public Runtime {
 public:
  explicit ToyRuntime(ToyTransformer model,
                      std::set<std::string> capabilities = {kCapCapture, kCapSteer, kCapLogits});

  const RuntimeDescriptor& descriptor() const override { return desc_; }
  ForwardResult forward(std::span<const std::int32_t> tokens,
                        const CaptureRequest& request) override;
  const ToyTransformer& model() const noexcept { return model_; }

 private:
  ToyTransformer model_;
  RuntimeDescriptor desc_;
};

// Whitespace word tokenizer with hashed ids. The answer-option words get
// fixed ids so prompt tasks can address them.
class ToyTokenizer {
 public:
  static constexpr std::int32_t kBos = 0;
  static constexpr std::int32_t kEos = 1;
  static constexpr std::int32_t kFirstFree = 7;

  explicit ToyTokenizer(int vocab_size);

  std::string id() const;
  std::int32_t token_id(std::string_view word) const;
  std::vector<data::TokenSurface> encode(std::string_view text, bool add_bos = false) const;
  std::vector<std::int32_t> encode_ids(std::string_view text) const;

 private:
  int vocab_size_;
};

// ---- superposition data ----------------------------------------------------

struct SuperpositionConfig {
  int d = 64;
  int n_features = 8;
  double sparsity = 2.0;  // expected active features per token
  double coherence_bound = 0.3;
  std::uint64_t seed = 0;
  int max_retries = 10000;
  double max_coefficient = 6.0;
  int seq_len = 16;

  void validate() const;
};

struct SuperpositionData {
  Matrix dictionary;               // n_features x d, unit rows
  Matrix coefficients;             // n_tokens x n_features
  std::vector<probe::LabeledActivations> sequences;
};

// n_features x d unit vectors with pairwise |cos| <= coherence_bound.
Matrix generate_dictionary(const SuperpositionConfig& config);

double max_coherence(const Matrix& dictionary);

struct SuperpositionDraw {
  std::size_t n_tokens = 0;
  std::size_t target_feature = 0;
  // When set, this feature is active on every token with a coefficient drawn
  // from [max/2, max].
  std::optional<std::size_t> dominant_feature;
  std::string value;
  std::uint64_t stream = 0;
};

SuperpositionData generate_superposition_dataset(const SuperpositionConfig& config,
                                                 const Matrix& dictionary,
                                                 const SuperpositionDraw& draw);

SuperpositionData generate_superposition_dataset(const SuperpositionConfig& config,
                                                 std::size_t n_tokens,
                                                 std::size_t target_feature);

int quantize_score(double coefficient);

}  // namespace vprobe::toy
