// Copyright (c) 2026, vprobe contributors
// SPDX-License-Identifier: Apache-2.0
//
// Domain types shared by every module. Values are plain aggregates; the
// validate()/make_*() helpers are where invariants live, and persistence
// re-runs them on load.

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "vprobe/error.hpp"
#include "vprobe/matrix.hpp"

namespace vprobe {

using json = nlohmann::json;

inline constexpr int kMinScore = 0;
inline constexpr int kMaxScore = 6;
inline constexpr std::string_view kCapturePoint = "mlp-output";
inline constexpr std::string_view kReadoutRelu = "relu";

struct ValueDimension {
  std::string id;
  std::string name;
  std::string abbreviation;

  bool operator==(const ValueDimension&) const = default;
};

class ValueRegistry {
 public:
  ValueRegistry() = default;
  explicit ValueRegistry(std::vector<ValueDimension> dims);

  // The ten value dimensions of the annotated corpora.
  static const ValueRegistry& builtin();

  void add(ValueDimension dim);
  const ValueDimension& at(std::string_view id) const;
  bool contains(std::string_view id) const;
  std::span<const ValueDimension> all() const noexcept { return dims_; }

 private:
  std::vector<ValueDimension> dims_;
};

struct ScoredToken {
  std::string text;
  std::int32_t token_id = 0;
  int score = 0;
  // Tokenizer artifact (BOS/EOS/padding); scored 0 and excluded from training.
  bool special = false;

  bool operator==(const ScoredToken&) const = default;
};

enum class Regime { kAA, kAC, kCC };
enum class Split { kTrain, kValidation };

std::string_view to_string(Regime r);
std::string_view to_string(Split s);
Regime parse_regime(std::string_view s);
Split parse_split(std::string_view s);

struct ScoredSequence {
  std::vector<ScoredToken> tokens;
  std::string value;
  Regime regime = Regime::kAA;
  Split split = Split::kTrain;
  std::string source;
  std::string tokenizer_id;

  std::size_t size() const noexcept { return tokens.size(); }
  std::vector<std::int32_t> token_ids() const;
  // Token indices that carry supervision (non-special).
  std::vector<std::size_t> scored_indices() const;
  void validate() const;

  bool operator==(const ScoredSequence&) const = default;
};

struct ActivationTensor {
  int layer = 0;
  Matrix data;  // T x d
  std::string model_id;

  std::size_t tokens() const noexcept { return data.rows(); }
  std::size_t dim() const noexcept { return data.cols(); }
};

struct LinearProbe {
  std::string value;
  int layer = 0;
  std::vector<float> weight;
  float bias = 0.0f;
  std::string readout{kReadoutRelu};
  double weight_norm = 0.0;
  std::string train_config_digest;

  std::size_t dim() const noexcept { return weight.size(); }
  // Throws kInvariant when the cached norm or readout is inconsistent.
  void validate() const;

  bool operator==(const LinearProbe&) const = default;
};

double euclidean_norm(std::span<const float> v);

LinearProbe make_probe(std::string value, int layer, std::vector<float> weight, float bias,
                       std::string train_config_digest = {});

struct ProbeTrainConfig {
  double learning_rate = 1e-4;
  std::size_t batch_size = 256;
  std::size_t epochs = 2500;
  double l1_coefficient = 1e-4;
  std::uint64_t seed = 0;
  std::string optimizer = "adam";
  bool exclude_special = true;

  void validate() const;
  // Stable hex digest of the canonical JSON form.
  std::string digest() const;

  bool operator==(const ProbeTrainConfig&) const = default;
};

// Half-open [begin, end) token interval, or every token when unset.
struct TokenRange {
  std::optional<std::pair<std::size_t, std::size_t>> span;

  static TokenRange all() { return {}; }
  static TokenRange between(std::size_t begin, std::size_t end) {
    return {std::make_pair(begin, end)};
  }
  bool is_all() const noexcept { return !span.has_value(); }
  bool contains(std::size_t t) const noexcept {
    return !span || (t >= span->first && t < span->second);
  }
  void validate(std::size_t seq_len) const;

  bool operator==(const TokenRange&) const = default;
};

inline constexpr double kDefaultK0 = 2e-2;

struct SteeringSpec {
  LinearProbe probe;
  double alpha = 0.0;
  double k0 = kDefaultK0;
  int layer = 0;
  TokenRange token_range;

  // k_p = k0 / ||w||
  double normalization() const { return k0 / probe.weight_norm; }
  void validate(int n_layers, std::size_t seq_len) const;
};

struct CrossValMatrix {
  std::vector<std::string> values;
  std::vector<double> cells;  // row-major V x V, rows = probes, cols = corpora

  std::size_t size() const noexcept { return values.size(); }
  double at(std::size_t probe, std::size_t corpus) const {
    return cells[probe * values.size() + corpus];
  }
  double& at(std::size_t probe, std::size_t corpus) {
    return cells[probe * values.size() + corpus];
  }
  void validate() const;

  bool operator==(const CrossValMatrix&) const = default;
};

CrossValMatrix make_cross_matrix(std::vector<std::string> values,
                                 const std::vector<std::vector<double>>& rows);

struct AnswerDistribution {
  std::vector<std::string> options;
  std::vector<double> probabilities;
  double alpha = 0.0;

  double probability_of(std::string_view option) const;
  void validate() const;
};

AnswerDistribution make_answer_distribution(std::vector<std::string> options,
                                            std::vector<double> probabilities, double alpha);

// JSON forms used by the corpus and report files.
json to_json(const ScoredSequence& seq);
ScoredSequence sequence_from_json(const json& j);
json to_json(const ProbeTrainConfig& cfg);
ProbeTrainConfig train_config_from_json(const json& j, ProbeTrainConfig defaults = {});
json to_json(const CrossValMatrix& m);
CrossValMatrix cross_matrix_from_json(const json& j);
json to_json(const AnswerDistribution& d);
AnswerDistribution answer_distribution_from_json(const json& j);

}  // namespace vprobe
