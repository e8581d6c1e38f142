// Copyright (c) 2026, vprobe contributors
// SPDX-License-Identifier: Apache-2.0
//
// Experiment harness: prompt tasks per regime, answer distributions, steering
// sweeps, and the report artifacts written by the CLI.

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vprobe/analysis.hpp"
#include "vprobe/runtime.hpp"
#include "vprobe/types.hpp"

namespace vprobe::harness {

inline constexpr double kDefaultTau = 2.0;
inline constexpr std::size_t kHistogramBins = 10;

std::vector<double> default_alpha_grid();  // -4, -3, ..., 4

using Encoder = std::function<std::vector<std::int32_t>(std::string_view)>;
using OptionTokenizer = std::function<std::int32_t(std::string_view)>;

struct RegimeTask {
  Regime regime = Regime::kAA;
  std::string prompt_template;  // holds {text}; may hold {value_item}
  std::vector<std::string> options;
  std::vector<std::int32_t> option_token_ids;
  std::size_t target_option = 0;

  const std::string& target() const { return options.at(target_option); }
  void validate() const;
};

std::string_view prompt_template(Regime r);
RegimeTask make_task(Regime r, const OptionTokenizer& option_token);

struct Prompt {
  std::vector<std::int32_t> tokens;
  TokenRange item_range;  // where the item's own tokens sit
};

Prompt build_prompt(const RegimeTask& task, const ScoredSequence& item,
                    const ValueDimension& value, const Encoder& encode);

enum class AnswerMode { kDeterministic, kSampling };

struct AnswerOptions {
  AnswerMode mode = AnswerMode::kDeterministic;
  std::size_t samples = 64;
  std::uint64_t seed = 0;
};

// Softmax over the option tokens' logits in `last_row`.
AnswerDistribution distribution_from_logits(std::span<const float> last_row,
                                            const RegimeTask& task, double alpha);

AnswerDistribution answer_distribution(Runtime& runtime, const RegimeTask& task,
                                       std::span<const std::int32_t> prompt,
                                       std::span<const SteeringSpec> steering, double alpha,
                                       const AnswerOptions& options = {});

// log(p / (1 - p)), clamped away from 0 and 1.
double relevance_logit(double p);

// Indices whose target-option logit lies within [-tau, tau].
std::vector<std::size_t> filter_polarized(std::span<const AnswerDistribution> baseline,
                                          std::string_view target, double tau = kDefaultTau);

double spearman(std::span<const double> a, std::span<const double> b);

struct ItemFailure {
  std::string item;
  std::string message;
};

struct SweepOptions {
  std::vector<double> alphas = default_alpha_grid();
  double k0 = kDefaultK0;
  AnswerOptions answer;
  std::optional<int> layer;  // defaults to the probe's layer
};

struct SweepResult {
  std::string value;
  Regime regime = Regime::kAA;
  std::vector<double> alphas;
  double k0 = kDefaultK0;
  int layer = 0;
  std::string target;
  std::vector<std::string> items;
  std::vector<std::vector<double>> target_prob;  // [alpha][item]
  std::vector<double> mean_curve;                // mean over items per alpha
  std::vector<ItemFailure> failures;

  // counts[bin][alpha], bins of width 1/kHistogramBins over [0, 1].
  std::vector<std::vector<std::size_t>> histogram() const;
  json to_json() const;
  static SweepResult from_json(const json& j);
};

std::string item_id(const ScoredSequence& seq, std::size_t index);

SweepResult steer_sweep(Runtime& runtime, const RegimeTask& task, const LinearProbe& probe,
                        std::span<const ScoredSequence> items, const ValueDimension& value,
                        const Encoder& encode, const SweepOptions& options = {});

enum class RunMode { kProbe, kSteer };
std::string_view to_string(RunMode m);
RunMode parse_run_mode(std::string_view s);

struct RegimeRunOptions {
  RunMode mode = RunMode::kProbe;
  SweepOptions sweep;
  double tau = kDefaultTau;
  Encoder encode;
  OptionTokenizer option_token;
  const ValueRegistry* registry = nullptr;  // builtin when null
};

struct RegimeReport {
  Regime regime = Regime::kAA;
  RunMode mode = RunMode::kProbe;
  std::string model_id;
  std::optional<CrossValMatrix> matrix;
  std::optional<analysis::DominanceReport> column_dominance;
  std::optional<analysis::DominanceReport> row_dominance;
  std::vector<double> gaps;
  std::vector<SweepResult> sweeps;
  std::map<std::string, std::size_t> retained;  // items kept by the polarization filter
  std::map<std::string, std::string> errors;    // per value
  std::vector<std::string> notes;

  bool partial() const;
  json to_json() const;
  static RegimeReport from_json(const json& j);
};

RegimeReport run_regime(Regime regime,
                        const std::map<std::string, std::vector<ScoredSequence>>& corpora,
                        std::span<const LinearProbe> probes, Runtime& runtime,
                        const RegimeRunOptions& options);

// Writes results.json, manifest.json, failures.json and the matrix or sweep
// artifacts under `out_dir`. Returns the written paths (relative, sorted).
std::vector<std::string> emit_report(const RegimeReport& report, const json& manifest,
                                     const std::filesystem::path& out_dir);

}  // namespace vprobe::harness
