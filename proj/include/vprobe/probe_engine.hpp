// Copyright (c) 2026, vprobe contributors
// SPDX-License-Identifier: Apache-2.0
//
// Token-level linear value probes, ReLU(<w, x> + b), fit by Adam on
//   mean_t (y(t) - ReLU(<w, x(t)> + b))^2 + lambda * ||w||_1
// with the L1 term entering as a subgradient.

#pragma once

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "vprobe/types.hpp"

namespace vprobe::probe {

// Row-aligned training pairs pooled across sequences.
struct TrainBatch {
  Matrix activations;  // B x d
  std::vector<float> targets;
  std::vector<std::size_t> sample_ids;

  std::size_t size() const noexcept { return targets.size(); }
  void validate() const;
};

struct LabeledActivations {
  ActivationTensor activations;
  ScoredSequence sequence;
};

TrainBatch assemble_batch(std::span<const LabeledActivations> data, bool exclude_special);

struct TrainReport {
  double final_loss = 0.0;
  std::vector<double> loss_curve;  // full objective after each epoch
  double l1_mass = 0.0;
  double wall_time = 0.0;
  std::vector<std::string> warnings;

  json to_json() const;
};

struct ProbeFit {
  LinearProbe probe;
  TrainReport report;
};

// Objective and gradient of the smooth (squared-error) part, in double.
struct SmoothLoss {
  double loss = 0.0;
  std::vector<double> grad_w;
  double grad_b = 0.0;
};

SmoothLoss smooth_loss(std::span<const double> w, double b, const Matrix& x,
                       std::span<const float> y);
double objective(std::span<const double> w, double b, const Matrix& x, std::span<const float> y,
                 double l1);

ProbeFit train_on_batch(const TrainBatch& batch, const std::string& value, int layer,
                        const ProbeTrainConfig& config);

ProbeFit train_probe(std::span<const LabeledActivations> data, const ProbeTrainConfig& config);

// data_by_layer[l] holds layer-l activations for every training sequence.
std::vector<ProbeFit> train_probe_stack(
    std::span<const std::vector<LabeledActivations>> data_by_layer,
    const ProbeTrainConfig& config);

// y(t) = max(0, <w, x(t)> + b), accumulated in double.
std::vector<double> predict_token_scores(const LinearProbe& probe,
                                         const ActivationTensor& activations);

std::vector<double> predict_rows(const LinearProbe& probe, const Matrix& x);

double aggregate_sequence_score(std::span<const double> token_scores);
// Mean over tokens with keep[t] set.
double aggregate_sequence_score(std::span<const double> token_scores,
                                const std::vector<bool>& keep);

}  // namespace vprobe::probe
