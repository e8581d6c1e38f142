// Copyright (c) 2026, vprobe contributors
// SPDX-License-Identifier: Apache-2.0

#include "vprobe/probe_engine.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "vprobe/rng.hpp"

namespace vprobe::probe {
namespace {

constexpr double kBeta1 = 0.9;
constexpr double kBeta2 = 0.999;
constexpr double kEps = 1e-8;
constexpr double kInitStd = 0.02;

double dot_row(std::span<const double> w, std::span<const float> x) {
  double s = 0.0;
  for (std::size_t j = 0; j < w.size(); ++j) s += w[j] * static_cast<double>(x[j]);
  return s;
}

double sign(double v) { return (v > 0.0) - (v < 0.0); }

}  // namespace

void TrainBatch::validate() const {
  require(activations.rows() == targets.size(), ErrorCode::kDimensionMismatch,
          "activation rows do not match target count");
  require(sample_ids.empty() || sample_ids.size() == targets.size(),
          ErrorCode::kDimensionMismatch, "sample ids do not match target count");
}

TrainBatch assemble_batch(std::span<const LabeledActivations> data, bool exclude_special) {
  require(!data.empty(), ErrorCode::kEmpty, "no training data");
  const int layer = data.front().activations.layer;
  const std::size_t d = data.front().activations.dim();
  std::size_t rows = 0;
  for (const auto& item : data) {
    require(item.activations.layer == layer, ErrorCode::kDimensionMismatch,
            "training tensors span several layers");
    require(item.activations.dim() == d, ErrorCode::kDimensionMismatch,
            "training tensors differ in hidden dimension");
    require(item.activations.tokens() == item.sequence.size(), ErrorCode::kDimensionMismatch,
            "activation rows do not match sequence length");
    for (const auto& t : item.sequence.tokens) rows += !(exclude_special && t.special);
  }
  TrainBatch batch;
  batch.activations = Matrix(rows, d);
  batch.targets.reserve(rows);
  batch.sample_ids.reserve(rows);
  std::size_t r = 0;
  for (std::size_t s = 0; s < data.size(); ++s) {
    const auto& item = data[s];
    for (std::size_t t = 0; t < item.sequence.size(); ++t) {
      const auto& tok = item.sequence.tokens[t];
      if (exclude_special && tok.special) continue;
      std::copy_n(item.activations.data.row(t).begin(), d, batch.activations.row(r).begin());
      batch.targets.push_back(static_cast<float>(tok.score));
      batch.sample_ids.push_back(s);
      ++r;
    }
  }
  return batch;
}

json TrainReport::to_json() const {
  return json{{"final_loss", final_loss},
              {"loss_curve", loss_curve},
              {"l1_mass", l1_mass},
              {"wall_time", wall_time},
              {"warnings", warnings}};
}

SmoothLoss smooth_loss(std::span<const double> w, double b, const Matrix& x,
                       std::span<const float> y) {
  require(x.cols() == w.size() && x.rows() == y.size(), ErrorCode::kDimensionMismatch,
          "loss inputs disagree in shape");
  require(!y.empty(), ErrorCode::kEmpty, "loss over zero samples");
  SmoothLoss out;
  out.grad_w.assign(w.size(), 0.0);
  const double inv_n = 1.0 / static_cast<double>(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    const auto xi = x.row(i);
    const double pre = dot_row(w, xi) + b;
    const double r = std::max(pre, 0.0) - y[i];
    out.loss += r * r * inv_n;
    if (pre > 0.0) {
      const double g = 2.0 * r * inv_n;
      for (std::size_t j = 0; j < w.size(); ++j) out.grad_w[j] += g * xi[j];
      out.grad_b += g;
    }
  }
  return out;
}

double objective(std::span<const double> w, double b, const Matrix& x, std::span<const float> y,
                 double l1) {
  double mse = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double r = std::max(dot_row(w, x.row(i)) + b, 0.0) - y[i];
    mse += r * r;
  }
  double l1_mass = 0.0;
  for (double v : w) l1_mass += std::abs(v);
  return mse / static_cast<double>(y.size()) + l1 * l1_mass;
}

ProbeFit train_on_batch(const TrainBatch& batch, const std::string& value, int layer,
                        const ProbeTrainConfig& config) {
  config.validate();
  batch.validate();
  require(batch.size() > 0, ErrorCode::kEmpty, "no training tokens after filtering");
  const auto start = std::chrono::steady_clock::now();

  const std::size_t n = batch.size();
  const std::size_t d = batch.activations.cols();
  const Matrix& x = batch.activations;
  const auto& y = batch.targets;

  TrainReport report;
  if (std::all_of(y.begin(), y.end(), [](float v) { return v == 0.0f; }))
    report.warnings.push_back("all targets are zero; the L1 term drives the probe toward w = 0");

  CounterRng init_rng(derive_seed(config.seed, 1));
  CounterRng order_rng(derive_seed(config.seed, 2));
  std::vector<double> w(d);
  for (auto& v : w) v = init_rng.normal(0.0, kInitStd);
  double b = 0.0;

  std::vector<double> m_w(d, 0.0), v_w(d, 0.0), g_w(d);
  double m_b = 0.0, v_b = 0.0;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});

  double beta1_t = 1.0, beta2_t = 1.0;
  const double lr = config.learning_rate;
  const double l1 = config.l1_coefficient;
  report.loss_curve.reserve(config.epochs);

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[order_rng.below(i)]);

    for (std::size_t start_row = 0; start_row < n; start_row += config.batch_size) {
      const std::size_t stop = std::min(n, start_row + config.batch_size);
      const double inv_b = 1.0 / static_cast<double>(stop - start_row);
      std::fill(g_w.begin(), g_w.end(), 0.0);
      double g_b = 0.0;
      for (std::size_t k = start_row; k < stop; ++k) {
        const auto xi = x.row(order[k]);
        const double pre = dot_row(w, xi) + b;
        if (pre <= 0.0) continue;  // ReLU derivative taken as 0 at the kink
        const double g = 2.0 * (pre - y[order[k]]) * inv_b;
        for (std::size_t j = 0; j < d; ++j) g_w[j] += g * xi[j];
        g_b += g;
      }
      for (std::size_t j = 0; j < d; ++j) g_w[j] += l1 * sign(w[j]);

      beta1_t *= kBeta1;
      beta2_t *= kBeta2;
      const double c1 = 1.0 / (1.0 - beta1_t);
      const double c2 = 1.0 / (1.0 - beta2_t);
      for (std::size_t j = 0; j < d; ++j) {
        m_w[j] = kBeta1 * m_w[j] + (1.0 - kBeta1) * g_w[j];
        v_w[j] = kBeta2 * v_w[j] + (1.0 - kBeta2) * g_w[j] * g_w[j];
        w[j] -= lr * (m_w[j] * c1) / (std::sqrt(v_w[j] * c2) + kEps);
      }
      m_b = kBeta1 * m_b + (1.0 - kBeta1) * g_b;
      v_b = kBeta2 * v_b + (1.0 - kBeta2) * g_b * g_b;
      b -= lr * (m_b * c1) / (std::sqrt(v_b * c2) + kEps);
    }
    report.loss_curve.push_back(objective(w, b, x, y, l1));
  }

  std::vector<float> wf(w.begin(), w.end());
  LinearProbe probe;
  probe.value = value;
  probe.layer = layer;
  probe.weight = std::move(wf);
  probe.bias = static_cast<float>(b);
  probe.weight_norm = euclidean_norm(probe.weight);
  probe.train_config_digest = config.digest();
  if (probe.weight_norm == 0.0) report.warnings.push_back("probe weight collapsed to zero");

  report.final_loss = report.loss_curve.empty() ? 0.0 : report.loss_curve.back();
  for (float v : probe.weight) report.l1_mass += std::abs(static_cast<double>(v));
  report.wall_time =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {std::move(probe), std::move(report)};
}

ProbeFit train_probe(std::span<const LabeledActivations> data, const ProbeTrainConfig& config) {
  config.validate();
  const auto batch = assemble_batch(data, config.exclude_special);
  return train_on_batch(batch, data.front().sequence.value, data.front().activations.layer,
                        config);
}

std::vector<ProbeFit> train_probe_stack(
    std::span<const std::vector<LabeledActivations>> data_by_layer,
    const ProbeTrainConfig& config) {
  require(!data_by_layer.empty(), ErrorCode::kEmpty, "no layers to train");
  std::vector<ProbeFit> out;
  out.reserve(data_by_layer.size());
  for (std::size_t l = 0; l < data_by_layer.size(); ++l) {
    const auto& data = data_by_layer[l];
    require(!data.empty(), ErrorCode::kEmpty, "missing layer " + std::to_string(l));
    for (const auto& item : data)
      require(item.activations.layer == static_cast<int>(l), ErrorCode::kInvalidArgument,
              "missing layer " + std::to_string(l) + " (found tensor for layer " +
                  std::to_string(item.activations.layer) + ")");
    out.push_back(train_probe(data, config));
  }
  return out;
}

std::vector<double> predict_rows(const LinearProbe& probe, const Matrix& x) {
  require(x.cols() == probe.dim(), ErrorCode::kDimensionMismatch,
          "activation width " + std::to_string(x.cols()) + " != probe dimension " +
              std::to_string(probe.dim()));
  std::vector<double> out(x.rows());
  for (std::size_t t = 0; t < x.rows(); ++t) {
    const auto row = x.row(t);
    double s = 0.0;
    for (std::size_t j = 0; j < row.size(); ++j)
      s += static_cast<double>(probe.weight[j]) * static_cast<double>(row[j]);
    out[t] = std::max(0.0, s + static_cast<double>(probe.bias));
  }
  return out;
}

std::vector<double> predict_token_scores(const LinearProbe& probe,
                                         const ActivationTensor& activations) {
  require(activations.layer == probe.layer, ErrorCode::kDimensionMismatch,
          "activation layer " + std::to_string(activations.layer) + " != probe layer " +
              std::to_string(probe.layer));
  return predict_rows(probe, activations.data);
}

double aggregate_sequence_score(std::span<const double> token_scores) {
  return aggregate_sequence_score(token_scores, std::vector<bool>(token_scores.size(), true));
}

double aggregate_sequence_score(std::span<const double> token_scores,
                                const std::vector<bool>& keep) {
  require(keep.size() == token_scores.size(), ErrorCode::kDimensionMismatch,
          "mask length differs from token count");
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t t = 0; t < token_scores.size(); ++t) {
    if (!keep[t]) continue;
    sum += token_scores[t];
    ++n;
  }
  require(n > 0, ErrorCode::kEmpty, "no tokens left to aggregate");
  return sum / static_cast<double>(n);
}

}  // namespace vprobe::probe
