// Copyright (c) 2026, vprobe contributors
// SPDX-License-Identifier: Apache-2.0

#include "vprobe/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

namespace vprobe::analysis {

double pearson(std::span<const double> preds, std::span<const double> labels) {
  require(preds.size() == labels.size(), ErrorCode::kDimensionMismatch,
          "pearson inputs differ in length");
  require(preds.size() >= 2, ErrorCode::kUndefinedCorrelation,
          "pearson needs at least two samples");
  double mx = 0.0, my = 0.0, sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const double n = static_cast<double>(i + 1);
    const double dx = preds[i] - mx;
    const double dy = labels[i] - my;
    mx += dx / n;
    my += dy / n;
    sxx += dx * (preds[i] - mx);
    syy += dy * (labels[i] - my);
    sxy += dx * (labels[i] - my);
  }
  require(sxx > 0.0 && syy > 0.0, ErrorCode::kUndefinedCorrelation,
          "correlation undefined for zero-variance input");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

json LayerCorrelationProfile::to_json() const {
  return json{{"value", value}, {"r_by_layer", r_by_layer}, {"selected_layer", selected_layer}};
}

int argmax_first(std::span<const double> v) {
  require(!v.empty(), ErrorCode::kEmpty, "argmax of empty vector");
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return static_cast<int>(best);
}

LayerCorrelationProfile select_diagnostic_probe(
    std::span<const LinearProbe> stack,
    std::span<const std::vector<probe::LabeledActivations>> validation_by_layer) {
  require(!stack.empty(), ErrorCode::kEmpty, "empty probe stack");
  require(validation_by_layer.size() == stack.size(), ErrorCode::kDimensionMismatch,
          "validation data must cover every probe layer");
  LayerCorrelationProfile profile;
  profile.value = stack.front().value;
  for (std::size_t l = 0; l < stack.size(); ++l) {
    const auto& data = validation_by_layer[l];
    require(!data.empty(), ErrorCode::kEmpty, "empty validation set");
    std::vector<double> preds, labels;
    for (const auto& item : data) {
      const auto scores = probe::predict_token_scores(stack[l], item.activations);
      require(scores.size() == item.sequence.size(), ErrorCode::kDimensionMismatch,
              "activation rows do not match sequence length");
      for (std::size_t t = 0; t < scores.size(); ++t) {
        if (item.sequence.tokens[t].special) continue;
        preds.push_back(scores[t]);
        labels.push_back(item.sequence.tokens[t].score);
      }
    }
    profile.r_by_layer.push_back(pearson(preds, labels));
  }
  profile.selected_layer = stack[argmax_first(profile.r_by_layer)].layer;
  return profile;
}

CrossValMatrix build_cross_matrix(std::span<const LinearProbe> probes,
                                  const std::map<std::string, std::vector<ScoredSequence>>& corpora,
                                  const ActivationSource& source) {
  require(!probes.empty(), ErrorCode::kEmpty, "no probes");
  CrossValMatrix m;
  std::set<std::string> probe_values;
  for (const auto& p : probes) {
    require(probe_values.insert(p.value).second, ErrorCode::kInvalidArgument,
            "duplicate probe value: " + p.value);
    m.values.push_back(p.value);
  }
  require(corpora.size() == probes.size(), ErrorCode::kInvalidArgument,
          "probe and corpus value sets differ");
  for (const auto& [value, seqs] : corpora) {
    require(probe_values.count(value) == 1, ErrorCode::kInvalidArgument,
            "corpus value without a probe: " + value);
  }

  std::vector<int> layers;
  for (const auto& p : probes)
    if (std::find(layers.begin(), layers.end(), p.layer) == layers.end()) layers.push_back(p.layer);

  const std::size_t v = probes.size();
  m.cells.assign(v * v, 0.0);
  for (std::size_t j = 0; j < v; ++j) {
    const auto& corpus = corpora.at(m.values[j]);
    require(!corpus.empty(), ErrorCode::kEmpty, "empty corpus column: " + m.values[j]);
    std::vector<double> sums(v, 0.0);
    for (const auto& seq : corpus) {
      const auto acts = source(seq, layers);
      require(acts.size() == layers.size(), ErrorCode::kDimensionMismatch,
              "activation source returned the wrong number of layers");
      std::vector<bool> keep(seq.size());
      for (std::size_t t = 0; t < seq.size(); ++t) keep[t] = !seq.tokens[t].special;
      for (std::size_t i = 0; i < v; ++i) {
        const auto li = static_cast<std::size_t>(
            std::find(layers.begin(), layers.end(), probes[i].layer) - layers.begin());
        const auto scores = probe::predict_token_scores(probes[i], acts[li]);
        require(scores.size() == seq.size(), ErrorCode::kDimensionMismatch,
                "activation rows do not match sequence length");
        sums[i] += probe::aggregate_sequence_score(scores, keep);
      }
    }
    for (std::size_t i = 0; i < v; ++i) m.at(i, j) = sums[i] / static_cast<double>(corpus.size());
  }
  return m;
}

std::string_view to_string(Axis a) { return a == Axis::kColumn ? "column" : "row"; }

json DominanceReport::to_json() const {
  return json{{"axis", to_string(axis)},
              {"terms", per_column_terms},
              {"sum", sum},
              {"mean", mean}};
}

DominanceReport diagonal_dominance(const CrossValMatrix& m, Axis axis) {
  m.validate();
  const std::size_t v = m.size();
  require(v >= 1, ErrorCode::kEmpty, "empty cross matrix");
  DominanceReport rep;
  rep.axis = axis;
  for (std::size_t c = 0; c < v; ++c) {
    const double diag = m.at(c, c);
    require(diag > 0.0, ErrorCode::kInvalidArgument,
            "diagonal entry " + std::to_string(c) + " is not positive");
    double off = -std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < v; ++r) {
      if (r == c) continue;
      off = std::max(off, axis == Axis::kColumn ? m.at(r, c) : m.at(c, r));
    }
    // A 1x1 matrix has no competitor; its term is defined as 1.
    const double term = v == 1 ? 1.0 : (diag - off) / diag;
    rep.per_column_terms.push_back(term);
    rep.sum += term;
  }
  rep.mean = rep.sum / static_cast<double>(v);
  return rep;
}

std::vector<double> diag_offdiag_gap(const CrossValMatrix& m) {
  m.validate();
  const std::size_t v = m.size();
  require(v >= 2, ErrorCode::kInvalidArgument, "gap needs at least two values");
  std::vector<double> gaps(v);
  for (std::size_t i = 0; i < v; ++i) {
    double off = 0.0;
    for (std::size_t j = 0; j < v; ++j)
      if (j != i) off += m.at(i, j);
    gaps[i] = m.at(i, i) - off / static_cast<double>(v - 1);
  }
  return gaps;
}

CrossValMatrix permute(const CrossValMatrix& m, std::span<const std::size_t> order) {
  require(order.size() == m.size(), ErrorCode::kDimensionMismatch, "permutation size mismatch");
  CrossValMatrix out;
  out.cells.resize(m.cells.size());
  for (std::size_t i : order) out.values.push_back(m.values.at(i));
  for (std::size_t i = 0; i < order.size(); ++i) {
    for (std::size_t j = 0; j < order.size(); ++j) out.at(i, j) = m.at(order[i], order[j]);
  }
  return out;
}

}  // namespace vprobe::analysis
