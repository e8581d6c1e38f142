// Copyright (c) 2026, vprobe contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "vprobe/probe_engine.hpp"
#include "vprobe/types.hpp"

namespace vprobe::analysis {

// Sample Pearson correlation, single pass (Welford co-moments).
// Throws kUndefinedCorrelation when either input has zero variance.
double pearson(std::span<const double> preds, std::span<const double> labels);

struct LayerCorrelationProfile {
  std::string value;
  std::vector<double> r_by_layer;
  int selected_layer = 0;

  json to_json() const;
};

// Index of the maximum; ties go to the lowest index.
int argmax_first(std::span<const double> v);

// validation_by_layer[l] holds layer-l activations for every validation sequence.
LayerCorrelationProfile select_diagnostic_probe(
    std::span<const LinearProbe> stack,
    std::span<const std::vector<probe::LabeledActivations>> validation_by_layer);

// Supplies activations for a sequence at the requested layers, in request order.
using ActivationSource =
    std::function<std::vector<ActivationTensor>(const ScoredSequence&, std::span<const int>)>;

// Cell (i, j) = mean over corpus j of the sequence-mean probe-i score.
// corpora is keyed by value id and must cover exactly the probes' values.
CrossValMatrix build_cross_matrix(std::span<const LinearProbe> probes,
                                  const std::map<std::string, std::vector<ScoredSequence>>& corpora,
                                  const ActivationSource& source);

enum class Axis { kColumn, kRow };
std::string_view to_string(Axis a);

struct DominanceReport {
  std::vector<double> per_column_terms;
  double sum = 0.0;
  double mean = 0.0;
  Axis axis = Axis::kColumn;

  json to_json() const;
};

// Column axis: term_c = (M_cc - max_{r != c} M_rc) / M_cc. Row axis is the transpose.
DominanceReport diagonal_dominance(const CrossValMatrix& m, Axis axis = Axis::kColumn);

// gap_i = M_ii - mean_{j != i} M_ij
std::vector<double> diag_offdiag_gap(const CrossValMatrix& m);

CrossValMatrix permute(const CrossValMatrix& m, std::span<const std::size_t> order);

}  // namespace vprobe::analysis
