// Copyright (c) 2026, vprobe contributors
// SPDX-License-Identifier: Apache-2.0
//
// Reference computations used to check the library. Written independently of
// src/ on purpose: plain loops in double precision, Eigen for linear algebra.

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <vector>

namespace oracle {

inline double dot(std::span<const float> a, std::span<const float> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += double(a[i]) * double(b[i]);
  return s;
}

inline double norm(std::span<const float> a) { return std::sqrt(dot(a, a)); }

inline double cosine(std::span<const float> a, std::span<const float> b) {
  return dot(a, b) / (norm(a) * norm(b));
}

// Two-pass sample correlation.
inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

// Average ranks, then Pearson.
inline double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  auto rank = [](const std::vector<double>& v) {
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
      double less = 0, equal = 0;
      for (double w : v) {
        less += w < v[i];
        equal += w == v[i];
      }
      r[i] = less + (equal + 1.0) / 2.0;
    }
    return r;
  };
  return pearson(rank(x), rank(y));
}

// Mean of ReLU(w.x + b) - y squared, in double.
inline double relu_mse(const std::vector<double>& w, double b, const std::vector<std::vector<double>>& x,
                       const std::vector<double>& y) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double pre = b;
    for (std::size_t j = 0; j < w.size(); ++j) pre += w[j] * x[i][j];
    const double r = std::max(pre, 0.0) - y[i];
    s += r * r;
  }
  return s / static_cast<double>(x.size());
}

// Least squares with intercept via the normal equations (X^T X) beta = X^T y.
// Returns [w..., b].
inline std::vector<double> ols(const std::vector<std::vector<double>>& x, const std::vector<double>& y) {
  const std::size_t n = x.size(), d = x.front().size();
  Eigen::MatrixXd A(n, d + 1);
  Eigen::VectorXd v(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) A(i, j) = x[i][j];
    A(i, d) = 1.0;
    v(i) = y[i];
  }
  const Eigen::MatrixXd AtA = A.transpose() * A;
  const Eigen::VectorXd Atv = A.transpose() * v;
  const Eigen::VectorXd beta = AtA.ldlt().solve(Atv);
  return {beta.data(), beta.data() + beta.size()};
}

inline double softmax_first(std::span<const double> z, std::size_t k) {
  double s = 0.0;
  for (double v : z) s += std::exp(v);
  return std::exp(z[k]) / s;
}

}  // namespace oracle
