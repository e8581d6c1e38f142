// Copyright (c) 2026, vprobe contributors
// SPDX-License-Identifier: Apache-2.0

#include <catch_amalgamated.hpp>

#include <random>

#include "oracles.hpp"
#include "vprobe/probe_engine.hpp"
#include "vprobe/toy_runtime.hpp"

using namespace vprobe;
using namespace vprobe::probe;

namespace {

// y = ReLU(<w*, x> + b*) on Gaussian x, one sequence per 16 rows.
std::vector<LabeledActivations> planted_relu(std::size_t d, std::size_t n, std::uint64_t seed,
                                             std::vector<float>& w_star) {
  std::mt19937_64 g(seed);
  std::normal_distribution<float> nd(0.0f, 1.0f);
  w_star.assign(d, 0.0f);
  for (auto& v : w_star) v = nd(g);
  const float scale = 2.0f / static_cast<float>(oracle::norm(w_star));
  for (auto& v : w_star) v *= scale;
  std::vector<LabeledActivations> out;
  for (std::size_t start = 0; start < n; start += 16) {
    LabeledActivations item;
    item.activations.data = Matrix(16, d);
    item.sequence.value = "pat";
    for (std::size_t t = 0; t < 16; ++t) {
      auto row = item.activations.data.row(t);
      for (auto& v : row) v = nd(g);
      const double y = std::max(0.0, oracle::dot(row, w_star) + 1.0);
      item.sequence.tokens.push_back({"t", 1, static_cast<int>(std::lround(std::min(y, 6.0))), false});
    }
    out.push_back(std::move(item));
  }
  return out;
}

}  // namespace

TEST_CASE("prediction is ReLU of the affine map", "[probe]") {
  ActivationTensor a;
  a.layer = 0;
  a.data = Matrix(1, 2, std::vector<float>{1, 1});
  CHECK(predict_token_scores(make_probe("p", 0, {3, 4}, 1.0f), a) == std::vector<double>{8.0});
  a.data = Matrix(1, 2, std::vector<float>{-2, 5});
  CHECK(predict_token_scores(make_probe("p", 0, {1, 0}, 0.0f), a) == std::vector<double>{0.0});
  a.layer = 1;
  CHECK_THROWS_AS(predict_token_scores(make_probe("p", 0, {1, 0}, 0.0f), a), Error);
  a.layer = 0;
  CHECK_THROWS_AS(predict_token_scores(make_probe("p", 0, {1, 0, 0}, 0.0f), a), Error);
}

TEST_CASE("sequence aggregation is the mean of kept tokens", "[probe]") {
  const std::vector<double> c{2, 2, 2};
  CHECK(aggregate_sequence_score(c) == 2.0);
  CHECK_THROWS_AS(aggregate_sequence_score(std::vector<double>{}), Error);
  const std::vector<double> s{0, 3, 6};
  CHECK(aggregate_sequence_score(s, {false, true, true}) == 4.5);
  CHECK_THROWS_AS(aggregate_sequence_score(s, {false, false, false}), Error);
}

TEST_CASE("analytic gradient matches central differences", "[probe]") {
  std::mt19937_64 g(3);
  std::normal_distribution<double> nd(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t d = 1 + g() % 8, n = 5 + g() % 20;
    Matrix x(n, d);
    std::vector<float> y(n);
    for (auto& v : x.data()) v = static_cast<float>(nd(g));
    for (auto& v : y) v = static_cast<float>(g() % 7);
    std::vector<double> w(d);
    for (auto& v : w) v = nd(g);
    const double b = nd(g);
    const auto s = smooth_loss(w, b, x, y);
    std::vector<std::vector<double>> xs(n, std::vector<double>(d));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < d; ++j) xs[i][j] = x(i, j);
    const std::vector<double> yd(y.begin(), y.end());
    CHECK(s.loss == Catch::Approx(oracle::relu_mse(w, b, xs, yd)).epsilon(1e-9));
    const double h = 1e-6;
    for (std::size_t j = 0; j < d; ++j) {
      auto wp = w, wm = w;
      wp[j] += h;
      wm[j] -= h;
      const double fd = (oracle::relu_mse(wp, b, xs, yd) - oracle::relu_mse(wm, b, xs, yd)) / (2 * h);
      CHECK(s.grad_w[j] == Catch::Approx(fd).epsilon(1e-4).margin(1e-7));
    }
  }
}

TEST_CASE("training recovers a planted ReLU direction", "[probe]") {
  std::vector<float> w_star;
  const auto data = planted_relu(32, 4096, 1, w_star);
  ProbeTrainConfig cfg;
  cfg.epochs = 300;
  cfg.learning_rate = 1e-2;
  const auto fit = train_probe(data, cfg);
  CHECK(oracle::cosine(fit.probe.weight, w_star) >= 0.95);
  CHECK(fit.report.loss_curve.size() == cfg.epochs);
  CHECK(fit.probe.readout == "relu");
  CHECK(fit.probe.train_config_digest == cfg.digest());
}

TEST_CASE("loss is non-increasing after epoch 10", "[probe]") {
  std::vector<float> w_star;
  const auto data = planted_relu(16, 2048, 2, w_star);
  ProbeTrainConfig cfg;
  cfg.epochs = 200;
  const auto fit = train_probe(data, cfg);
  const auto& c = fit.report.loss_curve;
  for (std::size_t e = 11; e < c.size(); ++e) CHECK(c[e] <= c[e - 1] + 1e-6);
}

TEST_CASE("training is deterministic for a fixed seed", "[probe]") {
  std::vector<float> w_star;
  const auto data = planted_relu(8, 512, 3, w_star);
  ProbeTrainConfig cfg;
  cfg.epochs = 20;
  const auto a = train_probe(data, cfg);
  const auto b = train_probe(data, cfg);
  CHECK(a.probe == b.probe);
  CHECK(a.report.loss_curve == b.report.loss_curve);
  cfg.seed = 9;
  CHECK(!(train_probe(data, cfg).probe == a.probe));
}

TEST_CASE("all-zero targets warn and shrink the weights", "[probe]") {
  std::vector<float> w_star;
  auto data = planted_relu(8, 512, 4, w_star);
  for (auto& item : data)
    for (auto& t : item.sequence.tokens) t.score = 0;
  ProbeTrainConfig cfg;
  cfg.epochs = 50;
  cfg.learning_rate = 1e-3;
  const auto fit = train_probe(data, cfg);
  REQUIRE(!fit.report.warnings.empty());
  cfg.epochs = 1;
  cfg.learning_rate = 1e-12;
  const auto init = train_probe(data, cfg);
  CHECK(fit.report.l1_mass <= init.report.l1_mass);
}

TEST_CASE("special tokens are left out of training batches", "[probe]") {
  std::vector<float> w_star;
  auto data = planted_relu(4, 32, 5, w_star);
  data[0].sequence.tokens[0].special = true;
  data[0].sequence.tokens[0].score = 0;
  CHECK(assemble_batch(data, true).size() == 31);
  CHECK(assemble_batch(data, false).size() == 32);
}

TEST_CASE("mismatched dimensions are rejected", "[probe]") {
  std::vector<float> w_star;
  auto data = planted_relu(4, 32, 6, w_star);
  data[1].activations.data = Matrix(16, 5);
  CHECK_THROWS_AS(train_probe(data, ProbeTrainConfig{}), Error);
}

TEST_CASE("probe stack trains one probe per layer", "[probe]") {
  std::vector<float> w_star;
  std::vector<std::vector<LabeledActivations>> by_layer;
  for (int l = 0; l < 6; ++l) {
    auto d = planted_relu(4, 64, 10 + static_cast<std::uint64_t>(l), w_star);
    for (auto& item : d) item.activations.layer = l;
    by_layer.push_back(std::move(d));
  }
  ProbeTrainConfig cfg;
  cfg.epochs = 5;
  const auto a = train_probe_stack(by_layer, cfg);
  const auto b = train_probe_stack(by_layer, cfg);
  REQUIRE(a.size() == 6);
  for (int l = 0; l < 6; ++l) {
    CHECK(a[static_cast<std::size_t>(l)].probe.layer == l);
    CHECK(a[static_cast<std::size_t>(l)].probe == b[static_cast<std::size_t>(l)].probe);
  }
  by_layer[2].clear();
  CHECK_THROWS_AS(train_probe_stack(by_layer, cfg), Error);
}
