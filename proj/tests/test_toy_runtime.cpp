// Copyright (c) 2026, vprobe contributors
// SPDX-License-Identifier: Apache-2.0

#include <catch_amalgamated.hpp>

#include <random>

#include "vprobe/toy_runtime.hpp"

using namespace vprobe;
using namespace vprobe::toy;

namespace {

std::vector<std::int32_t> tokens(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 g(seed);
  std::vector<std::int32_t> out(n);
  for (auto& t : out) t = static_cast<std::int32_t>(g() % 256);
  return out;
}

std::vector<float> unit_dir(std::size_t d, std::uint64_t seed) {
  std::mt19937_64 g(seed);
  std::normal_distribution<float> nd(0.0f, 1.0f);
  std::vector<float> v(d);
  for (auto& x : v) x = nd(g);
  const auto n = static_cast<float>(euclidean_norm(v));
  for (auto& x : v) x /= n;
  return v;
}

CaptureRequest all_layers(bool logits = true) {
  return {{0, 1, 2, 3, 4, 5}, {}, logits};
}

double dot(std::span<const float> a, std::span<const float> b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += double(a[i]) * b[i];
  return s;
}

}  // namespace

TEST_CASE("apply_steering arithmetic", "[toy]") {
  const std::vector<float> x{0, 0}, w{3, 4};
  const auto y = apply_steering(x, w, 2.0, 1.0);
  CHECK(y[0] == Catch::Approx(1.2f));
  CHECK(y[1] == Catch::Approx(1.6f));
  CHECK(apply_steering(std::vector<float>{1, 2}, w, 0.0, 1.0) == std::vector<float>{1, 2});
  CHECK_THROWS_AS(apply_steering(x, std::vector<float>{0, 0}, 1.0, 1.0), Error);
}

TEST_CASE("same config gives identical parameters", "[toy]") {
  const auto a = init_model({}), b = init_model({});
  CHECK(a.parameter_checksum() == b.parameter_checksum());
  ToyTransformerConfig other;
  other.seed = 1;
  CHECK(init_model(other).parameter_checksum() != a.parameter_checksum());
  CHECK(a.metadata().contains("prng"));
}

TEST_CASE("head count must divide the width", "[toy]") {
  ToyTransformerConfig c;
  c.n_heads = 5;
  CHECK_THROWS_AS(c.validate(), Error);
  CHECK_THROWS_AS(init_model(c), Error);
}

TEST_CASE("capture shapes follow the config", "[toy]") {
  const auto m = init_model({});
  const auto cap = m.forward_with_hooks(tokens(8, 1), all_layers());
  REQUIRE(cap.activations.size() == 6);
  for (int l = 0; l < 6; ++l) {
    CHECK(cap.activations[static_cast<std::size_t>(l)].layer == l);
    CHECK(cap.activations[static_cast<std::size_t>(l)].data.rows() == 8);
    CHECK(cap.activations[static_cast<std::size_t>(l)].data.cols() == 64);
  }
  REQUIRE(cap.logits);
  CHECK(cap.logits->cols() == 256);
  const auto logits_only = m.forward_with_hooks(tokens(8, 1), {{}, {}, true});
  CHECK(logits_only.activations.empty());
  CHECK(logits_only.logits->bit_equal(*cap.logits));
}

TEST_CASE("forward is deterministic and capture does not perturb it", "[toy]") {
  const auto m = init_model({});
  const auto t = tokens(12, 2);
  const auto a = m.forward_with_hooks(t, all_layers());
  const auto b = m.forward_with_hooks(t, all_layers());
  for (std::size_t l = 0; l < 6; ++l) CHECK(a.activations[l].data.bit_equal(b.activations[l].data));
  CHECK(m.forward_with_hooks(t, {{}, {}, true}).logits->bit_equal(*a.logits));
}

TEST_CASE("attention is causal", "[toy]") {
  const auto m = init_model({});
  auto t = tokens(10, 3);
  const auto a = m.forward_with_hooks(t, all_layers());
  t[7] = (t[7] + 1) % 256;
  const auto b = m.forward_with_hooks(t, all_layers());
  for (std::size_t l = 0; l < 6; ++l)
    for (std::size_t r = 0; r < 7; ++r) {
      const auto ra = a.activations[l].data.row(r), rb = b.activations[l].data.row(r);
      CHECK(std::equal(ra.begin(), ra.end(), rb.begin()));
    }
  const auto r7a = a.activations[0].data.row(7), r7b = b.activations[0].data.row(7);
  CHECK(!std::equal(r7a.begin(), r7a.end(), r7b.begin()));
}

TEST_CASE("out of range inputs are rejected", "[toy]") {
  const auto m = init_model({});
  CHECK_THROWS_AS(m.forward_with_hooks(tokens(4, 1), {{6}, {}, false}), Error);
  CHECK_THROWS_AS(m.forward_with_hooks(tokens(65, 1), {{0}, {}, false}), Error);
  CHECK_THROWS_AS(m.forward_with_hooks(std::vector<std::int32_t>{300}, {{0}, {}, false}), Error);
  CaptureRequest bad_dim{{0}, {}, false};
  bad_dim.steering.push_back({make_probe("p", 0, {1, 2, 3}, 0.0f), 1.0, 0.02, 0, TokenRange::all()});
  CHECK_THROWS_AS(m.forward_with_hooks(tokens(4, 1), bad_dim), Error);
}

TEST_CASE("zero-strength steering is bit-identical", "[toy]") {
  const auto m = init_model({});
  const auto t = tokens(9, 4);
  auto req = all_layers();
  const auto base = m.forward_with_hooks(t, req);
  req.steering.push_back({make_probe("p", 3, unit_dir(64, 1), 0.0f), 0.0, 0.02, 3, TokenRange::all()});
  const auto steered = m.forward_with_hooks(t, req);
  CHECK(steered.logits->bit_equal(*base.logits));
  for (std::size_t l = 0; l < 6; ++l) CHECK(steered.activations[l].data.bit_equal(base.activations[l].data));
}

TEST_CASE("steering shifts the captured projection by alpha k0 norm", "[toy]") {
  const auto m = init_model({});
  const auto t = tokens(9, 5);
  auto w = unit_dir(64, 2);
  for (auto& v : w) v *= 3.0f;
  const auto probe = make_probe("p", 3, w, 0.0f);
  const CaptureRequest plain{{3}, {}, false};
  CaptureRequest req = plain;
  req.steering.push_back({probe, 2.0, 1.0, 3, TokenRange::all()});
  const auto a = m.forward_with_hooks(t, plain).activations[0].data;
  const auto b = m.forward_with_hooks(t, req).activations[0].data;
  const double want = 2.0 * 1.0 * probe.weight_norm;
  for (std::size_t r = 0; r < t.size(); ++r)
    CHECK(dot(w, b.row(r)) - dot(w, a.row(r)) == Catch::Approx(want).epsilon(1e-5));
}

TEST_CASE("steering only touches its token range and propagates downstream", "[toy]") {
  const auto m = init_model({});
  const auto t = tokens(8, 6);
  const auto base = m.forward_with_hooks(t, all_layers());
  auto req = all_layers();
  req.steering.push_back({make_probe("p", 2, unit_dir(64, 3), 0.0f), 4.0, 0.5, 2, TokenRange::between(5, 8)});
  const auto s = m.forward_with_hooks(t, req);
  for (std::size_t r = 0; r < 5; ++r) {
    const auto x = s.activations[2].data.row(r), y = base.activations[2].data.row(r);
    CHECK(std::equal(x.begin(), x.end(), y.begin()));
  }
  CHECK(!s.activations[4].data.bit_equal(base.activations[4].data));
  CHECK(s.activations[1].data.bit_equal(base.activations[1].data));
}

TEST_CASE("steering strengths add", "[toy]") {
  const auto m = init_model({});
  const auto t = tokens(6, 7);
  const auto probe = make_probe("p", 1, unit_dir(64, 4), 0.0f);
  CaptureRequest two{{1}, {}, false}, one{{1}, {}, false};
  two.steering.push_back({probe, 1.0, 0.5, 1, TokenRange::all()});
  two.steering.push_back({probe, 2.0, 0.5, 1, TokenRange::all()});
  one.steering.push_back({probe, 3.0, 0.5, 1, TokenRange::all()});
  const auto a = m.forward_with_hooks(t, two).activations[0].data;
  const auto b = m.forward_with_hooks(t, one).activations[0].data;
  for (std::size_t i = 0; i < a.data().size(); ++i)
    CHECK(a.data()[i] == Catch::Approx(b.data()[i]).margin(1e-5));
}

TEST_CASE("zero-scale planting changes nothing", "[toy]") {
  const auto m = init_model({});
  const auto planted = plant_signal(m, 2, unit_dir(64, 5), hashed_labeler(1), 0.0f);
  const auto t = tokens(8, 8);
  CHECK(planted.forward_with_hooks(t, all_layers()).logits->bit_equal(*m.forward_with_hooks(t, all_layers()).logits));
  CHECK_THROWS_AS(plant_signal(m, 6, unit_dir(64, 5), hashed_labeler(1)), Error);
}

TEST_CASE("planted signal appears only from its layer", "[toy]") {
  const auto m = init_model({});
  const auto dir = unit_dir(64, 6);
  const auto planted = plant_signal(m, 3, dir, hashed_labeler(2), 1.0f);
  const auto t = tokens(16, 9);
  const auto a = m.forward_with_hooks(t, all_layers());
  const auto b = planted.forward_with_hooks(t, all_layers());
  for (std::size_t l = 0; l < 3; ++l) CHECK(a.activations[l].data.bit_equal(b.activations[l].data));
  const auto labeler = hashed_labeler(2);
  for (std::size_t r = 0; r < t.size(); ++r) {
    const double shift = dot(dir, b.activations[3].data.row(r)) - dot(dir, a.activations[3].data.row(r));
    CHECK(shift == Catch::Approx(labeler(t, r)).margin(1e-4));
  }
}

TEST_CASE("toy tokenizer reserves the answer options", "[toy]") {
  const ToyTokenizer tok(256);
  CHECK(tok.token_id("Yes") == 2);
  CHECK(tok.token_id("No") == 3);
  CHECK(tok.token_id("Unknown") == 4);
  CHECK(tok.token_id("A") == 5);
  CHECK(tok.token_id("B") == 6);
  CHECK(tok.token_id("hello") >= ToyTokenizer::kFirstFree);
  CHECK(tok.token_id("hello") < 256);
  const auto enc = tok.encode("  hello   world ", true);
  REQUIRE(enc.size() == 3);
  CHECK(enc[0].special);
  CHECK(enc[1].id == tok.token_id("hello"));
  CHECK(tok.encode_ids("Yes No") == std::vector<std::int32_t>{2, 3});
}

TEST_CASE("superposition dictionary respects the coherence bound", "[toy]") {
  SuperpositionConfig cfg;
  const auto dict = generate_dictionary(cfg);
  CHECK(dict.rows() == 8);
  CHECK(dict.cols() == 64);
  double worst = 0;
  for (std::size_t a = 0; a < 8; ++a) {
    CHECK(euclidean_norm(dict.row(a)) == Catch::Approx(1.0).epsilon(1e-5));
    for (std::size_t b = a + 1; b < 8; ++b) worst = std::max(worst, std::abs(dot(dict.row(a), dict.row(b))));
  }
  CHECK(worst <= 0.3 + 1e-6);
  CHECK(max_coherence(dict) == Catch::Approx(worst).epsilon(1e-5));

  SuperpositionConfig impossible;
  impossible.d = 2;
  impossible.n_features = 8;
  impossible.sparsity = 1.0;
  impossible.coherence_bound = 0.01;
  impossible.max_retries = 50;
  CHECK_THROWS_AS(generate_dictionary(impossible), Error);
}

TEST_CASE("superposition labels track the target coefficient", "[toy]") {
  SuperpositionConfig cfg;
  const auto dict = generate_dictionary(cfg);
  const auto data = generate_superposition_dataset(cfg, dict, {200, 2, std::nullopt, "x", 1});
  std::size_t t = 0;
  for (const auto& item : data.sequences)
    for (std::size_t r = 0; r < item.sequence.size(); ++r, ++t) {
      double others = 0;
      for (std::size_t i = 0; i < 8; ++i)
        if (i != 2) others += data.coefficients(t, i);
      const double proj = dot(dict.row(2), item.activations.data.row(r));
      CHECK(std::abs(proj - data.coefficients(t, 2)) <= 0.3 * others + 1e-4);
      CHECK(item.sequence.tokens[r].score == quantize_score(data.coefficients(t, 2)));
    }
  CHECK(t == 200);
}

TEST_CASE("single feature superposition is c times v", "[toy]") {
  SuperpositionConfig cfg;
  cfg.n_features = 1;
  cfg.sparsity = 1.0;
  const auto dict = generate_dictionary(cfg);
  const auto data = generate_superposition_dataset(cfg, dict, {20, 0, std::nullopt, "x", 0});
  const auto& item = data.sequences[0];
  for (std::size_t r = 0; r < item.sequence.size(); ++r)
    for (std::size_t j = 0; j < 64; ++j)
      CHECK(item.activations.data(r, j) == Catch::Approx(data.coefficients(r, 0) * dict(0, j)).margin(1e-6));
}
