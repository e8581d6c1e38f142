// Copyright (c) 2026, vprobe contributors
// SPDX-License-Identifier: Apache-2.0

#include <catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "oracles.hpp"
#include "vprobe/corpus_io.hpp"
#include "vprobe/harness.hpp"
#include "vprobe/toy_runtime.hpp"

using namespace vprobe;
using namespace vprobe::harness;
namespace fs = std::filesystem;

namespace {

const toy::ToyTokenizer& tok() {
  static const toy::ToyTokenizer t(256);
  return t;
}

Encoder encoder() {
  return [](std::string_view s) { return tok().encode_ids(s); };
}

OptionTokenizer options() {
  return [](std::string_view w) { return tok().token_id(w); };
}

std::vector<ScoredSequence> items(const std::string& value, Regime r, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 g(seed);
  std::vector<ScoredSequence> out;
  for (std::size_t i = 0; i < n; ++i) {
    ScoredSequence s;
    s.value = value;
    s.regime = r;
    s.source = value + "-" + std::to_string(i);
    for (int t = 0; t < 6; ++t) s.tokens.push_back({"w", static_cast<std::int32_t>(7 + g() % 249), 0, false});
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<float> unit_dir(std::uint64_t seed) {
  std::mt19937_64 g(seed);
  std::normal_distribution<float> nd(0.0f, 1.0f);
  std::vector<float> v(64);
  for (auto& x : v) x = nd(g);
  const auto n = static_cast<float>(euclidean_norm(v));
  for (auto& x : v) x /= n;
  return v;
}

AnswerDistribution dist(double p_yes) {
  return make_answer_distribution({"Yes", "No", "Unknown"}, {p_yes, (1 - p_yes) / 2, (1 - p_yes) / 2}, 0.0);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("regime tasks carry the expected options", "[harness]") {
  const auto aa = make_task(Regime::kAA, options());
  CHECK(aa.options == std::vector<std::string>{"Yes", "No", "Unknown"});
  CHECK(aa.target() == "Yes");
  CHECK(make_task(Regime::kAC, options()).options == aa.options);
  const auto cc = make_task(Regime::kCC, options());
  CHECK(cc.options == std::vector<std::string>{"A", "B", "Unknown"});
  CHECK(std::string(prompt_template(Regime::kAC)).find("### Answer Choices:\nYes / No / Unknown") != std::string::npos);
  CHECK_THROWS_AS(make_task(Regime::kAA, [](std::string_view) { return 5; }), Error);
}

TEST_CASE("prompt places the item tokens inside the template", "[harness]") {
  const auto task = make_task(Regime::kAC, options());
  const auto item = items("coo", Regime::kAC, 1, 1)[0];
  const auto p = build_prompt(task, item, ValueRegistry::builtin().at("coo"), encoder());
  REQUIRE(p.item_range.span);
  const auto [b, e] = *p.item_range.span;
  REQUIRE(e - b == item.size());
  for (std::size_t i = 0; i < item.size(); ++i) CHECK(p.tokens[b + i] == item.tokens[i].token_id);
}

TEST_CASE("option softmax", "[harness]") {
  const auto task = make_task(Regime::kAA, options());
  std::vector<float> row(256, -50.0f);
  row[2] = 2.0f;
  row[3] = 0.0f;
  row[4] = 0.0f;
  const auto d = distribution_from_logits(row, task, 0.0);
  const std::vector<double> z{2.0, 0.0, 0.0};
  CHECK(d.probabilities[0] == Catch::Approx(oracle::softmax_first(z, 0)).epsilon(1e-12));
  CHECK(d.probabilities[0] == Catch::Approx(0.788).margin(2e-3));
  CHECK(d.probabilities[1] == Catch::Approx(0.106).margin(2e-3));
  row[2] = 0.0f;
  const auto flat = distribution_from_logits(row, task, 0.0);
  for (double p : flat.probabilities) CHECK(p == Catch::Approx(1.0 / 3.0));
}

TEST_CASE("answer distribution needs logits", "[harness]") {
  toy::ToyRuntime rt(toy::init_model({}), {kCapCapture});
  const auto task = make_task(Regime::kAA, options());
  const std::vector<std::int32_t> prompt{9, 10};
  CHECK_THROWS_AS(answer_distribution(rt, task, prompt, {}, 0.0), Error);
}

TEST_CASE("polarization filter examples", "[harness]") {
  const std::vector<AnswerDistribution> base{dist(0.5), dist(0.999), dist(0.9), dist(0.0), dist(1.0)};
  CHECK(filter_polarized(base, "Yes", 2.0) == std::vector<std::size_t>{0});
  CHECK(filter_polarized(base, "Yes", 0.01) == std::vector<std::size_t>{0});
  CHECK(filter_polarized(base, "Yes", 2.2) == std::vector<std::size_t>{0, 2});
  CHECK(relevance_logit(0.9) == Catch::Approx(2.1972).epsilon(1e-4));
}

TEST_CASE("polarization filter is monotone in tau", "[harness]") {
  std::mt19937_64 g(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<AnswerDistribution> base;
  for (int i = 0; i < 200; ++i) base.push_back(dist(u(g)));
  std::vector<std::size_t> prev;
  for (double tau = 0.0; tau <= 6.0; tau += 0.25) {
    const auto kept = filter_polarized(base, "Yes", tau);
    CHECK(std::includes(kept.begin(), kept.end(), prev.begin(), prev.end()));
    prev = kept;
  }
}

TEST_CASE("spearman uses average ranks", "[harness]") {
  const std::vector<double> a{1, 2, 2, 4}, b{10, 20, 25, 40};
  CHECK(spearman(a, b) == Catch::Approx(oracle::spearman(a, b)));
}

TEST_CASE("sweep at alpha zero reproduces the baseline", "[harness]") {
  toy::ToyRuntime rt(toy::init_model({}));
  const auto task = make_task(Regime::kAC, options());
  const auto its = items("coo", Regime::kAC, 5, 2);
  const auto probe = make_probe("coo", 2, unit_dir(1), 0.0f);
  const auto& value = ValueRegistry::builtin().at("coo");
  const auto sw = steer_sweep(rt, task, probe, its, value, encoder());
  CHECK(sw.alphas == default_alpha_grid());
  CHECK(sw.mean_curve.size() == sw.alphas.size());
  const std::size_t zero = 4;
  REQUIRE(sw.alphas[zero] == 0.0);
  for (std::size_t i = 0; i < its.size(); ++i) {
    const auto p = build_prompt(task, its[i], value, encoder());
    const auto base = answer_distribution(rt, task, p.tokens, {}, 0.0);
    CHECK(sw.target_prob[zero][i] == base.probability_of("Yes"));
  }
}

TEST_CASE("zero-norm probes are rejected before a sweep", "[harness]") {
  toy::ToyRuntime rt(toy::init_model({}));
  const auto task = make_task(Regime::kAC, options());
  LinearProbe p;
  p.value = "coo";
  p.weight.assign(64, 0.0f);
  CHECK_THROWS_AS(steer_sweep(rt, task, p, items("coo", Regime::kAC, 2, 1), ValueRegistry::builtin().at("coo"), encoder()),
                  Error);
}

TEST_CASE("histogram has one column per alpha", "[harness]") {
  SweepResult sw;
  sw.alphas = default_alpha_grid();
  std::mt19937_64 g(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  sw.target_prob.assign(9, std::vector<double>(50));
  for (auto& row : sw.target_prob)
    for (auto& p : row) p = u(g);
  sw.target_prob[0][0] = 1.0;
  const auto h = sw.histogram();
  REQUIRE(h.size() == kHistogramBins);
  for (const auto& bin : h) CHECK(bin.size() == 9);
  for (std::size_t a = 0; a < 9; ++a) {
    std::size_t total = 0;
    for (const auto& bin : h) total += bin[a];
    CHECK(total == 50);
  }
  CHECK(SweepResult::from_json(sw.to_json()).to_json() == sw.to_json());
}

TEST_CASE("empty corpus gives a partial report", "[harness]") {
  toy::ToyRuntime rt(toy::init_model({}));
  std::map<std::string, std::vector<ScoredSequence>> corpora;
  corpora["coo"] = items("coo", Regime::kAA, 3, 1);
  corpora["pat"] = {};
  const std::vector<LinearProbe> probes{make_probe("coo", 1, unit_dir(2), 0.0f),
                                        make_probe("pat", 1, unit_dir(3), 0.0f)};
  RegimeRunOptions opt;
  opt.mode = RunMode::kSteer;
  opt.encode = encoder();
  opt.option_token = options();
  opt.tau = 50.0;
  const auto rep = run_regime(Regime::kAA, corpora, probes, rt, opt);
  CHECK(rep.partial());
  CHECK(rep.errors.count("pat") == 1);
  REQUIRE(rep.sweeps.size() == 1);
  CHECK(rep.sweeps[0].value == "coo");
  CHECK(!rep.notes.empty());
}

TEST_CASE("regime mismatch is an error", "[harness]") {
  toy::ToyRuntime rt(toy::init_model({}));
  std::map<std::string, std::vector<ScoredSequence>> corpora{{"coo", items("coo", Regime::kCC, 2, 1)}};
  const std::vector<LinearProbe> probes{make_probe("coo", 1, unit_dir(2), 0.0f)};
  RegimeRunOptions opt;
  opt.encode = encoder();
  opt.option_token = options();
  CHECK_THROWS_AS(run_regime(Regime::kAC, corpora, probes, rt, opt), Error);
}

TEST_CASE("report files are byte-identical across reruns", "[harness]") {
  toy::ToyRuntime rt(toy::init_model({}));
  std::map<std::string, std::vector<ScoredSequence>> corpora{{"coo", items("coo", Regime::kAA, 4, 1)},
                                                             {"pat", items("pat", Regime::kAA, 4, 2)}};
  const std::vector<LinearProbe> probes{make_probe("coo", 2, unit_dir(5), 1.0f),
                                        make_probe("pat", 2, unit_dir(6), 1.0f)};
  RegimeRunOptions opt;
  opt.encode = encoder();
  opt.option_token = options();
  const json manifest{{"seed", 0}};

  const auto root = fs::temp_directory_path() / "vprobe-report-test";
  fs::remove_all(root);
  const auto a = emit_report(run_regime(Regime::kAA, corpora, probes, rt, opt), manifest, root / "a");
  const auto b = emit_report(run_regime(Regime::kAA, corpora, probes, rt, opt), manifest, root / "b");
  REQUIRE(a == b);
  CHECK(std::find(a.begin(), a.end(), "matrix.csv") != a.end());
  CHECK(std::find(a.begin(), a.end(), "dominance.json") != a.end());
  for (const auto& f : a) CHECK(slurp(root / "a" / f) == slurp(root / "b" / f));
  const auto dom = json::parse(slurp(root / "a" / "dominance.json"));
  CHECK(dom.at("column").contains("sum"));
  CHECK(dom.at("column").contains("mean"));
  CHECK(dom.contains("row"));
}

TEST_CASE("sweep histogram CSV has nine alpha columns", "[harness]") {
  toy::ToyRuntime rt(toy::init_model({}));
  std::map<std::string, std::vector<ScoredSequence>> corpora{{"coo", items("coo", Regime::kAC, 50, 7)}};
  const std::vector<LinearProbe> probes{make_probe("coo", 2, unit_dir(8), 0.0f)};
  RegimeRunOptions opt;
  opt.mode = RunMode::kSteer;
  opt.encode = encoder();
  opt.option_token = options();
  const auto rep = run_regime(Regime::kAC, corpora, probes, rt, opt);
  REQUIRE(rep.sweeps.size() == 1);
  const auto dir = fs::temp_directory_path() / "vprobe-hist-test";
  fs::remove_all(dir);
  emit_report(rep, json::object(), dir);
  std::ifstream in(dir / "histogram_coo.csv");
  std::string header;
  std::getline(in, header);
  // Header row is the alpha grid itself.
  CHECK(std::count(header.begin(), header.end(), ',') == 8);
}
