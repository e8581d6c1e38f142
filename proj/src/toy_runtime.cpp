// Copyright (c) 2026, vprobe contributors
// SPDX-License-Identifier: Apache-2.0

#include "vprobe/toy_runtime.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <numbers>

#include "vprobe/hash.hpp"
#include "vprobe/rng.hpp"

namespace vprobe::toy {

// ---- config ----------------------------------------------------------------

void ToyTransformerConfig::validate() const {
  require(vocab_size > ToyTokenizer::kFirstFree, ErrorCode::kConfig,
          "vocab_size must exceed the reserved token block");
  require(d_model > 0 && n_layers > 0 && n_heads > 0 && d_ff > 0 && max_seq_len > 0,
          ErrorCode::kConfig, "toy transformer dimensions must be positive");
  require(d_model % n_heads == 0, ErrorCode::kConfig,
          "d_model " + std::to_string(d_model) + " is not divisible by n_heads " +
              std::to_string(n_heads));
  require(init_std > 0.0, ErrorCode::kConfig, "init_std must be positive");
}

json ToyTransformerConfig::to_json() const {
  return json{{"vocab_size", vocab_size}, {"d_model", d_model},         {"n_layers", n_layers},
              {"n_heads", n_heads},       {"d_ff", d_ff},               {"seed", seed},
              {"max_seq_len", max_seq_len}, {"init_std", init_std}};
}

ToyTransformerConfig ToyTransformerConfig::from_json(const json& j) {
  return from_json(j, ToyTransformerConfig{});
}

ToyTransformerConfig ToyTransformerConfig::from_json(const json& j, ToyTransformerConfig c) {
  try {
    if (j.contains("vocab_size")) c.vocab_size = j.at("vocab_size").get<int>();
    if (j.contains("d_model")) c.d_model = j.at("d_model").get<int>();
    if (j.contains("n_layers")) c.n_layers = j.at("n_layers").get<int>();
    if (j.contains("n_heads")) c.n_heads = j.at("n_heads").get<int>();
    if (j.contains("d_ff")) c.d_ff = j.at("d_ff").get<int>();
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("max_seq_len")) c.max_seq_len = j.at("max_seq_len").get<int>();
    if (j.contains("init_std")) c.init_std = j.at("init_std").get<double>();
  } catch (const json::exception& e) {
    fail(ErrorCode::kConfig, std::string("bad toy config: ") + e.what());
  }
  c.validate();
  return c;
}

// ---- steering --------------------------------------------------------------

void apply_steering_inplace(std::span<float> x, std::span<const float> w, double alpha,
                            double k0) {
  require(x.size() == w.size(), ErrorCode::kDimensionMismatch,
          "steering direction and activation differ in dimension");
  const double norm = euclidean_norm(w);
  require(norm > 0.0, ErrorCode::kInvalidArgument, "steering direction has zero norm");
  if (alpha == 0.0) return;
  const double coef = alpha * k0 / norm;
  for (std::size_t j = 0; j < x.size(); ++j)
    x[j] = static_cast<float>(static_cast<double>(x[j]) + coef * static_cast<double>(w[j]));
}

std::vector<float> apply_steering(std::span<const float> x, std::span<const float> w,
                                  double alpha, double k0) {
  std::vector<float> out(x.begin(), x.end());
  apply_steering_inplace(out, w, alpha, k0);
  return out;
}

TokenLabeler hashed_labeler(std::uint64_t seed) {
  return [seed](std::span<const std::int32_t> tokens, std::size_t pos) {
    const std::uint64_t key =
        (static_cast<std::uint64_t>(static_cast<std::uint32_t>(tokens[pos])) << 32) ^ pos;
    return static_cast<int>(CounterRng::mix(derive_seed(seed, key)) % 7);
  };
}

// ---- parameters ------------------------------------------------------------

struct ToyTransformer::Params {
  struct Layer {
    std::vector<float> ln1_g, ln1_b;
    std::vector<float> w_qkv, b_qkv;  // d x 3d
    std::vector<float> w_o, b_o;      // d x d
    std::vector<float> ln2_g, ln2_b;
    std::vector<float> w_1, b_1;  // d x d_ff
    std::vector<float> w_2, b_2;  // d_ff x d
  };
  std::vector<float> embed;  // vocab x d
  std::vector<float> pos;    // max_seq_len x d
  std::vector<Layer> layers;
  std::vector<float> lnf_g, lnf_b;

  template <typename F>
  void for_each(F&& f) const {
    f(embed);
    f(pos);
    for (const auto& l : layers) {
      f(l.ln1_g), f(l.ln1_b), f(l.w_qkv), f(l.b_qkv), f(l.w_o), f(l.b_o);
      f(l.ln2_g), f(l.ln2_b), f(l.w_1), f(l.b_1), f(l.w_2), f(l.b_2);
    }
    f(lnf_g);
    f(lnf_b);
  }
};

namespace {

std::vector<float> normal_block(CounterRng& rng, std::size_t n, double stddev) {
  std::vector<float> v(n);
  for (auto& x : v) x = static_cast<float>(rng.normal(0.0, stddev));
  return v;
}

void layer_norm(const Matrix& in, std::span<const float> g, std::span<const float> b,
                Matrix& out) {
  constexpr float kEps = 1e-5f;
  const std::size_t d = in.cols();
  out = Matrix(in.rows(), d);
  for (std::size_t t = 0; t < in.rows(); ++t) {
    const auto x = in.row(t);
    float mean = 0.0f;
    for (float v : x) mean += v;
    mean /= static_cast<float>(d);
    float var = 0.0f;
    for (float v : x) var += (v - mean) * (v - mean);
    var /= static_cast<float>(d);
    const float inv = 1.0f / std::sqrt(var + kEps);
    auto y = out.row(t);
    for (std::size_t j = 0; j < d; ++j) y[j] = (x[j] - mean) * inv * g[j] + b[j];
  }
}

// out = in (T x m) * w (m x n) + bias
Matrix affine(const Matrix& in, std::span<const float> w, std::span<const float> bias,
              std::size_t n) {
  const std::size_t m = in.cols();
  Matrix out(in.rows(), n);
  for (std::size_t t = 0; t < in.rows(); ++t) {
    auto y = out.row(t);
    std::copy(bias.begin(), bias.end(), y.begin());
    const auto x = in.row(t);
    for (std::size_t k = 0; k < m; ++k) {
      const float xk = x[k];
      const float* wk = w.data() + k * n;
      for (std::size_t j = 0; j < n; ++j) y[j] += xk * wk[j];
    }
  }
  return out;
}

float gelu(float x) {
  constexpr float kC = 0.7978845608028654f;  // sqrt(2/pi)
  return 0.5f * x * (1.0f + std::tanh(kC * (x + 0.044715f * x * x * x)));
}

}  // namespace

ToyTransformer::ToyTransformer(const ToyTransformerConfig& config) : config_(config) {
  config_.validate();
  const auto d = static_cast<std::size_t>(config_.d_model);
  const auto ff = static_cast<std::size_t>(config_.d_ff);
  const double sd = config_.init_std;
  CounterRng rng(config_.seed);

  auto p = std::make_shared<Params>();
  p->embed = normal_block(rng, static_cast<std::size_t>(config_.vocab_size) * d, sd);
  p->pos = normal_block(rng, static_cast<std::size_t>(config_.max_seq_len) * d, sd);
  for (int l = 0; l < config_.n_layers; ++l) {
    Params::Layer L;
    L.ln1_g.assign(d, 1.0f);
    L.ln1_b.assign(d, 0.0f);
    L.w_qkv = normal_block(rng, d * 3 * d, sd);
    L.b_qkv.assign(3 * d, 0.0f);
    L.w_o = normal_block(rng, d * d, sd);
    L.b_o.assign(d, 0.0f);
    L.ln2_g.assign(d, 1.0f);
    L.ln2_b.assign(d, 0.0f);
    L.w_1 = normal_block(rng, d * ff, sd);
    L.b_1.assign(ff, 0.0f);
    L.w_2 = normal_block(rng, ff * d, sd);
    L.b_2.assign(d, 0.0f);
    p->layers.push_back(std::move(L));
  }
  p->lnf_g.assign(d, 1.0f);
  p->lnf_b.assign(d, 0.0f);
  params_ = std::move(p);

  std::uint64_t h = 0xcbf29ce484222325ULL;
  params_->for_each([&](const std::vector<float>& v) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(v.data());
    for (std::size_t i = 0; i < v.size() * sizeof(float); ++i) {
      h ^= bytes[i];
      h *= 0x100000001b3ULL;
    }
  });
  checksum_ = h;
}

std::uint64_t ToyTransformer::parameter_checksum() const { return checksum_; }

std::string ToyTransformer::model_id() const {
  std::string id = "toy-" + hex64(parameter_checksum()).substr(0, 12);
  if (!signals_.empty() || !readouts_.empty()) id += "-planted";
  return id;
}

json ToyTransformer::metadata() const {
  return json{{"config", config_.to_json()},
              {"seed", config_.seed},
              {"prng", CounterRng::kAlgorithm},
              {"parameter_checksum", hex64(parameter_checksum())},
              {"model_id", model_id()},
              {"planted_signals", signals_.size()},
              {"planted_readouts", readouts_.size()}};
}

ToyTransformer ToyTransformer::with_signal(PlantedSignal signal) const {
  ToyTransformer copy = *this;
  copy.signals_.push_back(std::move(signal));
  return copy;
}

ToyTransformer ToyTransformer::with_readout(PlantedReadout readout) const {
  ToyTransformer copy = *this;
  copy.readouts_.push_back(std::move(readout));
  return copy;
}

Capture ToyTransformer::forward_with_hooks(std::span<const std::int32_t> tokens,
                                           const CaptureRequest& request) const {
  const auto T = tokens.size();
  const auto d = static_cast<std::size_t>(config_.d_model);
  const auto ff = static_cast<std::size_t>(config_.d_ff);
  const auto H = static_cast<std::size_t>(config_.n_heads);
  const std::size_t hd = d / H;
  require(T > 0, ErrorCode::kInvalidArgument, "forward over zero tokens");
  require(T <= static_cast<std::size_t>(config_.max_seq_len), ErrorCode::kInvalidArgument,
          "sequence of length " + std::to_string(T) + " exceeds max_seq_len " +
              std::to_string(config_.max_seq_len));
  for (auto id : tokens)
    require(id >= 0 && id < config_.vocab_size, ErrorCode::kOutOfRange,
            "token id " + std::to_string(id) + " outside vocabulary");
  for (int l : request.layers)
    require(l >= 0 && l < config_.n_layers, ErrorCode::kOutOfRange,
            "capture layer " + std::to_string(l) + " outside [0, " +
                std::to_string(config_.n_layers) + ")");
  for (const auto& s : request.steering) {
    require(s.probe.dim() == d, ErrorCode::kDimensionMismatch,
            "steering direction has dimension " + std::to_string(s.probe.dim()) +
                ", model hidden size is " + std::to_string(d));
    s.validate(config_.n_layers, T);
  }

  const Params& P = *params_;
  Matrix x(T, d);
  for (std::size_t t = 0; t < T; ++t) {
    const float* e = P.embed.data() + static_cast<std::size_t>(tokens[t]) * d;
    const float* p = P.pos.data() + t * d;
    auto xr = x.row(t);
    for (std::size_t j = 0; j < d; ++j) xr[j] = e[j] + p[j];
  }

  Capture cap;
  cap.activations.resize(request.layers.size());
  const float scale = 1.0f / std::sqrt(static_cast<float>(hd));
  Matrix normed;
  std::vector<float> att(T);

  for (int l = 0; l < config_.n_layers; ++l) {
    const auto& L = P.layers[static_cast<std::size_t>(l)];

    layer_norm(x, L.ln1_g, L.ln1_b, normed);
    const Matrix qkv = affine(normed, L.w_qkv, L.b_qkv, 3 * d);
    Matrix ctx(T, d);
    for (std::size_t h = 0; h < H; ++h) {
      for (std::size_t i = 0; i < T; ++i) {
        const float* q = qkv.row(i).data() + h * hd;
        float mx = -INFINITY;
        for (std::size_t j = 0; j <= i; ++j) {
          const float* k = qkv.row(j).data() + d + h * hd;
          float s = 0.0f;
          for (std::size_t c = 0; c < hd; ++c) s += q[c] * k[c];
          att[j] = s * scale;
          mx = std::max(mx, att[j]);
        }
        float z = 0.0f;
        for (std::size_t j = 0; j <= i; ++j) {
          att[j] = std::exp(att[j] - mx);
          z += att[j];
        }
        float* out = ctx.row(i).data() + h * hd;
        for (std::size_t j = 0; j <= i; ++j) {
          const float a = att[j] / z;
          const float* v = qkv.row(j).data() + 2 * d + h * hd;
          for (std::size_t c = 0; c < hd; ++c) out[c] += a * v[c];
        }
      }
    }
    const Matrix attn_out = affine(ctx, L.w_o, L.b_o, d);
    for (std::size_t i = 0; i < x.data().size(); ++i) x.data()[i] += attn_out.data()[i];

    layer_norm(x, L.ln2_g, L.ln2_b, normed);
    Matrix hidden = affine(normed, L.w_1, L.b_1, ff);
    for (auto& v : hidden.data()) v = gelu(v);
    Matrix mlp = affine(hidden, L.w_2, L.b_2, d);

    for (const auto& sig : signals_) {
      if (sig.layer != l || sig.scale == 0.0f) continue;
      for (std::size_t t = 0; t < T; ++t) {
        const float amount = sig.scale * static_cast<float>(sig.labeler(tokens, t));
        if (amount == 0.0f) continue;
        auto row = mlp.row(t);
        for (std::size_t j = 0; j < d; ++j) row[j] += amount * sig.direction[j];
      }
    }
    for (const auto& s : request.steering) {
      if (s.layer != l) continue;
      for (std::size_t t = 0; t < T; ++t)
        if (s.token_range.contains(t))
          apply_steering_inplace(mlp.row(t), s.probe.weight, s.alpha, s.k0);
    }
    for (std::size_t r = 0; r < request.layers.size(); ++r) {
      if (request.layers[r] != l) continue;
      cap.activations[r] = ActivationTensor{l, mlp, model_id()};
    }
    for (std::size_t i = 0; i < x.data().size(); ++i) x.data()[i] += mlp.data()[i];
  }

  if (request.want_logits) {
    layer_norm(x, P.lnf_g, P.lnf_b, normed);
    const auto V = static_cast<std::size_t>(config_.vocab_size);
    Matrix logits(T, V);
    for (std::size_t t = 0; t < T; ++t) {
      const auto h = normed.row(t);
      auto out = logits.row(t);
      for (std::size_t v = 0; v < V; ++v) {
        const float* e = P.embed.data() + v * d;
        float s = 0.0f;
        for (std::size_t j = 0; j < d; ++j) s += h[j] * e[j];
        out[v] = s;
      }
      for (const auto& ro : readouts_) {
        double s = 0.0;
        for (std::size_t j = 0; j < d; ++j)
          s += static_cast<double>(ro.direction[j]) * static_cast<double>(x(t, j));
        out[static_cast<std::size_t>(ro.token_id)] += ro.gain * static_cast<float>(s);
      }
    }
    cap.logits = std::move(logits);
  }
  return cap;
}

namespace {

std::vector<float> unit(std::span<const float> v, std::size_t d) {
  require(v.size() == d, ErrorCode::kDimensionMismatch, "direction dimension mismatch");
  const double n = euclidean_norm(v);
  require(n > 0.0, ErrorCode::kInvalidArgument, "direction has zero norm");
  std::vector<float> out(v.size());
  for (std::size_t j = 0; j < v.size(); ++j) out[j] = static_cast<float>(v[j] / n);
  return out;
}

}  // namespace

ToyTransformer plant_signal(const ToyTransformer& model, int layer,
                            std::span<const float> direction, TokenLabeler labeler, float scale) {
  require(layer >= 0 && layer < model.config().n_layers, ErrorCode::kOutOfRange,
          "plant layer " + std::to_string(layer) + " out of range");
  require(static_cast<bool>(labeler), ErrorCode::kInvalidArgument, "labeler is empty");
  return model.with_signal(
      {layer, unit(direction, static_cast<std::size_t>(model.config().d_model)),
       std::move(labeler), scale});
}

ToyTransformer plant_readout(const ToyTransformer& model, std::span<const float> direction,
                             std::int32_t token_id, float gain) {
  require(token_id >= 0 && token_id < model.config().vocab_size, ErrorCode::kOutOfRange,
          "readout token outside vocabulary");
  return model.with_readout(
      {unit(direction, static_cast<std::size_t>(model.config().d_model)), token_id, gain});
}

// ---- runtime ---------------------------------------------------------------

RuntimeDescriptor toy_descriptor(const ToyTransformer& model,
                                 std::set<std::string> capabilities) {
  RuntimeDescriptor d;
  d.model_id = model.model_id();
  d.n_layers = model.config().n_layers;
  d.hidden_dim = model.config().d_model;
  d.vocab_size = model.config().vocab_size;
  d.capabilities = std::move(capabilities);
  d.validate();
  return d;
}

ToyRuntime::ToyRuntime(ToyTransformer model, std::set<std::string> capabilities)
    : model_(std::move(model)), desc_(toy_descriptor(model_, std::move(capabilities))) {}

ForwardResult ToyRuntime::forward(std::span<const std::int32_t> tokens,
                                  const CaptureRequest& request) {
  request.check_capabilities(desc_);
  request.validate(desc_, tokens.size());
  auto cap = model_.forward_with_hooks(tokens, request);
  return {std::move(cap.activations), std::move(cap.logits)};
}

// ---- tokenizer -------------------------------------------------------------

ToyTokenizer::ToyTokenizer(int vocab_size) : vocab_size_(vocab_size) {
  require(vocab_size > kFirstFree, ErrorCode::kConfig, "vocabulary too small for tokenizer");
}

std::string ToyTokenizer::id() const { return "toy-word-v1/" + std::to_string(vocab_size_); }

std::int32_t ToyTokenizer::token_id(std::string_view word) const {
  static constexpr std::string_view kReserved[] = {"<bos>", "<eos>", "Yes", "No",
                                                   "Unknown", "A", "B"};
  for (std::size_t i = 0; i < std::size(kReserved); ++i)
    if (word == kReserved[i]) return static_cast<std::int32_t>(i);
  return kFirstFree +
         static_cast<std::int32_t>(fnv1a64(word) % static_cast<std::uint64_t>(vocab_size_ - kFirstFree));
}

std::vector<data::TokenSurface> ToyTokenizer::encode(std::string_view text, bool add_bos) const {
  std::vector<data::TokenSurface> out;
  if (add_bos) out.push_back({"<bos>", kBos, true});
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t j = i;
    while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
    if (j > i) {
      const auto word = text.substr(i, j - i);
      out.push_back({"\xE2\x96\x81" + std::string(word), token_id(word), false});
    }
    i = j;
  }
  return out;
}

std::vector<std::int32_t> ToyTokenizer::encode_ids(std::string_view text) const {
  std::vector<std::int32_t> ids;
  for (const auto& t : encode(text)) ids.push_back(t.id);
  return ids;
}

// ---- superposition ---------------------------------------------------------

void SuperpositionConfig::validate() const {
  require(d > 0, ErrorCode::kConfig, "ambient dimension must be positive");
  require(n_features >= 1, ErrorCode::kConfig, "need at least one feature");
  require(sparsity > 0.0 && sparsity <= n_features, ErrorCode::kConfig,
          "sparsity must lie in (0, n_features]");
  require(coherence_bound > 0.0 && coherence_bound <= 1.0, ErrorCode::kConfig,
          "coherence_bound must lie in (0, 1]");
  require(max_coefficient > 0.0, ErrorCode::kConfig, "max_coefficient must be positive");
  require(seq_len > 0, ErrorCode::kConfig, "seq_len must be positive");
}

double max_coherence(const Matrix& dict) {
  double worst = 0.0;
  for (std::size_t a = 0; a < dict.rows(); ++a)
    for (std::size_t b = a + 1; b < dict.rows(); ++b) {
      double dot = 0.0;
      for (std::size_t j = 0; j < dict.cols(); ++j)
        dot += static_cast<double>(dict(a, j)) * dict(b, j);
      const double na = euclidean_norm(dict.row(a)), nb = euclidean_norm(dict.row(b));
      worst = std::max(worst, std::abs(dot) / (na * nb));
    }
  return worst;
}

Matrix generate_dictionary(const SuperpositionConfig& config) {
  config.validate();
  const auto d = static_cast<std::size_t>(config.d);
  const auto n = static_cast<std::size_t>(config.n_features);
  CounterRng rng(derive_seed(config.seed, 0xd1c7));
  Matrix dict(n, d);
  std::vector<double> cand(d);
  for (std::size_t i = 0; i < n; ++i) {
    bool placed = false;
    for (int attempt = 0; attempt < config.max_retries && !placed; ++attempt) {
      double norm = 0.0;
      for (auto& c : cand) {
        c = rng.normal();
        norm += c * c;
      }
      norm = std::sqrt(norm);
      std::vector<float> v(d);
      for (std::size_t j = 0; j < d; ++j) v[j] = static_cast<float>(cand[j] / norm);
      const double vn = euclidean_norm(v);
      placed = true;
      for (std::size_t k = 0; k < i && placed; ++k) {
        double dot = 0.0;
        for (std::size_t j = 0; j < d; ++j) dot += static_cast<double>(v[j]) * dict(k, j);
        placed = std::abs(dot) / (vn * euclidean_norm(dict.row(k))) <= config.coherence_bound;
      }
      if (placed) std::copy(v.begin(), v.end(), dict.row(i).begin());
    }
    require(placed, ErrorCode::kInvalidArgument,
            "coherence bound " + std::to_string(config.coherence_bound) +
                " infeasible for feature " + std::to_string(i) + " after " +
                std::to_string(config.max_retries) + " retries");
  }
  return dict;
}

int quantize_score(double c) {
  return std::clamp(static_cast<int>(std::lround(c)), kMinScore, kMaxScore);
}

SuperpositionData generate_superposition_dataset(const SuperpositionConfig& config,
                                                 const Matrix& dictionary,
                                                 const SuperpositionDraw& draw) {
  config.validate();
  const auto d = static_cast<std::size_t>(config.d);
  const auto nf = static_cast<std::size_t>(config.n_features);
  require(dictionary.rows() == nf && dictionary.cols() == d, ErrorCode::kDimensionMismatch,
          "dictionary shape does not match config");
  require(draw.target_feature < nf, ErrorCode::kOutOfRange, "target feature out of range");
  require(!draw.dominant_feature || *draw.dominant_feature < nf, ErrorCode::kOutOfRange,
          "dominant feature out of range");
  require(draw.n_tokens > 0, ErrorCode::kInvalidArgument, "n_tokens must be positive");

  CounterRng rng(derive_seed(config.seed, 0x5eed0000ULL + draw.stream));
  const double p_active = std::min(1.0, config.sparsity / static_cast<double>(nf));
  const double cmax = config.max_coefficient;

  SuperpositionData out;
  out.dictionary = dictionary;
  out.coefficients = Matrix(draw.n_tokens, nf);
  Matrix acts(draw.n_tokens, d);
  for (std::size_t t = 0; t < draw.n_tokens; ++t) {
    for (std::size_t i = 0; i < nf; ++i) {
      double c = 0.0;
      if (draw.dominant_feature && *draw.dominant_feature == i) {
        c = rng.uniform(0.5 * cmax, cmax);
      } else if (rng.uniform() < p_active) {
        c = cmax * (1.0 - rng.uniform());  // (0, cmax]
      }
      out.coefficients(t, i) = static_cast<float>(c);
      if (c == 0.0) continue;
      auto row = acts.row(t);
      for (std::size_t j = 0; j < d; ++j) row[j] += static_cast<float>(c) * dictionary(i, j);
    }
  }

  const auto L = static_cast<std::size_t>(config.seq_len);
  for (std::size_t start = 0; start < draw.n_tokens; start += L) {
    const std::size_t stop = std::min(draw.n_tokens, start + L);
    probe::LabeledActivations item;
    item.activations.layer = 0;
    item.activations.model_id = "superposition";
    item.activations.data = Matrix(stop - start, d);
    for (std::size_t t = start; t < stop; ++t) {
      std::copy_n(acts.row(t).begin(), d, item.activations.data.row(t - start).begin());
      item.sequence.tokens.push_back(
          {"f", static_cast<std::int32_t>(t),
           quantize_score(out.coefficients(t, draw.target_feature)), false});
    }
    item.sequence.value = draw.value.empty() ? "f" + std::to_string(draw.target_feature) : draw.value;
    item.sequence.source = "superposition";
    item.sequence.tokenizer_id = "synthetic";
    out.sequences.push_back(std::move(item));
  }
  return out;
}

SuperpositionData generate_superposition_dataset(const SuperpositionConfig& config,
                                                 std::size_t n_tokens,
                                                 std::size_t target_feature) {
  return generate_superposition_dataset(config, generate_dictionary(config),
                                        {n_tokens, target_feature, std::nullopt, {}, 0});
}

}  // namespace vprobe::toy
