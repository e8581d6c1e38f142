// Copyright (c) 2026, vprobe contributors
// SPDX-License-Identifier: Apache-2.0

#include "vprobe/types.hpp"

#include <zlib.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "vprobe/hash.hpp"

namespace vprobe {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvariant: return "invariant";
    case ErrorCode::kInvalidArgument: return "invalid_argument";
    case ErrorCode::kDimensionMismatch: return "dimension_mismatch";
    case ErrorCode::kIo: return "io";
    case ErrorCode::kMalformed: return "malformed";
    case ErrorCode::kChecksum: return "checksum";
    case ErrorCode::kUnsupported: return "unsupported";
    case ErrorCode::kAlignment: return "alignment";
    case ErrorCode::kUndefinedCorrelation: return "undefined_correlation";
    case ErrorCode::kEmpty: return "empty";
    case ErrorCode::kOutOfRange: return "out_of_range";
    case ErrorCode::kCapability: return "capability_missing";
    case ErrorCode::kVersionMismatch: return "version_mismatch";
    case ErrorCode::kProtocol: return "protocol";
    case ErrorCode::kTimeout: return "timeout";
    case ErrorCode::kPeer: return "peer";
    case ErrorCode::kConfig: return "config";
  }
  return "unknown";
}

ErrorCode error_code_from_string(std::string_view name) {
  for (int i = 0; i <= static_cast<int>(ErrorCode::kConfig); ++i) {
    const auto c = static_cast<ErrorCode>(i);
    if (to_string(c) == name) return c;
  }
  return ErrorCode::kPeer;
}

// ---- hashing ---------------------------------------------------------------

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes) {
  return fnv1a64(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::uint32_t crc32(std::span<const std::uint8_t> bytes) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed in chunks.
  std::size_t off = 0;
  while (off < bytes.size()) {
    const std::size_t n = std::min<std::size_t>(bytes.size() - off, 1u << 30);
    crc = ::crc32(crc, bytes.data() + off, static_cast<uInt>(n));
    off += n;
  }
  return static_cast<std::uint32_t>(crc);
}

// ---- value registry --------------------------------------------------------

ValueRegistry::ValueRegistry(std::vector<ValueDimension> dims) {
  for (auto& d : dims) add(std::move(d));
}

const ValueRegistry& ValueRegistry::builtin() {
  static const ValueRegistry registry({
      {"pat", "patriotism", "Pat"},
      {"equ", "equality", "Equ"},
      {"int", "integrity", "Int"},
      {"coo", "cooperation", "Coo"},
      {"ind", "individualism", "Ind"},
      {"dis", "discipline", "Dis"},
      {"cur", "curiosity", "Cur"},
      {"cou", "courage", "Cou"},
      {"sat", "satiety", "Sat"},
      {"res", "rest", "Res"},
  });
  return registry;
}

void ValueRegistry::add(ValueDimension dim) {
  require(!dim.id.empty(), ErrorCode::kInvariant, "value id must be non-empty");
  require(dim.abbreviation.size() == 3 &&
              std::all_of(dim.abbreviation.begin(), dim.abbreviation.end(),
                          [](unsigned char c) { return std::isalpha(c); }),
          ErrorCode::kInvariant,
          "value abbreviation must be exactly 3 letters: '" + dim.abbreviation + "'");
  require(!contains(dim.id), ErrorCode::kInvariant, "duplicate value id: " + dim.id);
  dims_.push_back(std::move(dim));
}

bool ValueRegistry::contains(std::string_view id) const {
  return std::any_of(dims_.begin(), dims_.end(), [&](const auto& d) { return d.id == id; });
}

const ValueDimension& ValueRegistry::at(std::string_view id) const {
  for (const auto& d : dims_)
    if (d.id == id) return d;
  fail(ErrorCode::kInvalidArgument, "unknown value dimension: " + std::string(id));
}

// ---- enums -----------------------------------------------------------------

std::string_view to_string(Regime r) {
  switch (r) {
    case Regime::kAA: return "AA";
    case Regime::kAC: return "AC";
    case Regime::kCC: return "CC";
  }
  return "?";
}

std::string_view to_string(Split s) {
  return s == Split::kTrain ? "train" : "validation";
}

Regime parse_regime(std::string_view s) {
  if (s == "AA" || s == "A-A") return Regime::kAA;
  if (s == "AC" || s == "A-C") return Regime::kAC;
  if (s == "CC" || s == "C-C") return Regime::kCC;
  fail(ErrorCode::kInvalidArgument, "unknown regime: " + std::string(s));
}

Split parse_split(std::string_view s) {
  if (s == "train") return Split::kTrain;
  if (s == "validation") return Split::kValidation;
  fail(ErrorCode::kInvalidArgument, "unknown split: " + std::string(s));
}

// ---- sequences -------------------------------------------------------------

std::vector<std::int32_t> ScoredSequence::token_ids() const {
  std::vector<std::int32_t> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(t.token_id);
  return ids;
}

std::vector<std::size_t> ScoredSequence::scored_indices() const {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < tokens.size(); ++i)
    if (!tokens[i].special) idx.push_back(i);
  return idx;
}

void ScoredSequence::validate() const {
  require(!tokens.empty(), ErrorCode::kInvariant, "sequence has no tokens");
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const auto& t = tokens[i];
    require(t.score >= kMinScore && t.score <= kMaxScore, ErrorCode::kInvariant,
            "score out of range at token " + std::to_string(i) + ": " + std::to_string(t.score));
    require(t.token_id >= 0, ErrorCode::kInvariant,
            "negative token id at token " + std::to_string(i));
  }
}

// ---- probes ----------------------------------------------------------------

double euclidean_norm(std::span<const float> v) {
  double s = 0.0;
  for (float x : v) s += static_cast<double>(x) * x;
  return std::sqrt(s);
}

void LinearProbe::validate() const {
  require(readout == kReadoutRelu, ErrorCode::kUnsupported, "unsupported readout: " + readout);
  require(!weight.empty(), ErrorCode::kInvariant, "probe weight is empty");
  require(std::any_of(weight.begin(), weight.end(), [](float x) { return x != 0.0f; }),
          ErrorCode::kInvariant, "probe weight has no nonzero entry");
  require(std::all_of(weight.begin(), weight.end(), [](float x) { return std::isfinite(x); }) &&
              std::isfinite(bias),
          ErrorCode::kInvariant, "probe parameters must be finite");
  const double norm = euclidean_norm(weight);
  require(weight_norm > 0.0 && std::abs(weight_norm - norm) <= 1e-6 * norm,
          ErrorCode::kInvariant, "cached weight_norm does not match weight");
  require(layer >= 0, ErrorCode::kInvariant, "negative probe layer");
}

LinearProbe make_probe(std::string value, int layer, std::vector<float> weight, float bias,
                       std::string train_config_digest) {
  LinearProbe p;
  p.value = std::move(value);
  p.layer = layer;
  p.weight = std::move(weight);
  p.bias = bias;
  p.weight_norm = euclidean_norm(p.weight);
  p.train_config_digest = std::move(train_config_digest);
  p.validate();
  return p;
}

// ---- training config -------------------------------------------------------

void ProbeTrainConfig::validate() const {
  require(learning_rate > 0.0 && std::isfinite(learning_rate), ErrorCode::kConfig,
          "learning_rate must be positive");
  require(batch_size > 0, ErrorCode::kConfig, "batch_size must be positive");
  require(epochs > 0, ErrorCode::kConfig, "epochs must be positive");
  require(l1_coefficient >= 0.0 && std::isfinite(l1_coefficient), ErrorCode::kConfig,
          "l1_coefficient must be nonnegative");
  require(optimizer == "adam", ErrorCode::kConfig, "only the adam optimizer is supported");
}

std::string ProbeTrainConfig::digest() const { return hex64(fnv1a64(to_json(*this).dump())); }

json to_json(const ProbeTrainConfig& cfg) {
  return json{{"learning_rate", cfg.learning_rate}, {"batch_size", cfg.batch_size},
              {"epochs", cfg.epochs},               {"l1_coefficient", cfg.l1_coefficient},
              {"seed", cfg.seed},                   {"optimizer", cfg.optimizer},
              {"exclude_special", cfg.exclude_special}};
}

ProbeTrainConfig train_config_from_json(const json& j, ProbeTrainConfig cfg) {
  try {
    if (j.contains("learning_rate")) cfg.learning_rate = j.at("learning_rate").get<double>();
    if (j.contains("batch_size")) cfg.batch_size = j.at("batch_size").get<std::size_t>();
    if (j.contains("epochs")) cfg.epochs = j.at("epochs").get<std::size_t>();
    if (j.contains("l1_coefficient")) cfg.l1_coefficient = j.at("l1_coefficient").get<double>();
    if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("optimizer")) cfg.optimizer = j.at("optimizer").get<std::string>();
    if (j.contains("exclude_special")) cfg.exclude_special = j.at("exclude_special").get<bool>();
  } catch (const json::exception& e) {
    fail(ErrorCode::kConfig, std::string("bad training config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

// ---- steering --------------------------------------------------------------

void TokenRange::validate(std::size_t seq_len) const {
  if (!span) return;
  require(span->first < span->second && span->second <= seq_len, ErrorCode::kOutOfRange,
          "token range [" + std::to_string(span->first) + ", " + std::to_string(span->second) +
              ") outside sequence of length " + std::to_string(seq_len));
}

void SteeringSpec::validate(int n_layers, std::size_t seq_len) const {
  require(layer >= 0 && layer < n_layers, ErrorCode::kOutOfRange,
          "steering layer " + std::to_string(layer) + " outside [0, " +
              std::to_string(n_layers) + ")");
  require(k0 > 0.0 && std::isfinite(k0), ErrorCode::kInvalidArgument, "k0 must be positive");
  require(std::isfinite(alpha), ErrorCode::kInvalidArgument, "alpha must be finite");
  require(probe.weight_norm > 0.0, ErrorCode::kInvalidArgument,
          "steering direction has zero norm");
  token_range.validate(seq_len);
}

// ---- cross matrix ----------------------------------------------------------

void CrossValMatrix::validate() const {
  require(cells.size() == values.size() * values.size(), ErrorCode::kInvariant,
          "cross matrix is not square");
}

CrossValMatrix make_cross_matrix(std::vector<std::string> values,
                                 const std::vector<std::vector<double>>& rows) {
  CrossValMatrix m;
  m.values = std::move(values);
  require(rows.size() == m.values.size(), ErrorCode::kInvariant, "cross matrix is not square");
  for (const auto& r : rows) {
    require(r.size() == m.values.size(), ErrorCode::kInvariant, "cross matrix is not square");
    m.cells.insert(m.cells.end(), r.begin(), r.end());
  }
  return m;
}

json to_json(const CrossValMatrix& m) {
  json rows = json::array();
  for (std::size_t i = 0; i < m.size(); ++i) {
    json r = json::array();
    for (std::size_t j = 0; j < m.size(); ++j) r.push_back(m.at(i, j));
    rows.push_back(std::move(r));
  }
  return json{{"values", m.values}, {"cells", rows}};
}

CrossValMatrix cross_matrix_from_json(const json& j) {
  return make_cross_matrix(j.at("values").get<std::vector<std::string>>(),
                           j.at("cells").get<std::vector<std::vector<double>>>());
}

// ---- answer distributions --------------------------------------------------

double AnswerDistribution::probability_of(std::string_view option) const {
  for (std::size_t i = 0; i < options.size(); ++i)
    if (options[i] == option) return probabilities[i];
  fail(ErrorCode::kInvalidArgument, "unknown option: " + std::string(option));
}

void AnswerDistribution::validate() const {
  require(options.size() == probabilities.size() && !options.empty(), ErrorCode::kInvariant,
          "options and probabilities differ in length");
  double sum = 0.0;
  for (double p : probabilities) {
    require(p >= 0.0 && p <= 1.0, ErrorCode::kInvariant, "probability outside [0, 1]");
    sum += p;
  }
  require(std::abs(sum - 1.0) <= 1e-6, ErrorCode::kInvariant, "probabilities do not sum to 1");
}

AnswerDistribution make_answer_distribution(std::vector<std::string> options,
                                            std::vector<double> probabilities, double alpha) {
  AnswerDistribution d{std::move(options), std::move(probabilities), alpha};
  d.validate();
  return d;
}

json to_json(const AnswerDistribution& d) {
  return json{{"options", d.options}, {"probabilities", d.probabilities}, {"alpha", d.alpha}};
}

AnswerDistribution answer_distribution_from_json(const json& j) {
  return make_answer_distribution(j.at("options").get<std::vector<std::string>>(),
                                  j.at("probabilities").get<std::vector<double>>(),
                                  j.at("alpha").get<double>());
}

// ---- sequence JSON ---------------------------------------------------------

json to_json(const ScoredSequence& seq) {
  json toks = json::array();
  for (const auto& t : seq.tokens) {
    json e = json::array({t.text, t.token_id, t.score});
    if (t.special) e.push_back(true);
    toks.push_back(std::move(e));
  }
  return json{{"tokens", std::move(toks)},
              {"value", seq.value},
              {"regime", to_string(seq.regime)},
              {"split", to_string(seq.split)},
              {"source", seq.source},
              {"tokenizer_id", seq.tokenizer_id}};
}

ScoredSequence sequence_from_json(const json& j) {
  require(j.is_object(), ErrorCode::kMalformed, "sequence record is not an object");
  ScoredSequence seq;
  try {
    for (const auto& e : j.at("tokens")) {
      require(e.is_array() && (e.size() == 3 || e.size() == 4), ErrorCode::kMalformed,
              "token entry must be [text, token_id, score(, special)]");
      ScoredToken t;
      t.text = e[0].get<std::string>();
      t.token_id = e[1].get<std::int32_t>();
      t.score = e[2].get<int>();
      if (e.size() == 4) t.special = e[3].get<bool>();
      seq.tokens.push_back(std::move(t));
    }
    seq.value = j.at("value").get<std::string>();
    seq.regime = parse_regime(j.at("regime").get<std::string>());
    seq.split = parse_split(j.at("split").get<std::string>());
    seq.source = j.value("source", std::string{});
    seq.tokenizer_id = j.at("tokenizer_id").get<std::string>();
  } catch (const json::exception& e) {
    fail(ErrorCode::kMalformed, std::string("bad sequence record: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kInvalidArgument) fail(ErrorCode::kMalformed, e.what());
    throw;
  }
  seq.validate();
  return seq;
}

}  // namespace vprobe
