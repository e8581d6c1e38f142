// Copyright (c) 2026, vprobe contributors
// SPDX-License-Identifier: Apache-2.0
//
// vprobe command-line front end.
//
// Exit codes: 0 success, 1 runtime error, 2 partial failure, 3 configuration error.

#include <CLI11.hpp>

#include <algorithm>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>

#include "vprobe/analysis.hpp"
#include "vprobe/bridge.hpp"
#include "vprobe/corpus_io.hpp"
#include "vprobe/dataset.hpp"
#include "vprobe/harness.hpp"
#include "vprobe/probe_engine.hpp"
#include "vprobe/probe_io.hpp"
#include "vprobe/toy_runtime.hpp"
#include "vprobe/transport.hpp"

namespace fs = std::filesystem;
using namespace vprobe;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitPartial = 2;
constexpr int kExitConfig = 3;
constexpr const char* kToolVersion = "0.1.0";

struct Globals {
  std::uint64_t seed = 0;
  std::string runtime = "in-process";
  std::string out = "out";
  std::string config_path;
};

struct Settings {
  ProbeTrainConfig train;
  toy::ToyTransformerConfig toy;
  double k0 = kDefaultK0;
  double tau = harness::kDefaultTau;
  std::vector<double> alphas = harness::default_alpha_grid();
  json raw = json::object();
};

Settings load_settings(const Globals& g) {
  Settings s;
  if (!g.config_path.empty()) {
    std::ifstream in(g.config_path);
    require(in.good(), ErrorCode::kConfig, "cannot read config " + g.config_path);
    try {
      s.raw = json::parse(in);
    } catch (const json::exception& e) {
      fail(ErrorCode::kConfig, std::string("config is not JSON: ") + e.what());
    }
    require(s.raw.is_object(), ErrorCode::kConfig, "config must be a JSON object");
    try {
      if (s.raw.contains("train")) s.train = train_config_from_json(s.raw["train"]);
      if (s.raw.contains("toy")) s.toy = toy::ToyTransformerConfig::from_json(s.raw["toy"]);
      if (s.raw.contains("steering")) {
        const json& st = s.raw["steering"];
        s.k0 = st.value("k0", s.k0);
        s.tau = st.value("tau", s.tau);
        if (st.contains("alphas")) s.alphas = st["alphas"].get<std::vector<double>>();
      }
    } catch (const json::exception& e) {
      fail(ErrorCode::kConfig, std::string("bad config field: ") + e.what());
    } catch (const Error& e) {
      fail(ErrorCode::kConfig, e.what());
    }
  }
  s.train.seed = g.seed;
  s.toy.seed = g.seed;
  s.train.validate();
  s.toy.validate();
  require(s.k0 > 0.0, ErrorCode::kConfig, "k0 must be positive");
  require(!s.alphas.empty(), ErrorCode::kConfig, "alpha grid is empty");
  return s;
}

std::unique_ptr<Runtime> open_runtime(const Globals& g, const Settings& s) {
  if (g.runtime == "in-process")
    return std::make_unique<toy::ToyRuntime>(toy::init_model(s.toy));
  return std::make_unique<bridge::RemoteRuntime>(bridge::open_channel(g.runtime));
}

json base_manifest(const Globals& g, const Settings& s, const Runtime& rt) {
  return json{{"tool", "vprobe"},
              {"version", kToolVersion},
              {"seed", g.seed},
              {"runtime", g.runtime},
              {"model_id", rt.descriptor().model_id},
              {"train_config", to_json(s.train)},
              {"train_config_digest", s.train.digest()},
              {"k0", s.k0},
              {"tau", s.tau},
              {"alphas", s.alphas}};
}

std::map<std::string, std::vector<ScoredSequence>> group_by_value(
    const std::vector<ScoredSequence>& seqs, std::optional<Split> split = std::nullopt) {
  std::map<std::string, std::vector<ScoredSequence>> out;
  for (const auto& s : seqs)
    if (!split || s.split == *split) out[s.value].push_back(s);
  return out;
}

std::vector<int> all_layers(const Runtime& rt) {
  std::vector<int> l(static_cast<std::size_t>(rt.descriptor().n_layers));
  for (std::size_t i = 0; i < l.size(); ++i) l[i] = static_cast<int>(i);
  return l;
}

// by_layer[i] holds one LabeledActivations per sequence at layers[i].
std::vector<std::vector<probe::LabeledActivations>> capture(Runtime& rt,
                                                            const std::vector<ScoredSequence>& seqs,
                                                            const std::vector<int>& layers) {
  std::vector<std::vector<probe::LabeledActivations>> by_layer(layers.size());
  CaptureRequest req;
  req.layers = layers;
  for (const auto& s : seqs) {
    auto r = rt.forward(s.token_ids(), req);
    for (std::size_t i = 0; i < layers.size(); ++i)
      by_layer[i].push_back({std::move(r.activations[i]), s});
  }
  return by_layer;
}

std::string probe_file_name(const std::string& value, int layer) {
  return value + "_L" + std::to_string(layer) + ".vprobe";
}

std::vector<LinearProbe> load_probe_dir(const fs::path& dir) {
  require(fs::is_directory(dir), ErrorCode::kConfig, "probe directory not found: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.path().extension() == ".vprobe") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::vector<LinearProbe> out;
  for (const auto& f : files) out.push_back(load_probe(f));
  return out;
}

// One probe per value: the selected layer when a selection file is given,
// otherwise `layer`, otherwise the only probe on file.
std::vector<LinearProbe> pick_probes(const std::vector<LinearProbe>& all,
                                     const std::string& selection_path, std::optional<int> layer) {
  std::map<std::string, int> chosen;
  if (!selection_path.empty()) {
    std::ifstream in(selection_path);
    require(in.good(), ErrorCode::kConfig, "cannot read selection " + selection_path);
    const json j = json::parse(in, nullptr, false);
    require(j.is_object(), ErrorCode::kConfig, "selection file must be a JSON object");
    for (const auto& [v, l] : j.items()) chosen[v] = l.get<int>();
  }
  std::map<std::string, std::vector<LinearProbe>> by_value;
  for (const auto& p : all) by_value[p.value].push_back(p);
  std::vector<LinearProbe> out;
  for (const auto& [value, ps] : by_value) {
    std::optional<int> want = layer;
    if (auto it = chosen.find(value); it != chosen.end()) want = it->second;
    if (!want) {
      require(ps.size() == 1, ErrorCode::kConfig,
              "several probes for " + value + "; pass --layer or --selection");
      out.push_back(ps.front());
      continue;
    }
    const auto it = std::find_if(ps.begin(), ps.end(), [&](const auto& p) { return p.layer == *want; });
    require(it != ps.end(), ErrorCode::kConfig,
            "no probe for " + value + " at layer " + std::to_string(*want));
    out.push_back(*it);
  }
  require(!out.empty(), ErrorCode::kConfig, "no probes found");
  return out;
}

int finish(const harness::RegimeReport& rep, const json& manifest, const fs::path& out) {
  const auto files = harness::emit_report(rep, manifest, out);
  for (const auto& f : files) std::cout << (out / f).string() << "\n";
  for (const auto& [v, e] : rep.errors) std::cerr << "value " << v << ": " << e << "\n";
  return rep.partial() ? kExitPartial : kExitOk;
}

// ---- subcommands -------------------------------------------------------------------

struct IngestArgs {
  std::string words;
  std::string validate;
  std::string value;
  std::string regime = "AA";
  double train_fraction = 0.9;
  int vocab = 256;
};

int cmd_ingest(const Globals& g, const IngestArgs& a) {
  if (!a.validate.empty()) {
    const auto rep = data::validate_corpus(a.validate);
    std::cout << rep.to_json().dump(2) << "\n";
    return rep.errors.empty() ? kExitOk : kExitPartial;
  }
  require(!a.words.empty(), ErrorCode::kConfig, "ingest needs --words or --validate");
  require(a.train_fraction > 0.0 && a.train_fraction < 1.0, ErrorCode::kConfig,
          "train fraction must lie in (0, 1)");
  const Regime default_regime = parse_regime(a.regime);
  const toy::ToyTokenizer tok(a.vocab);
  std::ifstream in(a.words);
  require(in.good(), ErrorCode::kConfig, "cannot read " + a.words);

  std::vector<ScoredSequence> seqs;
  json failures = json::array();
  std::string line;
  for (std::size_t n = 1; std::getline(in, line); ++n) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      const auto text = data::word_scored_text_from_json(j);
      data::SequenceMeta meta;
      meta.value = j.value("value", a.value);
      require(!meta.value.empty(), ErrorCode::kInvalidArgument, "record has no value; pass --value");
      ValueRegistry::builtin().at(meta.value);
      meta.regime = j.contains("regime") ? parse_regime(j["regime"].get<std::string>()) : default_regime;
      meta.source = j.value("source", a.words + ":" + std::to_string(n));
      meta.tokenizer_id = tok.id();
      seqs.push_back(data::align_word_scores(text, tok.encode(text.raw_text, true), meta));
    } catch (const json::exception& e) {
      failures.push_back({{"line", n}, {"message", e.what()}});
    } catch (const Error& e) {
      failures.push_back({{"line", n}, {"message", e.what()}});
    }
  }
  require(!seqs.empty(), ErrorCode::kEmpty, "no record could be ingested");

  // Split each value separately so every value keeps the same ratio.
  std::vector<ScoredSequence> all;
  json counts = json::object();
  for (auto& [value, group] : group_by_value(seqs)) {
    auto split = data::split_dataset(std::move(group), a.train_fraction);
    counts[value] = {{"train", split.train.size()}, {"validation", split.validation.size()}};
    for (auto& s : split.train) all.push_back(std::move(s));
    for (auto& s : split.validation) all.push_back(std::move(s));
  }
  const fs::path out(g.out);
  write_corpus(out / "corpus.jsonl", all);
  write_text(out / "ingest_report.json",
             json{{"tokenizer", tok.id()}, {"counts", counts}, {"failures", failures}, {"seed", g.seed}}
                     .dump(2) + "\n");
  std::cout << (out / "corpus.jsonl").string() << "\n";
  return failures.empty() ? kExitOk : kExitPartial;
}

struct TrainArgs {
  std::string corpus;
  std::vector<int> layers;
  bool overwrite = false;
};

int cmd_train(const Globals& g, const TrainArgs& a) {
  const Settings s = load_settings(g);
  auto rt = open_runtime(g, s);
  const auto layers = a.layers.empty() ? all_layers(*rt) : a.layers;
  const auto train = group_by_value(read_corpus(a.corpus), Split::kTrain);
  require(!train.empty(), ErrorCode::kEmpty, "corpus has no training sequences");
  const fs::path out(g.out);
  json reports = json::object();
  for (const auto& [value, seqs] : train) {
    const auto by_layer = capture(*rt, seqs, layers);
    const auto fits = probe::train_probe_stack(by_layer, s.train);
    for (const auto& f : fits) {
      save_probe(f.probe, out / "probes" / probe_file_name(value, f.probe.layer), a.overwrite);
      reports[value][std::to_string(f.probe.layer)] = f.report.to_json();
      std::cerr << value << " L" << f.probe.layer << " loss " << f.report.final_loss << "\n";
    }
  }
  json man = base_manifest(g, s, *rt);
  man["reports"] = reports;
  write_text(out / "train_manifest.json", man.dump(2) + "\n");
  return kExitOk;
}

struct SelectArgs {
  std::string corpus;
  std::string probes;
};

int cmd_select(const Globals& g, const SelectArgs& a) {
  const Settings s = load_settings(g);
  auto rt = open_runtime(g, s);
  const auto val = group_by_value(read_corpus(a.corpus), Split::kValidation);
  const auto probes = load_probe_dir(a.probes);
  const fs::path out(g.out);
  json selection = json::object();
  json profiles = json::array();
  int rc = kExitOk;
  for (const auto& [value, seqs] : val) {
    std::vector<LinearProbe> stack;
    for (const auto& p : probes)
      if (p.value == value) stack.push_back(p);
    std::sort(stack.begin(), stack.end(), [](const auto& x, const auto& y) { return x.layer < y.layer; });
    if (stack.empty()) {
      std::cerr << "no probes for " << value << "\n";
      rc = kExitPartial;
      continue;
    }
    std::vector<int> layers;
    for (const auto& p : stack) layers.push_back(p.layer);
    try {
      const auto by_layer = capture(*rt, seqs, layers);
      const auto prof = analysis::select_diagnostic_probe(stack, by_layer);
      selection[value] = prof.selected_layer;
      profiles.push_back(prof.to_json());
    } catch (const Error& e) {
      std::cerr << value << ": " << e.what() << "\n";
      rc = kExitPartial;
    }
  }
  write_text(out / "selection.json", selection.dump(2) + "\n");
  write_text(out / "layer_profiles.json", profiles.dump(2) + "\n");
  std::cout << (out / "selection.json").string() << "\n";
  return rc;
}

struct RegimeArgs {
  std::string corpus;
  std::string probes;
  std::string selection;
  std::optional<int> layer;
  std::string regime = "AA";
  std::optional<double> tau;
  std::optional<double> k0;
  std::string split = "validation";
};

int cmd_regime(const Globals& g, const RegimeArgs& a, harness::RunMode mode) {
  Settings s = load_settings(g);
  if (a.tau) s.tau = *a.tau;
  if (a.k0) s.k0 = *a.k0;
  require(s.tau >= 0.0, ErrorCode::kConfig, "tau must be non-negative");
  auto rt = open_runtime(g, s);
  const Regime regime = parse_regime(a.regime);
  const auto corpora = group_by_value(read_corpus(a.corpus), parse_split(a.split));
  const auto probes = pick_probes(load_probe_dir(a.probes), a.selection, a.layer);

  const toy::ToyTokenizer tok(rt->descriptor().vocab_size);
  harness::RegimeRunOptions opt;
  opt.mode = mode;
  opt.tau = s.tau;
  opt.sweep.alphas = s.alphas;
  opt.sweep.k0 = s.k0;
  opt.encode = [&](std::string_view t) { return tok.encode_ids(t); };
  opt.option_token = [&](std::string_view w) { return tok.token_id(w); };
  const auto rep = harness::run_regime(regime, corpora, probes, *rt, opt);

  json man = base_manifest(g, s, *rt);
  json digests = json::object();
  for (const auto& p : probes)
    digests[p.value] = {{"layer", p.layer}, {"train_config_digest", p.train_config_digest},
                        {"weight_norm", p.weight_norm}};
  man["probes"] = digests;
  man["split"] = a.split;
  return finish(rep, man, g.out);
}

struct ServeArgs {
  int port = -1;
  bool once = false;
};

int cmd_serve(const Globals& g, const ServeArgs& a) {
  const Settings s = load_settings(g);
  toy::ToyRuntime rt(toy::init_model(s.toy));
  if (a.port < 0) {
    auto ch = bridge::stdio_channel();
    bridge::serve_session(*ch, rt);
    return kExitOk;
  }
  bridge::TcpListener listener(static_cast<std::uint16_t>(a.port));
  std::cerr << "listening on 127.0.0.1:" << listener.port() << std::endl;
  do {
    auto ch = listener.accept();
    bridge::serve_session(*ch, rt);
  } while (!a.once);
  return kExitOk;
}

struct ConformanceArgs {
  std::string peer;
  std::string transcripts;
  bool record = false;
};

int cmd_conformance(const Globals& g, const ConformanceArgs& a) {
  require(!a.transcripts.empty(), ErrorCode::kConfig, "conformance needs --transcripts");
  const Settings s = load_settings(g);
  const std::string spec = a.peer.empty() ? g.runtime : a.peer;

  // Channel to the system under test; in-process means a served toy runtime.
  std::unique_ptr<toy::ToyRuntime> local;
  if (spec == "in-process") local = std::make_unique<toy::ToyRuntime>(toy::init_model(s.toy));
  auto open_peer = [&]() -> std::unique_ptr<bridge::Channel> {
    if (local) return bridge::loopback_channel(*local);
    return bridge::open_channel(spec.starts_with("tcp:") || spec.starts_with("cmd:") ? spec
                                                                                     : "cmd:" + spec);
  };

  if (a.record) {
    const toy::ToyRuntime ref(toy::init_model(s.toy));
    int n = 0;
    for (const auto& sc : bridge::conformance_scenarios(ref.descriptor())) {
      auto ch = open_peer();
      const auto recs = bridge::record_scenario(*ch, sc);
      ch->close();
      write_file(fs::path(a.transcripts) / (sc.name + ".vpt"), bridge::encode_transcript(recs));
      ++n;
    }
    std::cout << "recorded " << n << " transcripts\n";
    return kExitOk;
  }
  const auto results = bridge::run_conformance(a.transcripts, open_peer);
  int failed = 0;
  for (const auto& r : results) {
    std::cout << (r.passed ? "PASS " : "FAIL ") << r.name;
    if (!r.passed) std::cout << "  " << r.detail;
    std::cout << "\n";
    failed += !r.passed;
  }
  return failed ? kExitPartial : kExitOk;
}

struct ReportArgs {
  std::string results;
};

int cmd_report(const Globals& g, const ReportArgs& a) {
  const fs::path dir(a.results);
  const fs::path file = fs::is_directory(dir) ? dir / "results.json" : dir;
  std::ifstream in(file);
  require(in.good(), ErrorCode::kConfig, "cannot read " + file.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    fail(ErrorCode::kMalformed, std::string("results file is not JSON: ") + e.what());
  }
  const auto rep = harness::RegimeReport::from_json(j);
  json man = json::object();
  if (const fs::path mf = file.parent_path() / "manifest.json"; fs::exists(mf)) {
    std::ifstream m(mf);
    man = json::parse(m, nullptr, false);
    if (man.is_discarded()) man = json::object();
    man.erase("files");
  }
  std::cout << "regime " << to_string(rep.regime) << ", mode " << to_string(rep.mode) << "\n";
  if (rep.column_dominance)
    std::cout << "dominance (column) sum " << rep.column_dominance->sum << " mean "
              << rep.column_dominance->mean << "\n"
              << "dominance (row) sum " << rep.row_dominance->sum << " mean "
              << rep.row_dominance->mean << "\n";
  for (const auto& sw : rep.sweeps) {
    std::cout << sw.value << ":";
    for (double m : sw.mean_curve) std::cout << " " << m;
    std::cout << "\n";
  }
  return finish(rep, man, g.out);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"vprobe: value probing and steering harness"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--seed", g.seed, "Global seed")->default_val(0);
  app.add_option("--runtime", g.runtime, "in-process | cmd:<command> | tcp:<host>:<port>")
      ->default_val("in-process");
  app.add_option("--out", g.out, "Output directory")->default_val("out");
  app.add_option("--config", g.config_path, "JSON config with train/steering/toy sections");

  IngestArgs ia;
  auto* ingest = app.add_subcommand("ingest", "Align word-scored JSONL to token scores and split");
  ingest->add_option("--words", ia.words, "Word-scored JSONL (raw_text, words)");
  ingest->add_option("--validate", ia.validate, "Only validate an existing corpus JSONL");
  ingest->add_option("--value", ia.value, "Value id for records without one");
  ingest->add_option("--regime", ia.regime, "AA | AC | CC")->default_val("AA");
  ingest->add_option("--train-fraction", ia.train_fraction)->default_val(0.9);
  ingest->add_option("--vocab", ia.vocab, "Toy tokenizer vocabulary size")->default_val(256);

  TrainArgs ta;
  auto* train = app.add_subcommand("train-probes", "Train one probe per value and layer");
  train->add_option("--corpus", ta.corpus)->required();
  train->add_option("--layers", ta.layers, "Layers to probe (default: all)")->delimiter(',');
  train->add_flag("--overwrite", ta.overwrite);

  SelectArgs sa;
  auto* select = app.add_subcommand("select-layer", "Pick the diagnostic layer per value");
  select->add_option("--corpus", sa.corpus)->required();
  select->add_option("--probes", sa.probes, "Directory of .vprobe files")->required();

  RegimeArgs pa, wa;
  auto add_regime_opts = [](CLI::App* c, RegimeArgs& r) {
    c->add_option("--corpus", r.corpus)->required();
    c->add_option("--probes", r.probes, "Directory of .vprobe files")->required();
    c->add_option("--selection", r.selection, "selection.json from select-layer");
    c->add_option("--layer", r.layer, "Probe layer when no selection is given");
    c->add_option("--regime", r.regime, "AA | AC | CC")->default_val("AA");
    c->add_option("--split", r.split, "train | validation")->default_val("validation");
  };
  auto* matrix = app.add_subcommand("probe-matrix", "Cross-value probe matrix and dominance");
  add_regime_opts(matrix, pa);
  auto* sweep = app.add_subcommand("steer-sweep", "Steering sweep over the alpha grid");
  add_regime_opts(sweep, wa);
  sweep->add_option("--tau", wa.tau, "Polarization threshold in logits");
  sweep->add_option("--k0", wa.k0, "Steering scale");

  ServeArgs va;
  auto* serve = app.add_subcommand("serve-toy", "Serve the toy runtime (stdio unless --port)");
  serve->add_option("--port", va.port, "TCP port; 0 picks one");
  serve->add_flag("--once", va.once, "Exit after the first TCP session");

  ConformanceArgs ca;
  auto* conf = app.add_subcommand("conformance", "Replay golden transcripts against a peer");
  conf->add_option("--peer", ca.peer, "Peer command, cmd:..., or tcp:host:port");
  conf->add_option("--transcripts", ca.transcripts, "Transcript directory")->required();
  conf->add_flag("--record", ca.record, "Record transcripts from the peer instead");

  ReportArgs ra;
  auto* report = app.add_subcommand("report", "Re-emit artifacts from results.json");
  report->add_option("--results", ra.results, "results.json or its directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*ingest) return cmd_ingest(g, ia);
    if (*train) return cmd_train(g, ta);
    if (*select) return cmd_select(g, sa);
    if (*matrix) return cmd_regime(g, pa, harness::RunMode::kProbe);
    if (*sweep) return cmd_regime(g, wa, harness::RunMode::kSteer);
    if (*serve) return cmd_serve(g, va);
    if (*conf) return cmd_conformance(g, ca);
    if (*report) return cmd_report(g, ra);
  } catch (const Error& e) {
    std::cerr << "vprobe: " << to_string(e.code()) << ": " << e.what() << "\n";
    switch (e.code()) {
      case ErrorCode::kConfig:
      case ErrorCode::kInvalidArgument:
      case ErrorCode::kUnsupported:
        return kExitConfig;
      default:
        return kExitError;
    }
  } catch (const std::exception& e) {
    std::cerr << "vprobe: " << e.what() << "\n";
    return kExitError;
  }
  return kExitError;
}
