// Copyright (c) 2026, vprobe contributors
// SPDX-License-Identifier: Apache-2.0

#include "vprobe/bridge.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <limits>
#include <thread>

#include "vprobe/corpus_io.hpp"
#include "vprobe/rng.hpp"

namespace vprobe::bridge {
namespace {

static_assert(std::endian::native == std::endian::little, "wire format assumes little-endian");

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(std::span<const std::uint8_t> b) {
  return static_cast<std::uint32_t>(b[0]) | static_cast<std::uint32_t>(b[1]) << 8 |
         static_cast<std::uint32_t>(b[2]) << 16 | static_cast<std::uint32_t>(b[3]) << 24;
}

json parse_header(std::span<const std::uint8_t> bytes) {
  json h = json::parse(bytes.begin(), bytes.end(), nullptr, false);
  require(!h.is_discarded() && h.is_object(), ErrorCode::kMalformed,
          "frame header is not a JSON object");
  return h;
}

std::uint64_t payload_size(const json& h) {
  const auto it = h.find("payload_bytes");
  require(it != h.end() && it->is_number_unsigned(), ErrorCode::kMalformed,
          "frame header lacks payload_bytes");
  const auto n = it->get<std::uint64_t>();
  require(n <= kMaxPayloadBytes, ErrorCode::kMalformed, "payload too large");
  return n;
}

void require_finite(const Matrix& m) {
  const auto d = m.data();
  const auto bad = std::find_if(d.begin(), d.end(), [](float v) { return !std::isfinite(v); });
  require(bad == d.end(), ErrorCode::kInvalidArgument,
          "non-finite value at flat index " + std::to_string(bad - d.begin()));
}

// Appends the matrix to `payload` and returns its reference object.
json append_tensor(std::vector<std::uint8_t>& payload, const Matrix& m) {
  require_finite(m);
  const std::size_t offset = payload.size();
  const std::size_t length = m.data().size() * sizeof(float);
  payload.resize(offset + length);
  if (length) std::memcpy(payload.data() + offset, m.data().data(), length);
  return json{{"offset", offset}, {"length", length}, {"rows", m.rows()}, {"cols", m.cols()}};
}

Matrix tensor_at(const json& ref, std::span<const std::uint8_t> payload) {
  std::size_t offset, length, rows, cols;
  try {
    offset = ref.at("offset").get<std::size_t>();
    length = ref.at("length").get<std::size_t>();
    rows = ref.at("rows").get<std::size_t>();
    cols = ref.at("cols").get<std::size_t>();
  } catch (const json::exception& e) {
    fail(ErrorCode::kMalformed, std::string("bad tensor reference: ") + e.what());
  }
  require(cols == 0 || rows <= std::numeric_limits<std::size_t>::max() / cols / sizeof(float),
          ErrorCode::kMalformed, "tensor shape overflows");
  require(length == rows * cols * sizeof(float), ErrorCode::kMalformed,
          "tensor length does not match its shape");
  require(offset <= payload.size() && length <= payload.size() - offset, ErrorCode::kMalformed,
          "tensor reference outside payload");
  std::vector<float> data(rows * cols);
  if (length) std::memcpy(data.data(), payload.data() + offset, length);
  return Matrix(rows, cols, std::move(data));
}

template <class T>
T field(const json& j, const char* key) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    fail(ErrorCode::kMalformed, std::string("bad field '") + key + "': " + e.what());
  }
}

}  // namespace

// ---- frames ------------------------------------------------------------------

std::vector<std::uint8_t> encode_frame(const Message& m) {
  const json h{{"kind", m.kind}, {"id", m.id}, {"body", m.body},
               {"payload_bytes", m.payload.size()}};
  const std::string hs = h.dump();
  require(hs.size() <= kMaxHeaderBytes, ErrorCode::kInvalidArgument, "frame header too large");
  std::vector<std::uint8_t> out;
  out.reserve(4 + hs.size() + m.payload.size());
  put_u32(out, static_cast<std::uint32_t>(hs.size()));
  out.insert(out.end(), hs.begin(), hs.end());
  out.insert(out.end(), m.payload.begin(), m.payload.end());
  return out;
}

Message decode_frame(std::span<const std::uint8_t> bytes) {
  require(bytes.size() >= 4, ErrorCode::kMalformed, "frame shorter than its length prefix");
  const std::uint32_t hl = get_u32(bytes);
  require(hl <= kMaxHeaderBytes && hl <= bytes.size() - 4, ErrorCode::kMalformed,
          "frame header length exceeds frame");
  const json h = parse_header(bytes.subspan(4, hl));
  const std::uint64_t pl = payload_size(h);
  require(bytes.size() - 4 - hl == pl, ErrorCode::kMalformed,
          "frame payload size does not match header");
  Message m;
  const auto k = h.find("kind");
  require(k != h.end() && k->is_string(), ErrorCode::kMalformed, "frame header lacks kind");
  m.kind = k->get<std::string>();
  const auto id = h.find("id");
  require(id != h.end() && id->is_number_unsigned(), ErrorCode::kMalformed,
          "frame header lacks a non-negative id");
  m.id = id->get<std::uint64_t>();
  const auto body = h.find("body");
  m.body = body == h.end() ? json::object() : *body;
  require(m.body.is_object(), ErrorCode::kMalformed, "frame body must be an object");
  m.payload.assign(bytes.begin() + 4 + hl, bytes.end());
  return m;
}

std::vector<std::uint8_t> read_frame_bytes(Channel& ch, Millis timeout) {
  std::vector<std::uint8_t> out(4);
  ch.read_exact(out, timeout);
  const std::uint32_t hl = get_u32(out);
  require(hl <= kMaxHeaderBytes, ErrorCode::kMalformed, "frame header too large");
  out.resize(4 + hl);
  ch.read_exact(std::span(out).subspan(4), timeout);
  const std::uint64_t pl = payload_size(parse_header(std::span(out).subspan(4)));
  out.resize(4 + hl + pl);
  ch.read_exact(std::span(out).subspan(4 + hl), timeout);
  return out;
}

Message read_message(Channel& ch, Millis timeout) {
  return decode_frame(read_frame_bytes(ch, timeout));
}

void write_message(Channel& ch, const Message& m) { ch.write_all(encode_frame(m)); }

Message make_error(std::uint64_t id, ErrorCode code, const std::string& message) {
  return Message{kind::kError, id,
                 json{{"code", std::string(to_string(code))}, {"message", message}}, {}};
}

// ---- tensor records ------------------------------------------------------------

std::vector<std::uint8_t> encode_tensor(const Matrix& m, const json& meta) {
  require(meta.is_object(), ErrorCode::kInvalidArgument, "tensor metadata must be an object");
  require_finite(m);
  json h = meta;
  h["dtype"] = "f32le";
  h["rows"] = m.rows();
  h["cols"] = m.cols();
  h["byte_length"] = m.data().size() * sizeof(float);
  const std::string hs = h.dump();
  std::vector<std::uint8_t> out;
  put_u32(out, static_cast<std::uint32_t>(hs.size()));
  out.insert(out.end(), hs.begin(), hs.end());
  const auto* p = reinterpret_cast<const std::uint8_t*>(m.data().data());
  out.insert(out.end(), p, p + m.data().size() * sizeof(float));
  return out;
}

TensorRecord decode_tensor(std::span<const std::uint8_t> bytes, std::size_t* consumed) {
  require(bytes.size() >= 4, ErrorCode::kMalformed, "truncated tensor record");
  const std::uint32_t hl = get_u32(bytes);
  require(hl <= bytes.size() - 4, ErrorCode::kMalformed, "truncated tensor header");
  json h = parse_header(bytes.subspan(4, hl));
  require(h.value("dtype", "") == "f32le", ErrorCode::kUnsupported,
          "unsupported tensor dtype: " + h.value("dtype", std::string("<missing>")));
  const auto rows = field<std::size_t>(h, "rows");
  const auto cols = field<std::size_t>(h, "cols");
  const auto len = field<std::size_t>(h, "byte_length");
  require(cols == 0 || rows <= std::numeric_limits<std::size_t>::max() / cols / sizeof(float),
          ErrorCode::kMalformed, "tensor shape overflows");
  require(len == rows * cols * sizeof(float), ErrorCode::kMalformed,
          "tensor byte_length does not match shape");
  require(len <= bytes.size() - 4 - hl, ErrorCode::kMalformed,
          "truncated tensor payload: expected " + std::to_string(len) + " bytes, got " +
              std::to_string(bytes.size() - 4 - hl));
  std::vector<float> data(rows * cols);
  if (len) std::memcpy(data.data(), bytes.data() + 4 + hl, len);
  if (consumed) *consumed = 4 + hl + len;
  for (const char* k : {"dtype", "rows", "cols", "byte_length"}) h.erase(k);
  return {Matrix(rows, cols, std::move(data)), std::move(h)};
}

void write_activation_dump(const std::filesystem::path& path,
                           std::span<const ActivationTensor> tensors) {
  std::vector<std::uint8_t> out;
  for (const auto& t : tensors) {
    const auto rec = encode_tensor(t.data, json{{"layer", t.layer}, {"model_id", t.model_id}});
    out.insert(out.end(), rec.begin(), rec.end());
  }
  write_file(path, out);
}

std::vector<ActivationTensor> read_activation_dump(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  std::vector<ActivationTensor> out;
  std::size_t off = 0;
  while (off < bytes.size()) {
    std::size_t used = 0;
    auto rec = decode_tensor(std::span(bytes).subspan(off), &used);
    out.push_back({field<int>(rec.meta, "layer"), std::move(rec.matrix),
                   field<std::string>(rec.meta, "model_id")});
    off += used;
  }
  return out;
}

// ---- forward bodies ------------------------------------------------------------

Message encode_forward_request(std::uint64_t id, std::span<const std::int32_t> tokens,
                               const CaptureRequest& request) {
  Message m{kind::kForward, id, json::object(), {}};
  m.body["tokens"] = std::vector<std::int32_t>(tokens.begin(), tokens.end());
  m.body["layers"] = request.layers;
  m.body["want_logits"] = request.want_logits;
  json steering = json::array();
  for (const auto& s : request.steering) {
    const Matrix dir(1, s.probe.weight.size(), s.probe.weight);
    json e{{"alpha", s.alpha},
           {"k0", s.k0},
           {"layer", s.layer},
           {"token_range", s.token_range.span
                               ? json::array({s.token_range.span->first, s.token_range.span->second})
                               : json(nullptr)},
           {"probe",
            {{"value", s.probe.value},
             {"layer", s.probe.layer},
             {"bias", s.probe.bias},
             {"readout", s.probe.readout},
             {"train_config_digest", s.probe.train_config_digest}}},
           {"direction", append_tensor(m.payload, dir)}};
    steering.push_back(std::move(e));
  }
  m.body["steering"] = std::move(steering);
  return m;
}

ForwardCall decode_forward_request(const Message& m) {
  ForwardCall call;
  const json& b = m.body;
  for (const auto& t : field<json>(b, "tokens")) {
    require(t.is_number_integer(), ErrorCode::kMalformed, "token ids must be integers");
    const auto v = t.get<std::int64_t>();
    require(v >= 0 && v <= std::numeric_limits<std::int32_t>::max(), ErrorCode::kOutOfRange,
            "token id out of range: " + std::to_string(v));
    call.tokens.push_back(static_cast<std::int32_t>(v));
  }
  call.request.layers = field<std::vector<int>>(b, "layers");
  call.request.want_logits = b.value("want_logits", false);
  for (const auto& e : b.value("steering", json::array())) {
    SteeringSpec s;
    s.alpha = field<double>(e, "alpha");
    s.k0 = field<double>(e, "k0");
    s.layer = field<int>(e, "layer");
    const json tr = e.value("token_range", json(nullptr));
    if (!tr.is_null()) {
      require(tr.is_array() && tr.size() == 2, ErrorCode::kMalformed,
              "token_range must be null or [begin, end]");
      s.token_range = TokenRange::between(tr[0].get<std::size_t>(), tr[1].get<std::size_t>());
    }
    const Matrix dir = tensor_at(field<json>(e, "direction"), m.payload);
    require(dir.rows() == 1, ErrorCode::kMalformed, "steering direction must be a row vector");
    const json p = field<json>(e, "probe");
    LinearProbe probe;
    probe.value = p.value("value", std::string());
    probe.layer = p.value("layer", s.layer);
    probe.weight.assign(dir.data().begin(), dir.data().end());
    probe.bias = p.value("bias", 0.0f);
    probe.readout = p.value("readout", std::string(kReadoutRelu));
    probe.weight_norm = euclidean_norm(probe.weight);
    probe.train_config_digest = p.value("train_config_digest", std::string());
    probe.validate();
    s.probe = std::move(probe);
    call.request.steering.push_back(std::move(s));
  }
  return call;
}

Message encode_forward_result(std::uint64_t id, const ForwardResult& result) {
  Message m{kind::kForwardResult, id, json::object(), {}};
  json acts = json::array();
  for (const auto& a : result.activations) {
    json ref = append_tensor(m.payload, a.data);
    ref["layer"] = a.layer;
    acts.push_back(std::move(ref));
  }
  m.body["activations"] = std::move(acts);
  m.body["logits"] = result.logits ? append_tensor(m.payload, *result.logits) : json(nullptr);
  return m;
}

ForwardResult decode_forward_result(const Message& m, const std::string& model_id) {
  require(m.kind == kind::kForwardResult, ErrorCode::kProtocol,
          "expected forward_result, got " + m.kind);
  ForwardResult r;
  for (const auto& ref : field<json>(m.body, "activations"))
    r.activations.push_back({field<int>(ref, "layer"), tensor_at(ref, m.payload), model_id});
  const json lg = m.body.value("logits", json(nullptr));
  if (!lg.is_null()) r.logits = tensor_at(lg, m.payload);
  return r;
}

// ---- server ----------------------------------------------------------------------

std::size_t serve_session(Channel& ch, Runtime& runtime, Millis idle_timeout) {
  const Millis wait = idle_timeout.count() > 0 ? idle_timeout : Millis{24LL * 3600 * 1000};
  bool greeted = false;
  std::optional<std::uint64_t> last_id;
  std::size_t handled = 0;
  for (;;) {
    std::vector<std::uint8_t> bytes;
    try {
      bytes = read_frame_bytes(ch, wait);
    } catch (const ChannelClosed&) {
      return handled;
    } catch (const Error& e) {
      // Framing is lost; report once and stop.
      if (e.code() == ErrorCode::kMalformed) write_message(ch, make_error(0, e.code(), e.what()));
      return handled;
    }
    ++handled;
    Message req;
    try {
      req = decode_frame(bytes);
    } catch (const Error& e) {
      write_message(ch, make_error(0, e.code(), e.what()));
      continue;
    }
    if (last_id && req.id <= *last_id) {
      write_message(ch, make_error(req.id, ErrorCode::kProtocol,
                                   "request id " + std::to_string(req.id) +
                                       " is not greater than " + std::to_string(*last_id)));
      continue;
    }
    last_id = req.id;

    if (req.kind == kind::kHello) {
      const std::string version = req.body.value("version", std::string());
      if (version != kProtocolVersion) {
        write_message(ch, make_error(req.id, ErrorCode::kVersionMismatch,
                                     "unsupported protocol version '" + version + "', expected " +
                                         kProtocolVersion));
        return handled;
      }
      greeted = true;
      write_message(ch, Message{kind::kHello, req.id, json{{"version", kProtocolVersion}}, {}});
      continue;
    }
    if (req.kind == kind::kShutdown) {
      write_message(ch, Message{kind::kShutdown, req.id, json::object(), {}});
      return handled;
    }
    if (!greeted) {
      write_message(ch, make_error(req.id, ErrorCode::kProtocol, "hello required before " + req.kind));
      continue;
    }
    if (req.kind == kind::kDescribe) {
      write_message(ch, Message{kind::kDescribe, req.id, runtime.descriptor().to_json(), {}});
      continue;
    }
    if (req.kind == kind::kForward) {
      try {
        const ForwardCall call = decode_forward_request(req);
        call.request.check_capabilities(runtime.descriptor());
        call.request.validate(runtime.descriptor(), call.tokens.size());
        const ForwardResult r = runtime.forward(call.tokens, call.request);
        write_message(ch, encode_forward_result(req.id, r));
      } catch (const ChannelClosed&) {
        return handled;
      } catch (const Error& e) {
        write_message(ch, make_error(req.id, e.code(), e.what()));
      }
      continue;
    }
    write_message(ch, make_error(req.id, ErrorCode::kProtocol, "unknown message kind: " + req.kind));
  }
}

namespace {

class LoopbackChannel : public Channel {
 public:
  explicit LoopbackChannel(Runtime& runtime) {
    auto [client, server] = make_channel_pair();
    client_ = std::move(client);
    server_ = std::move(server);
    thread_ = std::thread([this, &runtime] {
      try {
        serve_session(*server_, runtime);
      } catch (const Error&) {
        // The client sees the closed channel.
      }
      server_->close();
    });
  }
  ~LoopbackChannel() override { LoopbackChannel::close(); }

  void write_all(std::span<const std::uint8_t> bytes) override { client_->write_all(bytes); }
  void read_exact(std::span<std::uint8_t> out, Millis timeout) override {
    client_->read_exact(out, timeout);
  }
  void close() override {
    client_->close();
    if (thread_.joinable()) thread_.join();
  }

 private:
  std::unique_ptr<Channel> client_;
  std::unique_ptr<Channel> server_;
  std::thread thread_;
};

}  // namespace

std::unique_ptr<Channel> loopback_channel(Runtime& runtime) {
  return std::make_unique<LoopbackChannel>(runtime);
}

// ---- client ----------------------------------------------------------------------

RemoteRuntime::RemoteRuntime(std::unique_ptr<Channel> channel, Millis timeout)
    : channel_(std::move(channel)), timeout_(timeout) {
  require(channel_ != nullptr, ErrorCode::kInvalidArgument, "null channel");
  const Message hello = call(Message{kind::kHello, 0, json{{"version", kProtocolVersion}}, {}});
  require(hello.kind == kind::kHello, ErrorCode::kProtocol, "expected hello, got " + hello.kind);
  const std::string v = hello.body.value("version", std::string());
  require(v == kProtocolVersion, ErrorCode::kVersionMismatch,
          "peer speaks '" + v + "', expected " + kProtocolVersion);
  const Message d = call(Message{kind::kDescribe, 0, json::object(), {}});
  require(d.kind == kind::kDescribe, ErrorCode::kProtocol, "expected describe, got " + d.kind);
  desc_ = RuntimeDescriptor::from_json(d.body);
}

RemoteRuntime::~RemoteRuntime() {
  try {
    shutdown();
  } catch (...) {
  }
}

void RemoteRuntime::shutdown() {
  if (!open_) return;
  open_ = false;
  try {
    call(Message{kind::kShutdown, 0, json::object(), {}});
  } catch (const Error&) {
  }
  channel_->close();
}

Message RemoteRuntime::call(Message request) {
  require(open_, ErrorCode::kProtocol, "runtime session is closed");
  request.id = next_id_++;
  write_message(*channel_, request);
  Message resp = read_message(*channel_, timeout_);
  require(resp.id == request.id, ErrorCode::kProtocol,
          "response id " + std::to_string(resp.id) + " does not match request " +
              std::to_string(request.id));
  if (resp.kind == kind::kError)
    fail(error_code_from_string(resp.body.value("code", std::string())),
         "runtime peer: " + resp.body.value("message", std::string()));
  return resp;
}

ForwardResult RemoteRuntime::forward(std::span<const std::int32_t> tokens,
                                     const CaptureRequest& request) {
  request.check_capabilities(desc_);
  ForwardResult r =
      decode_forward_result(call(encode_forward_request(0, tokens, request)), desc_.model_id);
  require(r.activations.size() == request.layers.size(), ErrorCode::kProtocol,
          "peer returned the wrong number of activation tensors");
  for (std::size_t i = 0; i < r.activations.size(); ++i) {
    const auto& a = r.activations[i];
    require(a.layer == request.layers[i], ErrorCode::kProtocol, "activation layers out of order");
    require(a.dim() == static_cast<std::size_t>(desc_.hidden_dim), ErrorCode::kDimensionMismatch,
            "activation width " + std::to_string(a.dim()) + " != hidden_dim " +
                std::to_string(desc_.hidden_dim));
    require(a.tokens() == tokens.size(), ErrorCode::kDimensionMismatch,
            "activation rows do not match token count");
  }
  if (request.want_logits) {
    require(r.logits.has_value(), ErrorCode::kProtocol, "peer omitted requested logits");
    require(r.logits->rows() == tokens.size(), ErrorCode::kDimensionMismatch,
            "logit rows do not match token count");
  }
  return r;
}

// ---- transcripts -----------------------------------------------------------------

std::vector<std::uint8_t> encode_transcript(std::span<const TranscriptRecord> records) {
  std::vector<std::uint8_t> out;
  for (const auto& r : records) {
    out.push_back(static_cast<std::uint8_t>(r.direction));
    put_u32(out, static_cast<std::uint32_t>(r.frame.size()));
    out.insert(out.end(), r.frame.begin(), r.frame.end());
  }
  return out;
}

std::vector<TranscriptRecord> decode_transcript(std::span<const std::uint8_t> bytes) {
  std::vector<TranscriptRecord> out;
  std::size_t off = 0;
  while (off < bytes.size()) {
    require(bytes.size() - off >= 5, ErrorCode::kMalformed, "truncated transcript record");
    const auto dir = bytes[off];
    require(dir == 'C' || dir == 'S', ErrorCode::kMalformed, "bad transcript direction byte");
    const std::uint32_t n = get_u32(bytes.subspan(off + 1));
    require(n <= bytes.size() - off - 5, ErrorCode::kMalformed, "truncated transcript frame");
    out.push_back({static_cast<Direction>(dir),
                   std::vector<std::uint8_t>(bytes.begin() + off + 5, bytes.begin() + off + 5 + n)});
    off += 5 + n;
  }
  return out;
}

std::vector<Scenario> conformance_scenarios(const RuntimeDescriptor& desc) {
  desc.validate();
  const int L = desc.n_layers;
  const int mid = L / 2;
  const std::vector<std::int32_t> tokens = [&] {
    std::vector<std::int32_t> t{0};
    for (int i = 0; i < 7; ++i) t.push_back((11 + 3 * i) % std::max(desc.vocab_size, 1));
    return t;
  }();
  std::vector<float> dir(static_cast<std::size_t>(desc.hidden_dim));
  CounterRng rng(7, 0);
  for (auto& v : dir) v = static_cast<float>(rng.normal());
  const LinearProbe probe = make_probe("conformance", mid, dir, 0.0f);

  const Message hello{kind::kHello, 1, json{{"version", kProtocolVersion}}, {}};
  const Message describe{kind::kDescribe, 2, json::object(), {}};
  auto shutdown = [](std::uint64_t id) { return Message{kind::kShutdown, id, json::object(), {}}; };
  auto forward = [&](std::uint64_t id, CaptureRequest r, std::vector<std::int32_t> t) {
    return encode_forward_request(id, t, r);
  };
  auto steer = [&](double alpha, double k0) {
    SteeringSpec s;
    s.probe = probe;
    s.alpha = alpha;
    s.k0 = k0;
    s.layer = mid;
    return s;
  };

  std::vector<Scenario> out;
  out.push_back({"handshake", {hello, describe, shutdown(3)}});
  out.push_back({"forward_capture",
                 {hello, describe, forward(3, {{0, mid, L - 1}, {}, false}, tokens), shutdown(4)}});
  out.push_back({"forward_logits",
                 {hello, describe, forward(3, {{}, {}, true}, tokens), shutdown(4)}});
  // Same request with and without a zero-strength steer; responses must match.
  out.push_back({"steering_null",
                 {hello, describe, forward(3, {{mid, L - 1}, {}, true}, tokens),
                  forward(4, {{mid, L - 1}, {steer(0.0, kDefaultK0)}, true}, tokens), shutdown(5)}});
  out.push_back({"steering_shift",
                 {hello, describe, forward(3, {{mid}, {steer(2.0, 1.0)}, false}, tokens),
                  forward(4, {{mid}, {steer(-3.0, 0.5)}, true}, tokens), shutdown(5)}});
  out.push_back({"error_unknown_kind",
                 {hello, describe, Message{"bogus", 3, json::object(), {}}, shutdown(4)}});
  out.push_back({"error_version", {Message{kind::kHello, 1, json{{"version", "vp/0"}}, {}}}});
  out.push_back({"error_zero_tokens", {hello, describe, forward(3, {{0}, {}, false}, {}), shutdown(4)}});
  out.push_back({"error_layer_range",
                 {hello, describe, forward(3, {{L}, {}, false}, tokens), shutdown(4)}});
  out.push_back({"error_request_order",
                 {hello, Message{kind::kDescribe, 1, json::object(), {}}, describe, shutdown(3)}});
  out.push_back({"error_before_hello",
                 {Message{kind::kDescribe, 1, json::object(), {}},
                  Message{kind::kHello, 2, json{{"version", kProtocolVersion}}, {}},
                  Message{kind::kDescribe, 3, json::object(), {}}, shutdown(4)}});
  return out;
}

std::vector<TranscriptRecord> record_scenario(Channel& ch, const Scenario& scenario,
                                              Millis timeout) {
  std::vector<TranscriptRecord> out;
  for (const auto& req : scenario.requests) {
    auto frame = encode_frame(req);
    try {
      ch.write_all(frame);
      out.push_back({Direction::kClient, std::move(frame)});
      out.push_back({Direction::kServer, read_frame_bytes(ch, timeout)});
    } catch (const ChannelClosed&) {
      break;
    }
  }
  return out;
}

ConformanceResult replay_transcript(Channel& ch, const std::string& name,
                                    std::span<const TranscriptRecord> transcript, Millis timeout) {
  ConformanceResult res{name, false, {}};
  std::size_t step = 0;
  try {
    for (const auto& rec : transcript) {
      ++step;
      if (rec.direction == Direction::kClient) {
        ch.write_all(rec.frame);
        continue;
      }
      const auto got = read_frame_bytes(ch, timeout);
      if (got != rec.frame) {
        const auto mm = std::mismatch(got.begin(), got.end(), rec.frame.begin(), rec.frame.end());
        res.detail = "record " + std::to_string(step) + ": server frame differs at byte " +
                     std::to_string(mm.first - got.begin()) + " (got " +
                     std::to_string(got.size()) + " bytes, expected " +
                     std::to_string(rec.frame.size()) + ")";
        return res;
      }
    }
  } catch (const Error& e) {
    res.detail = "record " + std::to_string(step) + ": " + e.what();
    return res;
  }
  res.passed = true;
  return res;
}

std::vector<ConformanceResult> run_conformance(const std::filesystem::path& dir,
                                               const ChannelFactory& factory, Millis timeout) {
  std::vector<std::filesystem::path> files;
  require(std::filesystem::is_directory(dir), ErrorCode::kIo,
          "transcript directory not found: " + dir.string());
  for (const auto& e : std::filesystem::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".vpt") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  require(!files.empty(), ErrorCode::kEmpty, "no transcripts in " + dir.string());
  std::vector<ConformanceResult> out;
  for (const auto& f : files) {
    const std::string name = f.stem().string();
    try {
      const auto records = decode_transcript(read_file(f));
      auto ch = factory();
      out.push_back(replay_transcript(*ch, name, records, timeout));
      ch->close();
    } catch (const Error& e) {
      out.push_back({name, false, e.what()});
    }
  }
  return out;
}

}  // namespace vprobe::bridge
