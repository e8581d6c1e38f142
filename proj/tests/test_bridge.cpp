// Copyright (c) 2026, vprobe contributors
// SPDX-License-Identifier: Apache-2.0

#include <catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <limits>
#include <random>
#include <thread>

#include "vprobe/bridge.hpp"
#include "vprobe/toy_runtime.hpp"

using namespace vprobe;
using namespace vprobe::bridge;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error thrown");
  return ErrorCode::kInvariant;
}

// Runs serve_session on one end of a socket pair; the test drives the other.
struct Served {
  toy::ToyRuntime runtime;
  std::unique_ptr<Channel> client;
  std::unique_ptr<Channel> server;
  std::thread thread;

  explicit Served(std::set<std::string> caps = {kCapCapture, kCapSteer, kCapLogits})
      : runtime(toy::init_model({}), std::move(caps)) {
    auto [a, b] = make_channel_pair();
    client = std::move(a);
    server = std::move(b);
    thread = std::thread([this] { serve_session(*server, runtime); });
  }
  ~Served() {
    client->close();
    thread.join();
  }
  Message ask(const Message& m) {
    write_message(*client, m);
    return read_message(*client, Millis{5000});
  }
};

Message hello(std::uint64_t id, const std::string& v = kProtocolVersion) {
  return {kind::kHello, id, json{{"version", v}}, {}};
}

}  // namespace

TEST_CASE("1x1 zero tensor is a 4-byte payload plus header", "[bridge]") {
  const auto bytes = encode_tensor(Matrix(1, 1));
  const std::uint32_t hl = bytes[0] | bytes[1] << 8 | bytes[2] << 16 | bytes[3] << 24;
  CHECK(bytes.size() == 4 + hl + 4);
  const auto back = decode_tensor(bytes);
  CHECK(back.matrix.bit_equal(Matrix(1, 1)));
}

TEST_CASE("random 7x5 tensor round trips", "[bridge]") {
  std::mt19937_64 g(1);
  std::normal_distribution<float> nd(0.0f, 10.0f);
  Matrix m(7, 5);
  for (auto& v : m.data()) v = nd(g);
  m(0, 0) = -0.0f;
  m(1, 1) = std::numeric_limits<float>::denorm_min();
  std::size_t used = 0;
  const auto bytes = encode_tensor(m, {{"layer", 3}});
  const auto back = decode_tensor(bytes, &used);
  CHECK(back.matrix.bit_equal(m));
  CHECK(back.meta.at("layer") == 3);
  CHECK(used == bytes.size());
}

TEST_CASE("truncated tensor names both byte counts", "[bridge]") {
  Matrix m(2, 3, 1.0f);
  auto bytes = encode_tensor(m);
  bytes.resize(bytes.size() - 5);
  try {
    decode_tensor(bytes);
    FAIL("expected error");
  } catch (const Error& e) {
    const std::string what = e.what();
    CHECK(what.find("24") != std::string::npos);
    CHECK(what.find("19") != std::string::npos);
  }
}

TEST_CASE("non-finite tensors are rejected on encode", "[bridge]") {
  Matrix m(1, 2);
  m(0, 1) = std::numeric_limits<float>::quiet_NaN();
  CHECK(code_of([&] { encode_tensor(m); }) == ErrorCode::kInvalidArgument);
  m(0, 1) = std::numeric_limits<float>::infinity();
  CHECK(code_of([&] { encode_tensor(m); }) == ErrorCode::kInvalidArgument);
}

TEST_CASE("activation dump round trip", "[bridge]") {
  std::vector<ActivationTensor> ts(3);
  for (int l = 0; l < 3; ++l) {
    ts[static_cast<std::size_t>(l)].layer = l;
    ts[static_cast<std::size_t>(l)].model_id = "m";
    ts[static_cast<std::size_t>(l)].data = Matrix(2, 4, static_cast<float>(l) + 0.5f);
  }
  const auto path = std::filesystem::temp_directory_path() / "vprobe-dump.bin";
  write_activation_dump(path, ts);
  const auto back = read_activation_dump(path);
  REQUIRE(back.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(back[i].layer == ts[i].layer);
    CHECK(back[i].data.bit_equal(ts[i].data));
  }
}

TEST_CASE("frames round trip and reject garbage", "[bridge]") {
  Message m{kind::kForward, 7, json{{"x", 1}}, {1, 2, 3}};
  CHECK(decode_frame(encode_frame(m)) == m);
  auto bytes = encode_frame(m);
  bytes[5] = '!';
  CHECK(code_of([&] { decode_frame(bytes); }) == ErrorCode::kMalformed);
  auto short_payload = encode_frame(m);
  short_payload.pop_back();
  CHECK_THROWS_AS(decode_frame(short_payload), Error);
}

TEST_CASE("forward request round trip", "[bridge]") {
  CaptureRequest req{{1, 4}, {}, true};
  req.steering.push_back({make_probe("pat", 4, {1, -2, 3}, 0.25f, "dd"), -3.0, 0.04, 4, TokenRange::between(1, 3)});
  const std::vector<std::int32_t> toks{5, 6, 7};
  const auto call = decode_forward_request(encode_forward_request(9, toks, req));
  CHECK(call.tokens == toks);
  CHECK(call.request.layers == req.layers);
  CHECK(call.request.want_logits);
  REQUIRE(call.request.steering.size() == 1);
  const auto& s = call.request.steering[0];
  CHECK(s.probe == req.steering[0].probe);
  CHECK(s.alpha == -3.0);
  CHECK(s.k0 == 0.04);
  CHECK(s.token_range == TokenRange::between(1, 3));
}

TEST_CASE("read times out on a silent peer", "[bridge]") {
  auto [a, b] = make_channel_pair();
  CHECK(code_of([&] { read_message(*a, Millis{50}); }) == ErrorCode::kTimeout);
  CHECK(code_of([&] { RemoteRuntime r(std::move(a), Millis{50}); }) == ErrorCode::kTimeout);
}

TEST_CASE("in-process handshake describes the toy runtime", "[bridge]") {
  toy::ToyRuntime rt(toy::init_model({}));
  RemoteRuntime remote(loopback_channel(rt));
  CHECK(remote.descriptor() == rt.descriptor());
  remote.shutdown();
  remote.shutdown();
}

TEST_CASE("version mismatch is fatal", "[bridge]") {
  Served s;
  const auto r = s.ask(hello(1, "vp/2"));
  CHECK(r.kind == kind::kError);
  CHECK(r.id == 1);
  CHECK(r.body.at("code") == to_string(ErrorCode::kVersionMismatch));
}

TEST_CASE("a peer answering vp/2 fails the client handshake", "[bridge]") {
  auto [a, b] = make_channel_pair();
  std::thread fake([&] {
    const auto m = read_message(*b, Millis{5000});
    write_message(*b, Message{kind::kHello, m.id, json{{"version", "vp/2"}}, {}});
  });
  CHECK(code_of([&] { RemoteRuntime r(std::move(a), Millis{5000}); }) == ErrorCode::kVersionMismatch);
  fake.join();
}

TEST_CASE("session error frames", "[bridge]") {
  Served s;
  CHECK(s.ask({kind::kDescribe, 1, json::object(), {}}).kind == kind::kError);
  CHECK(s.ask(hello(2)).kind == kind::kHello);

  const auto unknown = s.ask({"teleport", 3, json::object(), {}});
  CHECK(unknown.kind == kind::kError);
  CHECK(unknown.body.at("message").get<std::string>().find("teleport") != std::string::npos);

  const auto stale = s.ask({kind::kDescribe, 3, json::object(), {}});
  CHECK(stale.kind == kind::kError);
  CHECK(stale.body.at("code") == to_string(ErrorCode::kProtocol));

  const std::vector<std::int32_t> none;
  const auto empty = s.ask(encode_forward_request(4, none, {{0}, {}, false}));
  CHECK(empty.body.at("code") == to_string(ErrorCode::kInvalidArgument));

  const std::vector<std::int32_t> toks{1, 2};
  const auto range = s.ask(encode_forward_request(5, toks, {{9}, {}, false}));
  CHECK(range.kind == kind::kError);

  CHECK(s.ask({kind::kDescribe, 6, json::object(), {}}).kind == kind::kDescribe);
  CHECK(s.ask({kind::kShutdown, 7, json::object(), {}}).kind == kind::kShutdown);
}

TEST_CASE("steering against a capture-only peer never reaches the wire", "[bridge]") {
  toy::ToyRuntime rt(toy::init_model({}), {kCapCapture, kCapLogits});
  RemoteRuntime remote(loopback_channel(rt));
  CaptureRequest req{{0}, {}, false};
  req.steering.push_back({make_probe("p", 0, std::vector<float>(64, 1.0f), 0.0f), 1.0, 0.02, 0, TokenRange::all()});
  const std::vector<std::int32_t> toks{1, 2, 3};
  CHECK(code_of([&] { remote.forward(toks, req); }) == ErrorCode::kCapability);

  Served s({kCapCapture});
  s.ask(hello(1));
  const auto r = s.ask(encode_forward_request(2, toks, req));
  CHECK(r.body.at("code") == to_string(ErrorCode::kCapability));
}

TEST_CASE("wire forward equals in-process forward over TCP", "[bridge]") {
  toy::ToyRuntime served(toy::init_model({}));
  TcpListener listener(0);
  std::thread server([&] {
    auto ch = listener.accept();
    serve_session(*ch, served);
  });
  {
    RemoteRuntime remote(tcp_connect("127.0.0.1", listener.port()));
    toy::ToyRuntime local(toy::init_model({}));
    const std::vector<std::int32_t> toks{3, 1, 4, 1, 5, 9, 2, 6};
    const CaptureRequest req{{0, 5}, {}, true};
    const auto a = local.forward(toks, req);
    const auto b = remote.forward(toks, req);
    REQUIRE(b.activations.size() == 2);
    CHECK(b.activations[1].data.bit_equal(a.activations[1].data));
    CHECK(b.logits->bit_equal(*a.logits));
  }
  server.join();
}

TEST_CASE("channel specs", "[bridge]") {
  CHECK(code_of([] { open_channel("carrier-pigeon"); }) == ErrorCode::kConfig);
}

TEST_CASE("transcripts round trip", "[bridge]") {
  const std::vector<TranscriptRecord> recs{{Direction::kClient, {1, 2, 3}}, {Direction::kServer, {}}};
  const auto back = decode_transcript(encode_transcript(recs));
  REQUIRE(back.size() == 2);
  CHECK(back[0].direction == Direction::kClient);
  CHECK(back[0].frame == recs[0].frame);
  CHECK(back[1].frame.empty());
}

TEST_CASE("golden transcripts replay against the in-process runtime", "[bridge]") {
  toy::ToyRuntime rt(toy::init_model({}));
  const auto results = run_conformance(VPROBE_GOLDEN_DIR, [&] { return loopback_channel(rt); });
  CHECK(results.size() == conformance_scenarios(rt.descriptor()).size());
  for (const auto& r : results) {
    INFO(r.name << ": " << r.detail);
    CHECK(r.passed);
  }
}

TEST_CASE("golden transcripts replay against a child process", "[bridge]") {
  const auto results = run_conformance(VPROBE_GOLDEN_DIR, [] {
    return ChildProcessChannel::spawn(std::string(VPROBE_CLI) + " serve-toy");
  });
  REQUIRE(!results.empty());
  for (const auto& r : results) {
    INFO(r.name << ": " << r.detail);
    CHECK(r.passed);
  }
}

TEST_CASE("a divergent peer fails conformance", "[bridge]") {
  toy::ToyTransformerConfig other;
  other.seed = 42;
  toy::ToyRuntime rt(toy::init_model(other));
  const auto results = run_conformance(VPROBE_GOLDEN_DIR, [&] { return loopback_channel(rt); });
  std::size_t failed = 0;
  for (const auto& r : results) failed += !r.passed;
  CHECK(failed > 0);
}
