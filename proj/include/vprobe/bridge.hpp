// Copyright (c) 2026, vprobe contributors
// SPDX-License-Identifier: Apache-2.0
//
// Wire protocol "vp/1" between the harness and a model runtime.
//
// Frame:  u32le header_len | header JSON | payload
// Header: {"kind", "id", "body", "payload_bytes"}
// Tensors live in the payload as little-endian float32, referenced from the
// body by {"offset", "length", "rows", "cols"} (offset/length in bytes).
//
// Requests carry strictly increasing ids; every response echoes the id of
// the request it answers. A peer must answer "hello" before anything else.

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "vprobe/runtime.hpp"
#include "vprobe/transport.hpp"
#include "vprobe/types.hpp"

namespace vprobe::bridge {

inline constexpr const char* kProtocolVersion = "vp/1";
inline constexpr std::uint32_t kMaxHeaderBytes = 1u << 24;
inline constexpr std::uint64_t kMaxPayloadBytes = 1ull << 32;

namespace kind {
inline constexpr const char* kHello = "hello";
inline constexpr const char* kDescribe = "describe";
inline constexpr const char* kForward = "forward";
inline constexpr const char* kForwardResult = "forward_result";
inline constexpr const char* kError = "error";
inline constexpr const char* kShutdown = "shutdown";
}  // namespace kind

struct Message {
  std::string kind;
  std::uint64_t id = 0;
  json body = json::object();
  std::vector<std::uint8_t> payload;

  bool operator==(const Message&) const = default;
};

std::vector<std::uint8_t> encode_frame(const Message& m);
// Decodes exactly one complete frame; trailing bytes are an error.
Message decode_frame(std::span<const std::uint8_t> bytes);

// Reads one frame's raw bytes from the channel.
std::vector<std::uint8_t> read_frame_bytes(Channel& ch, Millis timeout);
Message read_message(Channel& ch, Millis timeout);
void write_message(Channel& ch, const Message& m);

Message make_error(std::uint64_t id, ErrorCode code, const std::string& message);

// ---- standalone tensor records ----------------------------------------------
// u32le header_len | {"dtype":"f32le","rows","cols","byte_length",...meta} | data

std::vector<std::uint8_t> encode_tensor(const Matrix& m, const json& meta = json::object());
struct TensorRecord {
  Matrix matrix;
  json meta;
};
// Decodes one record starting at bytes[0]; `consumed` receives its size.
TensorRecord decode_tensor(std::span<const std::uint8_t> bytes, std::size_t* consumed = nullptr);

// Activation dumps: consecutive tensor records tagged with layer and model id.
void write_activation_dump(const std::filesystem::path& path,
                           std::span<const ActivationTensor> tensors);
std::vector<ActivationTensor> read_activation_dump(const std::filesystem::path& path);

// ---- forward request/response bodies ------------------------------------------

Message encode_forward_request(std::uint64_t id, std::span<const std::int32_t> tokens,
                               const CaptureRequest& request);
struct ForwardCall {
  std::vector<std::int32_t> tokens;
  CaptureRequest request;
};
ForwardCall decode_forward_request(const Message& m);

Message encode_forward_result(std::uint64_t id, const ForwardResult& result);
ForwardResult decode_forward_result(const Message& m, const std::string& model_id);

// ---- server ---------------------------------------------------------------------

// Answers requests on `ch` until shutdown, peer close, or a fatal handshake
// error. Returns the number of requests handled.
std::size_t serve_session(Channel& ch, Runtime& runtime, Millis idle_timeout = Millis{0});

// Client end of a channel whose server end is served by `runtime` on a
// background thread. Closing the channel ends the session and joins it.
std::unique_ptr<Channel> loopback_channel(Runtime& runtime);

// ---- client ---------------------------------------------------------------------

class RemoteRuntime : public Runtime {
 public:
  // Performs hello + describe. Throws kVersionMismatch, kTimeout, kProtocol.
  explicit RemoteRuntime(std::unique_ptr<Channel> channel, Millis timeout = kDefaultTimeout);
  ~RemoteRuntime() override;

  const RuntimeDescriptor& descriptor() const override { return desc_; }
  ForwardResult forward(std::span<const std::int32_t> tokens,
                        const CaptureRequest& request) override;
  // Sends shutdown and waits for the acknowledgement. Idempotent.
  void shutdown();

 private:
  Message call(Message request);

  std::unique_ptr<Channel> channel_;
  Millis timeout_;
  std::uint64_t next_id_ = 1;
  RuntimeDescriptor desc_;
  bool open_ = true;
};

// ---- transcripts ----------------------------------------------------------------
// Records: dir byte ('C' client->server, 'S' server->client) | u32le len | frame

enum class Direction : std::uint8_t { kClient = 'C', kServer = 'S' };

struct TranscriptRecord {
  Direction direction;
  std::vector<std::uint8_t> frame;
};

std::vector<std::uint8_t> encode_transcript(std::span<const TranscriptRecord> records);
std::vector<TranscriptRecord> decode_transcript(std::span<const std::uint8_t> bytes);

// A scripted client conversation. Requests are sent in order; each is
// followed by exactly one server frame. Sessions end after the last request.
struct Scenario {
  std::string name;
  std::vector<Message> requests;
};

// Scenarios for a runtime with the given shape (hidden_dim sizes the steering
// direction, n_layers picks capture layers).
std::vector<Scenario> conformance_scenarios(const RuntimeDescriptor& desc);

// Runs the scenario against a live server and returns the transcript.
std::vector<TranscriptRecord> record_scenario(Channel& ch, const Scenario& scenario,
                                              Millis timeout = kDefaultTimeout);

struct ConformanceResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

// Replays the client frames of `transcript` and checks every server frame
// byte-for-byte.
ConformanceResult replay_transcript(Channel& ch, const std::string& name,
                                    std::span<const TranscriptRecord> transcript,
                                    Millis timeout = kDefaultTimeout);

using ChannelFactory = std::function<std::unique_ptr<Channel>()>;

// Replays every *.vpt file in `dir` (sorted by name), one fresh channel each.
std::vector<ConformanceResult> run_conformance(const std::filesystem::path& dir,
                                               const ChannelFactory& factory,
                                               Millis timeout = kDefaultTimeout);

}  // namespace vprobe::bridge
