// Copyright (c) 2026, vprobe contributors
// SPDX-License-Identifier: Apache-2.0
//
// Byte channels for the runtime protocol: socket pairs, child-process pipes,
// TCP and the process's own standard input/output.

#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <utility>

#include "vprobe/error.hpp"

namespace vprobe::bridge {

using Millis = std::chrono::milliseconds;
inline constexpr Millis kDefaultTimeout{10'000};

// Raised when the peer closes the channel.
class ChannelClosed : public Error {
 public:
  explicit ChannelClosed(const std::string& what) : Error(ErrorCode::kPeer, what) {}
};

class Channel {
 public:
  virtual ~Channel() = default;
  virtual void write_all(std::span<const std::uint8_t> bytes) = 0;
  // Fills `out` completely or throws (kTimeout, ChannelClosed, kIo).
  virtual void read_exact(std::span<std::uint8_t> out, Millis timeout) = 0;
  virtual void close() = 0;
};

class FdChannel : public Channel {
 public:
  FdChannel(int read_fd, int write_fd, bool owns_fds);
  ~FdChannel() override;
  FdChannel(const FdChannel&) = delete;
  FdChannel& operator=(const FdChannel&) = delete;

  void write_all(std::span<const std::uint8_t> bytes) override;
  void read_exact(std::span<std::uint8_t> out, Millis timeout) override;
  void close() override;

 protected:
  int read_fd_;
  int write_fd_;
  bool owns_;
};

// Two connected in-memory endpoints (AF_UNIX socketpair).
std::pair<std::unique_ptr<Channel>, std::unique_ptr<Channel>> make_channel_pair();

// Runs `command` under /bin/sh with its stdin/stdout wired to the channel.
class ChildProcessChannel : public FdChannel {
 public:
  static std::unique_ptr<ChildProcessChannel> spawn(const std::string& command);
  ~ChildProcessChannel() override;
  void close() override;
  int pid() const noexcept { return pid_; }

 private:
  ChildProcessChannel(int read_fd, int write_fd, int pid);
  void reap();
  int pid_;
};

std::unique_ptr<Channel> tcp_connect(const std::string& host, std::uint16_t port);

class TcpListener {
 public:
  // port 0 picks an ephemeral port.
  explicit TcpListener(std::uint16_t port, const std::string& bind_host = "127.0.0.1");
  ~TcpListener();
  TcpListener(const TcpListener&) = delete;
  TcpListener& operator=(const TcpListener&) = delete;

  std::uint16_t port() const noexcept { return port_; }
  std::unique_ptr<Channel> accept();

 private:
  int fd_;
  std::uint16_t port_;
};

std::unique_ptr<Channel> stdio_channel();

// "cmd:<shell command>" or "tcp:<host>:<port>".
std::unique_ptr<Channel> open_channel(const std::string& spec);

}  // namespace vprobe::bridge
