// Copyright (c) 2026, vprobe contributors
// SPDX-License-Identifier: Apache-2.0

#include "vprobe/transport.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <thread>

namespace vprobe::bridge {
namespace {

void ignore_sigpipe() {
  static const bool once = [] {
    ::signal(SIGPIPE, SIG_IGN);
    return true;
  }();
  (void)once;
}

std::string errno_text(const char* what) { return std::string(what) + ": " + std::strerror(errno); }

}  // namespace

FdChannel::FdChannel(int read_fd, int write_fd, bool owns_fds)
    : read_fd_(read_fd), write_fd_(write_fd), owns_(owns_fds) {
  ignore_sigpipe();
}

FdChannel::~FdChannel() { FdChannel::close(); }

void FdChannel::close() {
  if (owns_) {
    if (read_fd_ >= 0) ::close(read_fd_);
    if (write_fd_ >= 0 && write_fd_ != read_fd_) ::close(write_fd_);
  }
  read_fd_ = write_fd_ = -1;
}

void FdChannel::write_all(std::span<const std::uint8_t> bytes) {
  require(write_fd_ >= 0, ErrorCode::kIo, "write on closed channel");
  std::size_t off = 0;
  while (off < bytes.size()) {
    const ssize_t n = ::write(write_fd_, bytes.data() + off, bytes.size() - off);
    if (n < 0) {
      if (errno == EINTR) continue;
      if (errno == EPIPE || errno == ECONNRESET) throw ChannelClosed("peer closed the channel");
      fail(ErrorCode::kIo, errno_text("write"));
    }
    off += static_cast<std::size_t>(n);
  }
}

void FdChannel::read_exact(std::span<std::uint8_t> out, Millis timeout) {
  require(read_fd_ >= 0, ErrorCode::kIo, "read on closed channel");
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  std::size_t off = 0;
  while (off < out.size()) {
    const auto left = std::chrono::duration_cast<Millis>(deadline - std::chrono::steady_clock::now());
    if (left.count() <= 0)
      fail(ErrorCode::kTimeout, "timed out after " + std::to_string(timeout.count()) + " ms");
    pollfd p{read_fd_, POLLIN, 0};
    const int r = ::poll(&p, 1, static_cast<int>(left.count()));
    if (r < 0) {
      if (errno == EINTR) continue;
      fail(ErrorCode::kIo, errno_text("poll"));
    }
    if (r == 0) continue;
    const ssize_t n = ::read(read_fd_, out.data() + off, out.size() - off);
    if (n < 0) {
      if (errno == EINTR || errno == EAGAIN) continue;
      if (errno == ECONNRESET) throw ChannelClosed("peer reset the channel");
      fail(ErrorCode::kIo, errno_text("read"));
    }
    if (n == 0) throw ChannelClosed("peer closed the channel");
    off += static_cast<std::size_t>(n);
  }
}

std::pair<std::unique_ptr<Channel>, std::unique_ptr<Channel>> make_channel_pair() {
  int fds[2];
  require(::socketpair(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0, fds) == 0, ErrorCode::kIo,
          errno_text("socketpair"));
  return {std::make_unique<FdChannel>(fds[0], fds[0], true),
          std::make_unique<FdChannel>(fds[1], fds[1], true)};
}

// ---- child process ---------------------------------------------------------

ChildProcessChannel::ChildProcessChannel(int read_fd, int write_fd, int pid)
    : FdChannel(read_fd, write_fd, true), pid_(pid) {}

std::unique_ptr<ChildProcessChannel> ChildProcessChannel::spawn(const std::string& command) {
  ignore_sigpipe();
  int to_child[2], from_child[2];
  require(::pipe2(to_child, O_CLOEXEC) == 0, ErrorCode::kIo, errno_text("pipe"));
  if (::pipe2(from_child, O_CLOEXEC) != 0) {
    ::close(to_child[0]);
    ::close(to_child[1]);
    fail(ErrorCode::kIo, errno_text("pipe"));
  }
  const pid_t pid = ::fork();
  if (pid < 0) {
    for (int fd : {to_child[0], to_child[1], from_child[0], from_child[1]}) ::close(fd);
    fail(ErrorCode::kIo, errno_text("fork"));
  }
  if (pid == 0) {
    ::dup2(to_child[0], STDIN_FILENO);
    ::dup2(from_child[1], STDOUT_FILENO);
    ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    ::_exit(127);
  }
  ::close(to_child[0]);
  ::close(from_child[1]);
  return std::unique_ptr<ChildProcessChannel>(
      new ChildProcessChannel(from_child[0], to_child[1], static_cast<int>(pid)));
}

void ChildProcessChannel::reap() {
  if (pid_ <= 0) return;
  // Closing stdin lets a well-behaved peer exit; escalate if it lingers.
  for (int i = 0; i < 200; ++i) {
    int status = 0;
    const pid_t r = ::waitpid(pid_, &status, WNOHANG);
    if (r == pid_ || r < 0) {
      pid_ = -1;
      return;
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(10));
  }
  ::kill(pid_, SIGKILL);
  ::waitpid(pid_, nullptr, 0);
  pid_ = -1;
}

void ChildProcessChannel::close() {
  FdChannel::close();
  reap();
}

ChildProcessChannel::~ChildProcessChannel() { ChildProcessChannel::close(); }

// ---- TCP -------------------------------------------------------------------

std::unique_ptr<Channel> tcp_connect(const std::string& host, std::uint16_t port) {
  ignore_sigpipe();
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  const int rc = ::getaddrinfo(host.c_str(), std::to_string(port).c_str(), &hints, &res);
  require(rc == 0, ErrorCode::kIo, "cannot resolve " + host + ": " + ::gai_strerror(rc));
  int fd = -1;
  for (addrinfo* ai = res; ai; ai = ai->ai_next) {
    fd = ::socket(ai->ai_family, ai->ai_socktype | SOCK_CLOEXEC, ai->ai_protocol);
    if (fd < 0) continue;
    if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) break;
    ::close(fd);
    fd = -1;
  }
  ::freeaddrinfo(res);
  require(fd >= 0, ErrorCode::kIo, "cannot connect to " + host + ":" + std::to_string(port));
  int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
  return std::make_unique<FdChannel>(fd, fd, true);
}

TcpListener::TcpListener(std::uint16_t port, const std::string& bind_host) {
  ignore_sigpipe();
  fd_ = ::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0);
  require(fd_ >= 0, ErrorCode::kIo, errno_text("socket"));
  int one = 1;
  ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  if (::inet_pton(AF_INET, bind_host.c_str(), &addr.sin_addr) != 1) {
    ::close(fd_);
    fail(ErrorCode::kConfig, "bad bind address: " + bind_host);
  }
  if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 || ::listen(fd_, 8) != 0) {
    const std::string msg = errno_text("bind/listen");
    ::close(fd_);
    fail(ErrorCode::kIo, msg);
  }
  socklen_t len = sizeof addr;
  ::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
}

TcpListener::~TcpListener() {
  if (fd_ >= 0) ::close(fd_);
}

std::unique_ptr<Channel> TcpListener::accept() {
  for (;;) {
    const int c = ::accept4(fd_, nullptr, nullptr, SOCK_CLOEXEC);
    if (c >= 0) {
      int one = 1;
      ::setsockopt(c, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
      return std::make_unique<FdChannel>(c, c, true);
    }
    if (errno != EINTR) fail(ErrorCode::kIo, errno_text("accept"));
  }
}

std::unique_ptr<Channel> stdio_channel() {
  return std::make_unique<FdChannel>(STDIN_FILENO, STDOUT_FILENO, false);
}

std::unique_ptr<Channel> open_channel(const std::string& spec) {
  if (spec.starts_with("cmd:")) {
    const std::string cmd = spec.substr(4);
    require(!cmd.empty(), ErrorCode::kConfig, "empty peer command");
    return ChildProcessChannel::spawn(cmd);
  }
  if (spec.starts_with("tcp:")) {
    const std::string rest = spec.substr(4);
    const auto colon = rest.rfind(':');
    require(colon != std::string::npos && colon > 0, ErrorCode::kConfig,
            "expected tcp:<host>:<port>, got " + spec);
    int port = 0;
    try {
      port = std::stoi(rest.substr(colon + 1));
    } catch (const std::exception&) {
      fail(ErrorCode::kConfig, "bad port in " + spec);
    }
    require(port > 0 && port < 65536, ErrorCode::kConfig, "bad port in " + spec);
    return tcp_connect(rest.substr(0, colon), static_cast<std::uint16_t>(port));
  }
  fail(ErrorCode::kConfig, "unknown runtime channel: " + spec);
}

}  // namespace vprobe::bridge
