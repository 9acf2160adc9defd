#pragma once

#include <atomic>
#include <cerrno>
#include <chrono>
#include <csignal>
#include <cstring>
#include <future>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <unordered_map>

#include <netdb.h>
#include <poll.h>
#include <sys/socket.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include "zoomstack/denoiser.hpp"
#include "zoomstack/protocol.hpp"

namespace zoomstack {

/// Owned file descriptor.
class UniqueFd {
 public:
  UniqueFd() = default;
  explicit UniqueFd(int fd) noexcept : fd_(fd) {}
  UniqueFd(UniqueFd&& o) noexcept : fd_(std::exchange(o.fd_, -1)) {}
  UniqueFd& operator=(UniqueFd&& o) noexcept {
    if (this != &o) {
      reset();
      fd_ = std::exchange(o.fd_, -1);
    }
    return *this;
  }
  UniqueFd(const UniqueFd&) = delete;
  UniqueFd& operator=(const UniqueFd&) = delete;
  ~UniqueFd() { reset(); }

  int get() const noexcept { return fd_; }
  explicit operator bool() const noexcept { return fd_ >= 0; }
  void reset() noexcept {
    if (fd_ >= 0) ::close(fd_);
    fd_ = -1;
  }

 private:
  int fd_ = -1;
};

class FdSource final : public wire::ByteSource {
 public:
  explicit FdSource(int fd) : fd_(fd) {}
  std::size_t read_some(std::span<std::uint8_t> out) override {
    for (;;) {
      const ssize_t n = ::read(fd_, out.data(), out.size());
      if (n >= 0) return static_cast<std::size_t>(n);
      if (errno == EINTR) continue;
      if (errno == ECONNRESET) return 0;
      throw BackendError(std::string("read failed: ") + std::strerror(errno));
    }
  }

 private:
  int fd_;
};

inline void write_all(int fd, std::span<const std::uint8_t> data) {
  std::size_t sent = 0;
  while (sent < data.size()) {
    const ssize_t n = ::write(fd, data.data() + sent, data.size() - sent);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw BackendError(std::string("write failed: ") + std::strerror(errno));
    }
    sent += static_cast<std::size_t>(n);
  }
}

/// Waits until fd has data or hangs up; false on timeout.
inline bool wait_readable(int fd, std::chrono::milliseconds timeout) {
  pollfd pfd{fd, POLLIN, 0};
  for (;;) {
    const int rc = ::poll(&pfd, 1, static_cast<int>(timeout.count()));
    if (rc >= 0) return rc > 0;
    if (errno != EINTR) throw BackendError(std::string("poll failed: ") + std::strerror(errno));
  }
}

/// A bidirectional byte stream to a backend: one socket, or a child's pipes.
struct Transport {
  UniqueFd read_fd;
  UniqueFd write_fd;  // empty when read_fd is a socket used both ways
  pid_t child = -1;

  int in() const noexcept { return read_fd.get(); }
  int out() const noexcept { return write_fd ? write_fd.get() : read_fd.get(); }
};

inline Transport socket_transport(int fd) {
  Transport t;
  t.read_fd = UniqueFd(fd);
  return t;
}

inline Transport connect_tcp(const std::string& host, const std::string& port) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (int rc = ::getaddrinfo(host.c_str(), port.c_str(), &hints, &res); rc != 0)
    throw BackendError("cannot resolve " + host + ":" + port + ": " + ::gai_strerror(rc));
  std::unique_ptr<addrinfo, decltype(&::freeaddrinfo)> guard(res, &::freeaddrinfo);
  for (addrinfo* ai = res; ai; ai = ai->ai_next) {
    UniqueFd fd(::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol));
    if (!fd) continue;
    if (::connect(fd.get(), ai->ai_addr, ai->ai_addrlen) == 0) {
      Transport t;
      t.read_fd = std::move(fd);
      return t;
    }
  }
  throw BackendError("cannot connect to " + host + ":" + port);
}

/// Runs `command` under /bin/sh with its stdin/stdout connected to us.
/// SIGPIPE is ignored process-wide so a dead backend surfaces as an error.
inline Transport spawn_subprocess(const std::string& command) {
  std::signal(SIGPIPE, SIG_IGN);
  int to_child[2];
  int from_child[2];
  if (::pipe(to_child) != 0) throw BackendError("pipe failed");
  if (::pipe(from_child) != 0) {
    ::close(to_child[0]);
    ::close(to_child[1]);
    throw BackendError("pipe failed");
  }
  const pid_t pid = ::fork();
  if (pid < 0) throw BackendError("fork failed");
  if (pid == 0) {
    ::dup2(to_child[0], STDIN_FILENO);
    ::dup2(from_child[1], STDOUT_FILENO);
    ::close(to_child[0]);
    ::close(to_child[1]);
    ::close(from_child[0]);
    ::close(from_child[1]);
    ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    ::_exit(127);
  }
  ::close(to_child[0]);
  ::close(from_child[1]);
  Transport t;
  t.read_fd = UniqueFd(from_child[0]);
  t.write_fd = UniqueFd(to_child[1]);
  t.child = pid;
  return t;
}

/// Parses "tcp:HOST:PORT", "remote:HOST:PORT" or "subprocess:COMMAND".
inline Transport open_endpoint(const std::string& endpoint) {
  const auto colon = endpoint.find(':');
  if (colon == std::string::npos) throw ValidationError("endpoint needs a scheme: " + endpoint);
  const std::string scheme = endpoint.substr(0, colon);
  const std::string rest = endpoint.substr(colon + 1);
  if (scheme == "subprocess") {
    if (rest.empty()) throw ValidationError("subprocess endpoint needs a command");
    return spawn_subprocess(rest);
  }
  if (scheme == "tcp" || scheme == "remote") {
    const auto pc = rest.rfind(':');
    if (pc == std::string::npos || pc == 0 || pc + 1 == rest.size())
      throw ValidationError("TCP endpoint must be HOST:PORT, got " + rest);
    return connect_tcp(rest.substr(0, pc), rest.substr(pc + 1));
  }
  throw ValidationError("unknown endpoint scheme '" + scheme + "'");
}

/// Client for an external denoiser speaking the wire protocol.
///
/// Thread-safe. Requests from concurrent callers are pipelined on one stream
/// and matched to responses by id, so the backend may answer in any order.
class RemoteDenoiser final : public Denoiser {
 public:
  explicit RemoteDenoiser(Transport transport,
                          std::chrono::milliseconds timeout = std::chrono::seconds(300))
      : transport_(std::move(transport)), timeout_(timeout) {
    std::uint32_t version = 0;
    try {
      write_all(transport_.out(), wire::encode_handshake());
      if (!wait_readable(transport_.in(), timeout_)) throw BackendError("backend handshake timed out");
      FdSource src(transport_.in());
      version = wire::read_handshake(src);
      if (version != wire::kProtocolVersion)
        throw ProtocolError("backend speaks protocol version " + std::to_string(version));
    } catch (...) {
      shutdown_transport();
      reap_child();
      throw;
    }
    reader_ = std::thread([this] { read_loop(); });
  }

  RemoteDenoiser(const RemoteDenoiser&) = delete;
  RemoteDenoiser& operator=(const RemoteDenoiser&) = delete;

  ~RemoteDenoiser() override {
    shutdown_transport();
    reap_child();
    if (reader_.joinable()) reader_.join();
  }

  Image predict_noise(const Image& z, int t, int level, const Conditioning& cond) const override {
    wire::DenoiseRequest req;
    req.id = next_id_.fetch_add(1);
    req.level = static_cast<std::uint32_t>(level);
    req.timestep = static_cast<std::uint32_t>(t);
    req.conditional = cond.conditional;
    req.prompt = cond.conditional ? cond.prompt : std::string();
    req.height = static_cast<std::uint32_t>(z.height());
    req.width = static_cast<std::uint32_t>(z.width());
    req.channels = static_cast<std::uint32_t>(z.channels());
    req.z = wire::to_wire(z);
    const auto bytes = wire::encode_request(req);

    std::future<wire::DenoiseResponse> fut;
    {
      std::lock_guard lock(pending_mu_);
      if (failure_) std::rethrow_exception(failure_);
      auto& slot = pending_[req.id];
      slot.elements = req.element_count();
      fut = slot.promise.get_future();
    }
    try {
      std::lock_guard lock(write_mu_);
      write_all(transport_.out(), bytes);
    } catch (...) {
      forget(req.id);
      throw;
    }
    if (fut.wait_for(timeout_) != std::future_status::ready) {
      abandon(req.id);
      throw BackendError("denoiser request " + std::to_string(req.id) + " timed out");
    }
    wire::DenoiseResponse resp = fut.get();
    if (!resp.ok())
      throw BackendError("backend error (status " + std::to_string(resp.status) + "): " + resp.error);
    return wire::from_wire(resp.eps, z.height(), z.width(), z.channels());
  }

 private:
  struct Pending {
    std::size_t elements = 0;
    std::promise<wire::DenoiseResponse> promise;
  };

  void forget(std::uint64_t id) const {
    std::lock_guard lock(pending_mu_);
    pending_.erase(id);
  }

  // A late answer to a timed-out request must still be consumed off the wire.
  void abandon(std::uint64_t id) const {
    std::lock_guard lock(pending_mu_);
    auto it = pending_.find(id);
    if (it == pending_.end()) return;
    abandoned_[id] = it->second.elements;
    pending_.erase(it);
  }

  // The child gets a grace period to exit on EOF before it is killed.
  void reap_child() noexcept {
    if (transport_.child <= 0) return;
    int status = 0;
    for (int tries = 0; tries < 200; ++tries) {
      if (::waitpid(transport_.child, &status, WNOHANG) != 0) {
        transport_.child = -1;
        return;
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
    ::kill(transport_.child, SIGKILL);
    ::waitpid(transport_.child, &status, 0);
    transport_.child = -1;
  }

  void shutdown_transport() noexcept {
    std::lock_guard lock(write_mu_);
    if (transport_.write_fd) {
      transport_.write_fd.reset();
    } else if (transport_.read_fd) {
      ::shutdown(transport_.read_fd.get(), SHUT_RDWR);
    }
  }

  void fail_all(std::exception_ptr e) {
    std::lock_guard lock(pending_mu_);
    failure_ = e;
    for (auto& [id, slot] : pending_) slot.promise.set_exception(e);
    pending_.clear();
  }

  void read_loop() {
    FdSource src(transport_.in());
    try {
      for (;;) {
        wire::DenoiseResponse resp;
        auto expected = [this](std::uint64_t id) {
          std::lock_guard lock(pending_mu_);
          if (auto it = pending_.find(id); it != pending_.end()) return it->second.elements;
          if (auto it = abandoned_.find(id); it != abandoned_.end()) return it->second;
          throw ProtocolError("response for unknown request id " + std::to_string(id));
        };
        if (!wire::read_response(src, resp, expected)) {
          fail_all(std::make_exception_ptr(BackendError("backend closed the connection")));
          return;
        }
        std::lock_guard lock(pending_mu_);
        auto it = pending_.find(resp.id);
        if (it == pending_.end()) {
          abandoned_.erase(resp.id);
          continue;
        }
        it->second.promise.set_value(std::move(resp));
        pending_.erase(it);
      }
    } catch (...) {
      fail_all(std::current_exception());
    }
  }

  Transport transport_;
  std::chrono::milliseconds timeout_;
  std::thread reader_;
  mutable std::atomic<std::uint64_t> next_id_{1};
  mutable std::mutex write_mu_;
  mutable std::mutex pending_mu_;
  mutable std::unordered_map<std::uint64_t, Pending> pending_;
  mutable std::unordered_map<std::uint64_t, std::size_t> abandoned_;
  std::exception_ptr failure_;
};

/// Opens `endpoint`, performs the handshake and closes again. Returns the
/// backend's protocol version.
inline std::uint32_t handshake_check(const std::string& endpoint,
                                     std::chrono::milliseconds timeout = std::chrono::seconds(10)) {
  RemoteDenoiser client(open_endpoint(endpoint), timeout);
  return wire::kProtocolVersion;
}

}  // namespace zoomstack
