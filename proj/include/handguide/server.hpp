#pragma once

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <chrono>
#include <cstring>
#include <functional>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "handguide/session.hpp"

namespace handguide {

/// Line-delimited JSON over TCP, one Session per connection.
///
/// With `wall_clock` off the controller clock is driven by message
/// timestamps (and explicit `tick` messages), which makes a connection's
/// output a deterministic function of its input. With it on, a ticker thread
/// advances the clock in real time and state broadcasts are dropped for
/// consumers that cannot keep up.
class SessionServer {
 public:
  struct Options {
    SessionOptions session;
    std::string host = "127.0.0.1";
    std::uint16_t port = 0;  // 0: pick a free port
    bool wall_clock = false;
    std::string initial_chain;  // loaded into every new session when set
  };

  explicit SessionServer(Options opt) : opt_(std::move(opt)) {
    opt_.session.message_clock = !opt_.wall_clock;
  }

  ~SessionServer() { stop(); }

  SessionServer(const SessionServer&) = delete;
  SessionServer& operator=(const SessionServer&) = delete;

  /// Binds and listens; returns the bound port.
  std::uint16_t listen() {
    listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (listen_fd_ < 0) throw std::runtime_error(std::string("socket: ") + std::strerror(errno));
    int yes = 1;
    ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(opt_.port);
    if (::inet_pton(AF_INET, opt_.host.c_str(), &addr.sin_addr) != 1) throw std::runtime_error("bad host " + opt_.host);
    if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
      throw std::runtime_error(std::string("bind: ") + std::strerror(errno));
    }
    if (::listen(listen_fd_, 16) != 0) throw std::runtime_error(std::string("listen: ") + std::strerror(errno));
    socklen_t len = sizeof(addr);
    ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    return ntohs(addr.sin_port);
  }

  /// Accepts connections until stop() is called.
  void serve() {
    running_ = true;
    while (running_) {
      pollfd pfd{listen_fd_, POLLIN, 0};
      if (::poll(&pfd, 1, 100) <= 0) continue;
      const int fd = ::accept(listen_fd_, nullptr, nullptr);
      if (fd < 0) continue;
      int yes = 1;
      ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &yes, sizeof(yes));
      std::lock_guard lock(workers_mutex_);
      workers_.emplace_back([this, fd] { run_connection(fd); });
    }
  }

  /// Safe to call from a signal handler; serve() returns shortly after.
  void request_stop() { running_ = false; }

  void stop() {
    running_ = false;
    {
      std::lock_guard lock(workers_mutex_);
      for (auto& w : workers_) {
        if (w.joinable()) w.join();
      }
      workers_.clear();
    }
    if (listen_fd_ >= 0) {
      ::close(listen_fd_);
      listen_fd_ = -1;
    }
  }

 private:
  static bool send_all(int fd, const std::string& data, bool droppable) {
    std::size_t sent = 0;
    while (sent < data.size()) {
      const int flags = MSG_NOSIGNAL | (droppable && sent == 0 ? MSG_DONTWAIT : 0);
      const ssize_t n = ::send(fd, data.data() + sent, data.size() - sent, flags);
      if (n < 0) {
        if (errno == EINTR) continue;
        return false;
      }
      sent += static_cast<std::size_t>(n);
    }
    return true;
  }

  void run_connection(int fd) {
    Session session(opt_.session);
    std::mutex session_mutex;
    std::mutex write_mutex;
    std::atomic<bool> open{true};

    auto write = [&](const std::vector<nlohmann::json>& msgs, bool droppable) {
      std::string buf;
      for (const auto& m : msgs) buf += m.dump() + "\n";
      std::lock_guard lock(write_mutex);
      if (!buf.empty() && !send_all(fd, buf, droppable) && !droppable) open = false;
    };

    if (!opt_.initial_chain.empty()) {
      std::lock_guard lock(session_mutex);
      const nlohmann::json load = {{"type", "load_chain"}, {"path", opt_.initial_chain}};
      write(session.handle(load), false);
    }

    std::thread ticker;
    if (opt_.wall_clock) {
      ticker = std::thread([&] {
        const auto start = std::chrono::steady_clock::now();
        const auto period = std::chrono::duration<double>(1.0 / opt_.session.clock_rate);
        auto next = start;
        while (open && running_) {
          next += std::chrono::duration_cast<std::chrono::steady_clock::duration>(period);
          std::this_thread::sleep_until(next);
          const double now = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
          std::vector<nlohmann::json> msgs;
          {
            std::lock_guard lock(session_mutex);
            msgs = session.advance_clock(now);
          }
          write(msgs, true);
        }
      });
    }

    std::string pending;
    char chunk[4096];
    while (open && running_) {
      pollfd pfd{fd, POLLIN, 0};
      const int ready = ::poll(&pfd, 1, 100);
      if (ready <= 0) continue;
      const ssize_t n = ::recv(fd, chunk, sizeof(chunk), 0);
      if (n <= 0) break;
      pending.append(chunk, static_cast<std::size_t>(n));
      std::size_t pos;
      while ((pos = pending.find('\n')) != std::string::npos) {
        std::string line = pending.substr(0, pos);
        pending.erase(0, pos + 1);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<nlohmann::json> replies;
        {
          std::lock_guard lock(session_mutex);
          replies = session.handle_line(line);
        }
        write(replies, false);
      }
    }
    open = false;
    if (ticker.joinable()) ticker.join();
    ::shutdown(fd, SHUT_RDWR);
    ::close(fd);
  }

  Options opt_;
  int listen_fd_ = -1;
  std::atomic<bool> running_{false};
  std::mutex workers_mutex_;
  std::vector<std::thread> workers_;
};

}  // namespace handguide
