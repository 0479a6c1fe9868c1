#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>

namespace bridgebench {

/// Blocking loopback TCP socket. Readers are unblocked by shutdown().
class TcpSocket {
 public:
  TcpSocket() = default;
  explicit TcpSocket(int fd);
  ~TcpSocket();
  TcpSocket(TcpSocket&& o) noexcept;
  TcpSocket& operator=(TcpSocket&& o) noexcept;
  TcpSocket(const TcpSocket&) = delete;
  TcpSocket& operator=(const TcpSocket&) = delete;

  static std::optional<TcpSocket> connect_loopback(uint16_t port);

  /// Blocking read; returns bytes read, 0 on orderly close, -1 on error.
  long read_some(std::span<uint8_t> buf);

  /// Write the whole span; false on error.
  bool write_all(std::span<const uint8_t> data);

  void shutdown();
  void close();
  bool valid() const { return fd_ >= 0; }
  int fd() const { return fd_; }

 private:
  int fd_ = -1;
};

class TcpListener {
 public:
  TcpListener() = default;
  ~TcpListener();
  TcpListener(TcpListener&& o) noexcept;
  TcpListener& operator=(TcpListener&& o) noexcept;
  TcpListener(const TcpListener&) = delete;
  TcpListener& operator=(const TcpListener&) = delete;

  /// Bind and listen on 127.0.0.1. Port 0 picks an ephemeral port.
  static std::optional<TcpListener> bind_loopback(uint16_t port);

  /// Blocking accept; nullopt once the listener is closed.
  std::optional<TcpSocket> accept();

  uint16_t port() const { return port_; }
  void close();
  bool valid() const { return fd_ >= 0; }

 private:
  int fd_ = -1;
  uint16_t port_ = 0;
};

}  // namespace bridgebench
