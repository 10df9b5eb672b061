// Copyright 2026 The sroskit Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef SROS_WIRE_HPP_
#define SROS_WIRE_HPP_

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include <openssl/err.h>
#include <openssl/evp.h>
#include <openssl/ssl.h>
#include <openssl/sslerr.h>

#include <json.hpp>

#include "sros/error.hpp"
#include "sros/names.hpp"
#include "sros/pki.hpp"
#include "sros/policy.hpp"

namespace sros::wire {

// ---------------------------------------------------------------------------
// Framing
//
// [length: u32 big-endian][body: length bytes]; 1 <= length <= 16 MiB.

inline constexpr std::size_t kMaxFrameBytes = 16u * 1024u * 1024u;

/// Minimal byte stream the framing layer runs over.
class ByteStream {
 public:
  virtual ~ByteStream() = default;
  /// Returns bytes read; 0 means end of stream.
  virtual std::size_t read_some(void* buf, std::size_t len) = 0;
  virtual void write_all(const void* buf, std::size_t len) = 0;
};

namespace framing_detail {

/// Reads exactly `len` bytes. Returns false on clean EOF before the first
/// byte; EOF mid-read is a protocol error.
inline bool read_exact(ByteStream& stream, void* buf, std::size_t len) {
  auto* p = static_cast<std::uint8_t*>(buf);
  std::size_t done = 0;
  while (done < len) {
    std::size_t n = stream.read_some(p + done, len - done);
    if (n == 0) {
      if (done == 0) return false;
      raise(Errc::protocol_error, "stream ended mid-frame");
    }
    done += n;
  }
  return true;
}

}  // namespace framing_detail

inline void write_frame(ByteStream& stream, std::span<const std::uint8_t> body) {
  if (body.empty()) raise(Errc::protocol_error, "zero-length frames are illegal");
  if (body.size() > kMaxFrameBytes) {
    raise(Errc::protocol_error, "frame exceeds 16 MiB cap");
  }
  std::vector<std::uint8_t> buf(4 + body.size());
  const auto len = static_cast<std::uint32_t>(body.size());
  buf[0] = static_cast<std::uint8_t>(len >> 24);
  buf[1] = static_cast<std::uint8_t>(len >> 16);
  buf[2] = static_cast<std::uint8_t>(len >> 8);
  buf[3] = static_cast<std::uint8_t>(len);
  std::memcpy(buf.data() + 4, body.data(), body.size());
  stream.write_all(buf.data(), buf.size());
}

/// Reads one frame; std::nullopt on clean end of stream.
inline std::optional<std::vector<std::uint8_t>> read_frame(ByteStream& stream) {
  std::uint8_t header[4];
  if (!framing_detail::read_exact(stream, header, 4)) return std::nullopt;
  const std::uint32_t len = (static_cast<std::uint32_t>(header[0]) << 24) |
                            (static_cast<std::uint32_t>(header[1]) << 16) |
                            (static_cast<std::uint32_t>(header[2]) << 8) |
                            static_cast<std::uint32_t>(header[3]);
  if (len == 0) raise(Errc::protocol_error, "zero-length frame");
  if (len > kMaxFrameBytes) raise(Errc::protocol_error, "frame length exceeds cap");
  std::vector<std::uint8_t> body(len);
  if (!framing_detail::read_exact(stream, body.data(), len)) {
    raise(Errc::protocol_error, "stream ended mid-frame");
  }
  return body;
}

// ---------------------------------------------------------------------------
// RPC messages (JSON over frames)

struct RpcError {
  std::string code;
  std::string reason;
};

struct RpcRequest {
  std::uint64_t id = 0;
  std::string verb;
  nlohmann::json args = nlohmann::json::object();
};

struct RpcResponse {
  std::uint64_t id = 0;
  bool ok = false;
  nlohmann::json value;  // present when ok
  std::optional<RpcError> error;
};

struct RpcNotification {
  std::string op;
  nlohmann::json fields = nlohmann::json::object();  // everything but "op"
};

using RpcMessage = std::variant<RpcRequest, RpcResponse, RpcNotification>;

inline nlohmann::json to_json(const RpcMessage& msg) {
  if (const auto* req = std::get_if<RpcRequest>(&msg)) {
    return {{"id", req->id}, {"verb", req->verb}, {"args", req->args}};
  }
  if (const auto* res = std::get_if<RpcResponse>(&msg)) {
    nlohmann::json j{{"id", res->id}, {"ok", res->ok}};
    if (res->ok) {
      j["value"] = res->value;
    } else if (res->error) {
      j["error"] = {{"code", res->error->code}, {"reason", res->error->reason}};
    }
    return j;
  }
  const auto& note = std::get<RpcNotification>(msg);
  nlohmann::json j = note.fields;
  j["op"] = note.op;
  return j;
}

inline RpcMessage rpc_from_json(const nlohmann::json& j) {
  try {
    if (!j.is_object()) raise(Errc::protocol_error, "rpc message must be an object");
    if (j.contains("id")) {
      if (j.contains("verb")) {
        RpcRequest req;
        req.id = j.at("id").get<std::uint64_t>();
        req.verb = j.at("verb").get<std::string>();
        req.args = j.value("args", nlohmann::json::object());
        return req;
      }
      RpcResponse res;
      res.id = j.at("id").get<std::uint64_t>();
      res.ok = j.at("ok").get<bool>();
      if (res.ok) {
        res.value = j.value("value", nlohmann::json());
      } else {
        const auto& e = j.at("error");
        res.error = RpcError{e.at("code").get<std::string>(),
                             e.at("reason").get<std::string>()};
      }
      return res;
    }
    RpcNotification note;
    note.op = j.at("op").get<std::string>();
    note.fields = j;
    note.fields.erase("op");
    return note;
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    raise(Errc::protocol_error, std::string("bad rpc message: ") + e.what());
  }
}

inline std::vector<std::uint8_t> encode_rpc(const RpcMessage& msg) {
  const std::string text = to_json(msg).dump();
  return std::vector<std::uint8_t>(text.begin(), text.end());
}

inline RpcMessage decode_rpc(std::span<const std::uint8_t> body) {
  nlohmann::json j = nlohmann::json::parse(
      std::string_view{reinterpret_cast<const char*>(body.data()), body.size()},
      nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded()) raise(Errc::protocol_error, "rpc frame is not JSON");
  return rpc_from_json(j);
}

// ---------------------------------------------------------------------------
// Message type digests

/// Lowercase hex SHA-256 of the UTF-8 message type definition.
inline std::string type_digest(std::string_view definition) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (!EVP_Digest(definition.data(), definition.size(), digest, &len, EVP_sha256(),
                  nullptr)) {
    raise(Errc::io_failure, "digest failed");
  }
  static const char hex[] = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 0xF];
  }
  return out;
}

inline bool is_type_digest(std::string_view s) {
  if (s.size() != 64) return false;
  for (char c : s) {
    if (!((c >= '0' && c <= '9') || (c >= 'a' && c <= 'f'))) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// TCP plumbing

/// Owning socket with stream semantics. Timeouts map to Errc::timeout.
class TcpStream final : public ByteStream {
 public:
  TcpStream() = default;
  explicit TcpStream(int fd) : fd_(fd) {}
  TcpStream(TcpStream&& other) noexcept : fd_(other.fd_) { other.fd_ = -1; }
  TcpStream& operator=(TcpStream&& other) noexcept {
    if (this != &other) {
      close();
      fd_ = other.fd_;
      other.fd_ = -1;
    }
    return *this;
  }
  ~TcpStream() override { close(); }

  static TcpStream connect(const std::string& host, std::uint16_t port) {
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* result = nullptr;
    const std::string service = std::to_string(port);
    if (::getaddrinfo(host.c_str(), service.c_str(), &hints, &result) != 0) {
      raise(Errc::io_failure, "cannot resolve '" + host + "'");
    }
    int fd = -1;
    for (addrinfo* ai = result; ai; ai = ai->ai_next) {
      fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
      if (fd < 0) continue;
      if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) break;
      ::close(fd);
      fd = -1;
    }
    ::freeaddrinfo(result);
    if (fd < 0) {
      raise(Errc::io_failure, "cannot connect to " + host + ":" + service);
    }
    int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
    return TcpStream{fd};
  }

  int fd() const { return fd_; }
  bool valid() const { return fd_ >= 0; }

  void set_read_timeout(std::optional<int> millis) {
    timeval tv{};
    if (millis) {
      tv.tv_sec = *millis / 1000;
      tv.tv_usec = (*millis % 1000) * 1000;
    }
    ::setsockopt(fd_, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof(tv));
  }

  void set_write_timeout(std::optional<int> millis) {
    timeval tv{};
    if (millis) {
      tv.tv_sec = *millis / 1000;
      tv.tv_usec = (*millis % 1000) * 1000;
    }
    ::setsockopt(fd_, SOL_SOCKET, SO_SNDTIMEO, &tv, sizeof(tv));
  }

  std::size_t read_some(void* buf, std::size_t len) override {
    while (true) {
      ssize_t n = ::recv(fd_, buf, len, 0);
      if (n >= 0) return static_cast<std::size_t>(n);
      if (errno == EINTR) continue;
      if (errno == EAGAIN || errno == EWOULDBLOCK) {
        raise(Errc::timeout, "read timed out");
      }
      raise(Errc::io_failure, std::string("read failed: ") + std::strerror(errno));
    }
  }

  void write_all(const void* buf, std::size_t len) override {
    const auto* p = static_cast<const std::uint8_t*>(buf);
    std::size_t done = 0;
    while (done < len) {
      ssize_t n = ::send(fd_, p + done, len - done, MSG_NOSIGNAL);
      if (n < 0) {
        if (errno == EINTR) continue;
        if (errno == EAGAIN || errno == EWOULDBLOCK) {
          raise(Errc::timeout, "write timed out");
        }
        raise(Errc::io_failure, std::string("write failed: ") + std::strerror(errno));
      }
      done += static_cast<std::size_t>(n);
    }
  }

  void shutdown() {
    if (fd_ >= 0) ::shutdown(fd_, SHUT_RDWR);
  }

  void close() {
    if (fd_ >= 0) {
      ::close(fd_);
      fd_ = -1;
    }
  }

  std::string peer_address() const {
    sockaddr_storage addr{};
    socklen_t len = sizeof(addr);
    if (::getpeername(fd_, reinterpret_cast<sockaddr*>(&addr), &len) != 0) return "";
    char host[NI_MAXHOST], serv[NI_MAXSERV];
    if (::getnameinfo(reinterpret_cast<sockaddr*>(&addr), len, host, sizeof(host), serv,
                      sizeof(serv), NI_NUMERICHOST | NI_NUMERICSERV) != 0) {
      return "";
    }
    return std::string(host) + ":" + serv;
  }

 private:
  int fd_ = -1;
};

/// Listening socket with interruptible accept (self-pipe).
class TcpListener {
 public:
  TcpListener() = default;

  static TcpListener bind(const std::string& host, std::uint16_t port) {
    TcpListener l;
    l.fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (l.fd_ < 0) raise(Errc::io_failure, "cannot create socket");
    int one = 1;
    ::setsockopt(l.fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
      raise(Errc::io_failure, "bind host must be an IPv4 address, got '" + host + "'");
    }
    if (::bind(l.fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
      raise(Errc::io_failure, "cannot bind " + host + ":" + std::to_string(port) + ": " +
                                  std::strerror(errno));
    }
    if (::listen(l.fd_, 64) != 0) raise(Errc::io_failure, "listen failed");
    sockaddr_in bound{};
    socklen_t len = sizeof(bound);
    ::getsockname(l.fd_, reinterpret_cast<sockaddr*>(&bound), &len);
    l.port_ = ntohs(bound.sin_port);
    if (::pipe(l.wake_) != 0) raise(Errc::io_failure, "cannot create wake pipe");
    return l;
  }

  TcpListener(TcpListener&& other) noexcept { *this = std::move(other); }
  TcpListener& operator=(TcpListener&& other) noexcept {
    if (this != &other) {
      close();
      fd_ = other.fd_;
      port_ = other.port_;
      wake_[0] = other.wake_[0];
      wake_[1] = other.wake_[1];
      other.fd_ = -1;
      other.wake_[0] = other.wake_[1] = -1;
    }
    return *this;
  }
  ~TcpListener() { close(); }

  std::uint16_t port() const { return port_; }
  bool valid() const { return fd_ >= 0; }

  /// Blocks until a connection arrives or request_stop() is called.
  std::optional<TcpStream> accept() {
    while (true) {
      pollfd fds[2] = {{fd_, POLLIN, 0}, {wake_[0], POLLIN, 0}};
      int rc = ::poll(fds, 2, -1);
      if (rc < 0) {
        if (errno == EINTR) continue;
        raise(Errc::io_failure, "poll failed");
      }
      if (fds[1].revents) return std::nullopt;
      if (!(fds[0].revents & POLLIN)) continue;
      int client = ::accept(fd_, nullptr, nullptr);
      if (client < 0) {
        if (errno == EINTR || errno == ECONNABORTED) continue;
        return std::nullopt;
      }
      int one = 1;
      ::setsockopt(client, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
      return TcpStream{client};
    }
  }

  void request_stop() {
    if (wake_[1] >= 0) {
      char b = 0;
      [[maybe_unused]] ssize_t n = ::write(wake_[1], &b, 1);
    }
  }

  void close() {
    request_stop();
    if (fd_ >= 0) ::close(fd_);
    if (wake_[0] >= 0) ::close(wake_[0]);
    if (wake_[1] >= 0) ::close(wake_[1]);
    fd_ = wake_[0] = wake_[1] = -1;
  }

 private:
  int fd_ = -1;
  int wake_[2] = {-1, -1};
  std::uint16_t port_ = 0;
};

inline std::pair<std::string, std::uint16_t> split_host_port(const std::string& addr) {
  auto colon = addr.rfind(':');
  if (colon == std::string::npos || colon + 1 >= addr.size()) {
    raise(Errc::config_invalid, "expected host:port, got '" + addr + "'");
  }
  int port = 0;
  try {
    port = std::stoi(addr.substr(colon + 1));
  } catch (const std::exception&) {
    raise(Errc::config_invalid, "bad port in '" + addr + "'");
  }
  if (port < 0 || port > 65535) raise(Errc::config_invalid, "bad port in '" + addr + "'");
  return {addr.substr(0, colon), static_cast<std::uint16_t>(port)};
}

// ---------------------------------------------------------------------------
// Channels

/// The authenticated peer on the other end of a channel.
struct PeerIdentity {
  names::NamespacePath node;
  policy::PolicyProfile profile;
};

enum class ChannelRole { client, server };

/// A framed, peer-authenticated byte channel. One logical reader and one
/// logical writer at a time; writers serialize frames externally.
class Channel {
 public:
  virtual ~Channel() = default;
  virtual std::optional<std::vector<std::uint8_t>> read_frame() = 0;
  virtual void write_frame(std::span<const std::uint8_t> body) = 0;
  virtual const PeerIdentity& peer() const = 0;
  virtual void set_read_timeout(std::optional<int> millis) = 0;
  virtual void close() = 0;
  virtual const char* transport_name() const = 0;

  void write_json(const nlohmann::json& j) {
    const std::string text = j.dump();
    write_frame(std::span<const std::uint8_t>(
        reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
  }
};

struct SecureChannelConfig {
  std::filesystem::path keystore_dir;
  int min_tls_version = TLS1_2_VERSION;  // floor; 1.3 negotiated when available
};

namespace tls_detail {

struct SslCtxFree {
  void operator()(SSL_CTX* p) const {
    if (p) SSL_CTX_free(p);
  }
};
struct SslFree {
  void operator()(SSL* p) const {
    if (p) SSL_free(p);
  }
};
using SslCtxPtr = std::unique_ptr<SSL_CTX, SslCtxFree>;
using SslPtr = std::unique_ptr<SSL, SslFree>;

inline std::string ssl_error_detail(unsigned long err) {
  if (!err) return "handshake failed";
  char buf[256];
  ERR_error_string_n(err, buf, sizeof(buf));
  return buf;
}

inline SslCtxPtr make_ctx(const pki::Keystore& ks, ChannelRole role, int min_version) {
  SslCtxPtr ctx{SSL_CTX_new(role == ChannelRole::server ? TLS_server_method()
                                                        : TLS_client_method())};
  if (!ctx) raise(Errc::io_failure, "SSL_CTX_new failed");
  if (!SSL_CTX_set_min_proto_version(ctx.get(), min_version)) {
    raise(Errc::config_invalid, "cannot set TLS version floor");
  }
  if (SSL_CTX_use_certificate(ctx.get(), ks.cert()) != 1 ||
      SSL_CTX_use_PrivateKey(ctx.get(), ks.key()) != 1 ||
      SSL_CTX_check_private_key(ctx.get()) != 1) {
    raise(Errc::handshake_failed,
          "keystore certificate/key unusable: " + pki::ossl::last_error());
  }
  // present the full issuer chain; trust is anchored at the keystore root
  for (const auto& cert : ks.chain()) {
    X509_up_ref(cert.get());
    if (SSL_CTX_add_extra_chain_cert(ctx.get(), cert.get()) != 1) {
      X509_free(cert.get());
      raise(Errc::io_failure, "cannot add chain certificate");
    }
  }
  X509_STORE* store = SSL_CTX_get_cert_store(ctx.get());
  if (!store || X509_STORE_add_cert(store, ks.trusted_root()) != 1) {
    raise(Errc::io_failure, "cannot install trust anchor");
  }
  // both roles always authenticate the peer; there is no anonymous mode
  int mode = SSL_VERIFY_PEER;
  if (role == ChannelRole::server) mode |= SSL_VERIFY_FAIL_IF_NO_PEER_CERT;
  SSL_CTX_set_verify(ctx.get(), mode, nullptr);
  return ctx;
}

}  // namespace tls_detail

/// Mutually-authenticated TLS channel. The peer identity (node name plus
/// policy profile) comes from the verified certificate, never from payload.
class TlsChannel final : public Channel {
 public:
  TlsChannel(tls_detail::SslPtr ssl, TcpStream stream, PeerIdentity peer)
      : ssl_(std::move(ssl)), stream_(std::move(stream)), peer_(std::move(peer)) {}

  ~TlsChannel() override { close(); }

  std::optional<std::vector<std::uint8_t>> read_frame() override {
    SslStream adapter{*this};
    return wire::read_frame(adapter);
  }

  void write_frame(std::span<const std::uint8_t> body) override {
    SslStream adapter{*this};
    wire::write_frame(adapter, body);
  }

  const PeerIdentity& peer() const override { return peer_; }

  void set_read_timeout(std::optional<int> millis) override {
    stream_.set_read_timeout(millis);
  }

  void close() override {
    if (ssl_ && stream_.valid()) {
      SSL_shutdown(ssl_.get());  // best effort close_notify
    }
    stream_.close();
  }

  const char* transport_name() const override { return "tls"; }

 private:
  struct SslStream final : public ByteStream {
    explicit SslStream(TlsChannel& ch) : ch(ch) {}

    std::size_t read_some(void* buf, std::size_t len) override {
      while (true) {
        ERR_clear_error();
        int n = SSL_read(ch.ssl_.get(), buf, static_cast<int>(len));
        if (n > 0) return static_cast<std::size_t>(n);
        int err = SSL_get_error(ch.ssl_.get(), n);
        if (err == SSL_ERROR_ZERO_RETURN) return 0;  // clean TLS shutdown
        if (err == SSL_ERROR_SYSCALL) {
          if (errno == EINTR) continue;
          if (errno == EAGAIN || errno == EWOULDBLOCK) {
            raise(Errc::timeout, "read timed out");
          }
          return 0;  // peer went away; surfaces as EOF
        }
        raise(Errc::io_failure, "TLS read failed: " + pki::ossl::last_error());
      }
    }

    void write_all(const void* buf, std::size_t len) override {
      const auto* p = static_cast<const std::uint8_t*>(buf);
      std::size_t done = 0;
      while (done < len) {
        ERR_clear_error();
        int n = SSL_write(ch.ssl_.get(), p + done, static_cast<int>(len - done));
        if (n > 0) {
          done += static_cast<std::size_t>(n);
          continue;
        }
        int err = SSL_get_error(ch.ssl_.get(), n);
        if (err == SSL_ERROR_SYSCALL && errno == EINTR) continue;
        if (err == SSL_ERROR_SYSCALL && (errno == EAGAIN || errno == EWOULDBLOCK)) {
          raise(Errc::timeout, "write timed out");
        }
        raise(Errc::io_failure, "TLS write failed: " + pki::ossl::last_error());
      }
    }

    TlsChannel& ch;
  };

  tls_detail::SslPtr ssl_;
  TcpStream stream_;
  PeerIdentity peer_;
};

// ---------------------------------------------------------------------------
// Transport plug-in seam
//
// Channel establishment sits behind this interface. Two implementations
// ship: mutual TLS (the default everywhere) and a plaintext variant that
// exists only for the test harness — it still exchanges and statically
// verifies certificates, but provides no confidentiality, which is exactly
// what the capture-proxy tests need to demonstrate.

class Transport {
 public:
  virtual ~Transport() = default;
  virtual std::unique_ptr<Channel> connect(const std::string& host, std::uint16_t port) = 0;
  virtual std::unique_ptr<Channel> accept(TcpStream stream) = 0;
  virtual const char* name() const = 0;
};

class TlsTransport final : public Transport {
 public:
  explicit TlsTransport(const SecureChannelConfig& config)
      : keystore_(pki::Keystore::load(config.keystore_dir)),
        client_ctx_(tls_detail::make_ctx(keystore_, ChannelRole::client,
                                         config.min_tls_version)),
        server_ctx_(tls_detail::make_ctx(keystore_, ChannelRole::server,
                                         config.min_tls_version)) {}

  std::unique_ptr<Channel> connect(const std::string& host, std::uint16_t port) override {
    return handshake(ChannelRole::client, TcpStream::connect(host, port));
  }

  std::unique_ptr<Channel> accept(TcpStream stream) override {
    return handshake(ChannelRole::server, std::move(stream));
  }

  const char* name() const override { return "tls"; }

  const pki::Keystore& keystore() const { return keystore_; }

  std::unique_ptr<Channel> handshake(ChannelRole role, TcpStream stream) {
    // bound the handshake so a stalled peer cannot wedge an accept thread
    stream.set_read_timeout(10000);
    stream.set_write_timeout(10000);
    SSL_CTX* ctx = role == ChannelRole::server ? server_ctx_.get() : client_ctx_.get();
    tls_detail::SslPtr ssl{SSL_new(ctx)};
    if (!ssl || SSL_set_fd(ssl.get(), stream.fd()) != 1) {
      raise(Errc::io_failure, "cannot attach TLS to socket");
    }
    ERR_clear_error();
    const int rc = role == ChannelRole::server ? SSL_accept(ssl.get())
                                               : SSL_connect(ssl.get());
    if (rc != 1) {
      const unsigned long err = ERR_peek_error();
      if (ERR_GET_REASON(err) == SSL_R_PEER_DID_NOT_RETURN_A_CERTIFICATE) {
        ERR_clear_error();
        raise(Errc::peer_cert_missing, "peer presented no certificate");
      }
      const long vr = SSL_get_verify_result(ssl.get());
      std::string detail = tls_detail::ssl_error_detail(err);
      ERR_clear_error();
      if (vr != X509_V_OK) {
        detail += std::string(" (") + X509_verify_cert_error_string(vr) + ")";
      }
      raise(Errc::handshake_failed, detail);
    }

    pki::ossl::X509Ptr peer_cert{SSL_get1_peer_certificate(ssl.get())};
    if (!peer_cert) raise(Errc::peer_cert_missing, "peer presented no certificate");
    PeerIdentity identity;
    try {
      identity.node = pki::subject_node_name(peer_cert.get());
      identity.profile = pki::parse_policy_extensions(peer_cert.get());
    } catch (const Error& e) {
      raise(Errc::handshake_failed, std::string("peer identity rejected: ") + e.what());
    }
    stream.set_read_timeout(std::nullopt);
    stream.set_write_timeout(30000);
    return std::make_unique<TlsChannel>(std::move(ssl), std::move(stream),
                                        std::move(identity));
  }

 private:
  pki::Keystore keystore_;
  tls_detail::SslCtxPtr client_ctx_;
  tls_detail::SslCtxPtr server_ctx_;
};

/// Plaintext framed channel; test harness only (see Transport note).
class PlainChannel final : public Channel {
 public:
  PlainChannel(TcpStream stream, PeerIdentity peer)
      : stream_(std::move(stream)), peer_(std::move(peer)) {}

  std::optional<std::vector<std::uint8_t>> read_frame() override {
    return wire::read_frame(stream_);
  }
  void write_frame(std::span<const std::uint8_t> body) override {
    wire::write_frame(stream_, body);
  }
  const PeerIdentity& peer() const override { return peer_; }
  void set_read_timeout(std::optional<int> millis) override {
    stream_.set_read_timeout(millis);
  }
  void close() override { stream_.close(); }
  const char* transport_name() const override { return "plaintext-test"; }

 private:
  TcpStream stream_;
  PeerIdentity peer_;
};

class PlainTestTransport final : public Transport {
 public:
  explicit PlainTestTransport(const SecureChannelConfig& config)
      : keystore_(pki::Keystore::load(config.keystore_dir)) {}

  std::unique_ptr<Channel> connect(const std::string& host, std::uint16_t port) override {
    return exchange(TcpStream::connect(host, port));
  }

  std::unique_ptr<Channel> accept(TcpStream stream) override {
    return exchange(std::move(stream));
  }

  const char* name() const override { return "plaintext-test"; }

 private:
  /// Certificates still travel and verify, in the clear, so identity and
  /// authorization behave as over TLS while confidentiality is absent.
  std::unique_ptr<Channel> exchange(TcpStream stream) {
    stream.set_read_timeout(10000);
    stream.set_write_timeout(10000);
    std::string chain_pem;
    for (const auto& c : keystore_.chain()) chain_pem += pki::cert_to_pem(c.get());
    nlohmann::json hello{{"op", "hello"},
                         {"cert", pki::cert_to_pem(keystore_.cert())},
                         {"chain", chain_pem}};
    const std::string hello_text = hello.dump();
    write_frame(stream, std::span<const std::uint8_t>(
                            reinterpret_cast<const std::uint8_t*>(hello_text.data()),
                            hello_text.size()));
    auto frame = read_frame(stream);
    if (!frame) raise(Errc::handshake_failed, "peer closed during hello");
    PeerIdentity identity;
    try {
      auto j = nlohmann::json::parse(frame->begin(), frame->end());
      if (j.at("op") != "hello") raise(Errc::handshake_failed, "expected hello");
      auto peer_cert = pki::cert_from_pem(j.at("cert").get<std::string>());
      auto peer_chain = pki::certs_from_pem(j.at("chain").get<std::string>());
      std::vector<X509*> intermediates;
      for (std::size_t i = 0; i + 1 < peer_chain.size(); ++i) {
        intermediates.push_back(peer_chain[i].get());
      }
      auto verified = pki::verify_chain(peer_cert.get(), intermediates,
                                        keystore_.trusted_root(), std::time(nullptr));
      identity.node = std::move(verified.node);
      identity.profile = std::move(verified.profile);
    } catch (const Error& e) {
      raise(Errc::handshake_failed, std::string("peer identity rejected: ") + e.what());
    } catch (const std::exception& e) {
      raise(Errc::handshake_failed, std::string("bad hello: ") + e.what());
    }
    stream.set_read_timeout(std::nullopt);
    stream.set_write_timeout(30000);
    return std::make_unique<PlainChannel>(std::move(stream), std::move(identity));
  }

  pki::Keystore keystore_;
};

/// Per the channel contract: mutual authentication, then the caller applies
/// session-layer authorization using the returned peer profile before any
/// application frame is processed.
inline std::unique_ptr<Channel> establish_secure_channel(ChannelRole role,
                                                         const SecureChannelConfig& config,
                                                         TcpStream stream) {
  TlsTransport transport{config};
  return transport.handshake(role, std::move(stream));
}

inline std::shared_ptr<Transport> make_transport(std::string_view kind,
                                                 const SecureChannelConfig& config) {
  if (kind == "tls") return std::make_shared<TlsTransport>(config);
  if (kind == "plaintext-test") return std::make_shared<PlainTestTransport>(config);
  raise(Errc::config_invalid, "unknown transport '" + std::string(kind) + "'");
}

}  // namespace sros::wire

#endif  // SROS_WIRE_HPP_
