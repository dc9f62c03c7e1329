#pragma once

#include "backends/contracts.hpp"
#include "backends/transport.hpp"

#include <atomic>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>

namespace retouch::backends {

struct HandshakeInfo {
    std::size_t embedding_dim = 0;
    std::size_t latent_stride = 1;
    nlohmann::json models = nlohmann::json::object();
};

inline constexpr std::size_t kMaxEmbeddingDim = 4096;
inline constexpr std::size_t kMaxLatentStride = 64;

// Request/response client for the framed protocol. Calls from many threads
// are multiplexed over one connection and matched by request id, so the
// server may answer in any order. A lost connection fails every pending
// call with a retriable transport error; the next call reconnects.
class RemoteConnection {
  public:
    using Connector = std::function<std::unique_ptr<wire::Stream>()>;

    explicit RemoteConnection(Connector connector);
    ~RemoteConnection();
    RemoteConnection(const RemoteConnection&) = delete;
    RemoteConnection& operator=(const RemoteConnection&) = delete;

    // Returns the "result" member of a successful response. A response with
    // ok=false raises a backend error carrying the server's message.
    nlohmann::json call(const std::string& op, nlohmann::json args);

    // Performs (or returns the cached) handshake and validates its bounds.
    const HandshakeInfo& handshake();

  private:
    struct Session;

    std::shared_ptr<Session> session();

    Connector connector_;
    std::mutex mutex_;
    std::shared_ptr<Session> session_;
    std::atomic<std::uint64_t> next_id_{1};
    std::once_flag handshake_once_;
    HandshakeInfo handshake_;
};

// tcp://host:port or exec:<command>.
std::unique_ptr<wire::Stream> open_endpoint(const std::string& endpoint);

// All five contracts over one connection; handshake runs eagerly.
Backend make_remote_backend(std::shared_ptr<RemoteConnection> connection, const std::string& endpoint);
Backend make_remote_backend(const std::string& endpoint);

} // namespace retouch::backends
