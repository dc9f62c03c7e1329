#include "backends/remote.hpp"

#include "backends/wire.hpp"
#include "core/error.hpp"

#include <future>
#include <thread>

namespace retouch::backends {

using nlohmann::json;

struct RemoteConnection::Session {
    std::unique_ptr<wire::Stream> stream;
    std::mutex write_mutex;
    std::mutex pending_mutex;
    std::map<std::uint64_t, std::promise<json>> pending;
    std::exception_ptr failure;
    std::atomic<bool> dead{false};
    std::thread reader;

    explicit Session(std::unique_ptr<wire::Stream> s) : stream(std::move(s)) {
        reader = std::thread([this] { read_loop(); });
    }

    ~Session() {
        stream->close();
        if (reader.joinable()) {
            reader.join();
        }
    }

    void read_loop() {
        try {
            for (;;) {
                json message = wire::read_frame(*stream);
                const auto id = message.find("id");
                const auto ok = message.find("ok");
                if (id == message.end() || !id->is_number_unsigned() || ok == message.end() || !ok->is_boolean()) {
                    fail(ErrorCode::framing, "response lacks a numeric id or boolean ok");
                }
                std::promise<json> waiter;
                {
                    std::lock_guard lock(pending_mutex);
                    auto it = pending.find(id->get<std::uint64_t>());
                    if (it == pending.end()) {
                        fail(ErrorCode::framing, "response for unknown request id " + id->dump());
                    }
                    waiter = std::move(it->second);
                    pending.erase(it);
                }
                waiter.set_value(std::move(message));
            }
        } catch (const Error& e) {
            if (e.code() == ErrorCode::framing) {
                stream->close();
            }
            fail_all(std::current_exception());
        } catch (...) {
            stream->close();
            fail_all(std::current_exception());
        }
    }

    void fail_all(std::exception_ptr error) {
        std::lock_guard lock(pending_mutex);
        failure = error;
        dead = true;
        for (auto& [id, waiter] : pending) {
            waiter.set_exception(error);
        }
        pending.clear();
    }
};

RemoteConnection::RemoteConnection(Connector connector) : connector_(std::move(connector)) {}

RemoteConnection::~RemoteConnection() {
    std::lock_guard lock(mutex_);
    session_.reset();
}

std::shared_ptr<RemoteConnection::Session> RemoteConnection::session() {
    std::lock_guard lock(mutex_);
    if (!session_ || session_->dead) {
        session_.reset();
        session_ = std::make_shared<Session>(connector_());
    }
    return session_;
}

json RemoteConnection::call(const std::string& op, json args) {
    auto s = session();
    const std::uint64_t id = next_id_.fetch_add(1);
    std::future<json> reply;
    {
        std::lock_guard lock(s->pending_mutex);
        if (s->dead) {
            std::rethrow_exception(s->failure);
        }
        reply = s->pending[id].get_future();
    }
    try {
        std::lock_guard lock(s->write_mutex);
        wire::write_frame(*s->stream, wire::request(id, op, std::move(args)));
    } catch (...) {
        std::lock_guard lock(s->pending_mutex);
        s->pending.erase(id);
        throw;
    }
    json response = reply.get();
    if (!response.at("ok").get<bool>()) {
        const json& error = response.contains("error") ? response.at("error") : json();
        std::string message;
        if (error.is_string()) {
            message = error.get<std::string>();
        } else if (error.is_object()) {
            message = error.value("type", std::string("error")) + ": " + error.value("message", std::string());
        } else {
            message = "unspecified server error";
        }
        fail(ErrorCode::backend, "remote " + op + " failed: " + message);
    }
    if (!response.contains("result")) {
        fail(ErrorCode::framing, "successful response without a result");
    }
    return std::move(response.at("result"));
}

const HandshakeInfo& RemoteConnection::handshake() {
    std::call_once(handshake_once_, [this] {
        const json result = call("handshake", {{"client", "retouch"}, {"protocol", wire::kProtocolVersion}});
        HandshakeInfo info;
        try {
            info.embedding_dim = result.at("embedding_dim").get<std::size_t>();
            info.latent_stride = result.at("latent_stride").get<std::size_t>();
            info.models = result.value("models", json::object());
        } catch (const json::exception& e) {
            fail(ErrorCode::framing, std::string("malformed handshake: ") + e.what());
        }
        if (info.embedding_dim < 1 || info.embedding_dim > kMaxEmbeddingDim) {
            fail(ErrorCode::backend, "handshake embedding_dim " + std::to_string(info.embedding_dim) +
                                         " outside 1.." + std::to_string(kMaxEmbeddingDim));
        }
        if (info.latent_stride < 1 || info.latent_stride > kMaxLatentStride) {
            fail(ErrorCode::backend, "handshake latent_stride " + std::to_string(info.latent_stride) +
                                         " outside 1.." + std::to_string(kMaxLatentStride));
        }
        handshake_ = std::move(info);
    });
    return handshake_;
}

std::unique_ptr<wire::Stream> open_endpoint(const std::string& endpoint) {
    if (endpoint.rfind("tcp://", 0) == 0) {
        const std::string rest = endpoint.substr(6);
        const auto colon = rest.rfind(':');
        if (colon == std::string::npos) {
            fail(ErrorCode::invalid_argument, "tcp endpoint needs host:port: " + endpoint);
        }
        int port = 0;
        try {
            port = std::stoi(rest.substr(colon + 1));
        } catch (const std::exception&) {
            port = -1;
        }
        if (port <= 0 || port > 65535) {
            fail(ErrorCode::invalid_argument, "invalid port in " + endpoint);
        }
        return wire::connect_tcp(rest.substr(0, colon), static_cast<std::uint16_t>(port));
    }
    if (endpoint.rfind("exec:", 0) == 0) {
        return wire::spawn_process(endpoint.substr(5));
    }
    fail(ErrorCode::invalid_argument, "unknown remote endpoint: " + endpoint);
}

namespace {

Embedding embedding_from(const json& result, std::size_t dim) {
    Tensor t = wire::decode_tensor(result.at("embedding"));
    if (t.size() != dim) {
        fail(ErrorCode::shape, "remote embedding has " + std::to_string(t.size()) + " values, handshake declared " +
                                   std::to_string(dim));
    }
    return Embedding(t.data().begin(), t.data().end());
}

class RemoteEmbedder final : public TextEmbedder, public ImageEmbedder {
  public:
    RemoteEmbedder(std::shared_ptr<RemoteConnection> c, std::size_t dim) : conn_(std::move(c)), dim_(dim) {}

    Embedding embed_text(const std::string& text) const override {
        return embedding_from(conn_->call("embed_text", {{"text", text}}), dim_);
    }

    Embedding embed_image(const Image& image) const override {
        return embedding_from(conn_->call("embed_image", {{"image", wire::encode_image(image)}}), dim_);
    }

  private:
    std::shared_ptr<RemoteConnection> conn_;
    std::size_t dim_;
};

class RemoteSegmenter final : public Segmenter {
  public:
    explicit RemoteSegmenter(std::shared_ptr<RemoteConnection> c) : conn_(std::move(c)) {}

    std::vector<BinaryMask> segment(const Image& image) const override {
        const json result = conn_->call("segment", {{"image", wire::encode_image(image)}});
        std::vector<BinaryMask> masks;
        for (const auto& node : result.at("masks")) {
            BinaryMask mask = wire::decode_mask(node);
            if (mask.width() != image.width() || mask.height() != image.height()) {
                fail(ErrorCode::shape, "remote segmenter returned a mask of the wrong size");
            }
            masks.push_back(std::move(mask));
        }
        return masks;
    }

  private:
    std::shared_ptr<RemoteConnection> conn_;
};

class RemoteCodec final : public LatentCodec {
  public:
    RemoteCodec(std::shared_ptr<RemoteConnection> c, std::size_t stride) : conn_(std::move(c)), stride_(stride) {}

    LatentTensor encode(const Image& image) const override {
        return wire::decode_tensor(conn_->call("encode", {{"image", wire::encode_image(image)}}).at("latent"));
    }

    Image decode(const LatentTensor& latent) const override {
        return wire::decode_image(conn_->call("decode", {{"latent", wire::encode_tensor(latent)}}).at("image"));
    }

    std::size_t stride() const override { return stride_; }

  private:
    std::shared_ptr<RemoteConnection> conn_;
    std::size_t stride_;
};

class RemoteDenoiser final : public Denoiser {
  public:
    explicit RemoteDenoiser(std::shared_ptr<RemoteConnection> c) : conn_(std::move(c)) {}

    LatentTensor predict_noise(const NoiseQuery& query) const override {
        const json result = conn_->call("predict_noise", {{"latent", wire::encode_tensor(query.latent)},
                                                          {"t", query.step},
                                                          {"alpha_bar", query.alpha_bar},
                                                          {"text", query.text}});
        LatentTensor noise = wire::decode_tensor(result.at("noise"));
        if (!noise.same_shape(query.latent)) {
            fail(ErrorCode::shape, "remote noise prediction has shape " + shape_string(noise.shape()));
        }
        return noise;
    }

  private:
    std::shared_ptr<RemoteConnection> conn_;
};

} // namespace

Backend make_remote_backend(std::shared_ptr<RemoteConnection> connection, const std::string& endpoint) {
    const HandshakeInfo& info = connection->handshake();
    auto embedder = std::make_shared<RemoteEmbedder>(connection, info.embedding_dim);
    Backend backend;
    backend.descriptor.kind = BackendDescriptor::Kind::remote;
    backend.descriptor.endpoint = endpoint;
    backend.descriptor.embedding_dim = info.embedding_dim;
    backend.descriptor.latent_stride = info.latent_stride;
    backend.text_embedder = embedder;
    backend.image_embedder = embedder;
    backend.segmenter = std::make_shared<RemoteSegmenter>(connection);
    backend.codec = std::make_shared<RemoteCodec>(connection, info.latent_stride);
    backend.denoiser = std::make_shared<RemoteDenoiser>(connection);
    backend.identity = {{"kind", "remote"},
                        {"endpoint", endpoint},
                        {"embedding_dim", info.embedding_dim},
                        {"latent_stride", info.latent_stride},
                        {"models", info.models}};
    return backend;
}

Backend make_remote_backend(const std::string& endpoint) {
    auto connection = std::make_shared<RemoteConnection>([endpoint] { return open_endpoint(endpoint); });
    return make_remote_backend(std::move(connection), endpoint);
}

} // namespace retouch::backends
