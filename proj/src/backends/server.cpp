#include "backends/server.hpp"

#include "backends/wire.hpp"
#include "core/error.hpp"

#include <mutex>
#include <thread>
#include <vector>

namespace retouch::backends {

using nlohmann::json;

namespace {

json tensor_of(const Embedding& e) {
    return wire::encode_tensor(Tensor({e.size()}, e));
}

json dispatch(const std::string& op, const json& args, const Backend& backend) {
    if (op == "handshake") {
        return {{"embedding_dim", backend.descriptor.embedding_dim},
                {"latent_stride", backend.descriptor.latent_stride},
                {"models", backend.identity}};
    }
    if (op == "embed_text") {
        return {{"embedding", tensor_of(backend.text_embedder->embed_text(args.at("text").get<std::string>()))}};
    }
    if (op == "embed_image") {
        return {{"embedding", tensor_of(backend.image_embedder->embed_image(wire::decode_image(args.at("image"))))}};
    }
    if (op == "segment") {
        json masks = json::array();
        for (const auto& mask : backend.segmenter->segment(wire::decode_image(args.at("image")))) {
            masks.push_back(wire::encode_mask(mask));
        }
        return {{"masks", std::move(masks)}};
    }
    if (op == "encode") {
        return {{"latent", wire::encode_tensor(backend.codec->encode(wire::decode_image(args.at("image"))))}};
    }
    if (op == "decode") {
        return {{"image", wire::encode_image(backend.codec->decode(wire::decode_tensor(args.at("latent"))))}};
    }
    if (op == "predict_noise") {
        const LatentTensor latent = wire::decode_tensor(args.at("latent"));
        const std::string text = args.at("text").get<std::string>();
        const NoiseQuery query{latent, args.at("t").get<std::size_t>(), args.at("alpha_bar").get<double>(), text};
        return {{"noise", wire::encode_tensor(backend.denoiser->predict_noise(query))}};
    }
    fail(ErrorCode::invalid_argument, "unknown op '" + op + "'");
}

} // namespace

json handle_request(const json& request, const Backend& backend) {
    const auto id_it = request.find("id");
    if (id_it == request.end() || !id_it->is_number_unsigned()) {
        return wire::error_response(nullptr, "bad_request", "request lacks a numeric id");
    }
    const auto id = id_it->get<std::uint64_t>();
    try {
        const auto& op = request.at("op").get_ref<const std::string&>();
        const json args = request.value("args", json::object());
        return wire::ok_response(id, dispatch(op, args, backend));
    } catch (const json::exception& e) {
        return wire::error_response(id, "bad_request", e.what());
    } catch (const Error& e) {
        return wire::error_response(id, e.code() == ErrorCode::invalid_argument ? "bad_request" : "model_error",
                                    e.what());
    } catch (const std::exception& e) {
        return wire::error_response(id, "model_error", e.what());
    }
}

void serve(wire::Stream& stream, const Backend& backend, const ServerOptions& options) {
    std::mutex write_mutex;
    std::vector<std::thread> workers;
    auto reply = [&](const json& response) {
        std::lock_guard lock(write_mutex);
        wire::write_frame(stream, response);
    };
    try {
        for (;;) {
            json request;
            try {
                request = wire::read_frame(stream);
            } catch (const Error& e) {
                if (e.code() == ErrorCode::framing) {
                    reply(wire::error_response(nullptr, "framing", e.what()));
                    stream.close();
                }
                break;
            }
            if (options.concurrent) {
                workers.emplace_back([&, request = std::move(request)] {
                    try {
                        reply(handle_request(request, backend));
                    } catch (const Error&) {
                    }
                });
            } else {
                reply(handle_request(request, backend));
            }
        }
    } catch (const Error&) {
        // peer went away mid-reply
    }
    for (auto& worker : workers) {
        worker.join();
    }
}

} // namespace retouch::backends
