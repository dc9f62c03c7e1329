#include "backends/descriptor.hpp"
#include "backends/mock.hpp"
#include "backends/remote.hpp"
#include "backends/server.hpp"
#include "backends/transport.hpp"
#include "backends/wire.hpp"
#include "core/digest.hpp"
#include "pipeline/pipeline.hpp"

#include "support/conformance.hpp"
#include "support/test_support.hpp"

#include <doctest.h>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <bit>
#include <cstring>
#include <future>
#include <random>
#include <thread>

using namespace retouch;
using namespace retouch::backends;
using nlohmann::json;
using retouch::testing::random_image;

namespace {

std::uint32_t bits_of(float v) { return std::bit_cast<std::uint32_t>(v); }

// Finite floats drawn from raw bit patterns: subnormals, signed zeros and
// extreme exponents included.
Tensor random_bit_tensor(std::mt19937_64& rng, std::vector<std::size_t> shape) {
    std::vector<float> values(Tensor::element_count(shape));
    for (float& v : values) {
        do {
            v = std::bit_cast<float>(static_cast<std::uint32_t>(rng()));
        } while (!std::isfinite(v));
    }
    return Tensor(std::move(shape), std::move(values));
}

bool bitwise_equal(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) {
        return false;
    }
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (bits_of(a.data()[i]) != bits_of(b.data()[i])) {
            return false;
        }
    }
    return true;
}

// A server thread running `serve` over one end of a socket pair.
struct Loopback {
    std::unique_ptr<wire::Stream> client;
    std::thread worker;

    Loopback(const Backend& backend, ServerOptions options = {}) {
        auto [c, s] = wire::stream_pair();
        client = std::move(c);
        worker = std::thread([&backend, options, s = std::move(s)]() mutable {
            serve(*s, backend, options);
            s.reset();
        });
    }
    ~Loopback() {
        client.reset();
        worker.join();
    }
};

// Connector that hands out loopback sessions against `backend` and counts them.
struct LoopbackFactory {
    const Backend& backend;
    ServerOptions options;
    std::atomic<int> sessions{0};
    std::vector<std::thread> workers;
    std::mutex mutex;

    ~LoopbackFactory() {
        for (auto& w : workers) {
            w.join();
        }
    }

    RemoteConnection::Connector connector() {
        return [this] {
            auto [c, s] = wire::stream_pair();
            ++sessions;
            std::lock_guard lock(mutex);
            workers.emplace_back([this, s = std::move(s)]() mutable {
                serve(*s, backend, options);
                s.reset();
            });
            return std::move(c);
        };
    }
};

// A scripted peer: `script` runs on the server end of a socket pair.
struct ScriptedPeer {
    std::thread worker;
    std::unique_ptr<wire::Stream> client;

    explicit ScriptedPeer(std::function<void(wire::Stream&)> script) {
        auto [c, s] = wire::stream_pair();
        client = std::move(c);
        worker = std::thread([script = std::move(script), s = std::move(s)]() mutable {
            try {
                script(*s);
            } catch (const Error&) {
            }
            s.reset();
        });
    }
    ~ScriptedPeer() {
        if (worker.joinable()) {
            worker.join();
        }
    }
};

json handshake_reply(std::uint64_t id, std::size_t dim = 8, std::size_t stride = 1) {
    return wire::ok_response(id, {{"embedding_dim", dim}, {"latent_stride", stride}, {"models", json::object()}});
}

std::filesystem::path corpus_path() { return std::filesystem::path(RETOUCH_TEST_DATA_DIR) / "conformance/corpus.json"; }

} // namespace

TEST_CASE("dump is compact and key-sorted") {
    const json m = {{"op", "x"}, {"args", {{"b", 1}, {"a", "é"}}}, {"id", 3}};
    CHECK(wire::dump(m) == "{\"args\":{\"a\":\"é\",\"b\":1},\"id\":3,\"op\":\"x\"}");
    const auto f = wire::frame(m);
    const std::string payload = wire::dump(m);
    REQUIRE(f.size() == payload.size() + 4);
    CHECK(f[0] == 0);
    CHECK(f[1] == 0);
    CHECK(f[2] == 0);
    CHECK(f[3] == payload.size());
    CHECK(std::string(f.begin() + 4, f.end()) == payload);
}

TEST_CASE("length prefix is big-endian and bounded") {
    const std::array<std::uint8_t, 4> small = {0, 0, 1, 2};
    CHECK(wire::parse_length(small) == 258);
    const std::array<std::uint8_t, 4> max = {0x10, 0, 0, 0};
    CHECK(wire::parse_length(max) == wire::kMaxFrameBytes);
    const std::array<std::uint8_t, 4> zero = {0, 0, 0, 0};
    CHECK_THROWS_CODE(wire::parse_length(zero), ErrorCode::framing);
    const std::array<std::uint8_t, 4> over = {0x10, 0, 0, 1};
    CHECK_THROWS_CODE(wire::parse_length(over), ErrorCode::framing);
}

TEST_CASE("payload must be a JSON object") {
    const std::string ok = "{\"id\":1}";
    CHECK(wire::parse_payload(std::span(reinterpret_cast<const std::uint8_t*>(ok.data()), ok.size())).at("id") == 1);
    for (std::string bad : {"[1]", "3", "{", "\"s\"", "{\"a\":1}x"}) {
        CHECK_THROWS_CODE(wire::parse_payload(std::span(reinterpret_cast<const std::uint8_t*>(bad.data()), bad.size())),
                          ErrorCode::framing);
    }
}

TEST_CASE("tensor encoding layout") {
    const Tensor t({2}, {1.0f, -2.0f});
    const json node = wire::encode_tensor(t);
    CHECK(node.at("dtype") == "f32");
    CHECK(node.at("shape") == json::array({2}));
    // 1.0f = 0x3f800000, -2.0f = 0xc0000000, little-endian.
    CHECK(base64_decode(node.at("data").get<std::string>()) ==
          std::vector<std::uint8_t>{0x00, 0x00, 0x80, 0x3f, 0x00, 0x00, 0x00, 0xc0});
}

TEST_CASE("100 random tensors up to 1M elements round-trip bitwise") {
    std::mt19937_64 rng(61);
    std::uniform_int_distribution<int> rank(1, 4);
    std::uniform_real_distribution<double> log_size(0.0, std::log(1'000'000.0));
    for (int i = 0; i < 100; ++i) {
        const std::size_t target = i == 0 ? 1'000'000 : static_cast<std::size_t>(std::exp(log_size(rng)));
        const int r = rank(rng);
        std::vector<std::size_t> shape(r, 1);
        shape[0] = std::max<std::size_t>(1, target);
        for (int k = 1; k < r; ++k) {
            const std::size_t f = 1 + rng() % 4;
            if (shape[0] % f == 0) {
                shape[0] /= f;
                shape[k] = f;
            }
        }
        const Tensor t = random_bit_tensor(rng, shape);
        const auto bytes = wire::frame({{"t", wire::encode_tensor(t)}});
        const json back = wire::parse_payload(std::span(bytes).subspan(4));
        CHECK(bitwise_equal(wire::decode_tensor(back.at("t")), t));
    }
}

TEST_CASE("signed zero and subnormals survive") {
    const Tensor t({4}, {-0.0f, 1e-45f, -1e-40f, 3.4028235e38f});
    const Tensor back = wire::decode_tensor(json::parse(wire::dump(wire::encode_tensor(t))));
    CHECK(bitwise_equal(back, t));
    CHECK(std::signbit(back.data()[0]));
}

TEST_CASE("malformed tensors are framing errors") {
    const json good = wire::encode_tensor(Tensor({2}, {1.0f, 2.0f}));
    json wrong_dtype = good;
    wrong_dtype["dtype"] = "f64";
    CHECK_THROWS_CODE(wire::decode_tensor(wrong_dtype), ErrorCode::framing);
    json wrong_shape = good;
    wrong_shape["shape"] = {3};
    CHECK_THROWS_CODE(wire::decode_tensor(wrong_shape), ErrorCode::framing);
    json negative = good;
    negative["shape"] = {-2};
    CHECK_THROWS_CODE(wire::decode_tensor(negative), ErrorCode::framing);
    json bad_b64 = good;
    bad_b64["data"] = "***";
    CHECK_THROWS_CODE(wire::decode_tensor(bad_b64), ErrorCode::framing);
    json missing = good;
    missing.erase("data");
    CHECK_THROWS_CODE(wire::decode_tensor(missing), ErrorCode::framing);
    const std::vector<std::uint8_t> nan_bytes = {0x00, 0x00, 0xc0, 0x7f};
    CHECK_THROWS_CODE(wire::decode_tensor({{"dtype", "f32"}, {"shape", {1}}, {"data", base64_encode(nan_bytes)}}),
                      ErrorCode::framing);
}

TEST_CASE("images and masks on the wire") {
    std::mt19937_64 rng(62);
    const Image img = random_image(rng, 5, 3);
    const json node = wire::encode_image(img);
    CHECK(node.at("shape") == json::array({3, 5, 3}));
    CHECK(wire::decode_image(node) == img);
    CHECK_THROWS_CODE(wire::decode_image(wire::encode_tensor(Tensor({3, 5}))), ErrorCode::framing);

    const BinaryMask m = retouch::testing::random_mask(rng, 4, 6);
    const json mnode = wire::encode_mask(m);
    CHECK(mnode.at("dtype") == "u8");
    CHECK(mnode.at("shape") == json::array({6, 4}));
    CHECK(wire::decode_mask(mnode) == m);
    const json soft = wire::encode_tensor(Tensor({1, 3}, {0.2f, 0.5f, 0.9f}));
    CHECK(wire::decode_mask(soft) == BinaryMask(3, 1, std::vector<std::uint8_t>{0, 1, 1}));
    CHECK_THROWS_CODE(wire::decode_mask(wire::encode_tensor(Tensor({3}))), ErrorCode::framing);
}

TEST_CASE("frames cross a socket pair intact") {
    auto [a, b] = wire::stream_pair();
    std::mt19937_64 rng(63);
    const Tensor t = random_bit_tensor(rng, {1000});
    std::thread writer([&] {
        for (int i = 0; i < 20; ++i) {
            wire::write_frame(*a, {{"i", i}, {"t", wire::encode_tensor(t)}});
        }
        a->shutdown_write();
    });
    for (int i = 0; i < 20; ++i) {
        const json m = wire::read_frame(*b);
        CHECK(m.at("i") == i);
        CHECK(bitwise_equal(wire::decode_tensor(m.at("t")), t));
    }
    CHECK_THROWS_CODE(wire::read_frame(*b), ErrorCode::transport);
    writer.join();
}

TEST_CASE("server answers requests in order and keeps going after errors") {
    const Backend mock = make_mock_backend({});
    Loopback lb(mock);
    wire::write_frame(*lb.client, wire::request(1, "embed_text", {{"text", "a"}}));
    wire::write_frame(*lb.client, wire::request(2, "nope", json::object()));
    wire::write_frame(*lb.client, json{{"op", "handshake"}});
    wire::write_frame(*lb.client, wire::request(3, "embed_text", {}));
    wire::write_frame(*lb.client, wire::request(4, "handshake", json::object()));
    const json r1 = wire::read_frame(*lb.client);
    CHECK(r1.at("id") == 1);
    CHECK(r1.at("ok") == true);
    const json r2 = wire::read_frame(*lb.client);
    CHECK(r2.at("ok") == false);
    CHECK(r2.at("error").at("type") == "bad_request");
    const json r3 = wire::read_frame(*lb.client);
    CHECK(r3.at("id").is_null());
    const json r4 = wire::read_frame(*lb.client);
    CHECK(r4.at("id") == 3);
    CHECK(r4.at("error").at("type") == "bad_request");
    const json r5 = wire::read_frame(*lb.client);
    CHECK(r5.at("result").at("embedding_dim") == 64);
}

TEST_CASE("a framing violation ends the session with an error reply") {
    const Backend mock = make_mock_backend({});
    Loopback lb(mock);
    const std::array<std::uint8_t, 4> zero = {0, 0, 0, 0};
    lb.client->write_all(zero);
    const json r = wire::read_frame(*lb.client);
    CHECK(r.at("id").is_null());
    CHECK(r.at("error").at("type") == "framing");
    CHECK_THROWS_CODE(wire::read_frame(*lb.client), ErrorCode::transport);
}

TEST_CASE("recorded conformance corpus replays without deviation") {
    const json corpus = retouch::testing::load_corpus(corpus_path());
    CHECK(corpus.at("protocol") == wire::kProtocolVersion);
    const Backend mock = make_mock_backend({});
    const auto outcomes = retouch::testing::replay_corpus(corpus, mock);
    CHECK(outcomes.size() >= 20);
    for (const auto& o : outcomes) {
        INFO(o.name << ": " << o.detail);
        CHECK(o.passed);
    }
}

TEST_CASE("a tampered corpus is detected") {
    json corpus = retouch::testing::load_corpus(corpus_path());
    json& c = corpus.at("cases")[1];
    auto bytes = base64_decode(c.at("response").get<std::string>());
    bytes.back() ^= 1;
    c["response"] = base64_encode(bytes);
    CHECK_FALSE(retouch::testing::replay_case(c, make_mock_backend({})).passed);
}

TEST_CASE("remote backend over loopback equals the mock bitwise") {
    const Backend mock = make_mock_backend({});
    LoopbackFactory factory{mock, {}};
    auto conn = std::make_shared<RemoteConnection>(factory.connector());
    const Backend remote = make_remote_backend(conn, "loopback");
    CHECK(remote.descriptor.embedding_dim == 64);
    CHECK(remote.identity.at("models") == mock.identity);

    std::mt19937_64 rng(64);
    const Image img = random_image(rng, 9, 6);
    CHECK(remote.text_embedder->embed_text("a cup") == mock.text_embedder->embed_text("a cup"));
    CHECK(remote.image_embedder->embed_image(img) == mock.image_embedder->embed_image(img));
    CHECK(remote.segmenter->segment(img) == mock.segmenter->segment(img));
    const LatentTensor z = mock.codec->encode(img);
    CHECK(bitwise_equal(remote.codec->encode(img), z));
    CHECK(remote.codec->decode(z) == mock.codec->decode(z));
    const std::string text = "a tree";
    CHECK(bitwise_equal(remote.denoiser->predict_noise({z, 5, 0.25, text}), mock.denoiser->predict_noise({z, 5, 0.25, text})));

    pipeline::PipelineConfig config;
    config.mask.floor = -1.0;
    config.retouch.steps = 15;
    config.set_jobs(4);
    const TextPrompt q("cup", PromptRole::query), v("a red cup", PromptRole::conditional);
    const auto a = pipeline::run(img, q, v, mock, config);
    const auto b = pipeline::run(img, q, v, remote, config);
    REQUIRE(a.matched());
    REQUIRE(b.matched());
    CHECK(*a.mask.region == *b.mask.region);
    for (std::size_t k = 0; k < a.retouch->proposals.size(); ++k) {
        CHECK(*a.retouch->proposals[k].image == *b.retouch->proposals[k].image);
        CHECK(bitwise_equal(*a.retouch->proposals[k].final_latent, *b.retouch->proposals[k].final_latent));
    }
    CHECK(a.selection->chosen == b.selection->chosen);
    CHECK(factory.sessions == 1);
}

TEST_CASE("concurrent calls share one connection") {
    const Backend mock = make_mock_backend({});
    LoopbackFactory factory{mock, {.concurrent = true}};
    auto conn = std::make_shared<RemoteConnection>(factory.connector());
    const Backend remote = make_remote_backend(conn, "loopback");
    std::vector<std::thread> threads;
    std::atomic<int> mismatches{0};
    for (int t = 0; t < 8; ++t) {
        threads.emplace_back([&, t] {
            for (int i = 0; i < 25; ++i) {
                const std::string text = "t" + std::to_string(t) + "-" + std::to_string(i);
                if (remote.text_embedder->embed_text(text) != mock.text_embedder->embed_text(text)) {
                    ++mismatches;
                }
            }
        });
    }
    for (auto& t : threads) {
        t.join();
    }
    CHECK(mismatches == 0);
    CHECK(factory.sessions == 1);
}

TEST_CASE("replies are matched by id when they arrive out of order") {
    ScriptedPeer peer([](wire::Stream& s) {
        const json a = wire::read_frame(s);
        const json b = wire::read_frame(s);
        // Answer the second request first.
        for (const json* r : {&b, &a}) {
            wire::write_frame(s, wire::ok_response(r->at("id").get<std::uint64_t>(), {{"echo", r->at("args").at("n")}}));
        }
        wire::read_frame(s);
    });
    std::unique_ptr<wire::Stream> stream = std::move(peer.client);
    RemoteConnection conn([&stream] { return std::move(stream); });
    auto f1 = std::async(std::launch::async, [&] { return conn.call("op", {{"n", 1}}); });
    // Give the first call a head start so both are pending together.
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
    auto f2 = std::async(std::launch::async, [&] { return conn.call("op", {{"n", 2}}); });
    CHECK(f1.get().at("echo") == 1);
    CHECK(f2.get().at("echo") == 2);
}

TEST_CASE("error replies and protocol violations reach the caller") {
    {
        ScriptedPeer peer([](wire::Stream& s) {
            const json r = wire::read_frame(s);
            wire::write_frame(s, wire::error_response(r.at("id"), "model_error", "out of memory"));
            wire::read_frame(s);
        });
        std::unique_ptr<wire::Stream> stream = std::move(peer.client);
        RemoteConnection conn([&stream] { return std::move(stream); });
        try {
            conn.call("embed_text", {{"text", "x"}});
            FAIL("expected an error");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::backend);
            CHECK(std::string(e.what()).find("out of memory") != std::string::npos);
        }
    }
    {
        ScriptedPeer peer([](wire::Stream& s) {
            wire::read_frame(s);
            wire::write_frame(s, wire::ok_response(999, json::object()));
            wire::read_frame(s);
        });
        std::unique_ptr<wire::Stream> stream = std::move(peer.client);
        RemoteConnection conn([&stream] {
            if (!stream) {
                fail(ErrorCode::transport, "no second session");
            }
            return std::move(stream);
        });
        CHECK_THROWS_CODE(conn.call("embed_text", {{"text", "x"}}), ErrorCode::framing);
        // The broken session is dropped; reconnecting fails cleanly here.
        CHECK_THROWS_CODE(conn.call("embed_text", {{"text", "x"}}), ErrorCode::transport);
    }
}

TEST_CASE("a lost connection fails the call and the next call reconnects") {
    const Backend mock = make_mock_backend({});
    std::atomic<int> attempts{0};
    std::vector<std::unique_ptr<ScriptedPeer>> peers;
    std::unique_ptr<Loopback> healthy;
    RemoteConnection conn([&]() -> std::unique_ptr<wire::Stream> {
        if (attempts++ == 0) {
            peers.push_back(std::make_unique<ScriptedPeer>([](wire::Stream& s) { wire::read_frame(s); }));
            return std::move(peers.back()->client);
        }
        healthy = std::make_unique<Loopback>(mock);
        return std::move(healthy->client);
    });
    CHECK_THROWS_CODE(conn.call("embed_text", {{"text", "x"}}), ErrorCode::transport);
    const json r = conn.call("embed_text", {{"text", "x"}});
    CHECK(wire::decode_tensor(r.at("embedding")).size() == 64);
    CHECK(attempts == 2);
}

TEST_CASE("handshake bounds are enforced") {
    auto connect_with = [](json reply) {
        auto peer = std::make_shared<ScriptedPeer>([reply](wire::Stream& s) {
            const json r = wire::read_frame(s);
            json out = reply;
            out["id"] = r.at("id");
            wire::write_frame(s, out);
            wire::read_frame(s);
        });
        return std::make_pair(peer, std::make_shared<RemoteConnection>(
                                        [peer] { return std::move(peer->client); }));
    };
    {
        auto [peer, conn] = connect_with(handshake_reply(0, 0));
        CHECK_THROWS_CODE(make_remote_backend(conn, "x"), ErrorCode::backend);
    }
    {
        auto [peer, conn] = connect_with(handshake_reply(0, 8, kMaxLatentStride + 1));
        CHECK_THROWS_CODE(make_remote_backend(conn, "x"), ErrorCode::backend);
    }
    {
        auto [peer, conn] = connect_with(wire::ok_response(0, {{"latent_stride", 1}}));
        CHECK_THROWS_CODE(make_remote_backend(conn, "x"), ErrorCode::framing);
    }
    {
        auto [peer, conn] = connect_with(handshake_reply(0, 8, 1));
        CHECK(make_remote_backend(conn, "x").descriptor.embedding_dim == 8);
    }
}

TEST_CASE("exec transport talks to a child process") {
    const std::string endpoint = std::string("exec:") + RETOUCH_LOOPBACK_SERVER_PATH;
    const Backend remote = open_backend(endpoint);
    const Backend mock = make_mock_backend({});
    CHECK(remote.descriptor.kind == BackendDescriptor::Kind::remote);
    CHECK(remote.identity.at("endpoint") == endpoint);
    std::mt19937_64 rng(65);
    const Image img = random_image(rng, 6, 6);
    CHECK(remote.image_embedder->embed_image(img) == mock.image_embedder->embed_image(img));
    const LatentTensor z = mock.codec->encode(img);
    const std::string text = "x";
    CHECK(bitwise_equal(remote.denoiser->predict_noise({z, 3, 0.5, text}), mock.denoiser->predict_noise({z, 3, 0.5, text})));

    const std::string seeded = std::string("exec:") + RETOUCH_LOOPBACK_SERVER_PATH + " 'mock?seed=9' --concurrent";
    CHECK(open_backend(seeded).text_embedder->embed_text("q") == HashEmbedder(9, 64).embed_text("q"));

    CHECK_THROWS_CODE(open_backend("exec:/nonexistent/server-binary"), ErrorCode::transport);
}

TEST_CASE("tcp transport") {
    const int listener = ::socket(AF_INET, SOCK_STREAM, 0);
    REQUIRE(listener >= 0);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    addr.sin_port = 0;
    REQUIRE(::bind(listener, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) == 0);
    REQUIRE(::listen(listener, 4) == 0);
    socklen_t len = sizeof(addr);
    REQUIRE(::getsockname(listener, reinterpret_cast<sockaddr*>(&addr), &len) == 0);
    const int port = ntohs(addr.sin_port);

    const Backend mock = make_mock_backend({});
    std::thread server([&] {
        const int fd = ::accept(listener, nullptr, nullptr);
        if (fd >= 0) {
            wire::Stream s(fd);
            serve(s, mock);
        }
    });
    {
        const Backend remote = open_backend("tcp://127.0.0.1:" + std::to_string(port));
        CHECK(remote.text_embedder->embed_text("over tcp") == mock.text_embedder->embed_text("over tcp"));
    }
    server.join();
    ::close(listener);

    CHECK_THROWS_CODE(open_backend("tcp://127.0.0.1:" + std::to_string(port)), ErrorCode::transport);
    CHECK_THROWS_CODE(open_backend("tcp://127.0.0.1:0"), ErrorCode::invalid_argument);
    CHECK_THROWS_CODE(open_backend("tcp://127.0.0.1:http"), ErrorCode::invalid_argument);
}
