#pragma once

#include "backends/contracts.hpp"
#include "backends/server.hpp"
#include "backends/transport.hpp"
#include "backends/wire.hpp"
#include "core/digest.hpp"
#include "core/error.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <string>
#include <thread>
#include <vector>

namespace retouch::testing {

struct ReplayOutcome {
    std::string name;
    bool passed = false;
    std::string detail;
};

inline nlohmann::json load_corpus(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        fail(ErrorCode::io, "cannot open " + path.string());
    }
    return nlohmann::json::parse(in);
}

// Bytes until the peer closes its side.
inline std::vector<std::uint8_t> read_to_eof(wire::Stream& stream) {
    std::vector<std::uint8_t> out;
    std::uint8_t byte = 0;
    for (;;) {
        try {
            stream.read_exact({&byte, 1});
        } catch (const Error&) {
            return out;
        }
        out.push_back(byte);
    }
}

// Replays one case against `backend` served over an in-process socket pair.
// The client sends the recorded request bytes, half-closes, and compares
// everything the server wrote with the recorded response bytes. Cases that
// carry request metadata also check that the client-side encoder produces
// the recorded request bytes.
inline ReplayOutcome replay_case(const nlohmann::json& c, const backends::Backend& backend) {
    ReplayOutcome out;
    out.name = c.at("name").get<std::string>();
    const auto request = base64_decode(c.at("request").get<std::string>());
    const auto expected = base64_decode(c.at("response").get<std::string>());

    std::vector<std::uint8_t> encoded;
    for (const auto& r : c.at("requests")) {
        const auto f = wire::frame(wire::request(r.at("id").get<std::uint64_t>(), r.at("op").get<std::string>(),
                                                 r.at("args")));
        encoded.insert(encoded.end(), f.begin(), f.end());
    }
    if (!c.at("requests").empty() && encoded != request) {
        out.detail = "client encoder differs from the recorded request bytes";
        return out;
    }

    auto [client, server] = wire::stream_pair();
    std::thread worker([&backend, s = std::move(server)]() mutable {
        backends::serve(*s, backend);
        s.reset();
    });
    try {
        client->write_all(request);
    } catch (const Error&) {
        // the server may close first after a framing error
    }
    client->shutdown_write();
    const auto got = read_to_eof(*client);
    worker.join();

    if (got != expected) {
        std::size_t i = 0;
        while (i < got.size() && i < expected.size() && got[i] == expected[i]) {
            ++i;
        }
        out.detail = "response differs at byte " + std::to_string(i) + " (got " + std::to_string(got.size()) +
                     " bytes, expected " + std::to_string(expected.size()) + ")";
        return out;
    }
    out.passed = true;
    return out;
}

inline std::vector<ReplayOutcome> replay_corpus(const nlohmann::json& corpus, const backends::Backend& backend) {
    std::vector<ReplayOutcome> outcomes;
    for (const auto& c : corpus.at("cases")) {
        outcomes.push_back(replay_case(c, backend));
    }
    return outcomes;
}

} // namespace retouch::testing
