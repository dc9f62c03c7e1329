#pragma once

#include "backends/contracts.hpp"
#include "backends/transport.hpp"

namespace retouch::backends {

struct ServerOptions {
    // Handle each request on its own thread; replies may then go out of order.
    bool concurrent = false;
};

// Answers protocol requests from `stream` using `backend` until the peer
// disconnects. A framing violation gets an error reply with a null id and
// ends the session. Per-request failures produce ok=false replies.
void serve(wire::Stream& stream, const Backend& backend, const ServerOptions& options = {});

// Handles one decoded request; exposed for tests.
nlohmann::json handle_request(const nlohmann::json& request, const Backend& backend);

} // namespace retouch::backends
