#pragma once

#include "backends/contracts.hpp"

#include <optional>
#include <string>

namespace retouch::backends {

inline constexpr const char* kBackendEnvVar = "RETOUCH_BACKEND";

// Descriptor strings:
//   mock                          hash embedder, 3x3 grid segmenter, identity codec
//   mock?seed=7&dim=64&grid=3&gain=0.8
//   fixture:<path to fixture json>
//   tcp://host:port               remote server over TCP
//   exec:<command>                remote server on a child process's stdio
Backend open_backend(const std::string& descriptor);

// Uses `descriptor` when given, else $RETOUCH_BACKEND, else "mock".
Backend open_backend_or_default(const std::optional<std::string>& descriptor);

} // namespace retouch::backends
