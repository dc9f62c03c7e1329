#pragma once

#include <stdexcept>
#include <string>

namespace retouch {

enum class ErrorCode {
    invalid_argument,
    shape,
    format,
    io,
    empty_region,
    backend,
    transport,
    framing,
    internal,
};

const char* to_string(ErrorCode code);

// Single exception type for the library; the code drives C API status
// mapping and CLI exit codes.
class Error : public std::runtime_error {
  public:
    Error(ErrorCode code, const std::string& message) : std::runtime_error(message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

    // Transport failures (connection loss) may succeed on a fresh connection.
    bool retriable() const noexcept { return code_ == ErrorCode::transport; }

  private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) { throw Error(code, message); }

} // namespace retouch
