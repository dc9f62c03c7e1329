#include "core/error.hpp"

namespace retouch {

const char* to_string(ErrorCode code) {
    switch (code) {
    case ErrorCode::invalid_argument:
        return "invalid_argument";
    case ErrorCode::shape:
        return "shape";
    case ErrorCode::format:
        return "format";
    case ErrorCode::io:
        return "io";
    case ErrorCode::empty_region:
        return "empty_region";
    case ErrorCode::backend:
        return "backend";
    case ErrorCode::transport:
        return "transport";
    case ErrorCode::framing:
        return "framing";
    case ErrorCode::internal:
        return "internal";
    }
    return "unknown";
}

} // namespace retouch
