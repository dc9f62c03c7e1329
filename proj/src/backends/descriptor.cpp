#include "backends/descriptor.hpp"

#include "backends/fixture.hpp"
#include "backends/mock.hpp"
#include "backends/remote.hpp"
#include "core/error.hpp"

#include <cstdlib>
#include <sstream>

namespace retouch::backends {

namespace {

MockOptions parse_mock_options(const std::string& query) {
    MockOptions options;
    std::istringstream in(query);
    std::string pair;
    while (std::getline(in, pair, '&')) {
        if (pair.empty()) {
            continue;
        }
        const auto eq = pair.find('=');
        if (eq == std::string::npos) {
            fail(ErrorCode::invalid_argument, "mock option needs key=value: " + pair);
        }
        const std::string key = pair.substr(0, eq);
        const std::string value = pair.substr(eq + 1);
        try {
            if (key == "seed") {
                options.seed = std::stoull(value);
            } else if (key == "dim") {
                options.dim = std::stoul(value);
            } else if (key == "grid") {
                options.grid = std::stoul(value);
            } else if (key == "gain") {
                options.gain = std::stod(value);
            } else {
                fail(ErrorCode::invalid_argument, "unknown mock option '" + key + "'");
            }
        } catch (const std::logic_error&) {
            fail(ErrorCode::invalid_argument, "bad value for mock option '" + key + "'");
        }
    }
    return options;
}

} // namespace

Backend open_backend(const std::string& descriptor) {
    if (descriptor == "mock" || descriptor.rfind("mock?", 0) == 0) {
        const auto q = descriptor.find('?');
        return make_mock_backend(q == std::string::npos ? MockOptions{} : parse_mock_options(descriptor.substr(q + 1)));
    }
    if (descriptor.rfind("fixture:", 0) == 0) {
        return load_fixture_backend(descriptor.substr(8));
    }
    if (descriptor.rfind("tcp://", 0) == 0 || descriptor.rfind("exec:", 0) == 0) {
        return make_remote_backend(descriptor);
    }
    fail(ErrorCode::invalid_argument, "unrecognised backend descriptor '" + descriptor + "'");
}

Backend open_backend_or_default(const std::optional<std::string>& descriptor) {
    if (descriptor && !descriptor->empty()) {
        return open_backend(*descriptor);
    }
    if (const char* env = std::getenv(kBackendEnvVar); env && *env) {
        return open_backend(env);
    }
    return open_backend("mock");
}

} // namespace retouch::backends
