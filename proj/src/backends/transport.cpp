#include "backends/transport.hpp"

#include "backends/wire.hpp"
#include "core/error.hpp"

#include <arpa/inet.h>
#include <cerrno>
#include <csignal>
#include <cstring>
#include <netdb.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <vector>

namespace retouch::wire {

Stream::Stream(int fd, pid_t child) : fd_(fd), child_(child) {}

Stream::~Stream() {
    close();
    if (fd_ >= 0) {
        ::close(fd_);
    }
    if (child_ > 0) {
        int status = 0;
        ::waitpid(child_, &status, 0);
    }
}

void Stream::close() noexcept {
    if (fd_ >= 0) {
        ::shutdown(fd_, SHUT_RDWR);
    }
}

void Stream::shutdown_write() noexcept {
    if (fd_ >= 0) {
        ::shutdown(fd_, SHUT_WR);
    }
}

void Stream::write_all(std::span<const std::uint8_t> bytes) {
    std::size_t done = 0;
    while (done < bytes.size()) {
        const ssize_t n = ::send(fd_, bytes.data() + done, bytes.size() - done, MSG_NOSIGNAL);
        if (n < 0) {
            if (errno == EINTR) {
                continue;
            }
            fail(ErrorCode::transport, std::string("connection lost while writing: ") + std::strerror(errno));
        }
        done += static_cast<std::size_t>(n);
    }
}

void Stream::read_exact(std::span<std::uint8_t> bytes) {
    std::size_t done = 0;
    while (done < bytes.size()) {
        const ssize_t n = ::recv(fd_, bytes.data() + done, bytes.size() - done, 0);
        if (n < 0 && errno == EINTR) {
            continue;
        }
        if (n <= 0) {
            fail(ErrorCode::transport, n == 0 ? "connection closed by peer"
                                              : std::string("connection lost while reading: ") +
                                                    std::strerror(errno));
        }
        done += static_cast<std::size_t>(n);
    }
}

std::unique_ptr<Stream> connect_tcp(const std::string& host, std::uint16_t port) {
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* found = nullptr;
    const std::string service = std::to_string(port);
    if (::getaddrinfo(host.c_str(), service.c_str(), &hints, &found) != 0 || !found) {
        fail(ErrorCode::transport, "cannot resolve " + host);
    }
    int fd = -1;
    for (addrinfo* ai = found; ai; ai = ai->ai_next) {
        fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
        if (fd < 0) {
            continue;
        }
        if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) {
            break;
        }
        ::close(fd);
        fd = -1;
    }
    ::freeaddrinfo(found);
    if (fd < 0) {
        fail(ErrorCode::transport, "cannot connect to " + host + ":" + service);
    }
    return std::make_unique<Stream>(fd);
}

std::unique_ptr<Stream> spawn_process(const std::string& command) {
    int fds[2];
    if (::socketpair(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0, fds) != 0) {
        fail(ErrorCode::transport, "socketpair failed");
    }
    const pid_t pid = ::fork();
    if (pid < 0) {
        ::close(fds[0]);
        ::close(fds[1]);
        fail(ErrorCode::transport, "fork failed");
    }
    if (pid == 0) {
        ::dup2(fds[1], STDIN_FILENO);
        ::dup2(fds[1], STDOUT_FILENO);
        ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
        ::_exit(127);
    }
    ::close(fds[1]);
    return std::make_unique<Stream>(fds[0], pid);
}

std::pair<std::unique_ptr<Stream>, std::unique_ptr<Stream>> stream_pair() {
    int fds[2];
    if (::socketpair(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0, fds) != 0) {
        fail(ErrorCode::transport, "socketpair failed");
    }
    return {std::make_unique<Stream>(fds[0]), std::make_unique<Stream>(fds[1])};
}

void write_frame(Stream& stream, const nlohmann::json& message) {
    const auto bytes = frame(message);
    stream.write_all(bytes);
}

nlohmann::json read_frame(Stream& stream) {
    std::array<std::uint8_t, 4> prefix{};
    stream.read_exact(prefix);
    const std::uint32_t n = parse_length(prefix);
    std::vector<std::uint8_t> payload(n);
    stream.read_exact(payload);
    return parse_payload(payload);
}

} // namespace retouch::wire
