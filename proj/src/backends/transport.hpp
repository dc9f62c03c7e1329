#pragma once

#include <nlohmann/json.hpp>

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <sys/types.h>
#include <utility>

namespace retouch::wire {

// Byte stream over a socket. Reads and writes may run concurrently from
// two threads; close() unblocks a pending read.
class Stream {
  public:
    Stream(int fd, pid_t child = -1);
    ~Stream();
    Stream(const Stream&) = delete;
    Stream& operator=(const Stream&) = delete;

    // Transport error when the peer has gone away.
    void write_all(std::span<const std::uint8_t> bytes);
    void read_exact(std::span<std::uint8_t> bytes);
    void close() noexcept;
    // Half-close: the peer reads EOF, replies can still arrive.
    void shutdown_write() noexcept;

  private:
    int fd_;
    pid_t child_;
};

std::unique_ptr<Stream> connect_tcp(const std::string& host, std::uint16_t port);
// Runs `command` under /bin/sh with stdin and stdout bound to one socket.
// The child's stderr is inherited.
std::unique_ptr<Stream> spawn_process(const std::string& command);
// Two connected in-process endpoints.
std::pair<std::unique_ptr<Stream>, std::unique_ptr<Stream>> stream_pair();

void write_frame(Stream& stream, const nlohmann::json& message);
// Transport error on EOF; framing error on a bad length prefix or payload.
nlohmann::json read_frame(Stream& stream);

} // namespace retouch::wire
