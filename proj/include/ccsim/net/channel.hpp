/**
 * Framed message channel over one TCP stream. Sends are whole-message and
 * serialized by a mutex so concurrent writers never interleave frames;
 * receive is owned by one reader at a time.
 */
#pragma once

#include <cstdint>
#include <mutex>
#include <optional>
#include <span>
#include <vector>

#include "ccsim/net/socket.hpp"
#include "ccsim/proto/framing.hpp"

namespace ccsim {

class MsgChannel {
public:
    MsgChannel() = default;
    explicit MsgChannel(TcpStream stream) : stream_(std::move(stream)) {}

    bool valid() const { return stream_.valid(); }
    int fd() const { return stream_.fd(); }

    bool send(MsgType type, std::span<const std::uint8_t> payload) {
        const auto framed = frame_message(type, payload);
        std::lock_guard<std::mutex> lock(send_mu_);
        return stream_.send_all(framed);
    }

    bool send(MsgType type, const std::vector<std::uint8_t>& payload) {
        return send(type, std::span<const std::uint8_t>(payload));
    }

    // Sends bytes that are already framed (shares the send mutex).
    bool send_raw(std::span<const std::uint8_t> framed) {
        std::lock_guard<std::mutex> lock(send_mu_);
        return stream_.send_all(framed);
    }

    // Next complete message, waiting up to timeout_ms. nullopt on timeout;
    // closed() distinguishes peer close from timeout afterwards.
    std::optional<Message> recv(int timeout_ms) {
        for (;;) {
            if (auto m = parser_.next()) return m;
            std::uint8_t buf[65536];
            const ssize_t n = stream_.recv_some(buf, sizeof(buf), timeout_ms);
            if (n < 0) {
                closed_ = true;
                // drain whatever was already buffered
                if (auto m = parser_.next()) return m;
                return std::nullopt;
            }
            if (n == 0) return std::nullopt; // timeout
            parser_.feed(std::span<const std::uint8_t>(buf, static_cast<size_t>(n)));
        }
    }

    bool closed() const { return closed_; }
    const StreamParser& parser() const { return parser_; }
    void close() { stream_.close(); }

private:
    TcpStream stream_;
    StreamParser parser_;
    std::mutex send_mu_;
    bool closed_ = false;
};

} // namespace ccsim
