/**
 * Minimal blocking TCP wrappers (IPv4). One connection per peer-role pair;
 * framing on top is ccsim/proto/framing.hpp. All sends use MSG_NOSIGNAL
 * and TCP_NODELAY is set everywhere latency matters, i.e. everywhere.
 */
#pragma once

#include <arpa/inet.h>
#include <fcntl.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstdint>
#include <cstring>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>

namespace ccsim {

struct Endpoint {
    std::string host = "127.0.0.1";
    std::uint16_t port = 0;

    std::string str() const { return host + ":" + std::to_string(port); }
};

// "host:port" -> Endpoint. Throws on malformed input.
inline Endpoint parse_endpoint(const std::string& s) {
    const auto colon = s.rfind(':');
    if (colon == std::string::npos) throw std::runtime_error("endpoint must be host:port, got '" + s + "'");
    Endpoint ep;
    ep.host = s.substr(0, colon);
    const int port = std::stoi(s.substr(colon + 1));
    if (port < 0 || port > 65535) throw std::runtime_error("port out of range in '" + s + "'");
    ep.port = static_cast<std::uint16_t>(port);
    return ep;
}

class TcpStream {
public:
    TcpStream() = default;
    explicit TcpStream(int fd) : fd_(fd) { set_nodelay(); }
    ~TcpStream() { close(); }

    TcpStream(TcpStream&& o) noexcept : fd_(std::exchange(o.fd_, -1)) {}
    TcpStream& operator=(TcpStream&& o) noexcept {
        if (this != &o) {
            close();
            fd_ = std::exchange(o.fd_, -1);
        }
        return *this;
    }
    TcpStream(const TcpStream&) = delete;
    TcpStream& operator=(const TcpStream&) = delete;

    static std::optional<TcpStream> connect(const Endpoint& ep, int timeout_ms = 5000) {
        const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
        if (fd < 0) return std::nullopt;
        sockaddr_in addr{};
        addr.sin_family = AF_INET;
        addr.sin_port = htons(ep.port);
        if (inet_pton(AF_INET, ep.host.c_str(), &addr.sin_addr) != 1) {
            ::close(fd);
            return std::nullopt;
        }
        // Connect with a deadline: non-blocking connect + poll.
        const int flags = fcntl(fd, F_GETFL, 0);
        fcntl(fd, F_SETFL, flags | O_NONBLOCK);
        int rc = ::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr));
        if (rc != 0 && errno != EINPROGRESS) {
            ::close(fd);
            return std::nullopt;
        }
        if (rc != 0) {
            pollfd pfd{fd, POLLOUT, 0};
            if (::poll(&pfd, 1, timeout_ms) <= 0) {
                ::close(fd);
                return std::nullopt;
            }
            int err = 0;
            socklen_t len = sizeof(err);
            getsockopt(fd, SOL_SOCKET, SO_ERROR, &err, &len);
            if (err != 0) {
                ::close(fd);
                return std::nullopt;
            }
        }
        fcntl(fd, F_SETFL, flags);
        return TcpStream(fd);
    }

    bool valid() const { return fd_ >= 0; }
    int fd() const { return fd_; }

    bool send_all(std::span<const std::uint8_t> data) {
        size_t off = 0;
        while (off < data.size()) {
            const ssize_t n = ::send(fd_, data.data() + off, data.size() - off, MSG_NOSIGNAL);
            if (n < 0) {
                if (errno == EINTR) continue;
                return false;
            }
            off += static_cast<size_t>(n);
        }
        return true;
    }

    // Returns bytes read; 0 on timeout; -1 on close or error.
    ssize_t recv_some(std::uint8_t* buf, size_t cap, int timeout_ms) {
        pollfd pfd{fd_, POLLIN, 0};
        const int pr = ::poll(&pfd, 1, timeout_ms);
        if (pr == 0) return 0;
        if (pr < 0) return errno == EINTR ? 0 : -1;
        const ssize_t n = ::recv(fd_, buf, cap, 0);
        if (n == 0) return -1; // orderly close
        if (n < 0) return (errno == EINTR || errno == EAGAIN) ? 0 : -1;
        return n;
    }

    void close() {
        if (fd_ >= 0) {
            ::close(fd_);
            fd_ = -1;
        }
    }

private:
    void set_nodelay() {
        int one = 1;
        setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
    }

    int fd_ = -1;
};

class TcpListener {
public:
    TcpListener() = default;
    ~TcpListener() { close(); }
    TcpListener(TcpListener&& o) noexcept
        : fd_(std::exchange(o.fd_, -1)), bound_(o.bound_) {}
    TcpListener& operator=(TcpListener&& o) noexcept {
        if (this != &o) {
            close();
            fd_ = std::exchange(o.fd_, -1);
            bound_ = o.bound_;
        }
        return *this;
    }
    TcpListener(const TcpListener&) = delete;
    TcpListener& operator=(const TcpListener&) = delete;

    // Binds and listens; port 0 picks an ephemeral port (see bound()).
    static std::optional<TcpListener> bind(const Endpoint& ep) {
        const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
        if (fd < 0) return std::nullopt;
        int one = 1;
        setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
        sockaddr_in addr{};
        addr.sin_family = AF_INET;
        addr.sin_port = htons(ep.port);
        if (inet_pton(AF_INET, ep.host.c_str(), &addr.sin_addr) != 1) {
            ::close(fd);
            return std::nullopt;
        }
        if (::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0 ||
            ::listen(fd, 64) != 0) {
            ::close(fd);
            return std::nullopt;
        }
        sockaddr_in got{};
        socklen_t len = sizeof(got);
        getsockname(fd, reinterpret_cast<sockaddr*>(&got), &len);
        TcpListener l;
        l.fd_ = fd;
        l.bound_ = {ep.host, ntohs(got.sin_port)};
        return l;
    }

    const Endpoint& bound() const { return bound_; }
    bool valid() const { return fd_ >= 0; }

    std::optional<TcpStream> accept(int timeout_ms) {
        pollfd pfd{fd_, POLLIN, 0};
        const int pr = ::poll(&pfd, 1, timeout_ms);
        if (pr <= 0) return std::nullopt;
        const int cfd = ::accept(fd_, nullptr, nullptr);
        if (cfd < 0) return std::nullopt;
        return TcpStream(cfd);
    }

    void close() {
        if (fd_ >= 0) {
            ::close(fd_);
            fd_ = -1;
        }
    }

private:
    int fd_ = -1;
    Endpoint bound_;
};

} // namespace ccsim
