#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cstdlib>
#include <cstring>

#include "feddag/transports.hpp"

namespace feddag {

namespace {

struct AddrParts {
    std::string host;
    std::uint16_t port;
};

AddrParts parse_addr(const std::string& addr) {
    const auto colon = addr.rfind(':');
    if (colon == std::string::npos)
        throw ConfigError("address '" + addr + "' must be host:port");
    AddrParts parts;
    parts.host = addr.substr(0, colon);
    const std::string port_str = addr.substr(colon + 1);
    char* end = nullptr;
    const long port = std::strtol(port_str.c_str(), &end, 10);
    if (end == port_str.c_str() || *end != '\0' || port < 0 || port > 65535)
        throw ConfigError("bad port in address '" + addr + "'");
    parts.port = static_cast<std::uint16_t>(port);
    return parts;
}

void write_all(int fd, std::span<const std::uint8_t> bytes, const std::string& who) {
    std::size_t sent = 0;
    while (sent < bytes.size()) {
        const ssize_t n = ::send(fd, bytes.data() + sent, bytes.size() - sent, MSG_NOSIGNAL);
        if (n <= 0) throw TransportFailure(who + ": send failed");
        sent += static_cast<std::size_t>(n);
    }
}

// Reads exactly n bytes or reports why it could not.
void read_exact(int fd, std::uint8_t* out, std::size_t n, std::chrono::milliseconds timeout,
                const std::string& who) {
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    std::size_t got = 0;
    while (got < n) {
        const auto now = std::chrono::steady_clock::now();
        if (now > deadline) throw TransportFailure(who + ": receive timed out");
        const auto left =
            std::chrono::duration_cast<std::chrono::milliseconds>(deadline - now).count();
        pollfd pfd{fd, POLLIN, 0};
        const int pr = ::poll(&pfd, 1, static_cast<int>(std::max<long long>(1, left)));
        if (pr < 0) throw TransportFailure(who + ": poll failed");
        if (pr == 0) continue;
        const ssize_t r = ::recv(fd, out + got, n - got, 0);
        if (r == 0) throw TransportFailure(who + ": connection closed");
        if (r < 0) throw TransportFailure(who + ": recv failed");
        got += static_cast<std::size_t>(r);
    }
}

std::vector<std::uint8_t> read_frame(int fd, std::chrono::milliseconds timeout,
                                     const std::string& who) {
    std::uint8_t len_bytes[8];
    read_exact(fd, len_bytes, 8, timeout, who);
    std::uint64_t length = 0;
    for (int i = 0; i < 8; ++i) length |= static_cast<std::uint64_t>(len_bytes[i]) << (8 * i);
    if (length > (1ull << 30)) throw ProtocolViolation(who + ": frame too large");
    std::vector<std::uint8_t> frame(8 + length);
    std::memcpy(frame.data(), len_bytes, 8);
    read_exact(fd, frame.data() + 8, length, timeout, who);
    return frame;
}

int connect_to(const std::string& addr) {
    const AddrParts parts = parse_addr(addr);
    addrinfo hints{};
    hints.ai_family = AF_INET;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    const std::string port_str = std::to_string(parts.port);
    if (::getaddrinfo(parts.host.c_str(), port_str.c_str(), &hints, &res) != 0 || !res)
        throw TransportFailure("cannot resolve " + addr);
    int fd = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
    if (fd < 0) {
        ::freeaddrinfo(res);
        throw TransportFailure("socket() failed");
    }
    if (::connect(fd, res->ai_addr, res->ai_addrlen) != 0) {
        ::freeaddrinfo(res);
        ::close(fd);
        throw TransportFailure("cannot connect to " + addr);
    }
    ::freeaddrinfo(res);
    const int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
    return fd;
}

}  // namespace

std::string default_bind_addr() {
    if (const char* env = std::getenv("FEDDAG_BIND_ADDR")) return env;
    return "127.0.0.1:7464";
}

TcpTransport::TcpTransport(const std::string& bind_addr, std::vector<std::string> site_ids,
                           std::chrono::milliseconds gather_timeout)
    : site_ids_(std::move(site_ids)), gather_timeout_(gather_timeout) {
    const AddrParts parts = parse_addr(bind_addr);

    listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (listen_fd_ < 0) throw TransportFailure("socket() failed");
    const int one = 1;
    ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));

    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(parts.port);
    if (::inet_pton(AF_INET, parts.host.c_str(), &addr.sin_addr) != 1)
        throw ConfigError("bind host must be an IPv4 address, got '" + parts.host + "'");
    if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0)
        throw TransportFailure("cannot bind " + bind_addr);
    if (::listen(listen_fd_, 64) != 0) throw TransportFailure("listen failed");

    sockaddr_in bound{};
    socklen_t len = sizeof(bound);
    ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&bound), &len);
    port_ = ntohs(bound.sin_port);

    site_fds_.assign(site_ids_.size(), -1);
}

TcpTransport::~TcpTransport() {
    for (int fd : site_fds_)
        if (fd >= 0) ::close(fd);
    if (listen_fd_ >= 0) ::close(listen_fd_);
}

void TcpTransport::accept_sites() {
    std::size_t registered = 0;
    while (registered < site_ids_.size()) {
        pollfd pfd{listen_fd_, POLLIN, 0};
        const int pr =
            ::poll(&pfd, 1, static_cast<int>(gather_timeout_.count()));
        if (pr <= 0) throw TransportFailure("accept_sites: timed out waiting for sites");
        const int fd = ::accept(listen_fd_, nullptr, nullptr);
        if (fd < 0) throw TransportFailure("accept failed");
        const int one = 1;
        ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));

        auto frame = read_frame(fd, gather_timeout_, "registration");
        RoundMessage msg = deserialize(frame);
        if (msg.direction != Direction::SiteToCenter || msg.round != 0)
            throw ProtocolViolation("bad registration frame");
        bool matched = false;
        for (std::size_t k = 0; k < site_ids_.size(); ++k) {
            if (site_ids_[k] == msg.site_id) {
                if (site_fds_[k] >= 0)
                    throw ProtocolViolation("site '" + msg.site_id + "' registered twice");
                site_fds_[k] = fd;
                matched = true;
                ++registered;
                break;
            }
        }
        if (!matched) throw ProtocolViolation("unknown site '" + msg.site_id + "'");
    }
}

void TcpTransport::broadcast(std::uint32_t round,
                             const std::vector<BroadcastPayload>& payloads) {
    if (payloads.size() != site_ids_.size())
        throw ShapeMismatch("broadcast: payload count != site count");
    for (std::size_t k = 0; k < site_ids_.size(); ++k) {
        if (site_fds_[k] < 0) throw TransportFailure("site '" + site_ids_[k] + "' not connected");
        auto frame = serialize_broadcast(round, site_ids_[k], payloads[k]);
        observe(frame);
        write_all(site_fds_[k], frame, "broadcast to '" + site_ids_[k] + "'");
    }
}

std::vector<RoundMessage> TcpTransport::gather(std::uint32_t round) {
    std::vector<RoundMessage> out;
    out.reserve(site_ids_.size());
    for (std::size_t k = 0; k < site_ids_.size(); ++k) {
        auto frame = read_frame(site_fds_[k], gather_timeout_, "gather from '" + site_ids_[k] + "'");
        observe(frame);
        RoundMessage msg = deserialize(frame);
        if (msg.round != round || msg.site_id != site_ids_[k] ||
            msg.direction != Direction::SiteToCenter)
            throw ProtocolViolation("gather: unexpected frame from site '" + msg.site_id + "'");
        out.push_back(std::move(msg));
    }
    return out;
}

void TcpTransport::terminate() {
    for (std::size_t k = 0; k < site_ids_.size(); ++k) {
        if (site_fds_[k] < 0) continue;
        auto frame = serialize_terminate(site_ids_[k]);
        observe(frame);
        write_all(site_fds_[k], frame, "terminate to '" + site_ids_[k] + "'");
    }
}

TcpSiteChannel::TcpSiteChannel(const std::string& center_addr, std::string site_id,
                               std::chrono::milliseconds receive_timeout)
    : site_id_(std::move(site_id)), receive_timeout_(receive_timeout) {
    fd_ = connect_to(center_addr);
    RoundMessage reg;
    reg.round = 0;
    reg.direction = Direction::SiteToCenter;
    reg.site_id = site_id_;
    reg.dim = 0;
    reg.payload = Matrix(0, 0);
    write_all(fd_, serialize(reg), "registration of '" + site_id_ + "'");
}

TcpSiteChannel::~TcpSiteChannel() {
    if (fd_ >= 0) ::close(fd_);
}

Downlink TcpSiteChannel::receive() {
    auto frame = read_frame(fd_, receive_timeout_, "site '" + site_id_ + "'");
    return deserialize_downlink(frame, site_id_);
}

void TcpSiteChannel::send(std::uint32_t round, const Matrix& w) {
    RoundMessage msg;
    msg.round = round;
    msg.direction = Direction::SiteToCenter;
    msg.site_id = site_id_;
    msg.dim = static_cast<std::uint32_t>(w.rows());
    msg.payload = w;
    write_all(fd_, serialize(msg), "reply from '" + site_id_ + "'");
}

}  // namespace feddag
