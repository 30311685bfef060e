#include "dei/common.hpp"
#include "dei/gossip_net.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

namespace dei::gossip {

double steady_seconds() {
    using namespace std::chrono;
    return duration<double>(steady_clock::now().time_since_epoch()).count();
}

namespace {

bool write_all(int fd, std::string_view bytes) {
    while (!bytes.empty()) {
        const ssize_t n = ::send(fd, bytes.data(), bytes.size(), MSG_NOSIGNAL);
        if (n < 0 && errno == EINTR) continue;
        if (n <= 0) return false;
        bytes.remove_prefix(static_cast<std::size_t>(n));
    }
    return true;
}

bool read_exact(int fd, char* out, std::size_t n) {
    while (n > 0) {
        const ssize_t got = ::recv(fd, out, n, 0);
        if (got < 0 && errno == EINTR) continue;
        if (got <= 0) return false;
        out += got;
        n -= static_cast<std::size_t>(got);
    }
    return true;
}

// Non-blocking connect bounded by `timeout`; returns the fd or -1.
int connect_with_timeout(const std::string& host, int port, std::chrono::milliseconds timeout) {
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    if (::getaddrinfo(host.c_str(), std::to_string(port).c_str(), &hints, &res) != 0) return -1;
    int fd = -1;
    for (addrinfo* ai = res; ai != nullptr && fd < 0; ai = ai->ai_next) {
        fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
        if (fd < 0) continue;
        const int flags = ::fcntl(fd, F_GETFL, 0);
        ::fcntl(fd, F_SETFL, flags | O_NONBLOCK);
        int rc = ::connect(fd, ai->ai_addr, ai->ai_addrlen);
        if (rc < 0 && errno == EINPROGRESS) {
            pollfd p{fd, POLLOUT, 0};
            rc = ::poll(&p, 1, static_cast<int>(timeout.count())) == 1 ? 0 : -1;
            int err = 0;
            socklen_t len = sizeof err;
            if (rc == 0 && (::getsockopt(fd, SOL_SOCKET, SO_ERROR, &err, &len) != 0 || err != 0)) rc = -1;
        }
        if (rc != 0) {
            ::close(fd);
            fd = -1;
            continue;
        }
        ::fcntl(fd, F_SETFL, flags);
        const int one = 1;
        ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
    }
    ::freeaddrinfo(res);
    return fd;
}

}  // namespace

struct TcpTransport::Conn {
    explicit Conn(int f) : fd(f) {}
    ~Conn() {
        if (fd >= 0) ::close(fd);
    }
    void shutdown() { ::shutdown(fd, SHUT_RDWR); }
    int fd;
    std::mutex write_mu;
    PeerId peer;
};

TcpTransport::TcpTransport(PeerId self, Options opts) : self_(self), opts_(std::move(opts)) {
    if (!(opts_.backoff_base > 0.0 && opts_.backoff_cap >= opts_.backoff_base)) {
        throw PreconditionError("backoff must satisfy 0 < base <= cap");
    }
}

TcpTransport::~TcpTransport() {
    stop();
}

void TcpTransport::add_peer(const PeerAddress& p) {
    std::lock_guard lk(mu_);
    addresses_[p.id] = p;
}

void TcpTransport::set_handler(Handler h) {
    std::lock_guard lk(handler_mu_);
    handler_ = std::move(h);
}

void TcpTransport::start() {
    if (running_) return;
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    hints.ai_flags = AI_PASSIVE;
    addrinfo* res = nullptr;
    if (::getaddrinfo(opts_.listen_host.c_str(), std::to_string(opts_.listen_port).c_str(), &hints, &res) != 0) {
        throw TransportDown("cannot resolve listen address " + opts_.listen_host);
    }
    listen_fd_ = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
    const int one = 1;
    ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    if (listen_fd_ < 0 || ::bind(listen_fd_, res->ai_addr, res->ai_addrlen) != 0 || ::listen(listen_fd_, 64) != 0) {
        const std::string err = std::strerror(errno);
        ::freeaddrinfo(res);
        if (listen_fd_ >= 0) ::close(listen_fd_);
        listen_fd_ = -1;
        throw TransportDown("cannot listen on " + opts_.listen_host + ":" + std::to_string(opts_.listen_port) + ": " + err);
    }
    ::freeaddrinfo(res);
    sockaddr_storage addr{};
    socklen_t len = sizeof addr;
    ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    port_ = ntohs(addr.ss_family == AF_INET6 ? reinterpret_cast<sockaddr_in6*>(&addr)->sin6_port
                                             : reinterpret_cast<sockaddr_in*>(&addr)->sin_port);
    running_ = true;
    acceptor_ = std::thread([this] { accept_loop(); });
}

void TcpTransport::stop() {
    if (!running_.exchange(false)) return;
    ::shutdown(listen_fd_, SHUT_RDWR);
    ::close(listen_fd_);
    listen_fd_ = -1;
    if (acceptor_.joinable()) acceptor_.join();
    std::vector<std::thread> readers;
    {
        std::lock_guard lk(mu_);
        for (auto& [peer, c] : conns_) c->shutdown();
        conns_.clear();
        readers.swap(readers_);
    }
    for (auto& t : readers) t.join();
}

void TcpTransport::accept_loop() {
    while (running_) {
        pollfd p{listen_fd_, POLLIN, 0};
        if (::poll(&p, 1, 100) <= 0) continue;
        const int fd = ::accept(listen_fd_, nullptr, nullptr);
        if (fd < 0) continue;
        auto c = std::make_shared<Conn>(fd);
        // The first 32 bytes name the connecting peer.
        timeval tv{5, 0};
        ::setsockopt(fd, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof tv);
        if (!read_exact(fd, reinterpret_cast<char*>(c->peer.bytes.data()), c->peer.bytes.size())) continue;
        tv = timeval{0, 0};
        ::setsockopt(fd, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof tv);
        register_conn(c->peer, c);
    }
}

void TcpTransport::register_conn(const PeerId& peer, std::shared_ptr<Conn> c) {
    std::lock_guard lk(mu_);
    if (!running_) return;
    // Newest stream wins for sending; the old one keeps reading until it closes.
    conns_[peer] = c;
    backoff_.erase(peer);
    readers_.emplace_back([this, c] { read_loop(c); });
}

void TcpTransport::drop_conn(const PeerId& peer, const std::shared_ptr<Conn>& c) {
    std::lock_guard lk(mu_);
    const auto it = conns_.find(peer);
    if (it != conns_.end() && it->second == c) conns_.erase(it);
}

void TcpTransport::read_loop(std::shared_ptr<Conn> c) {
    FrameReader reader;
    char buf[8192];
    while (running_) {
        const ssize_t n = ::recv(c->fd, buf, sizeof buf, 0);
        if (n < 0 && errno == EINTR) continue;
        if (n <= 0) break;
        reader.feed(std::string_view(buf, static_cast<std::size_t>(n)));
        try {
            while (auto frame = reader.next()) {
                Handler h;
                {
                    std::lock_guard lk(handler_mu_);
                    h = handler_;
                }
                if (h) h(c->peer, std::move(*frame));
            }
        } catch (const WireError&) {
            break;
        }
    }
    drop_conn(c->peer, c);
    c->shutdown();
}

std::shared_ptr<TcpTransport::Conn> TcpTransport::connect_locked(const PeerId& to) {
    const auto addr = addresses_.find(to);
    if (addr == addresses_.end()) return nullptr;
    Backoff& b = backoff_[to];
    const double now = steady_seconds();
    if (now < b.next_attempt) return nullptr;
    const int fd = connect_with_timeout(addr->second.host, addr->second.port, opts_.connect_timeout);
    if (fd < 0 || !write_all(fd, std::string_view(reinterpret_cast<const char*>(self_.bytes.data()), 32))) {
        if (fd >= 0) ::close(fd);
        b.delay = b.delay == 0.0 ? opts_.backoff_base : std::min(opts_.backoff_cap, 2 * b.delay);
        b.next_attempt = now + b.delay;
        return nullptr;
    }
    auto c = std::make_shared<Conn>(fd);
    c->peer = to;
    conns_[to] = c;
    backoff_.erase(to);
    readers_.emplace_back([this, c] { read_loop(c); });
    return c;
}

bool TcpTransport::send(const PeerId& to, std::string bytes) {
    if (!running_) return false;
    std::shared_ptr<Conn> c;
    {
        std::lock_guard lk(mu_);
        const auto it = conns_.find(to);
        c = it != conns_.end() ? it->second : connect_locked(to);
    }
    if (!c) return false;
    bool ok;
    {
        std::lock_guard wl(c->write_mu);
        ok = write_all(c->fd, bytes);
    }
    if (!ok) {
        drop_conn(to, c);
        c->shutdown();
    }
    return ok;
}

double TcpTransport::backoff_remaining(const PeerId& to) const {
    std::lock_guard lk(mu_);
    const auto it = backoff_.find(to);
    if (it == backoff_.end()) return 0.0;
    return std::max(0.0, it->second.next_attempt - steady_seconds());
}

}  // namespace dei::gossip
