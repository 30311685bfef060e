#pragma once

// Real-network transports for the gossip engine: plain TCP between nodes, and
// an HTTP client/server pair speaking the AXL localhost API (/send, /recv,
// /topology) so a real AXL binary can stand in for the shim.

#include "dei/gossip.hpp"

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <thread>

namespace httplib {
class Server;
}

namespace dei::gossip {

double steady_seconds();

// One framed stream per peer, opened lazily on first send. The connecting
// side announces its 32-byte id before any frame. Failed connects back off
// exponentially (base 0.5 s, cap 30 s); send() returns false meanwhile.
class TcpTransport final : public Transport {
public:
    struct Options {
        std::string listen_host = "127.0.0.1";
        // 0 picks a free port; see port().
        int listen_port = 0;
        std::chrono::milliseconds connect_timeout{1000};
        double backoff_base = 0.5;
        double backoff_cap = 30.0;
    };

    TcpTransport(PeerId self, Options opts);
    ~TcpTransport() override;
    TcpTransport(const TcpTransport&) = delete;
    TcpTransport& operator=(const TcpTransport&) = delete;

    void add_peer(const PeerAddress& p);
    void start();
    void stop();
    int port() const noexcept { return port_; }

    const PeerId& self() const override { return self_; }
    bool send(const PeerId& to, std::string bytes) override;
    void set_handler(Handler h) override;
    bool up() const override { return running_.load(); }

    // Seconds until the next connect attempt to `to` is allowed; 0 if none pending.
    double backoff_remaining(const PeerId& to) const;

private:
    struct Conn;
    void accept_loop();
    void read_loop(std::shared_ptr<Conn> c);
    void register_conn(const PeerId& peer, std::shared_ptr<Conn> c);
    void drop_conn(const PeerId& peer, const std::shared_ptr<Conn>& c);
    std::shared_ptr<Conn> connect_locked(const PeerId& to);

    PeerId self_;
    Options opts_;
    int listen_fd_ = -1;
    int port_ = 0;
    std::atomic<bool> running_{false};
    std::thread acceptor_;

    mutable std::mutex mu_;
    std::map<PeerId, PeerAddress> addresses_;
    std::map<PeerId, std::shared_ptr<Conn>> conns_;
    struct Backoff {
        double next_attempt = 0.0;
        double delay = 0.0;
    };
    std::map<PeerId, Backoff> backoff_;
    std::vector<std::thread> readers_;

    std::mutex handler_mu_;
    Handler handler_;
};

// Local stand-in for the AXL node: an HTTP server on localhost whose /send
// forwards raw bytes over an uplink transport and whose /recv dequeues what
// the uplink delivered.
class AxlShim {
public:
    AxlShim(std::shared_ptr<Transport> uplink, std::string host = "127.0.0.1", int port = 0);
    ~AxlShim();
    AxlShim(const AxlShim&) = delete;
    AxlShim& operator=(const AxlShim&) = delete;

    void start();
    void stop();
    int port() const noexcept { return port_; }
    std::string base_url() const;
    const PeerId& self() const { return uplink_->self(); }
    // Peers listed by /topology.
    void set_peers(std::vector<PeerId> peers);
    std::size_t queued() const;

    // 200::/7 style address derived from the key, for /topology.
    static std::string ipv6_for(const PeerId& id);

private:
    std::shared_ptr<Transport> uplink_;
    std::string host_;
    int port_;
    std::unique_ptr<httplib::Server> server_;
    std::thread thread_;

    mutable std::mutex mu_;
    std::deque<std::pair<PeerId, std::string>> queue_;
    std::vector<PeerId> peers_;
};

// Gossip transport that talks to an AXL-compatible HTTP API. Identity comes
// from /topology; a background thread polls /recv.
class AxlTransport final : public Transport {
public:
    explicit AxlTransport(std::string base_url,
                          std::chrono::milliseconds poll_interval = std::chrono::milliseconds(20));
    ~AxlTransport() override;
    AxlTransport(const AxlTransport&) = delete;
    AxlTransport& operator=(const AxlTransport&) = delete;

    void start();
    void stop();

    const PeerId& self() const override { return self_; }
    bool send(const PeerId& to, std::string bytes) override;
    void set_handler(Handler h) override;
    bool up() const override { return running_.load(); }

private:
    void poll_loop();

    std::string base_url_;
    std::chrono::milliseconds poll_interval_;
    PeerId self_;
    std::atomic<bool> running_{false};
    std::thread poller_;
    std::mutex send_mu_;
    std::mutex handler_mu_;
    Handler handler_;
};

// Calls engine.heartbeat() on a wall-clock interval.
class HeartbeatThread {
public:
    HeartbeatThread(GossipEngine& engine, std::chrono::milliseconds interval);
    ~HeartbeatThread();
    HeartbeatThread(const HeartbeatThread&) = delete;
    HeartbeatThread& operator=(const HeartbeatThread&) = delete;
    void stop();

private:
    GossipEngine& engine_;
    std::chrono::milliseconds interval_;
    std::mutex mu_;
    std::condition_variable cv_;
    bool stop_ = false;
    std::thread thread_;
};

}  // namespace dei::gossip
