#include "dei/common.hpp"
#include "dei/gossip_net.hpp"

#include "httplib.h"

namespace dei::gossip {

namespace {

constexpr char kDestHeader[] = "X-Destination-Peer-Id";
constexpr char kFromHeader[] = "X-From-Peer-Id";

std::pair<std::string, std::string> split_origin(const std::string& url) {
    const std::size_t scheme = url.find("://");
    if (scheme == std::string::npos) throw PreconditionError("AXL url needs a scheme: " + url);
    const std::size_t path = url.find('/', scheme + 3);
    if (path == std::string::npos) return {url, ""};
    std::string prefix = url.substr(path);
    while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
    return {url.substr(0, path), prefix};
}

}  // namespace

// --- Shim ------------------------------------------------------------------

AxlShim::AxlShim(std::shared_ptr<Transport> uplink, std::string host, int port)
    : uplink_(std::move(uplink)), host_(std::move(host)), port_(port), server_(std::make_unique<httplib::Server>()) {
    if (!uplink_) throw PreconditionError("AXL shim needs an uplink transport");
    uplink_->set_handler([this](const PeerId& from, std::string bytes) {
        std::lock_guard lk(mu_);
        queue_.emplace_back(from, std::move(bytes));
    });

    server_->Post("/send", [this](const httplib::Request& req, httplib::Response& res) {
        const std::string dest = req.get_header_value(kDestHeader);
        if (!PeerId::valid_hex(dest)) {
            res.status = 400;
            res.set_content("invalid " + std::string(kDestHeader) + "\n", "text/plain");
            return;
        }
        // Fire-and-forget, except that an unreachable peer is reported.
        if (!uplink_->send(PeerId::from_hex(dest), req.body)) {
            res.status = 502;
            res.set_content("peer unreachable\n", "text/plain");
            return;
        }
        res.status = 200;
    });

    server_->Get("/recv", [this](const httplib::Request&, httplib::Response& res) {
        std::pair<PeerId, std::string> item;
        {
            std::lock_guard lk(mu_);
            if (queue_.empty()) {
                res.status = 204;
                return;
            }
            item = std::move(queue_.front());
            queue_.pop_front();
        }
        res.status = 200;
        res.set_header(kFromHeader, item.first.hex());
        res.set_content(std::move(item.second), "application/octet-stream");
    });

    server_->Get("/topology", [this](const httplib::Request&, httplib::Response& res) {
        nlohmann::json peers = nlohmann::json::array();
        {
            std::lock_guard lk(mu_);
            for (const PeerId& p : peers_) peers.push_back({{"public_key", p.hex()}, {"ipv6", ipv6_for(p)}});
        }
        const nlohmann::json j{{"our_ipv6", ipv6_for(self())}, {"our_public_key", self().hex()}, {"peers", peers}};
        res.set_content(j.dump(), "application/json");
    });
}

AxlShim::~AxlShim() {
    stop();
    uplink_->set_handler({});
}

void AxlShim::start() {
    if (thread_.joinable()) return;
    if (port_ == 0) {
        port_ = server_->bind_to_any_port(host_);
    } else if (!server_->bind_to_port(host_, port_)) {
        throw TransportDown("AXL shim cannot bind " + host_ + ":" + std::to_string(port_));
    }
    if (port_ < 0) throw TransportDown("AXL shim cannot bind " + host_);
    thread_ = std::thread([this] { server_->listen_after_bind(); });
    server_->wait_until_ready();
}

void AxlShim::stop() {
    if (!thread_.joinable()) return;
    server_->stop();
    thread_.join();
}

std::string AxlShim::base_url() const {
    return "http://" + host_ + ":" + std::to_string(port_);
}

void AxlShim::set_peers(std::vector<PeerId> peers) {
    std::lock_guard lk(mu_);
    peers_ = std::move(peers);
}

std::size_t AxlShim::queued() const {
    std::lock_guard lk(mu_);
    return queue_.size();
}

std::string AxlShim::ipv6_for(const PeerId& id) {
    // 0x02 prefix, then 15 key bytes, in eight 16-bit groups.
    std::array<std::uint8_t, 16> a{};
    a[0] = 0x02;
    std::copy(id.bytes.begin(), id.bytes.begin() + 15, a.begin() + 1);
    char buf[48];
    std::snprintf(buf, sizeof buf, "%x:%x:%x:%x:%x:%x:%x:%x", a[0] << 8 | a[1], a[2] << 8 | a[3], a[4] << 8 | a[5],
                  a[6] << 8 | a[7], a[8] << 8 | a[9], a[10] << 8 | a[11], a[12] << 8 | a[13], a[14] << 8 | a[15]);
    return buf;
}

// --- Client transport ------------------------------------------------------

AxlTransport::AxlTransport(std::string base_url, std::chrono::milliseconds poll_interval)
    : base_url_(std::move(base_url)), poll_interval_(poll_interval) {
    const auto [origin, prefix] = split_origin(base_url_);
    httplib::Client cli(origin);
    cli.set_connection_timeout(2, 0);
    const auto res = cli.Get(prefix + "/topology");
    if (!res || res->status != 200) throw TransportDown("AXL node at " + base_url_ + " did not answer /topology");
    try {
        self_ = PeerId::from_hex(nlohmann::json::parse(res->body).at("our_public_key").get<std::string>());
    } catch (const std::exception& e) {
        throw TransportDown(std::string("bad /topology reply: ") + e.what());
    }
}

AxlTransport::~AxlTransport() {
    stop();
}

void AxlTransport::start() {
    if (running_.exchange(true)) return;
    poller_ = std::thread([this] { poll_loop(); });
}

void AxlTransport::stop() {
    if (!running_.exchange(false)) return;
    if (poller_.joinable()) poller_.join();
}

void AxlTransport::set_handler(Handler h) {
    std::lock_guard lk(handler_mu_);
    handler_ = std::move(h);
}

bool AxlTransport::send(const PeerId& to, std::string bytes) {
    if (!running_) return false;
    const auto [origin, prefix] = split_origin(base_url_);
    std::lock_guard lk(send_mu_);
    httplib::Client cli(origin);
    cli.set_connection_timeout(2, 0);
    const httplib::Headers headers{{kDestHeader, to.hex()}};
    const auto res = cli.Post(prefix + "/send", headers, bytes, "application/octet-stream");
    return res && res->status == 200;
}

void AxlTransport::poll_loop() {
    const auto [origin, prefix] = split_origin(base_url_);
    httplib::Client cli(origin);
    cli.set_keep_alive(true);
    cli.set_connection_timeout(2, 0);
    while (running_) {
        const auto res = cli.Get(prefix + "/recv");
        if (!res || res->status != 200) {
            std::this_thread::sleep_for(poll_interval_);
            continue;
        }
        const std::string from = res->get_header_value(kFromHeader);
        if (!PeerId::valid_hex(from)) continue;
        Handler h;
        {
            std::lock_guard lk(handler_mu_);
            h = handler_;
        }
        if (h) h(PeerId::from_hex(from), std::string(res->body));
    }
}

// --- Heartbeat -------------------------------------------------------------

HeartbeatThread::HeartbeatThread(GossipEngine& engine, std::chrono::milliseconds interval)
    : engine_(engine), interval_(interval) {
    if (interval_.count() <= 0) throw PreconditionError("heartbeat interval must be > 0");
    thread_ = std::thread([this] {
        std::unique_lock lk(mu_);
        while (!cv_.wait_for(lk, interval_, [this] { return stop_; })) {
            lk.unlock();
            engine_.heartbeat();
            lk.lock();
        }
    });
}

HeartbeatThread::~HeartbeatThread() {
    stop();
}

void HeartbeatThread::stop() {
    {
        std::lock_guard lk(mu_);
        stop_ = true;
    }
    cv_.notify_all();
    if (thread_.joinable()) thread_.join();
}

}  // namespace dei::gossip
