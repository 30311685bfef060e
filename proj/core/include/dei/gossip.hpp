#pragma once

// Topic mesh gossip for champion exchange: eager push to a small mesh of
// peers, lazy IHAVE/IWANT repair beyond it, graft/prune on a heartbeat.
// Transports are pluggable; this header holds the wire format, the engine,
// and the deterministic in-process network used by simulations.

#include "dei/drq.hpp"

#include <array>
#include <compare>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <queue>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace dei::gossip {

// The local transport cannot send at all (as opposed to one unreachable peer).
class TransportDown : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class WireError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct PeerId {
    std::array<std::uint8_t, 32> bytes{};

    // Exactly 64 lowercase hex characters; PreconditionError otherwise.
    static PeerId from_hex(std::string_view hex);
    static bool valid_hex(std::string_view hex) noexcept;
    static PeerId random(std::uint64_t seed);
    std::string hex() const;
    // First 8 hex chars, for logs.
    std::string short_hex() const { return hex().substr(0, 8); }

    auto operator<=>(const PeerId&) const = default;
};

// --- Wire format -----------------------------------------------------------

inline constexpr std::uint8_t kWireVersion = 1;
// Hard ceiling on one decoded frame, independent of the configured payload cap.
inline constexpr std::size_t kMaxFrameBytes = 4u << 20;

enum class FrameKind : std::uint8_t { Publish = 1, IHave = 2, IWant = 3, Graft = 4, Prune = 5 };

std::string_view to_string(FrameKind k);

struct Frame {
    FrameKind kind = FrameKind::Publish;
    std::uint8_t hops = 0;
    std::string topic;
    std::string msg_id;
    PeerId sender;
    std::uint64_t seq = 0;
    std::string body;

    bool operator==(const Frame&) const = default;
};

// Length-prefixed; see docs/PROTOCOL.md for the byte layout.
std::string encode_frame(const Frame& f);
// Decodes exactly one frame occupying all of `bytes`.
Frame decode_frame(std::string_view bytes);

// IHAVE/IWANT bodies: u16 count, then u16-length-prefixed ids.
std::string encode_id_list(const std::vector<std::string>& ids);
std::vector<std::string> decode_id_list(std::string_view body);

// Splits a byte stream into whole frames.
class FrameReader {
public:
    void feed(std::string_view bytes) { buf_.append(bytes); }
    // Next complete encoded frame (length prefix included), if any.
    std::optional<std::string> next();
    std::size_t buffered() const noexcept { return buf_.size(); }

private:
    std::string buf_;
};

// "<fnv1a(payload) hex>:<sender hex>:<seq>"
std::string make_message_id(std::string_view payload, const PeerId& sender, std::uint64_t seq);

// --- Transport -------------------------------------------------------------

class Transport {
public:
    // Called with one encoded frame and the peer that handed it over.
    using Handler = std::function<void(const PeerId& from, std::string bytes)>;

    virtual ~Transport() = default;
    virtual const PeerId& self() const = 0;
    // False when the peer cannot be reached right now. Never blocks for long.
    virtual bool send(const PeerId& to, std::string bytes) = 0;
    virtual void set_handler(Handler h) = 0;
    virtual bool up() const = 0;
};

// --- Engine ----------------------------------------------------------------

struct GossipConfig {
    int d = 3;
    int d_high = 5;
    // Non-mesh peers sent an IHAVE digest per heartbeat.
    int gossip_factor = 2;
    double heartbeat_interval = 1.0;
    double mcache_ttl = 120.0;
    double seen_ttl = 240.0;
    std::size_t max_message_size = 64 * 1024;
    std::size_t max_ihave_length = 5000;

    void validate() const;
    nlohmann::json to_json() const;
    static GossipConfig from_json(const nlohmann::json& j);
};

struct GossipMessage {
    std::string id;
    std::string topic;
    std::string payload;
    PeerId sender;
    std::uint64_t seq = 0;
    // Forwarding hops from the publisher to this node.
    int hops = 0;
    // Local clock at receipt.
    double received_at = 0.0;
};

enum class ControlKind { IHave, IWant, Graft, Prune };

struct ControlMessage {
    ControlKind kind = ControlKind::Graft;
    PeerId peer;
    std::string topic;
    std::vector<std::string> ids;
};

struct GossipStats {
    long published = 0;
    long delivered = 0;
    long duplicates = 0;
    long forwarded = 0;
    long ihave_sent = 0;
    long iwant_sent = 0;
    long iwant_served = 0;
    long send_failures = 0;
    long malformed = 0;
    long unjoined = 0;
};

class GossipEngine {
public:
    using Clock = std::function<double()>;

    GossipEngine(GossipConfig cfg, std::shared_ptr<Transport> transport, std::uint64_t seed, Clock clock);
    ~GossipEngine();
    GossipEngine(const GossipEngine&) = delete;
    GossipEngine& operator=(const GossipEngine&) = delete;

    const PeerId& self() const noexcept { return self_; }
    const GossipConfig& config() const noexcept { return cfg_; }

    void add_peer(const PeerId& p);
    void remove_peer(const PeerId& p);
    void join(const std::string& topic);
    void leave(const std::string& topic);

    // Eager push to the mesh (or up to D known peers when the mesh is still
    // empty). Returns the message id. Throws TransportDown when the local
    // transport is down, PreconditionError for unjoined topics or oversize
    // payloads.
    std::string publish(const std::string& topic, std::string payload);

    // Entry point for the transport.
    void on_frame(const PeerId& from, std::string_view bytes);

    // Expire caches, graft/prune toward D, send IHAVE digests. Returns the
    // control messages sent.
    std::vector<ControlMessage> heartbeat();

    // Everything received since the last call, in arrival order.
    std::vector<GossipMessage> drain();

    std::set<PeerId> mesh(const std::string& topic) const;
    std::set<PeerId> known() const;
    bool joined(const std::string& topic) const;
    bool seen(const std::string& id) const;
    std::size_t mcache_size() const;
    GossipStats stats() const;

private:
    struct Cached {
        GossipMessage msg;
        double expires = 0.0;
    };

    bool send_locked(const PeerId& to, const Frame& f);
    void expire_locked(double now);
    void mark_seen_locked(const std::string& id, double now);
    void cache_locked(const GossipMessage& m, double now);
    Frame control_frame(FrameKind k, const std::string& topic, std::string body = {}) const;

    GossipConfig cfg_;
    std::shared_ptr<Transport> transport_;
    PeerId self_;
    Clock clock_;

    mutable std::mutex mu_;
    std::mt19937_64 rng_;
    std::uint64_t seq_ = 0;
    std::set<PeerId> known_;
    std::map<std::string, std::set<PeerId>> mesh_;
    std::unordered_map<std::string, double> seen_;
    std::deque<std::pair<double, std::string>> seen_order_;
    std::unordered_map<std::string, Cached> mcache_;
    std::deque<std::string> mcache_order_;
    std::unordered_map<std::string, double> iwant_pending_;
    GossipStats stats_;

    mutable std::mutex inbox_mu_;
    std::deque<GossipMessage> inbox_;
};

// --- Deterministic simulation ---------------------------------------------

// Single-threaded discrete-event loop. Events at equal times run in the
// order they were scheduled.
class EventLoop {
public:
    double now() const noexcept { return now_; }
    void schedule(double at, std::function<void()> fn);
    void schedule_in(double delay, std::function<void()> fn) { schedule(now_ + delay, std::move(fn)); }
    // Runs fn at start, start+interval, ... while it returns true.
    void every(double start, double interval, std::function<bool()> fn);

    bool run_one();
    // Runs events with time <= t, then sets the clock to t.
    void run_until(double t);
    // Runs until pred() holds or the queue empties. Returns pred().
    bool run_while_not(const std::function<bool()>& pred, double deadline);
    bool empty() const noexcept { return queue_.empty(); }
    std::uint64_t processed() const noexcept { return processed_; }

private:
    struct Event {
        double at;
        std::uint64_t order;
        std::function<void()> fn;
    };
    struct Later {
        bool operator()(const Event& a, const Event& b) const {
            return a.at != b.at ? a.at > b.at : a.order > b.order;
        }
    };
    std::priority_queue<Event, std::vector<Event>, Later> queue_;
    double now_ = 0.0;
    std::uint64_t next_order_ = 0;
    std::uint64_t processed_ = 0;
};

struct SimNetworkConfig {
    double latency_min = 0.005;
    double latency_max = 0.050;
    double drop_probability = 0.0;
};

// Per-link latency uniform in [min, max], FIFO per directed link, i.i.d.
// drops. Sending to a peer that is down fails immediately; frames in flight
// to a node that goes down are lost.
class SimNetwork : public std::enable_shared_from_this<SimNetwork> {
public:
    SimNetwork(EventLoop& loop, SimNetworkConfig cfg, std::uint64_t seed);

    std::shared_ptr<Transport> attach(const PeerId& id);
    void set_up(const PeerId& id, bool up);
    bool is_up(const PeerId& id) const;

    long frames_sent() const noexcept { return frames_sent_; }
    long frames_dropped() const noexcept { return frames_dropped_; }

private:
    class Endpoint;
    friend class Endpoint;
    bool send(const PeerId& from, const PeerId& to, std::string bytes);

    EventLoop& loop_;
    SimNetworkConfig cfg_;
    std::mt19937_64 rng_;
    std::map<PeerId, std::weak_ptr<Endpoint>> endpoints_;
    std::map<PeerId, bool> up_;
    std::map<std::pair<PeerId, PeerId>, double> link_clock_;
    long frames_sent_ = 0;
    long frames_dropped_ = 0;
};

// Synchronous in-process delivery between attached endpoints. Handlers run on
// the sender's thread, so they must not call back into a sender.
class MemoryHub {
public:
    std::shared_ptr<Transport> attach(const PeerId& id);

private:
    class Endpoint;
    bool send(const PeerId& from, const PeerId& to, std::string bytes);
    mutable std::mutex mu_;
    std::map<PeerId, std::weak_ptr<Endpoint>> endpoints_;
};

// --- Champion exchange over gossip ----------------------------------------

// Publishes champions as their JSON serialization and parses what arrives.
// Publish failures and undecodable payloads are counted, not raised, so a
// node keeps evolving while its network is down.
class GossipExchange final : public drq::ChampionExchange {
public:
    GossipExchange(std::shared_ptr<GossipEngine> engine, std::string topic,
                   int core_size = redcode::kDefaultCoreSize);

    void publish(const drq::Champion& c) override;
    std::vector<drq::Champion> drain() override;

    long publish_failures() const noexcept { return publish_failures_; }
    long rejected() const noexcept { return rejected_; }
    GossipEngine& engine() noexcept { return *engine_; }

private:
    std::shared_ptr<GossipEngine> engine_;
    std::string topic_;
    int core_size_;
    long publish_failures_ = 0;
    long rejected_ = 0;
};

// One "peer_id host:port" per line; '#' starts a comment.
struct PeerAddress {
    PeerId id;
    std::string host;
    int port = 0;
};
std::vector<PeerAddress> parse_peers_file(std::string_view text);

}  // namespace dei::gossip
