#include "dei/common.hpp"
#include "dei/gossip.hpp"

#include <algorithm>

namespace dei::gossip {

namespace {

template <typename T>
std::vector<T> sample(std::vector<T> pool, std::size_t k, std::mt19937_64& rng) {
    std::shuffle(pool.begin(), pool.end(), rng);
    if (pool.size() > k) pool.resize(k);
    return pool;
}

}  // namespace

// --- Config ----------------------------------------------------------------

void GossipConfig::validate() const {
    if (d < 1) throw PreconditionError("gossip d must be >= 1");
    if (d_high < d) throw PreconditionError("gossip d_high must be >= d");
    if (gossip_factor < 0) throw PreconditionError("gossip_factor must be >= 0");
    if (!(heartbeat_interval > 0.0)) throw PreconditionError("heartbeat_interval must be > 0");
    if (!(mcache_ttl > 0.0)) throw PreconditionError("mcache_ttl must be > 0");
    if (seen_ttl < mcache_ttl) throw PreconditionError("seen_ttl must be >= mcache_ttl");
    if (max_message_size == 0) throw PreconditionError("max_message_size must be > 0");
    if (max_ihave_length == 0 || max_ihave_length > 0xffff) {
        throw PreconditionError("max_ihave_length must lie in [1, 65535]");
    }
}

nlohmann::json GossipConfig::to_json() const {
    return {{"d", d},
            {"d_high", d_high},
            {"gossip_factor", gossip_factor},
            {"heartbeat_interval", heartbeat_interval},
            {"mcache_ttl", mcache_ttl},
            {"seen_ttl", seen_ttl},
            {"max_message_size", max_message_size},
            {"max_ihave_length", max_ihave_length}};
}

GossipConfig GossipConfig::from_json(const nlohmann::json& j) {
    GossipConfig c;
    c.d = j.value("d", c.d);
    c.d_high = j.value("d_high", c.d + 2);
    c.gossip_factor = j.value("gossip_factor", c.gossip_factor);
    c.heartbeat_interval = j.value("heartbeat_interval", c.heartbeat_interval);
    c.mcache_ttl = j.value("mcache_ttl", c.mcache_ttl);
    c.seen_ttl = j.value("seen_ttl", c.seen_ttl);
    c.max_message_size = j.value("max_message_size", c.max_message_size);
    c.max_ihave_length = j.value("max_ihave_length", c.max_ihave_length);
    c.validate();
    return c;
}

// --- Engine ----------------------------------------------------------------

GossipEngine::GossipEngine(GossipConfig cfg, std::shared_ptr<Transport> transport, std::uint64_t seed,
                           Clock clock)
    : cfg_(std::move(cfg)), transport_(std::move(transport)), clock_(std::move(clock)), rng_(seed) {
    cfg_.validate();
    if (!transport_) throw PreconditionError("gossip engine needs a transport");
    if (!clock_) throw PreconditionError("gossip engine needs a clock");
    self_ = transport_->self();
    transport_->set_handler([this](const PeerId& from, std::string bytes) { on_frame(from, bytes); });
}

GossipEngine::~GossipEngine() {
    transport_->set_handler({});
}

void GossipEngine::add_peer(const PeerId& p) {
    if (p == self_) return;
    std::lock_guard lk(mu_);
    known_.insert(p);
}

void GossipEngine::remove_peer(const PeerId& p) {
    std::lock_guard lk(mu_);
    known_.erase(p);
    for (auto& [topic, mesh] : mesh_) mesh.erase(p);
}

void GossipEngine::join(const std::string& topic) {
    std::lock_guard lk(mu_);
    mesh_.try_emplace(topic);
}

void GossipEngine::leave(const std::string& topic) {
    std::lock_guard lk(mu_);
    const auto it = mesh_.find(topic);
    if (it == mesh_.end()) return;
    for (const PeerId& p : it->second) send_locked(p, control_frame(FrameKind::Prune, topic));
    mesh_.erase(topic);
}

Frame GossipEngine::control_frame(FrameKind k, const std::string& topic, std::string body) const {
    Frame f;
    f.kind = k;
    f.topic = topic;
    f.sender = self_;
    f.body = std::move(body);
    return f;
}

bool GossipEngine::send_locked(const PeerId& to, const Frame& f) {
    if (transport_->send(to, encode_frame(f))) return true;
    ++stats_.send_failures;
    for (auto& [topic, mesh] : mesh_) mesh.erase(to);
    return false;
}

void GossipEngine::mark_seen_locked(const std::string& id, double now) {
    seen_[id] = now + cfg_.seen_ttl;
    seen_order_.emplace_back(now + cfg_.seen_ttl, id);
}

void GossipEngine::cache_locked(const GossipMessage& m, double now) {
    if (mcache_.emplace(m.id, Cached{m, now + cfg_.mcache_ttl}).second) mcache_order_.push_back(m.id);
}

void GossipEngine::expire_locked(double now) {
    while (!seen_order_.empty() && seen_order_.front().first <= now) {
        const auto it = seen_.find(seen_order_.front().second);
        // A later re-insert pushes a newer entry; only drop if this one is current.
        if (it != seen_.end() && it->second <= now) seen_.erase(it);
        seen_order_.pop_front();
    }
    while (!mcache_order_.empty()) {
        const auto it = mcache_.find(mcache_order_.front());
        if (it != mcache_.end() && it->second.expires > now) break;
        if (it != mcache_.end()) mcache_.erase(it);
        mcache_order_.pop_front();
    }
    std::erase_if(iwant_pending_, [now](const auto& kv) { return kv.second <= now; });
}

std::string GossipEngine::publish(const std::string& topic, std::string payload) {
    if (!transport_->up()) throw TransportDown("transport is down; cannot publish on " + topic);
    if (payload.size() > cfg_.max_message_size) {
        throw PreconditionError("payload of " + std::to_string(payload.size()) + " bytes exceeds max_message_size");
    }
    std::lock_guard lk(mu_);
    const auto it = mesh_.find(topic);
    if (it == mesh_.end()) throw PreconditionError("publish on unjoined topic " + topic);
    const double now = clock_();
    expire_locked(now);

    GossipMessage m;
    m.seq = ++seq_;
    m.sender = self_;
    m.topic = topic;
    m.id = make_message_id(payload, self_, m.seq);
    m.payload = std::move(payload);
    m.received_at = now;
    mark_seen_locked(m.id, now);
    cache_locked(m, now);
    ++stats_.published;

    Frame f;
    f.kind = FrameKind::Publish;
    f.hops = 1;
    f.topic = topic;
    f.msg_id = m.id;
    f.sender = self_;
    f.seq = m.seq;
    f.body = m.payload;

    // Fanout before the first heartbeat has built a mesh.
    std::vector<PeerId> targets(it->second.begin(), it->second.end());
    if (targets.empty()) {
        targets = sample(std::vector<PeerId>(known_.begin(), known_.end()), static_cast<std::size_t>(cfg_.d), rng_);
    }
    for (const PeerId& p : targets) send_locked(p, f);
    return m.id;
}

void GossipEngine::on_frame(const PeerId& from, std::string_view bytes) {
    Frame f;
    try {
        f = decode_frame(bytes);
    } catch (const WireError&) {
        std::lock_guard lk(mu_);
        ++stats_.malformed;
        return;
    }
    std::lock_guard lk(mu_);
    if (from != self_) known_.insert(from);
    const double now = clock_();
    expire_locked(now);
    const auto topic = mesh_.find(f.topic);
    if (topic == mesh_.end()) {
        ++stats_.unjoined;
        // Tell a grafting peer we are not subscribed so it stops trying.
        if (f.kind == FrameKind::Graft) send_locked(from, control_frame(FrameKind::Prune, f.topic));
        return;
    }

    switch (f.kind) {
        case FrameKind::Publish: {
            if (f.body.size() > cfg_.max_message_size) {
                ++stats_.malformed;
                return;
            }
            iwant_pending_.erase(f.msg_id);
            if (seen_.count(f.msg_id) != 0) {
                ++stats_.duplicates;
                return;
            }
            GossipMessage m;
            m.id = f.msg_id;
            m.topic = f.topic;
            m.payload = f.body;
            m.sender = f.sender;
            m.seq = f.seq;
            m.hops = f.hops;
            m.received_at = now;
            mark_seen_locked(m.id, now);
            cache_locked(m, now);
            {
                std::lock_guard ik(inbox_mu_);
                inbox_.push_back(m);
            }
            ++stats_.delivered;
            Frame fwd = std::move(f);
            fwd.hops = static_cast<std::uint8_t>(std::min(255, fwd.hops + 1));
            const std::vector<PeerId> mesh(topic->second.begin(), topic->second.end());
            for (const PeerId& p : mesh) {
                if (p == from || p == fwd.sender) continue;
                if (send_locked(p, fwd)) ++stats_.forwarded;
            }
            return;
        }
        case FrameKind::IHave: {
            std::vector<std::string> ids;
            try {
                ids = decode_id_list(f.body);
            } catch (const WireError&) {
                ++stats_.malformed;
                return;
            }
            std::vector<std::string> want;
            for (auto& id : ids) {
                if (seen_.count(id) != 0 || iwant_pending_.count(id) != 0) continue;
                iwant_pending_[id] = now + 3 * cfg_.heartbeat_interval;
                want.push_back(std::move(id));
            }
            if (!want.empty() && send_locked(from, control_frame(FrameKind::IWant, f.topic, encode_id_list(want)))) {
                ++stats_.iwant_sent;
            }
            return;
        }
        case FrameKind::IWant: {
            std::vector<std::string> ids;
            try {
                ids = decode_id_list(f.body);
            } catch (const WireError&) {
                ++stats_.malformed;
                return;
            }
            for (const auto& id : ids) {
                const auto it = mcache_.find(id);
                if (it == mcache_.end() || it->second.msg.topic != f.topic) continue;
                const GossipMessage& m = it->second.msg;
                Frame out;
                out.kind = FrameKind::Publish;
                out.hops = static_cast<std::uint8_t>(std::min(255, m.hops + 1));
                out.topic = m.topic;
                out.msg_id = m.id;
                out.sender = m.sender;
                out.seq = m.seq;
                out.body = m.payload;
                if (!send_locked(from, out)) break;
                ++stats_.iwant_served;
            }
            return;
        }
        case FrameKind::Graft:
            topic->second.insert(from);
            return;
        case FrameKind::Prune:
            topic->second.erase(from);
            return;
    }
}

std::vector<ControlMessage> GossipEngine::heartbeat() {
    std::lock_guard lk(mu_);
    expire_locked(clock_());
    std::vector<ControlMessage> out;
    if (!transport_->up()) {
        // Whatever mesh we had is stale by the time we come back.
        for (auto& [topic, mesh] : mesh_) mesh.clear();
        return out;
    }
    const auto d = static_cast<std::size_t>(cfg_.d);
    for (auto& [topic, mesh] : mesh_) {
        if (mesh.size() < d) {
            std::vector<PeerId> candidates;
            for (const PeerId& p : known_) {
                if (mesh.count(p) == 0) candidates.push_back(p);
            }
            for (const PeerId& p : sample(std::move(candidates), d - mesh.size(), rng_)) {
                if (send_locked(p, control_frame(FrameKind::Graft, topic))) {
                    mesh.insert(p);
                    out.push_back({ControlKind::Graft, p, topic, {}});
                }
            }
        } else if (mesh.size() > static_cast<std::size_t>(cfg_.d_high)) {
            const auto victims = sample(std::vector<PeerId>(mesh.begin(), mesh.end()), mesh.size() - d, rng_);
            for (const PeerId& p : victims) {
                mesh.erase(p);
                send_locked(p, control_frame(FrameKind::Prune, topic));
                out.push_back({ControlKind::Prune, p, topic, {}});
            }
        }

        std::vector<std::string> ids;
        for (const std::string& id : mcache_order_) {
            const auto it = mcache_.find(id);
            if (it == mcache_.end() || it->second.msg.topic != topic) continue;
            ids.push_back(id);
            if (ids.size() == cfg_.max_ihave_length) break;
        }
        if (ids.empty() || cfg_.gossip_factor == 0) continue;
        std::vector<PeerId> outside;
        for (const PeerId& p : known_) {
            if (mesh.count(p) == 0) outside.push_back(p);
        }
        const std::string body = encode_id_list(ids);
        for (const PeerId& p : sample(std::move(outside), static_cast<std::size_t>(cfg_.gossip_factor), rng_)) {
            if (send_locked(p, control_frame(FrameKind::IHave, topic, body))) {
                ++stats_.ihave_sent;
                out.push_back({ControlKind::IHave, p, topic, ids});
            }
        }
    }
    return out;
}

std::vector<GossipMessage> GossipEngine::drain() {
    std::lock_guard ik(inbox_mu_);
    std::vector<GossipMessage> out(std::make_move_iterator(inbox_.begin()), std::make_move_iterator(inbox_.end()));
    inbox_.clear();
    return out;
}

std::set<PeerId> GossipEngine::mesh(const std::string& topic) const {
    std::lock_guard lk(mu_);
    const auto it = mesh_.find(topic);
    return it == mesh_.end() ? std::set<PeerId>{} : it->second;
}

std::set<PeerId> GossipEngine::known() const {
    std::lock_guard lk(mu_);
    return known_;
}

bool GossipEngine::joined(const std::string& topic) const {
    std::lock_guard lk(mu_);
    return mesh_.count(topic) != 0;
}

bool GossipEngine::seen(const std::string& id) const {
    std::lock_guard lk(mu_);
    return seen_.count(id) != 0;
}

std::size_t GossipEngine::mcache_size() const {
    std::lock_guard lk(mu_);
    return mcache_.size();
}

GossipStats GossipEngine::stats() const {
    std::lock_guard lk(mu_);
    return stats_;
}

// --- Exchange --------------------------------------------------------------

GossipExchange::GossipExchange(std::shared_ptr<GossipEngine> engine, std::string topic, int core_size)
    : engine_(std::move(engine)), topic_(std::move(topic)), core_size_(core_size) {
    if (!engine_) throw PreconditionError("gossip exchange needs an engine");
    engine_->join(topic_);
}

void GossipExchange::publish(const drq::Champion& c) {
    try {
        engine_->publish(topic_, c.to_json(core_size_).dump());
    } catch (const TransportDown&) {
        ++publish_failures_;
    }
}

std::vector<drq::Champion> GossipExchange::drain() {
    std::vector<drq::Champion> out;
    for (const GossipMessage& m : engine_->drain()) {
        try {
            out.push_back(drq::Champion::from_json(nlohmann::json::parse(m.payload), core_size_));
        } catch (const nlohmann::json::exception&) {
            ++rejected_;
        } catch (const archive::FormatError&) {
            ++rejected_;
        }
    }
    return out;
}

}  // namespace dei::gossip
