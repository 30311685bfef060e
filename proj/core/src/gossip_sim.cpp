#include "dei/common.hpp"
#include "dei/gossip.hpp"

namespace dei::gossip {

// --- EventLoop -------------------------------------------------------------

void EventLoop::schedule(double at, std::function<void()> fn) {
    if (at < now_) at = now_;
    queue_.push(Event{at, next_order_++, std::move(fn)});
}

void EventLoop::every(double start, double interval, std::function<bool()> fn) {
    if (!(interval > 0.0)) throw PreconditionError("event interval must be > 0");
    auto shared = std::make_shared<std::function<bool()>>(std::move(fn));
    // The tick re-schedules itself through a weak handle to avoid a cycle.
    auto tick = std::make_shared<std::function<void()>>();
    std::weak_ptr<std::function<void()>> weak = tick;
    *tick = [this, shared, interval, weak] {
        if (!(*shared)()) return;
        if (auto t = weak.lock()) schedule_in(interval, [t] { (*t)(); });
    };
    schedule(start, [tick] { (*tick)(); });
}

bool EventLoop::run_one() {
    if (queue_.empty()) return false;
    Event e = queue_.top();
    queue_.pop();
    now_ = e.at;
    ++processed_;
    e.fn();
    return true;
}

void EventLoop::run_until(double t) {
    while (!queue_.empty() && queue_.top().at <= t) run_one();
    if (t > now_) now_ = t;
}

bool EventLoop::run_while_not(const std::function<bool()>& pred, double deadline) {
    while (!pred()) {
        if (queue_.empty() || queue_.top().at > deadline) return pred();
        run_one();
    }
    return true;
}

// --- SimNetwork ------------------------------------------------------------

class SimNetwork::Endpoint final : public Transport {
public:
    Endpoint(std::shared_ptr<SimNetwork> net, PeerId id) : net_(std::move(net)), id_(id) {}
    const PeerId& self() const override { return id_; }
    bool send(const PeerId& to, std::string bytes) override { return net_->send(id_, to, std::move(bytes)); }
    void set_handler(Handler h) override { handler_ = std::move(h); }
    bool up() const override { return net_->is_up(id_); }

    void deliver(const PeerId& from, std::string bytes) {
        if (handler_) handler_(from, std::move(bytes));
    }

private:
    std::shared_ptr<SimNetwork> net_;
    PeerId id_;
    Handler handler_;
};

SimNetwork::SimNetwork(EventLoop& loop, SimNetworkConfig cfg, std::uint64_t seed)
    : loop_(loop), cfg_(cfg), rng_(seed) {
    if (!(cfg_.latency_min >= 0.0 && cfg_.latency_max >= cfg_.latency_min)) {
        throw PreconditionError("sim latency range must satisfy 0 <= min <= max");
    }
    if (!(cfg_.drop_probability >= 0.0 && cfg_.drop_probability <= 1.0)) {
        throw PreconditionError("drop_probability must lie in [0, 1]");
    }
}

std::shared_ptr<Transport> SimNetwork::attach(const PeerId& id) {
    if (endpoints_.count(id) != 0 && !endpoints_[id].expired()) {
        throw PreconditionError("peer " + id.short_hex() + " already attached");
    }
    auto ep = std::make_shared<Endpoint>(shared_from_this(), id);
    endpoints_[id] = ep;
    up_[id] = true;
    return ep;
}

void SimNetwork::set_up(const PeerId& id, bool up) {
    up_.at(id) = up;
}

bool SimNetwork::is_up(const PeerId& id) const {
    const auto it = up_.find(id);
    return it != up_.end() && it->second;
}

bool SimNetwork::send(const PeerId& from, const PeerId& to, std::string bytes) {
    if (!is_up(from) || !is_up(to)) return false;
    ++frames_sent_;
    // Draw latency before the drop decision so drops do not shift later draws.
    const double latency = std::uniform_real_distribution<double>(cfg_.latency_min, cfg_.latency_max)(rng_);
    const bool dropped =
        cfg_.drop_probability > 0.0 && std::uniform_real_distribution<double>(0.0, 1.0)(rng_) < cfg_.drop_probability;
    if (dropped) {
        ++frames_dropped_;
        return true;
    }
    double& link = link_clock_[{from, to}];
    const double at = std::max(loop_.now() + latency, link);
    link = at;
    std::weak_ptr<Endpoint> dest = endpoints_.at(to);
    loop_.schedule(at, [self = shared_from_this(), dest, from, to, bytes = std::move(bytes)]() mutable {
        if (!self->is_up(to)) {
            ++self->frames_dropped_;
            return;
        }
        if (auto ep = dest.lock()) ep->deliver(from, std::move(bytes));
    });
    return true;
}

// --- MemoryHub -------------------------------------------------------------

class MemoryHub::Endpoint final : public Transport {
public:
    Endpoint(MemoryHub& hub, PeerId id) : hub_(hub), id_(id) {}
    const PeerId& self() const override { return id_; }
    bool send(const PeerId& to, std::string bytes) override { return hub_.send(id_, to, std::move(bytes)); }
    void set_handler(Handler h) override {
        std::lock_guard lk(mu_);
        handler_ = std::move(h);
    }
    bool up() const override { return true; }

    void deliver(const PeerId& from, std::string bytes) {
        Handler h;
        {
            std::lock_guard lk(mu_);
            h = handler_;
        }
        if (h) h(from, std::move(bytes));
    }

private:
    MemoryHub& hub_;
    PeerId id_;
    std::mutex mu_;
    Handler handler_;
};

std::shared_ptr<Transport> MemoryHub::attach(const PeerId& id) {
    std::lock_guard lk(mu_);
    auto ep = std::make_shared<Endpoint>(*this, id);
    endpoints_[id] = ep;
    return ep;
}

bool MemoryHub::send(const PeerId& from, const PeerId& to, std::string bytes) {
    std::shared_ptr<Endpoint> dest;
    {
        std::lock_guard lk(mu_);
        const auto it = endpoints_.find(to);
        if (it == endpoints_.end()) return false;
        dest = it->second.lock();
    }
    if (!dest) return false;
    dest->deliver(from, std::move(bytes));
    return true;
}

}  // namespace dei::gossip
