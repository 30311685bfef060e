#include "dei/mars.hpp"

#include "dei/common.hpp"

#include <algorithm>
#include <array>
#include <random>
#include <string>

namespace dei::mars {

using redcode::Instruction;
using redcode::Mode;
using redcode::Modifier;
using redcode::Opcode;

namespace {

constexpr int kPlacementAttempts = 10000;

// FIFO of program counters with a fixed capacity.
class ProcessQueue {
public:
    void reset(std::size_t capacity) {
        buf_.assign(capacity, 0);
        head_ = 0;
        size_ = 0;
    }
    bool empty() const noexcept { return size_ == 0; }
    std::size_t size() const noexcept { return size_; }
    std::size_t capacity() const noexcept { return buf_.size(); }
    void push(int pc) noexcept {
        std::size_t tail = head_ + size_;
        if (tail >= buf_.size()) tail -= buf_.size();
        buf_[tail] = pc;
        ++size_;
    }
    int pop() noexcept {
        const int pc = buf_[head_];
        if (++head_ == buf_.size()) head_ = 0;
        --size_;
        return pc;
    }

private:
    std::vector<int> buf_;
    std::size_t head_ = 0;
    std::size_t size_ = 0;
};

bool is_a_field_mode(Mode m) noexcept {
    return m == Mode::AIndirect || m == Mode::APredec || m == Mode::APostinc;
}
bool is_predec(Mode m) noexcept { return m == Mode::BPredec || m == Mode::APredec; }
bool is_postinc(Mode m) noexcept { return m == Mode::BPostinc || m == Mode::APostinc; }

std::size_t required_gap(const Warrior& w, const MarsConfig& cfg) {
    return std::max<std::size_t>(w.length(), static_cast<std::size_t>(cfg.min_separation));
}

}  // namespace

void MarsConfig::validate() const {
    if (core_size < 2) throw ConfigError("core_size must be at least 2");
    if (max_cycles < 1) throw ConfigError("max_cycles must be positive");
    if (rounds_per_pair < 1) throw ConfigError("rounds_per_pair must be positive");
    if (max_warrior_length < 1) throw ConfigError("max_warrior_length must be positive");
    if (static_cast<std::size_t>(core_size) <= 2 * max_warrior_length) {
        throw ConfigError("core_size must exceed 2 x max_warrior_length");
    }
    if (min_separation < 0 || static_cast<std::size_t>(min_separation) < max_warrior_length) {
        throw ConfigError("min_separation must be at least max_warrior_length");
    }
    if (process_limit < 0) throw ConfigError("process_limit must be >= 0");
    if (process_limit > core_size) {
        throw ConfigError("process_limit above core_size (" + std::to_string(core_size) +
                          ") is not supported");
    }
}

int MarsConfig::effective_process_limit() const noexcept {
    return process_limit == 0 ? core_size : process_limit;
}

redcode::ParseOptions MarsConfig::parse_options() const noexcept {
    return redcode::ParseOptions{.core_size = core_size, .max_length = max_warrior_length};
}

// --- BattleOutcome ---------------------------------------------------------

BattleOutcome BattleOutcome::from_lifespans(std::vector<int> lifespans, int max_cycles) {
    if (max_cycles < 1) throw PreconditionError("max_cycles must be positive");
    for (int l : lifespans) {
        if (l < 0 || l > max_cycles) throw PreconditionError("lifespan outside [0, max_cycles]");
    }
    BattleOutcome o;
    o.max_cycles_ = max_cycles;
    o.cycles_run_ = lifespans.empty() ? 0 : *std::max_element(lifespans.begin(), lifespans.end());
    o.lifespans_ = std::move(lifespans);
    o.touched_.assign(o.lifespans_.size(), {});
    o.touched_counts_.assign(o.lifespans_.size(), 0);
    return o;
}

std::vector<std::uint8_t> BattleOutcome::alive_mask(std::size_t i) const {
    std::vector<std::uint8_t> mask(static_cast<std::size_t>(max_cycles_), 0);
    std::fill_n(mask.begin(), lifespans_.at(i), std::uint8_t{1});
    return mask;
}

double BattleOutcome::memory_coverage(std::size_t i) const {
    if (core_size_ == 0) return 0.0;
    return static_cast<double>(touched_counts_.at(i)) / static_cast<double>(core_size_);
}

// --- Simulator -------------------------------------------------------------

class Simulator {
public:
    Simulator(std::span<const Warrior* const> warriors, const MarsConfig& cfg, std::uint64_t seed,
              const TraceSink& trace)
        : warriors_(warriors), cfg_(cfg), rng_(seed), trace_(trace), cs_(cfg.core_size) {}

    BattleOutcome run() {
        const std::size_t n = warriors_.size();
        out_.max_cycles_ = cfg_.max_cycles;
        out_.core_size_ = cs_;
        out_.lifespans_.assign(n, cfg_.max_cycles);
        out_.touched_.assign(n, std::vector<std::uint8_t>(static_cast<std::size_t>(cs_), 0));
        out_.touched_counts_.assign(n, 0);
        mem_.assign(static_cast<std::size_t>(cs_), Instruction{});
        limit_ = static_cast<std::size_t>(cfg_.effective_process_limit());

        place();
        queues_.assign(n, {});
        for (std::size_t i = 0; i < n; ++i) {
            const Warrior& w = *warriors_[i];
            const int base = out_.placements_[i];
            for (std::size_t k = 0; k < w.length(); ++k) {
                Instruction in = w.instructions[k];
                in.a_value = redcode::normalize(in.a_value, cs_);
                in.b_value = redcode::normalize(in.b_value, cs_);
                mem_[static_cast<std::size_t>(add(base, static_cast<int>(k)))] = in;
            }
            queues_[i].reset(limit_);
            queues_[i].push(add(base, static_cast<int>(w.start_offset)));
        }

        const std::size_t first = n > 1 ? static_cast<std::size_t>(rng_() % n) : 0;
        const std::size_t stop_at = n >= 2 ? 1 : 0;
        std::size_t alive = n;
        std::vector<std::uint8_t> dead(n, 0);
        int cycle = 1;
        for (; cycle <= cfg_.max_cycles; ++cycle) {
            for (std::size_t k = 0; k < n; ++k) {
                const std::size_t w = (first + k) % n;
                if (dead[w]) continue;
                step(w, cycle);
                if (queues_[w].empty()) {
                    dead[w] = 1;
                    out_.lifespans_[w] = cycle - 1;
                    --alive;
                }
            }
            if (alive <= stop_at) break;
        }
        out_.cycles_run_ = std::min(cycle, cfg_.max_cycles);
        out_.core_ = std::move(mem_);
        return std::move(out_);
    }

private:
    int add(int a, int b) const noexcept {
        int s = a + b;
        if (s >= cs_) s -= cs_;
        return s;
    }
    std::int32_t inc(std::int32_t v) const noexcept { return v + 1 == cs_ ? 0 : v + 1; }
    std::int32_t dec(std::int32_t v) const noexcept { return v == 0 ? cs_ - 1 : v - 1; }

    void touch(std::size_t w, int addr) noexcept {
        std::uint8_t& bit = out_.touched_[w][static_cast<std::size_t>(addr)];
        if (bit == 0) {
            bit = 1;
            ++out_.touched_counts_[w];
        }
    }

    void place() {
        const std::size_t n = warriors_.size();
        out_.placements_.assign(n, 0);
        std::size_t total = 0;
        for (const Warrior* w : warriors_) total += required_gap(*w, cfg_);
        if (total > static_cast<std::size_t>(cs_)) {
            throw PlacementError("warriors plus separations do not fit in the core");
        }
        std::uniform_int_distribution<int> any(0, cs_ - 1);
        out_.placements_[0] = any(rng_);
        if (n == 1) return;
        if (n == 2) {
            const int lo = static_cast<int>(required_gap(*warriors_[0], cfg_));
            const int hi = cs_ - static_cast<int>(required_gap(*warriors_[1], cfg_));
            out_.placements_[1] = add(out_.placements_[0], std::uniform_int_distribution<int>(lo, hi)(rng_));
            return;
        }
        for (int attempt = 0; attempt < kPlacementAttempts; ++attempt) {
            for (std::size_t i = 1; i < n; ++i) out_.placements_[i] = any(rng_);
            if (placement_ok()) return;
        }
        throw PlacementError("no valid placement found after " +
                             std::to_string(kPlacementAttempts) + " attempts");
    }

    bool placement_ok() const {
        const std::size_t n = warriors_.size();
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = i + 1; j < n; ++j) {
                const int d = ((out_.placements_[j] - out_.placements_[i]) % cs_ + cs_) % cs_;
                if (static_cast<std::size_t>(d) < required_gap(*warriors_[i], cfg_)) return false;
                if (static_cast<std::size_t>(cs_ - d) < required_gap(*warriors_[j], cfg_)) return false;
            }
        }
        return true;
    }

    struct Operand {
        int ptr = 0;
        std::int32_t* post = nullptr;
    };

    Operand resolve(std::size_t w, int pc, Mode mode, std::int32_t value) {
        if (mode == Mode::Immediate) return {pc, nullptr};
        const int addr = add(pc, value);
        if (mode == Mode::Direct) return {addr, nullptr};
        touch(w, addr);
        Instruction& cell = mem_[static_cast<std::size_t>(addr)];
        std::int32_t* field = is_a_field_mode(mode) ? &cell.a_value : &cell.b_value;
        if (is_predec(mode)) *field = dec(*field);
        return {add(addr, *field), is_postinc(mode) ? field : nullptr};
    }

    std::int32_t arith(Opcode op, std::int32_t dst, std::int32_t src, bool& ok) const noexcept {
        switch (op) {
            case Opcode::ADD: return add(dst, src);
            case Opcode::SUB: return dst >= src ? dst - src : dst - src + cs_;
            case Opcode::MUL:
                return static_cast<std::int32_t>((static_cast<std::int64_t>(dst) * src) % cs_);
            case Opcode::DIV:
                if (src == 0) { ok = false; return dst; }
                return dst / src;
            case Opcode::MOD:
                if (src == 0) { ok = false; return dst; }
                return dst % src;
            default: return dst;
        }
    }

    void step(std::size_t w, int cycle) {
        ProcessQueue& q = queues_[w];
        const int pc = q.pop();
        touch(w, pc);
        const Instruction ir = mem_[static_cast<std::size_t>(pc)];

        const Operand a = resolve(w, pc, ir.a_mode, ir.a_value);
        const Instruction src = mem_[static_cast<std::size_t>(a.ptr)];
        touch(w, a.ptr);
        if (a.post != nullptr) *a.post = inc(*a.post);

        const Operand b = resolve(w, pc, ir.b_mode, ir.b_value);
        const Instruction dst_snap = mem_[static_cast<std::size_t>(b.ptr)];
        touch(w, b.ptr);
        if (b.post != nullptr) *b.post = inc(*b.post);

        Instruction& dst = mem_[static_cast<std::size_t>(b.ptr)];
        const int next = add(pc, 1);
        bool survives = true;

        switch (ir.opcode) {
            case Opcode::DAT:
                survives = false;
                break;
            case Opcode::MOV:
                switch (ir.modifier) {
                    case Modifier::A: dst.a_value = src.a_value; break;
                    case Modifier::B: dst.b_value = src.b_value; break;
                    case Modifier::AB: dst.b_value = src.a_value; break;
                    case Modifier::BA: dst.a_value = src.b_value; break;
                    case Modifier::F: dst.a_value = src.a_value; dst.b_value = src.b_value; break;
                    case Modifier::X: dst.b_value = src.a_value; dst.a_value = src.b_value; break;
                    case Modifier::I: dst = src; break;
                }
                q.push(next);
                break;
            case Opcode::ADD:
            case Opcode::SUB:
            case Opcode::MUL:
            case Opcode::DIV:
            case Opcode::MOD: {
                bool ok = true;
                const Opcode op = ir.opcode;
                switch (ir.modifier) {
                    case Modifier::A: {
                        const auto v = arith(op, dst_snap.a_value, src.a_value, ok);
                        if (ok) dst.a_value = v;
                        break;
                    }
                    case Modifier::B: {
                        const auto v = arith(op, dst_snap.b_value, src.b_value, ok);
                        if (ok) dst.b_value = v;
                        break;
                    }
                    case Modifier::AB: {
                        const auto v = arith(op, dst_snap.b_value, src.a_value, ok);
                        if (ok) dst.b_value = v;
                        break;
                    }
                    case Modifier::BA: {
                        const auto v = arith(op, dst_snap.a_value, src.b_value, ok);
                        if (ok) dst.a_value = v;
                        break;
                    }
                    case Modifier::F:
                    case Modifier::I: {
                        bool ok_a = true;
                        bool ok_b = true;
                        const auto va = arith(op, dst_snap.a_value, src.a_value, ok_a);
                        const auto vb = arith(op, dst_snap.b_value, src.b_value, ok_b);
                        if (ok_a) dst.a_value = va;
                        if (ok_b) dst.b_value = vb;
                        ok = ok_a && ok_b;
                        break;
                    }
                    case Modifier::X: {
                        bool ok_a = true;
                        bool ok_b = true;
                        const auto vb = arith(op, dst_snap.b_value, src.a_value, ok_b);
                        const auto va = arith(op, dst_snap.a_value, src.b_value, ok_a);
                        if (ok_a) dst.a_value = va;
                        if (ok_b) dst.b_value = vb;
                        ok = ok_a && ok_b;
                        break;
                    }
                }
                if (ok) {
                    q.push(next);
                } else {
                    survives = false;
                }
                break;
            }
            case Opcode::JMP:
                q.push(a.ptr);
                break;
            case Opcode::JMZ:
            case Opcode::JMN: {
                bool zero = false;
                switch (ir.modifier) {
                    case Modifier::A:
                    case Modifier::BA: zero = dst_snap.a_value == 0; break;
                    case Modifier::B:
                    case Modifier::AB: zero = dst_snap.b_value == 0; break;
                    default: zero = dst_snap.a_value == 0 && dst_snap.b_value == 0; break;
                }
                const bool jump = ir.opcode == Opcode::JMZ ? zero : !zero;
                q.push(jump ? a.ptr : next);
                break;
            }
            case Opcode::DJN: {
                bool nonzero = false;
                switch (ir.modifier) {
                    case Modifier::A:
                    case Modifier::BA:
                        dst.a_value = dec(dst.a_value);
                        nonzero = dec(dst_snap.a_value) != 0;
                        break;
                    case Modifier::B:
                    case Modifier::AB:
                        dst.b_value = dec(dst.b_value);
                        nonzero = dec(dst_snap.b_value) != 0;
                        break;
                    default:
                        dst.a_value = dec(dst.a_value);
                        dst.b_value = dec(dst.b_value);
                        nonzero = dec(dst_snap.a_value) != 0 || dec(dst_snap.b_value) != 0;
                        break;
                }
                q.push(nonzero ? a.ptr : next);
                break;
            }
            case Opcode::SEQ:
            case Opcode::SNE: {
                bool equal = false;
                switch (ir.modifier) {
                    case Modifier::A: equal = src.a_value == dst_snap.a_value; break;
                    case Modifier::B: equal = src.b_value == dst_snap.b_value; break;
                    case Modifier::AB: equal = src.a_value == dst_snap.b_value; break;
                    case Modifier::BA: equal = src.b_value == dst_snap.a_value; break;
                    case Modifier::F:
                        equal = src.a_value == dst_snap.a_value && src.b_value == dst_snap.b_value;
                        break;
                    case Modifier::X:
                        equal = src.a_value == dst_snap.b_value && src.b_value == dst_snap.a_value;
                        break;
                    case Modifier::I: equal = src == dst_snap; break;
                }
                const bool skip = ir.opcode == Opcode::SEQ ? equal : !equal;
                q.push(skip ? add(pc, 2) : next);
                break;
            }
            case Opcode::SLT: {
                bool less = false;
                switch (ir.modifier) {
                    case Modifier::A: less = src.a_value < dst_snap.a_value; break;
                    case Modifier::B: less = src.b_value < dst_snap.b_value; break;
                    case Modifier::AB: less = src.a_value < dst_snap.b_value; break;
                    case Modifier::BA: less = src.b_value < dst_snap.a_value; break;
                    case Modifier::F:
                    case Modifier::I:
                        less = src.a_value < dst_snap.a_value && src.b_value < dst_snap.b_value;
                        break;
                    case Modifier::X:
                        less = src.a_value < dst_snap.b_value && src.b_value < dst_snap.a_value;
                        break;
                }
                q.push(less ? add(pc, 2) : next);
                break;
            }
            case Opcode::SPL:
                q.push(next);
                if (q.size() < limit_) q.push(a.ptr);
                break;
            case Opcode::NOP:
                q.push(next);
                break;
        }

        if (trace_) {
            TraceEvent ev;
            ev.cycle = cycle;
            ev.warrior = w;
            ev.pc = pc;
            ev.instruction = ir;
            ev.process_died = !survives;
            ev.warrior_died = q.empty();
            trace_(ev);
        }
    }

    std::span<const Warrior* const> warriors_;
    const MarsConfig& cfg_;
    std::mt19937_64 rng_;
    const TraceSink& trace_;
    int cs_;
    std::size_t limit_ = 0;
    std::vector<Instruction> mem_;
    std::vector<ProcessQueue> queues_;
    BattleOutcome out_;
};

namespace {

BattleOutcome run_pointers(std::span<const Warrior* const> warriors, const MarsConfig& cfg,
                           std::uint64_t seed, const TraceSink& trace) {
    cfg.validate();
    if (warriors.empty()) throw PreconditionError("run_battle needs at least one warrior");
    for (const Warrior* w : warriors) {
        if (w->length() < 1 || w->length() > cfg.max_warrior_length) {
            throw ConfigError("warrior '" + w->name + "' has length " + std::to_string(w->length()) +
                              ", allowed 1.." + std::to_string(cfg.max_warrior_length));
        }
        if (w->start_offset >= w->length()) {
            throw ConfigError("warrior '" + w->name + "' start offset out of range");
        }
    }
    return Simulator(warriors, cfg, seed, trace).run();
}

}  // namespace

BattleOutcome run_battle(std::span<const Warrior> warriors, const MarsConfig& cfg,
                         std::uint64_t seed, const TraceSink& trace) {
    std::vector<const Warrior*> ptrs;
    ptrs.reserve(warriors.size());
    for (const Warrior& w : warriors) ptrs.push_back(&w);
    return run_pointers(ptrs, cfg, seed, trace);
}

double fitness(std::size_t i, const BattleOutcome& outcome) {
    const std::size_t n = outcome.n_warriors();
    if (i >= n) throw PreconditionError("warrior index out of range");
    const int own = outcome.lifespan(i);
    if (own == 0) return 0.0;

    std::vector<int> ends;
    ends.reserve(n);
    for (std::size_t j = 0; j < n; ++j) ends.push_back(outcome.lifespan(j));
    std::sort(ends.begin(), ends.end());
    ends.erase(std::unique(ends.begin(), ends.end()), ends.end());

    // Alive counts are constant on (prev, e] between consecutive distinct lifespans.
    const double big_t = static_cast<double>(outcome.max_cycles());
    double total = 0.0;
    int prev = 0;
    for (int e : ends) {
        if (prev >= own) break;
        const int seg_end = std::min(e, own);
        if (seg_end > prev) {
            std::size_t alive = 0;
            for (std::size_t j = 0; j < n; ++j) alive += outcome.lifespan(j) >= e ? 1 : 0;
            total += static_cast<double>(n) * static_cast<double>(seg_end - prev) /
                     (big_t * static_cast<double>(alive));
        }
        prev = seg_end;
    }
    return total;
}

// --- Pairings and evaluation -----------------------------------------------

std::uint64_t battle_seed(std::uint64_t seed, const Warrior& opponent, int k) noexcept {
    return derive_seed(seed, redcode::content_hash(opponent), static_cast<std::uint64_t>(k));
}

PairingStats play_pairing(const Warrior& w, const Warrior& opponent, const MarsConfig& cfg,
                          std::uint64_t seed) {
    PairingStats s;
    const std::array<const Warrior*, 2> pair{&w, &opponent};
    for (int k = 0; k < cfg.rounds_per_pair; ++k) {
        const BattleOutcome o = run_pointers(pair, cfg, battle_seed(seed, opponent, k), {});
        ++s.battles;
        s.fitness_sum += fitness(0, o);
        s.lifespan_sum += o.lifespan(0);
        s.coverage_sum += o.memory_coverage(0);
        const bool w_alive = o.lifespan(0) == cfg.max_cycles;
        const bool h_alive = o.lifespan(1) == cfg.max_cycles;
        if (w_alive && !h_alive) {
            ++s.wins;
        } else if (h_alive && !w_alive) {
            ++s.losses;
        } else {
            ++s.ties;
        }
    }
    return s;
}

std::size_t PairingCache::KeyHash::operator()(const Key& k) const noexcept {
    return static_cast<std::size_t>(derive_seed(k.warrior, k.opponent, k.seed));
}

PairingStats PairingCache::get_or_play(const Warrior& w, const Warrior& opponent,
                                       std::uint64_t seed) {
    const Key key{redcode::content_hash(w), redcode::content_hash(opponent), seed};
    {
        std::lock_guard lock(mutex_);
        if (auto it = entries_.find(key); it != entries_.end()) {
            ++hits_;
            return it->second;
        }
        ++misses_;
    }
    PairingStats s = play_pairing(w, opponent, cfg_, seed);
    std::lock_guard lock(mutex_);
    entries_.emplace(key, s);
    return s;
}

std::size_t PairingCache::size() const {
    std::lock_guard lock(mutex_);
    return entries_.size();
}
std::size_t PairingCache::hits() const {
    std::lock_guard lock(mutex_);
    return hits_;
}
std::size_t PairingCache::misses() const {
    std::lock_guard lock(mutex_);
    return misses_;
}

namespace {

PairingStats pairing(const Warrior& w, const Warrior& h, const MarsConfig& cfg, std::uint64_t seed,
                     PairingCache* cache) {
    if (cache == nullptr) return play_pairing(w, h, cfg, seed);
    if (cache->config() != cfg) throw PreconditionError("pairing cache built for another MarsConfig");
    return cache->get_or_play(w, h, seed);
}

}  // namespace

Evaluation evaluate(const Warrior& w, std::span<const Warrior> opponents, const MarsConfig& cfg,
                    std::uint64_t seed, PairingCache* cache) {
    if (opponents.empty()) throw PreconditionError("evaluate needs a non-empty opponent pool");
    cfg.validate();
    double fit = 0.0;
    double life = 0.0;
    double cov = 0.0;
    int battles = 0;
    for (const Warrior& h : opponents) {
        const PairingStats s = pairing(w, h, cfg, seed, cache);
        fit += s.fitness_sum;
        life += s.lifespan_sum;
        cov += s.coverage_sum;
        battles += s.battles;
    }
    Evaluation e;
    e.fitness = fit / battles;
    e.bc.tsp = static_cast<double>(w.length()) * (life / battles);
    e.bc.mc = cov / battles;
    return e;
}

bool win_tie(const Warrior& w, const Warrior& h, const MarsConfig& cfg, std::uint64_t seed,
             PairingCache* cache) {
    const PairingStats s = pairing(w, h, cfg, seed, cache);
    return s.wins >= s.losses;
}

}  // namespace dei::mars
