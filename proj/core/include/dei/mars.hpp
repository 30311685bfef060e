#pragma once

// Deterministic Core War simulator (ICWS-94 core set) plus the battle-level
// fitness and behavioral descriptors used by the search.

#include "dei/redcode.hpp"

#include <cstdint>
#include <functional>
#include <mutex>
#include <optional>
#include <span>
#include <stdexcept>
#include <unordered_map>
#include <vector>

namespace dei::mars {

using redcode::Warrior;

class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class PlacementError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct MarsConfig {
    int core_size = 8000;
    int max_cycles = 80000;
    int rounds_per_pair = 20;
    int min_separation = 100;
    // 0 means unlimited, which is capped at core_size queued processes.
    int process_limit = 0;
    std::size_t max_warrior_length = 100;
    std::uint64_t rng_seed = 0;

    void validate() const;
    int effective_process_limit() const noexcept;
    redcode::ParseOptions parse_options() const noexcept;

    bool operator==(const MarsConfig&) const = default;
};

struct TraceEvent {
    int cycle = 0;
    std::size_t warrior = 0;
    int pc = 0;
    redcode::Instruction instruction;
    bool process_died = false;
    bool warrior_died = false;
};
using TraceSink = std::function<void(const TraceEvent&)>;

class BattleOutcome {
public:
    BattleOutcome() = default;

    // Outcome with no memory-touch record; used for fitness oracles.
    static BattleOutcome from_lifespans(std::vector<int> lifespans, int max_cycles);

    std::size_t n_warriors() const noexcept { return lifespans_.size(); }
    int max_cycles() const noexcept { return max_cycles_; }
    // Timesteps actually simulated before the battle was decided.
    int cycles_run() const noexcept { return cycles_run_; }

    // Last timestep (1-based) at which warrior i was alive; 0 if it died in
    // the first cycle. Survivors report max_cycles.
    int lifespan(std::size_t i) const { return lifespans_.at(i); }
    bool alive(std::size_t i, int tau) const { return tau >= 1 && tau <= lifespans_.at(i); }
    std::vector<std::uint8_t> alive_mask(std::size_t i) const;

    // Core cells read, written or executed by warrior i.
    const std::vector<std::uint8_t>& touched(std::size_t i) const { return touched_.at(i); }
    std::size_t touched_count(std::size_t i) const { return touched_counts_.at(i); }
    double memory_coverage(std::size_t i) const;

    const std::vector<int>& placements() const noexcept { return placements_; }
    // Core contents when the battle stopped (empty for from_lifespans).
    const std::vector<redcode::Instruction>& final_core() const noexcept { return core_; }

private:
    friend class Simulator;

    int max_cycles_ = 0;
    int cycles_run_ = 0;
    int core_size_ = 0;
    std::vector<int> lifespans_;
    std::vector<std::vector<std::uint8_t>> touched_;
    std::vector<std::size_t> touched_counts_;
    std::vector<int> placements_;
    std::vector<redcode::Instruction> core_;
};

// Loads the warriors at random non-overlapping offsets and runs until at most
// one warrior is alive (none, for a single warrior) or max_cycles elapse.
BattleOutcome run_battle(std::span<const Warrior> warriors, const MarsConfig& cfg,
                         std::uint64_t seed, const TraceSink& trace = {});

// Survival share of warrior i:
//   sum over tau of (N / T) * A_i(tau) / sum_o A_o(tau)
// where the denominator runs over every participant, i included, and
// timesteps with no survivor contribute nothing. Range [0, N].
double fitness(std::size_t i, const BattleOutcome& outcome);

struct BehavioralCharacteristic {
    double tsp = 0.0;  // code length x mean lifespan
    double mc = 0.0;   // mean fraction of the core touched
    bool operator==(const BehavioralCharacteristic&) const = default;
};

// Aggregate of rounds_per_pair 1-v-1 battles of one warrior against one opponent.
struct PairingStats {
    int battles = 0;
    double fitness_sum = 0.0;
    double lifespan_sum = 0.0;
    double coverage_sum = 0.0;
    int wins = 0;
    int losses = 0;
    int ties = 0;
};

// Seed of the k-th battle against `opponent`; depends only on the opponent so
// every candidate faces identical placements.
std::uint64_t battle_seed(std::uint64_t seed, const Warrior& opponent, int k) noexcept;

PairingStats play_pairing(const Warrior& w, const Warrior& opponent, const MarsConfig& cfg,
                          std::uint64_t seed);

// Memo of pairing results for one MarsConfig, keyed by program hashes and seed.
class PairingCache {
public:
    explicit PairingCache(MarsConfig cfg) : cfg_(cfg) {}

    const MarsConfig& config() const noexcept { return cfg_; }
    PairingStats get_or_play(const Warrior& w, const Warrior& opponent, std::uint64_t seed);
    std::size_t size() const;
    std::size_t hits() const;
    std::size_t misses() const;

private:
    struct Key {
        std::uint64_t warrior;
        std::uint64_t opponent;
        std::uint64_t seed;
        bool operator==(const Key&) const = default;
    };
    struct KeyHash {
        std::size_t operator()(const Key& k) const noexcept;
    };

    MarsConfig cfg_;
    mutable std::mutex mutex_;
    std::unordered_map<Key, PairingStats, KeyHash> entries_;
    std::size_t hits_ = 0;
    std::size_t misses_ = 0;
};

struct Evaluation {
    double fitness = 0.0;
    BehavioralCharacteristic bc;
};

// rounds_per_pair battles against every opponent; fitness and BC are means
// over all battles.
Evaluation evaluate(const Warrior& w, std::span<const Warrior> opponents, const MarsConfig& cfg,
                    std::uint64_t seed, PairingCache* cache = nullptr);

// True iff w's wins are at least its losses over rounds_per_pair battles.
bool win_tie(const Warrior& w, const Warrior& h, const MarsConfig& cfg, std::uint64_t seed,
             PairingCache* cache = nullptr);

}  // namespace dei::mars
