#pragma once

// Per-node evolutionary loop: generate/mutate, evaluate against a frozen
// opponent pool, update the archive, then publish a champion and fold in the
// champions received from peers.

#include "dei/archive.hpp"
#include "dei/mars.hpp"
#include "dei/mutation.hpp"

#include <memory>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

namespace dei::drq {

using archive::Archive;
using mars::BehavioralCharacteristic;
using redcode::Warrior;

struct Champion {
    Warrior warrior;
    double fitness = 0.0;
    BehavioralCharacteristic bc;
    int round = 0;
    std::string node_id;
    std::uint64_t hash = 0;

    nlohmann::json to_json(int core_size = redcode::kDefaultCoreSize) const;
    // Throws archive::FormatError when the hash does not match the code.
    static Champion from_json(const nlohmann::json& j, int core_size = redcode::kDefaultCoreSize);
    bool operator==(const Champion&) const = default;
};

// Seeds, a window of the node's own recent champions, and everything received
// from peers. Members are unique by content hash.
class OpponentPool {
public:
    // window: how many own champions to keep; nullopt keeps all of them.
    explicit OpponentPool(std::vector<Warrior> seeds, std::optional<std::size_t> window = 5);

    // Own champions already present anywhere in the pool are not re-added.
    void add_own_champion(const Warrior& w);
    // False when the warrior is already in the pool.
    bool add_peer(const Warrior& w);

    bool contains(std::uint64_t hash) const { return hashes_.count(hash) != 0; }
    std::vector<Warrior> members() const;
    std::size_t size() const noexcept { return seeds_.size() + own_.size() + peers_.size(); }

    const std::vector<Warrior>& seeds() const noexcept { return seeds_; }
    const std::vector<Warrior>& own_champions() const noexcept { return own_; }
    const std::vector<Warrior>& peer_champions() const noexcept { return peers_; }

private:
    std::vector<Warrior> seeds_;
    std::vector<Warrior> own_;  // oldest first
    std::vector<Warrior> peers_;
    std::optional<std::size_t> window_;
    std::unordered_multiset<std::uint64_t> hashes_;
};

// Transport-facing side of a node. publish must not block on the network.
class ChampionExchange {
public:
    virtual ~ChampionExchange() = default;
    virtual void publish(const Champion& c) = 0;
    virtual std::vector<Champion> drain() = 0;
};

// Solo mode: nothing is sent, nothing arrives.
class NullExchange final : public ChampionExchange {
public:
    void publish(const Champion&) override {}
    std::vector<Champion> drain() override { return {}; }
};

struct NodeConfig {
    std::string node_id = "node-0";
    int rounds = 10;
    int iters_per_round = 250;
    double p_new = 0.1;
    std::optional<std::size_t> champion_window = 5;
    std::string topic = "dei/champions";
    std::uint64_t rng_seed = 0;
    mars::MarsConfig mars;
    int tsp_bins = archive::BcGrid::kDefaultBins;
    int mc_bins = archive::BcGrid::kDefaultBins;
    // Rules text handed to the operator in every prompt.
    std::string rules_digest;

    void validate() const;
};

struct IterationLog {
    int iter = 0;
    bool generated = false;
    bool failed = false;
    std::string error;
    std::string hash;
    double fitness = 0.0;
    BehavioralCharacteristic bc;
    bool accepted = false;
};

struct RoundReport {
    std::string node_id;
    int round = 0;
    std::string champion_hash;
    double champion_fitness = 0.0;
    BehavioralCharacteristic champion_bc;
    double coverage = 0.0;
    double qd_score = 0.0;
    std::optional<double> niche_novelty;
    int calls_used = 0;
    long calls_total = 0;
    int generated = 0;
    int failures = 0;
    std::size_t pool_size = 0;
    std::size_t received = 0;
    std::size_t seeded = 0;
    // Simulated or wall-clock seconds, filled in by whoever drives the node.
    double started_at = 0.0;
    double finished_at = 0.0;
    std::vector<IterationLog> iterations;

    nlohmann::json to_json(bool with_iterations = false) const;
};

// Argmax over elites re-scored against `pool` with one shared seed; ties go
// to the lowest cell index.
Champion select_champion(const Archive& a, std::span<const Warrior> pool,
                         const mars::MarsConfig& cfg, std::uint64_t seed,
                         mars::PairingCache* cache = nullptr, int round = 0,
                         const std::string& node_id = {});

class Node {
public:
    Node(NodeConfig cfg, std::shared_ptr<mutation::MutationOperator> op, std::vector<Warrior> seeds,
         std::shared_ptr<ChampionExchange> exchange = std::make_shared<NullExchange>());

    // Freezes the pool and snapshots the archive for the coming round.
    void begin_round();
    // One operator call. False once the round's budget is spent.
    bool step();
    bool round_done() const noexcept { return iter_ >= cfg_.iters_per_round; }
    // Champion selection, publish, drain and integration of peer champions.
    RoundReport end_round();

    RoundReport run_round();
    std::vector<RoundReport> run();

    int round() const noexcept { return round_; }
    bool finished() const noexcept { return round_ >= cfg_.rounds && !in_round_; }
    long calls_total() const noexcept { return calls_total_; }
    const NodeConfig& config() const noexcept { return cfg_; }
    const Archive& archive() const noexcept { return archive_; }
    const OpponentPool& pool() const noexcept { return pool_; }
    const std::optional<Champion>& last_champion() const noexcept { return last_champion_; }
    const mutation::MutationOperator& op() const noexcept { return *op_; }
    std::uint64_t eval_seed() const noexcept { return eval_seed_; }
    mars::PairingCache& cache() noexcept { return cache_; }

    // Best elite against the current pool, as Algorithm-style final output.
    Champion final_champion();

private:
    NodeConfig cfg_;
    std::shared_ptr<mutation::MutationOperator> op_;
    std::shared_ptr<ChampionExchange> exchange_;
    Archive archive_;
    OpponentPool pool_;
    mars::PairingCache cache_;
    std::uint64_t eval_seed_;

    int round_ = 0;
    int iter_ = 0;
    bool in_round_ = false;
    long calls_total_ = 0;
    std::vector<Warrior> frozen_pool_;
    Archive snapshot_;
    RoundReport current_;
    std::optional<Champion> last_champion_;
};

}  // namespace dei::drq
