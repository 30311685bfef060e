#include "dei/drq.hpp"

#include "dei/common.hpp"

#include <cstdio>
#include <random>

namespace dei::drq {

namespace {

constexpr std::uint64_t kSaltChoice = 0x63686f696365ull;
constexpr std::uint64_t kSaltParent = 0x706172656e74ull;
constexpr std::uint64_t kSaltOperator = 0x6f70657261746full;
constexpr std::uint64_t kSaltEval = 0x6576616cull;

std::uint64_t call_seed(std::uint64_t base, std::uint64_t salt, int round, int iter) {
    return derive_seed(derive_seed(base, salt), static_cast<std::uint64_t>(round),
                       static_cast<std::uint64_t>(iter));
}

double unit(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

std::string archive_summary(const Archive& a) {
    char buf[128];
    double best = 0.0;
    for (const auto* e : a.elites()) best = std::max(best, e->fitness);
    std::snprintf(buf, sizeof buf, "%zu elites, coverage %.1f%%, best fitness %.3f", a.size(),
                  100.0 * a.coverage(), best);
    return buf;
}

nlohmann::json bc_json(const BehavioralCharacteristic& bc) {
    return {{"tsp", bc.tsp}, {"mc", bc.mc}};
}

}  // namespace

// --- Champion --------------------------------------------------------------

nlohmann::json Champion::to_json(int core_size) const {
    return {{"node_id", node_id},
            {"round", round},
            {"fitness", fitness},
            {"bc", bc_json(bc)},
            {"hash", to_hex(hash)},
            {"warrior", archive::warrior_to_json(warrior, core_size)}};
}

Champion Champion::from_json(const nlohmann::json& j, int core_size) {
    Champion c;
    try {
        c.node_id = j.at("node_id").get<std::string>();
        c.round = j.at("round").get<int>();
        c.fitness = j.at("fitness").get<double>();
        c.bc.tsp = j.at("bc").at("tsp").get<double>();
        c.bc.mc = j.at("bc").at("mc").get<double>();
        c.warrior = archive::warrior_from_json(j.at("warrior"), core_size);
    } catch (const nlohmann::json::exception& e) {
        throw archive::FormatError(std::string("bad champion: ") + e.what());
    } catch (const redcode::SyntaxError& e) {
        throw archive::FormatError(std::string("bad champion code: ") + e.what());
    }
    c.hash = redcode::content_hash(c.warrior);
    if (j.value("hash", "") != to_hex(c.hash)) throw archive::FormatError("champion hash mismatch");
    return c;
}

// --- OpponentPool ----------------------------------------------------------

OpponentPool::OpponentPool(std::vector<Warrior> seeds, std::optional<std::size_t> window)
    : window_(window) {
    if (window_ && *window_ == 0) throw PreconditionError("champion window must be >= 1");
    for (Warrior& w : seeds) {
        const auto h = redcode::content_hash(w);
        if (contains(h)) continue;
        hashes_.insert(h);
        seeds_.push_back(std::move(w));
    }
    if (seeds_.empty()) throw PreconditionError("opponent pool needs at least one seed warrior");
}

void OpponentPool::add_own_champion(const Warrior& w) {
    const auto h = redcode::content_hash(w);
    if (contains(h)) return;
    own_.push_back(w);
    hashes_.insert(h);
    if (window_ && own_.size() > *window_) {
        hashes_.erase(hashes_.find(redcode::content_hash(own_.front())));
        own_.erase(own_.begin());
    }
}

bool OpponentPool::add_peer(const Warrior& w) {
    const auto h = redcode::content_hash(w);
    if (contains(h)) return false;
    peers_.push_back(w);
    hashes_.insert(h);
    return true;
}

std::vector<Warrior> OpponentPool::members() const {
    std::vector<Warrior> out;
    out.reserve(size());
    out.insert(out.end(), seeds_.begin(), seeds_.end());
    out.insert(out.end(), own_.begin(), own_.end());
    out.insert(out.end(), peers_.begin(), peers_.end());
    return out;
}

// --- Config and reports ----------------------------------------------------

void NodeConfig::validate() const {
    if (rounds < 1) throw PreconditionError("rounds must be >= 1");
    if (iters_per_round < 1) throw PreconditionError("iters_per_round must be >= 1");
    if (!(p_new >= 0.0 && p_new <= 1.0)) throw PreconditionError("p_new must lie in [0, 1]");
    if (champion_window && *champion_window == 0) throw PreconditionError("champion_window must be >= 1");
    mars.validate();
}

nlohmann::json RoundReport::to_json(bool with_iterations) const {
    nlohmann::json j{{"node", node_id},
                     {"round", round},
                     {"champion_hash", champion_hash},
                     {"champion_fitness", champion_fitness},
                     {"champion_bc", bc_json(champion_bc)},
                     {"coverage", coverage},
                     {"qd_score", qd_score},
                     {"niche_novelty", niche_novelty ? nlohmann::json(*niche_novelty) : nlohmann::json()},
                     {"calls_used", calls_used},
                     {"calls_total", calls_total},
                     {"generated", generated},
                     {"failures", failures},
                     {"pool_size", pool_size},
                     {"received", received},
                     {"seeded", seeded},
                     {"started_at", started_at},
                     {"finished_at", finished_at}};
    if (with_iterations) {
        nlohmann::json its = nlohmann::json::array();
        for (const IterationLog& it : iterations) {
            nlohmann::json e{{"iter", it.iter}, {"generated", it.generated}, {"failed", it.failed}};
            if (it.failed) {
                e["error"] = it.error;
            } else {
                e["hash"] = it.hash;
                e["fitness"] = it.fitness;
                e["bc"] = bc_json(it.bc);
                e["accepted"] = it.accepted;
            }
            its.push_back(std::move(e));
        }
        j["iterations"] = std::move(its);
    }
    return j;
}

// --- Champion selection ----------------------------------------------------

Champion select_champion(const Archive& a, std::span<const Warrior> pool,
                         const mars::MarsConfig& cfg, std::uint64_t seed,
                         mars::PairingCache* cache, int round, const std::string& node_id) {
    if (a.empty()) throw archive::EmptyArchive("no elite to select a champion from");
    const archive::Elite* best = nullptr;
    double best_f = -1.0;
    for (const archive::Elite* e : a.elites()) {
        const double f = mars::evaluate(e->warrior, pool, cfg, seed, cache).fitness;
        if (f > best_f) {
            best = e;
            best_f = f;
        }
    }
    Champion c;
    c.warrior = best->warrior;
    c.fitness = best_f;
    c.bc = best->bc;
    c.round = round;
    c.node_id = node_id;
    c.hash = redcode::content_hash(best->warrior);
    return c;
}

// --- Node ------------------------------------------------------------------

Node::Node(NodeConfig cfg, std::shared_ptr<mutation::MutationOperator> op, std::vector<Warrior> seeds,
           std::shared_ptr<ChampionExchange> exchange)
    : cfg_(std::move(cfg)),
      op_(std::move(op)),
      exchange_(std::move(exchange)),
      archive_(archive::BcGrid(cfg_.tsp_bins, cfg_.mc_bins,
                               static_cast<double>(cfg_.mars.max_warrior_length) * cfg_.mars.max_cycles)),
      pool_(std::move(seeds), cfg_.champion_window),
      cache_(cfg_.mars),
      eval_seed_(derive_seed(cfg_.rng_seed, kSaltEval)),
      snapshot_(archive_.grid()) {
    cfg_.validate();
    if (!op_) throw PreconditionError("node needs a mutation operator");
    if (!exchange_) throw PreconditionError("node needs a champion exchange");
}

void Node::begin_round() {
    if (in_round_) throw PreconditionError("round already in progress");
    if (round_ >= cfg_.rounds) throw PreconditionError("all rounds already run");
    ++round_;
    iter_ = 0;
    in_round_ = true;
    frozen_pool_ = pool_.members();
    snapshot_ = archive_;
    current_ = RoundReport{};
    current_.node_id = cfg_.node_id;
    current_.round = round_;
}

bool Node::step() {
    if (!in_round_) throw PreconditionError("step outside a round");
    if (round_done()) return false;
    const int iter = iter_++;
    ++calls_total_;
    ++current_.calls_used;

    IterationLog log;
    log.iter = iter;
    const bool fresh = archive_.empty() ||
                       unit(call_seed(cfg_.rng_seed, kSaltChoice, round_, iter)) < cfg_.p_new;
    log.generated = fresh;
    if (fresh) ++current_.generated;
    const std::uint64_t op_seed = call_seed(cfg_.rng_seed, kSaltOperator, round_, iter);
    try {
        Warrior w;
        if (fresh) {
            w = op_->generate(mutation::PromptContext::fresh(cfg_.rules_digest, archive_summary(archive_)),
                              op_seed);
        } else {
            const archive::Elite& parent =
                archive_.sample_uniform(call_seed(cfg_.rng_seed, kSaltParent, round_, iter));
            w = op_->mutate(mutation::PromptContext::mutate(parent.warrior, parent.fitness, parent.bc,
                                                            cfg_.rules_digest),
                            op_seed);
        }
        const mars::Evaluation ev = mars::evaluate(w, frozen_pool_, cfg_.mars, eval_seed_, &cache_);
        log.hash = redcode::content_hash_hex(w);
        log.fitness = ev.fitness;
        log.bc = ev.bc;
        log.accepted = archive_.update(w, ev.fitness, ev.bc, round_,
                                       op_->identity().tag() + "@" + cfg_.node_id);
    } catch (const mutation::OperatorFailure& e) {
        log.failed = true;
        log.error = e.what();
    } catch (const mars::ConfigError& e) {
        log.failed = true;
        log.error = e.what();
    }
    if (log.failed) ++current_.failures;
    current_.iterations.push_back(std::move(log));
    return !round_done();
}

RoundReport Node::end_round() {
    if (!in_round_) throw PreconditionError("end_round outside a round");
    while (step()) {
    }
    in_round_ = false;

    if (!archive_.empty()) {
        Champion champ = select_champion(archive_, frozen_pool_, cfg_.mars, eval_seed_, &cache_,
                                         round_, cfg_.node_id);
        pool_.add_own_champion(champ.warrior);
        exchange_->publish(champ);
        current_.champion_hash = to_hex(champ.hash);
        current_.champion_fitness = champ.fitness;
        current_.champion_bc = champ.bc;
        last_champion_ = std::move(champ);
    }

    std::vector<archive::Elite> arrivals;
    std::unordered_set<std::uint64_t> seen;
    for (Champion& c : exchange_->drain()) {
        c.hash = redcode::content_hash(c.warrior);
        if (pool_.contains(c.hash) || !seen.insert(c.hash).second) continue;
        if (c.warrior.length() > cfg_.mars.max_warrior_length) continue;
        const mars::Evaluation ev = mars::evaluate(c.warrior, frozen_pool_, cfg_.mars, eval_seed_, &cache_);
        archive::Elite e;
        e.warrior = c.warrior;
        e.fitness = ev.fitness;
        e.bc = ev.bc;
        e.cell = archive_.grid().bin(ev.bc);
        e.round = round_;
        e.origin = "peer:" + c.node_id + "/r" + std::to_string(c.round);
        arrivals.push_back(std::move(e));
        pool_.add_peer(c.warrior);
    }
    current_.received = arrivals.size();
    current_.niche_novelty = archive::niche_novelty(arrivals, snapshot_);
    current_.seeded = archive_.seed(arrivals);

    current_.coverage = archive_.coverage();
    current_.qd_score = archive_.qd_score();
    current_.calls_total = calls_total_;
    current_.pool_size = pool_.size();
    return current_;
}

RoundReport Node::run_round() {
    begin_round();
    return end_round();
}

std::vector<RoundReport> Node::run() {
    std::vector<RoundReport> out;
    while (round_ < cfg_.rounds) out.push_back(run_round());
    return out;
}

Champion Node::final_champion() {
    const std::vector<Warrior> members = pool_.members();
    return select_champion(archive_, members, cfg_.mars, eval_seed_, &cache_, round_, cfg_.node_id);
}

}  // namespace dei::drq
