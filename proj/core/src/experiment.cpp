#include "dei/experiment.hpp"

#include "dei/common.hpp"
#include "dei/gossip_net.hpp"

#include <algorithm>
#include <condition_variable>
#include <set>
#include <thread>

namespace dei::experiment {

namespace {

constexpr std::uint64_t kSaltNode = 0x6e6f6465ull;
constexpr std::uint64_t kSaltPeer = 0x70656572ull;
constexpr std::uint64_t kSaltNet = 0x6e6574ull;
constexpr std::uint64_t kSaltGossip = 0x676f73ull;
constexpr std::uint64_t kSaltHeartbeat = 0x6862ull;
constexpr std::uint64_t kSaltGenerality = 0x67656eull;
constexpr std::uint64_t kSaltRescore = 0x726573ull;

template <typename T>
T get_or(const nlohmann::json& j, const char* key, T fallback) {
    return j.contains(key) && !j.at(key).is_null() ? j.at(key).get<T>() : fallback;
}

std::string node_dir_name(const std::string& id) {
    return "node-" + id;
}

}  // namespace

// --- Conditions and config -------------------------------------------------

std::string_view to_string(Condition c) {
    switch (c) {
        case Condition::Solo: return "solo";
        case Condition::Homogeneous: return "homogeneous";
        case Condition::Diverse: return "diverse";
    }
    return "?";
}

Condition condition_from_string(std::string_view s) {
    if (s == "solo") return Condition::Solo;
    if (s == "homogeneous") return Condition::Homogeneous;
    if (s == "diverse") return Condition::Diverse;
    throw PreconditionError("unknown condition '" + std::string(s) + "' (solo, homogeneous, diverse)");
}

nlohmann::json mars_to_json(const mars::MarsConfig& m) {
    return {{"core_size", m.core_size},
            {"max_cycles", m.max_cycles},
            {"rounds_per_pair", m.rounds_per_pair},
            {"min_separation", m.min_separation},
            {"process_limit", m.process_limit},
            {"max_warrior_length", m.max_warrior_length}};
}

mars::MarsConfig mars_from_json(const nlohmann::json& j) {
    mars::MarsConfig m;
    m.core_size = j.value("core_size", m.core_size);
    m.max_cycles = j.value("max_cycles", m.max_cycles);
    m.rounds_per_pair = j.value("rounds_per_pair", m.rounds_per_pair);
    m.min_separation = j.value("min_separation", m.min_separation);
    m.process_limit = j.value("process_limit", m.process_limit);
    m.max_warrior_length = j.value("max_warrior_length", m.max_warrior_length);
    m.validate();
    return m;
}

int ExperimentConfig::resolved_iters() const {
    if (iters_per_round) return *iters_per_round;
    if (!total_budget) throw PreconditionError("set iters_per_round or total_budget");
    const long denom = static_cast<long>(rounds) * static_cast<long>(std::max<std::size_t>(1, nodes.size()));
    return static_cast<int>(*total_budget / denom);
}

void ExperimentConfig::validate() const {
    if (rounds < 1) throw PreconditionError("rounds must be >= 1");
    if (nodes.empty()) throw PreconditionError("experiment needs at least one node");
    if (trial_seeds.empty()) throw PreconditionError("experiment needs at least one trial seed");
    if (transport.type != "sim" && transport.type != "tcp") {
        throw PreconditionError("transport.type must be 'sim' or 'tcp'");
    }
    std::set<std::string> ids;
    for (const NodeSpec& n : nodes) {
        if (n.id.empty() || !ids.insert(n.id).second) throw PreconditionError("node ids must be unique and non-empty");
        if (!(n.latency > 0.0)) throw PreconditionError("node " + n.id + ": latency must be > 0");
    }
    std::set<std::string> tags;
    for (const NodeSpec& n : nodes) tags.insert(operator_tag(n.op));
    switch (condition) {
        case Condition::Solo:
            if (nodes.size() != 1) throw PreconditionError("solo runs exactly one node");
            break;
        case Condition::Homogeneous:
            if (nodes.size() < 2) throw PreconditionError("homogeneous ensemble needs >= 2 nodes");
            if (tags.size() != 1) throw PreconditionError("homogeneous ensemble needs one operator identity on every node");
            break;
        case Condition::Diverse:
            if (nodes.size() < 2) throw PreconditionError("diverse ensemble needs >= 2 nodes");
            if (tags.size() < 2) throw PreconditionError("diverse ensemble needs >= 2 distinct operator identities");
            break;
    }
    const int t = resolved_iters();
    if (t < 1) throw PreconditionError("iterations per round resolve to " + std::to_string(t));
    if (total_budget) {
        // Splitting the budget may lose less than one call per node per round.
        const long per_round_nodes = static_cast<long>(rounds) * static_cast<long>(nodes.size());
        const long diff = std::labs(configured_calls() - *total_budget);
        if (diff >= per_round_nodes) {
            throw BudgetMismatch("configured " + std::to_string(configured_calls()) + " calls vs total_budget " +
                                 std::to_string(*total_budget));
        }
    }
    mars.validate();
    gossip.validate();
    if (tsp_bins < 1 || mc_bins < 1) throw PreconditionError("grid bins must be >= 1");
    if (!(p_new >= 0.0 && p_new <= 1.0)) throw PreconditionError("p_new must lie in [0, 1]");
}

nlohmann::json ExperimentConfig::to_json() const {
    nlohmann::json nodes_j = nlohmann::json::array();
    for (const NodeSpec& n : nodes) nodes_j.push_back({{"id", n.id}, {"operator", n.op}, {"latency", n.latency}});
    nlohmann::json j{{"name", name},
                     {"condition", to_string(condition)},
                     {"rounds", rounds},
                     {"total_budget", total_budget ? nlohmann::json(*total_budget) : nlohmann::json()},
                     {"iters_per_round", iters_per_round ? nlohmann::json(*iters_per_round) : nlohmann::json()},
                     {"p_new", p_new},
                     {"champion_window", champion_window ? nlohmann::json(*champion_window) : nlohmann::json()},
                     {"mars", mars_to_json(mars)},
                     {"grid", {{"tsp_bins", tsp_bins}, {"mc_bins", mc_bins}}},
                     {"seeds_dir", seeds_dir.string()},
                     {"heldout_dir", heldout_dir.string()},
                     {"trial_seeds", trial_seeds},
                     {"nodes", nodes_j},
                     {"transport",
                      {{"type", transport.type},
                       {"latency_min", transport.sim.latency_min},
                       {"latency_max", transport.sim.latency_max},
                       {"drop_probability", transport.sim.drop_probability}}},
                     {"gossip", gossip.to_json()},
                     {"barrier", barrier},
                     {"merge_rescore", merge_rescore == MergeRescore::Final ? "final" : "stored"},
                     {"evaluate_generality", evaluate_generality},
                     {"topic", topic}};
    return j;
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
    ExperimentConfig c;
    try {
        c.name = j.value("name", c.name);
        c.condition = condition_from_string(j.at("condition").get<std::string>());
        c.rounds = j.value("rounds", c.rounds);
        if (j.contains("total_budget") && !j["total_budget"].is_null()) c.total_budget = j["total_budget"].get<long>();
        if (j.contains("iters_per_round") && !j["iters_per_round"].is_null()) {
            c.iters_per_round = j["iters_per_round"].get<int>();
        }
        c.p_new = j.value("p_new", c.p_new);
        if (j.contains("champion_window")) {
            c.champion_window = j["champion_window"].is_null() ? std::nullopt
                                                                : std::optional<std::size_t>(j["champion_window"].get<std::size_t>());
        }
        if (j.contains("mars")) c.mars = mars_from_json(j["mars"]);
        if (j.contains("grid")) {
            c.tsp_bins = j["grid"].value("tsp_bins", c.tsp_bins);
            c.mc_bins = j["grid"].value("mc_bins", c.mc_bins);
        }
        c.seeds_dir = j.value("seeds_dir", std::string());
        c.heldout_dir = j.value("heldout_dir", std::string());
        if (j.contains("trial_seeds")) c.trial_seeds = j["trial_seeds"].get<std::vector<std::uint64_t>>();
        for (const auto& n : j.at("nodes")) {
            NodeSpec s;
            s.id = n.at("id").get<std::string>();
            if (n.contains("operator")) s.op = n["operator"];
            s.latency = n.value("latency", s.latency);
            c.nodes.push_back(std::move(s));
        }
        if (j.contains("transport")) {
            const auto& t = j["transport"];
            c.transport.type = t.value("type", c.transport.type);
            c.transport.sim.latency_min = t.value("latency_min", c.transport.sim.latency_min);
            c.transport.sim.latency_max = t.value("latency_max", c.transport.sim.latency_max);
            c.transport.sim.drop_probability = t.value("drop_probability", c.transport.sim.drop_probability);
        }
        if (j.contains("gossip")) c.gossip = gossip::GossipConfig::from_json(j["gossip"]);
        c.barrier = j.value("barrier", c.barrier);
        const std::string mode = j.value("merge_rescore", std::string("final"));
        if (mode == "final") {
            c.merge_rescore = MergeRescore::Final;
        } else if (mode == "stored") {
            c.merge_rescore = MergeRescore::Stored;
        } else {
            throw PreconditionError("merge_rescore must be 'final' or 'stored'");
        }
        c.evaluate_generality = j.value("evaluate_generality", c.evaluate_generality);
        c.topic = j.value("topic", c.topic);
    } catch (const nlohmann::json::exception& e) {
        throw PreconditionError(std::string("bad experiment config: ") + e.what());
    }
    c.validate();
    return c;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
    try {
        return from_json(nlohmann::json::parse(read_file(path)));
    } catch (const nlohmann::json::parse_error& e) {
        throw PreconditionError(path.string() + ": " + e.what());
    }
}

// --- Corpus and generality -------------------------------------------------

std::filesystem::path default_seeds_dir() {
    return data_dir() / "warriors" / "seeds";
}

std::filesystem::path default_heldout_dir() {
    return data_dir() / "warriors" / "heldout";
}

std::vector<Warrior> load_corpus(const std::filesystem::path& dir, const redcode::ParseOptions& opts) {
    if (!std::filesystem::is_directory(dir)) throw PreconditionError("not a directory: " + dir.string());
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::directory_iterator(dir)) {
        if (e.is_regular_file() && e.path().extension() == ".red") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    std::vector<Warrior> out;
    for (const auto& f : files) {
        Warrior w = redcode::parse(read_file(f), opts);
        if (w.name.empty()) w.name = f.stem().string();
        out.push_back(std::move(w));
    }
    return out;
}

double generality(const Warrior& w, std::span<const Warrior> corpus, const mars::MarsConfig& cfg,
                  std::uint64_t seed, mars::PairingCache* cache) {
    if (corpus.empty()) throw PreconditionError("generality is undefined on an empty corpus");
    std::size_t won = 0;
    for (const Warrior& h : corpus) won += mars::win_tie(w, h, cfg, seed, cache) ? 1 : 0;
    return static_cast<double>(won) / static_cast<double>(corpus.size());
}

// --- Operators -------------------------------------------------------------

std::string operator_tag(const nlohmann::json& spec) {
    const std::string type = spec.value("type", std::string("mock"));
    if (type == "mock") {
        const auto bias = mutation::bias_from_json(spec.contains("bias") ? spec["bias"]
                                                                         : nlohmann::json(spec.value("profile", "uniform")));
        return mutation::OperatorIdentity{"mock", bias.name}.tag();
    }
    if (type == "llm") {
        mutation::LlmEndpointConfig e;
        return mutation::OperatorIdentity{spec.value("model", e.model), spec.value("base_url", e.base_url)}.tag();
    }
    throw PreconditionError("operator type must be 'mock' or 'llm', got '" + type + "'");
}

std::shared_ptr<mutation::MutationOperator> make_operator(const nlohmann::json& spec,
                                                          const redcode::ParseOptions& opts) {
    const std::string type = spec.value("type", std::string("mock"));
    if (type == "mock") {
        const auto bias = mutation::bias_from_json(spec.contains("bias") ? spec["bias"]
                                                                         : nlohmann::json(spec.value("profile", "uniform")));
        return std::make_shared<mutation::MockOperator>(bias, opts);
    }
    if (type != "llm") throw PreconditionError("operator type must be 'mock' or 'llm', got '" + type + "'");
    mutation::LlmEndpointConfig e;
    e.model = spec.value("model", e.model);
    e.base_url = spec.value("base_url", e.base_url);
    e.api_key_env = spec.value("api_key_env", e.api_key_env);
    e.temperature = spec.value("temperature", e.temperature);
    e.max_retries = spec.value("max_retries", e.max_retries);
    e.timeout = std::chrono::milliseconds(static_cast<long>(1000.0 * spec.value("timeout_s", 60.0)));
    e.validate();
    std::shared_ptr<mutation::ChatClient> client;
    if (spec.contains("replay")) {
        client = std::make_shared<mutation::ReplayChatClient>(spec["replay"].get<std::string>());
    } else {
        client = std::make_shared<mutation::HttpChatClient>(e);
        if (spec.contains("record")) {
            client = std::make_shared<mutation::RecordingChatClient>(client, spec["record"].get<std::string>());
        }
    }
    const auto templates = spec.contains("prompts_dir")
                               ? mutation::PromptTemplates::load(spec["prompts_dir"].get<std::string>())
                               : mutation::PromptTemplates::load_default();
    return std::make_shared<mutation::LlmOperator>(e, client, templates, opts);
}

// --- Trials ----------------------------------------------------------------

namespace {

struct Actor {
    std::unique_ptr<drq::Node> node;
    std::shared_ptr<gossip::GossipEngine> engine;
    double latency = 1.0;
    double round_started = 0.0;
    std::vector<drq::RoundReport> reports;
    std::vector<archive::Archive> snapshots;
    std::vector<std::optional<drq::Champion>> champions;
    bool waiting = false;
};

struct TrialContext {
    const ExperimentConfig& cfg;
    std::uint64_t seed;
    std::vector<Warrior> seeds;
    std::vector<Warrior> heldout;
    std::vector<Actor> actors;
};

drq::NodeConfig node_config(const ExperimentConfig& cfg, std::size_t i, std::uint64_t seed,
                            const std::string& rules) {
    drq::NodeConfig n;
    n.node_id = cfg.nodes[i].id;
    n.rounds = cfg.rounds;
    n.iters_per_round = cfg.resolved_iters();
    n.p_new = cfg.p_new;
    n.champion_window = cfg.champion_window;
    n.topic = cfg.topic;
    n.rng_seed = derive_seed(seed, kSaltNode, i);
    n.mars = cfg.mars;
    n.tsp_bins = cfg.tsp_bins;
    n.mc_bins = cfg.mc_bins;
    n.rules_digest = rules;
    return n;
}

void record_round(Actor& a, drq::RoundReport rep, double started, double finished) {
    rep.started_at = started;
    rep.finished_at = finished;
    a.reports.push_back(std::move(rep));
    a.snapshots.push_back(a.node->archive());
    a.champions.push_back(a.node->last_champion());
}

// Discrete-event run: simulated time advances only by operator latency and
// network delay.
void drive_sim(TrialContext& t) {
    const ExperimentConfig& cfg = t.cfg;
    gossip::EventLoop loop;
    auto net = std::make_shared<gossip::SimNetwork>(loop, cfg.transport.sim, derive_seed(t.seed, kSaltNet));
    const std::string rules = mutation::PromptTemplates::load_default().rules_digest(cfg.mars);
    const bool networked = cfg.nodes.size() > 1;

    std::vector<gossip::PeerId> ids;
    for (std::size_t i = 0; i < cfg.nodes.size(); ++i) {
        ids.push_back(gossip::PeerId::random(derive_seed(t.seed, kSaltPeer, i)));
    }
    for (std::size_t i = 0; i < cfg.nodes.size(); ++i) {
        Actor a;
        a.latency = cfg.nodes[i].latency;
        std::shared_ptr<drq::ChampionExchange> ex = std::make_shared<drq::NullExchange>();
        if (networked) {
            a.engine = std::make_shared<gossip::GossipEngine>(cfg.gossip, net->attach(ids[i]),
                                                              derive_seed(t.seed, kSaltGossip, i),
                                                              [&loop] { return loop.now(); });
            for (const auto& p : ids) a.engine->add_peer(p);
            ex = std::make_shared<gossip::GossipExchange>(a.engine, cfg.topic, cfg.mars.core_size);
        }
        a.node = std::make_unique<drq::Node>(node_config(cfg, i, t.seed, rules),
                                             make_operator(cfg.nodes[i].op, cfg.mars.parse_options()), t.seeds, ex);
        t.actors.push_back(std::move(a));
    }

    auto all_done = [&t] {
        return std::all_of(t.actors.begin(), t.actors.end(), [](const Actor& a) { return a.node->finished(); });
    };
    if (networked) {
        std::mt19937_64 phase_rng(derive_seed(t.seed, kSaltHeartbeat));
        std::uniform_real_distribution<double> phase(0.0, cfg.gossip.heartbeat_interval);
        for (Actor& a : t.actors) {
            gossip::GossipEngine* e = a.engine.get();
            loop.every(phase(phase_rng), cfg.gossip.heartbeat_interval, [e, &all_done] {
                if (all_done()) return false;
                e->heartbeat();
                return true;
            });
        }
    }

    std::function<void(std::size_t)> start_round;
    std::function<void(std::size_t)> step;
    auto min_rounds = [&t] {
        std::size_t m = SIZE_MAX;
        for (const Actor& a : t.actors) m = std::min(m, a.reports.size());
        return m;
    };
    start_round = [&](std::size_t i) {
        Actor& a = t.actors[i];
        if (a.node->finished()) return;
        if (cfg.barrier && min_rounds() < a.reports.size()) {
            a.waiting = true;
            return;
        }
        a.waiting = false;
        a.node->begin_round();
        a.round_started = loop.now();
        loop.schedule_in(a.latency, [&step, i] { step(i); });
    };
    step = [&](std::size_t i) {
        Actor& a = t.actors[i];
        if (a.node->step()) {
            loop.schedule_in(a.latency, [&step, i] { step(i); });
            return;
        }
        record_round(a, a.node->end_round(), a.round_started, loop.now());
        loop.schedule_in(0.0, [&start_round, i] { start_round(i); });
        if (cfg.barrier) {
            for (std::size_t k = 0; k < t.actors.size(); ++k) {
                if (t.actors[k].waiting) loop.schedule_in(0.0, [&start_round, k] { start_round(k); });
            }
        }
    };
    for (std::size_t i = 0; i < t.actors.size(); ++i) loop.schedule(0.0, [&start_round, i] { start_round(i); });
    while (!all_done() && loop.run_one()) {
    }
    if (!all_done()) throw std::runtime_error("simulation stalled before every node finished");
}

// Real time: one thread per node, TCP between them on localhost.
void drive_tcp(TrialContext& t) {
    const ExperimentConfig& cfg = t.cfg;
    const std::string rules = mutation::PromptTemplates::load_default().rules_digest(cfg.mars);
    const std::size_t n = cfg.nodes.size();
    std::vector<std::shared_ptr<gossip::TcpTransport>> transports;
    std::vector<gossip::PeerId> ids;
    for (std::size_t i = 0; i < n; ++i) {
        ids.push_back(gossip::PeerId::random(derive_seed(t.seed, kSaltPeer, i)));
        auto tr = std::make_shared<gossip::TcpTransport>(ids[i], gossip::TcpTransport::Options{});
        if (n > 1) tr->start();
        transports.push_back(tr);
    }
    std::vector<std::unique_ptr<gossip::HeartbeatThread>> beats;
    const double t0 = gossip::steady_seconds();
    for (std::size_t i = 0; i < n; ++i) {
        Actor a;
        std::shared_ptr<drq::ChampionExchange> ex = std::make_shared<drq::NullExchange>();
        if (n > 1) {
            for (std::size_t k = 0; k < n; ++k) {
                if (k != i) transports[i]->add_peer({ids[k], "127.0.0.1", transports[k]->port()});
            }
            a.engine = std::make_shared<gossip::GossipEngine>(cfg.gossip, transports[i],
                                                              derive_seed(t.seed, kSaltGossip, i),
                                                              [t0] { return gossip::steady_seconds() - t0; });
            for (const auto& p : ids) a.engine->add_peer(p);
            ex = std::make_shared<gossip::GossipExchange>(a.engine, cfg.topic, cfg.mars.core_size);
            beats.push_back(std::make_unique<gossip::HeartbeatThread>(
                *a.engine, std::chrono::milliseconds(static_cast<long>(1000 * cfg.gossip.heartbeat_interval))));
        }
        a.node = std::make_unique<drq::Node>(node_config(cfg, i, t.seed, rules),
                                             make_operator(cfg.nodes[i].op, cfg.mars.parse_options()), t.seeds, ex);
        t.actors.push_back(std::move(a));
    }

    std::mutex mu;
    std::condition_variable cv;
    std::vector<int> finished_rounds(n, 0);
    std::vector<std::string> errors(n);
    std::vector<std::thread> threads;
    for (std::size_t i = 0; i < n; ++i) {
        threads.emplace_back([&, i] {
            Actor& a = t.actors[i];
            try {
                while (!a.node->finished()) {
                    if (cfg.barrier) {
                        std::unique_lock lk(mu);
                        const int mine = finished_rounds[i];
                        cv.wait(lk, [&] {
                            return std::all_of(finished_rounds.begin(), finished_rounds.end(),
                                               [mine](int r) { return r >= mine; });
                        });
                    }
                    const double start = gossip::steady_seconds() - t0;
                    a.node->begin_round();
                    auto rep = a.node->end_round();
                    record_round(a, std::move(rep), start, gossip::steady_seconds() - t0);
                    {
                        std::lock_guard lk(mu);
                        ++finished_rounds[i];
                    }
                    cv.notify_all();
                }
            } catch (const std::exception& e) {
                errors[i] = e.what();
                std::lock_guard lk(mu);
                finished_rounds[i] = cfg.rounds;  // release anyone waiting on us
                cv.notify_all();
            }
        });
    }
    for (auto& th : threads) th.join();
    beats.clear();
    for (auto& tr : transports) tr->stop();
    for (std::size_t i = 0; i < n; ++i) {
        if (!errors[i].empty()) throw std::runtime_error("node " + cfg.nodes[i].id + ": " + errors[i]);
    }
}

nlohmann::json round_json(const drq::RoundReport& r, std::optional<double> gen) {
    nlohmann::json j = r.to_json(true);
    j["generality"] = gen ? nlohmann::json(*gen) : nlohmann::json();
    return j;
}

nlohmann::json corpus_json(const std::vector<Warrior>& ws) {
    nlohmann::json out = nlohmann::json::array();
    for (const Warrior& w : ws) out.push_back({{"name", w.name}, {"hash", redcode::content_hash_hex(w)}});
    return out;
}

}  // namespace

TrialResult run_trial(const ExperimentConfig& cfg, std::uint64_t seed, const std::filesystem::path& dir) {
    cfg.validate();
    TrialResult result;
    result.seed = seed;
    result.dir = dir;
    std::filesystem::create_directories(dir);

    const auto popts = cfg.mars.parse_options();
    TrialContext t{cfg, seed,
                   load_corpus(cfg.seeds_dir.empty() ? default_seeds_dir() : cfg.seeds_dir, popts),
                   load_corpus(cfg.heldout_dir.empty() ? default_heldout_dir() : cfg.heldout_dir, popts),
                   {}};
    try {
        if (cfg.transport.type == "tcp") {
            drive_tcp(t);
        } else {
            drive_sim(t);
        }
    } catch (const std::exception& e) {
        // A crashed node ends the trial; whatever the nodes logged is kept.
        result.failed = true;
        result.error = e.what();
    }

    // Generality of every round's champion, with one battle seed shared by
    // all conditions of the same trial seed.
    const std::uint64_t gen_seed = derive_seed(seed, kSaltGenerality);
    mars::PairingCache gen_cache(cfg.mars);
    nlohmann::json nodes_j = nlohmann::json::array();
    for (std::size_t i = 0; i < t.actors.size(); ++i) {
        Actor& a = t.actors[i];
        const std::string id = cfg.nodes[i].id;
        const auto ndir = dir / node_dir_name(id);
        std::filesystem::create_directories(ndir);
        std::string rounds_text;
        std::string champions_text;
        nlohmann::json gens = nlohmann::json::array();
        nlohmann::json novelty = nlohmann::json::array();
        nlohmann::json seconds = nlohmann::json::array();
        std::optional<double> peak;
        std::vector<double> etas;
        for (std::size_t r = 0; r < a.reports.size(); ++r) {
            std::optional<double> g;
            if (a.champions[r] && cfg.evaluate_generality) {
                g = generality(a.champions[r]->warrior, t.heldout, cfg.mars, gen_seed, &gen_cache);
                peak = std::max(peak.value_or(0.0), *g);
            }
            if (a.champions[r]) {
                champions_text += a.champions[r]->to_json(cfg.mars.core_size).dump() + "\n";
            }
            rounds_text += round_json(a.reports[r], g).dump() + "\n";
            gens.push_back(g ? nlohmann::json(*g) : nlohmann::json());
            const auto& eta = a.reports[r].niche_novelty;
            novelty.push_back(eta ? nlohmann::json(*eta) : nlohmann::json());
            if (eta) etas.push_back(*eta);
            seconds.push_back(a.reports[r].finished_at - a.reports[r].started_at);
            result.calls_logged += a.reports[r].calls_used;
        }
        write_file(ndir / "rounds.jsonl", rounds_text);
        write_file(ndir / "champions.jsonl", champions_text);
        archive::save(a.node->archive(), ndir / "archive.jsonl", cfg.mars.core_size);

        std::optional<double> mean_eta;
        if (!etas.empty()) {
            double s = 0.0;
            for (double e : etas) s += e;
            mean_eta = s / static_cast<double>(etas.size());
        }
        nodes_j.push_back({{"id", id},
                           {"operator", a.node->op().identity().tag()},
                           {"rounds_completed", a.reports.size()},
                           {"calls", a.node->calls_total()},
                           {"generality_by_round", gens},
                           {"peak_generality", peak ? nlohmann::json(*peak) : nlohmann::json()},
                           {"final_generality", gens.empty() ? nlohmann::json() : gens.back()},
                           {"niche_novelty_by_round", novelty},
                           {"mean_niche_novelty", mean_eta ? nlohmann::json(*mean_eta) : nlohmann::json()},
                           {"round_seconds", seconds},
                           {"final_coverage", a.node->archive().coverage()},
                           {"final_qd_score", a.node->archive().qd_score()}});
    }

    // Merged archive per round from each node's end-of-round snapshot.
    nlohmann::json merged_rounds = nlohmann::json::array();
    std::size_t common = SIZE_MAX;
    for (const Actor& a : t.actors) common = std::min(common, a.snapshots.size());
    if (t.actors.empty()) common = 0;
    for (std::size_t r = 0; r < common; ++r) {
        std::vector<archive::Archive> parts;
        for (const Actor& a : t.actors) parts.push_back(a.snapshots[r]);
        const archive::Archive m = archive::merge(parts);
        merged_rounds.push_back({{"round", r + 1}, {"coverage", m.coverage()}, {"qd_score", m.qd_score()}});
    }

    nlohmann::json merged_final;
    if (!t.actors.empty()) {
        std::vector<archive::Archive> finals;
        for (const Actor& a : t.actors) finals.push_back(a.node->archive());
        archive::Archive merged = archive::merge(finals);
        merged_final = {{"coverage", merged.coverage()}, {"qd_score_stored", merged.qd_score()}};
        if (cfg.merge_rescore == MergeRescore::Final && !result.failed) {
            // Shared reference pool: union of every node's final opponent pool.
            std::vector<Warrior> shared;
            std::set<std::uint64_t> seen;
            for (const Actor& a : t.actors) {
                for (const Warrior& w : a.node->pool().members()) {
                    if (seen.insert(redcode::content_hash(w)).second) shared.push_back(w);
                }
            }
            mars::PairingCache cache(cfg.mars);
            std::vector<archive::Archive> rescored;
            for (const archive::Archive& f : finals) {
                rescored.push_back(archive::rescore(f, shared, cfg.mars, derive_seed(seed, kSaltRescore), &cache));
            }
            merged = archive::merge(rescored);
            merged_final["rescored"] = true;
            merged_final["shared_pool_size"] = shared.size();
        } else {
            merged_final["rescored"] = false;
        }
        merged_final["qd_score"] = merged.qd_score();
        merged_final["coverage"] = merged.coverage();
        archive::save(merged, dir / "merged_archive.jsonl", cfg.mars.core_size);
    }

    result.summary = {{"experiment", cfg.name},
                      {"condition", to_string(cfg.condition)},
                      {"trial_seed", seed},
                      {"iters_per_round", cfg.resolved_iters()},
                      {"calls_configured", cfg.configured_calls()},
                      {"calls_logged", result.calls_logged},
                      {"failed", result.failed},
                      {"nodes", nodes_j},
                      {"merged_by_round", merged_rounds},
                      {"merged_final", merged_final},
                      {"corpus", {{"seeds", corpus_json(t.seeds)}, {"heldout", corpus_json(t.heldout)}}}};
    if (result.failed) {
        result.summary["error"] = result.error;
        write_file(dir / "failure.json", nlohmann::json{{"error", result.error}, {"trial_seed", seed}}.dump(2) + "\n");
    }
    write_file(dir / "summary.json", result.summary.dump(2) + "\n");
    return result;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& out_dir) {
    cfg.validate();
    std::filesystem::create_directories(out_dir);
    nlohmann::json meta = cfg.to_json();
    meta["resolved_iters_per_round"] = cfg.resolved_iters();
    meta["calls_configured_per_trial"] = cfg.configured_calls();
    meta["defaults_note"] =
        "rounds, trial count, champion window, grid bins and the held-out corpus are not given by the source "
        "method; the values here are configuration";
    write_file(out_dir / "experiment.json", meta.dump(2) + "\n");

    ExperimentResult res;
    res.dir = out_dir;
    for (std::uint64_t seed : cfg.trial_seeds) {
        TrialResult tr = run_trial(cfg, seed, out_dir / ("trial-" + std::to_string(seed)));
        if (!tr.failed && tr.calls_logged != cfg.configured_calls()) {
            throw BudgetMismatch("trial " + std::to_string(seed) + " logged " + std::to_string(tr.calls_logged) +
                                 " operator calls, configured " + std::to_string(cfg.configured_calls()));
        }
        res.trials.push_back(std::move(tr));
    }
    return res;
}

}  // namespace dei::experiment
