// dei: command-line front end for the battle engine, archives, nodes,
// simulated experiments and reports.

#include "dei/common.hpp"
#include "dei/experiment.hpp"
#include "dei/gossip_net.hpp"

#include "CLI11.hpp"

#include <atomic>
#include <csignal>
#include <fstream>
#include <iostream>
#include <thread>

namespace fs = std::filesystem;
using namespace dei;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFail = 1;
constexpr int kExitBudget = 3;

std::atomic<bool> g_stop{false};

void on_signal(int) {
    g_stop = true;
}

nlohmann::json load_json(const fs::path& p) {
    try {
        return nlohmann::json::parse(read_file(p));
    } catch (const nlohmann::json::parse_error& e) {
        throw PreconditionError(p.string() + ": " + e.what());
    }
}

redcode::Warrior load_warrior(const fs::path& p, const mars::MarsConfig& m) {
    redcode::Warrior w = redcode::parse(read_file(p), m.parse_options());
    if (w.name.empty()) w.name = p.stem().string();
    return w;
}

struct MarsFlags {
    int core_size = 8000;
    int max_cycles = 80000;
    int rounds = 20;
    int min_separation = 100;
    int process_limit = 0;
    std::size_t max_length = 100;

    void add(CLI::App* app) {
        app->add_option("--core-size", core_size, "Core size")->capture_default_str();
        app->add_option("--max-cycles", max_cycles, "Cycles before a battle is a draw")->capture_default_str();
        app->add_option("--rounds", rounds, "Battles per pairing")->capture_default_str();
        app->add_option("--min-separation", min_separation, "Minimum distance between warriors")
            ->capture_default_str();
        app->add_option("--process-limit", process_limit, "Processes per warrior (0: core size)")
            ->capture_default_str();
        app->add_option("--max-length", max_length, "Longest accepted warrior")->capture_default_str();
    }
    mars::MarsConfig config() const {
        mars::MarsConfig m;
        m.core_size = core_size;
        m.max_cycles = max_cycles;
        m.rounds_per_pair = rounds;
        m.min_separation = min_separation;
        m.process_limit = process_limit;
        m.max_warrior_length = max_length;
        m.validate();
        return m;
    }
};

// --- parse -----------------------------------------------------------------

int cmd_parse(const fs::path& file, int core_size) {
    redcode::ParseOptions opts;
    opts.core_size = core_size;
    try {
        std::cout << redcode::serialize(redcode::parse(read_file(file), opts), core_size);
        return kExitOk;
    } catch (const redcode::SyntaxError& e) {
        std::cerr << file.string() << ":" << e.line() << ":" << e.column() << ": error: " << e.message() << "\n";
        return kExitFail;
    }
}

// --- battle ----------------------------------------------------------------

int cmd_battle(const std::vector<fs::path>& files, const mars::MarsConfig& m, std::uint64_t seed,
               const std::string& trace_path) {
    std::vector<redcode::Warrior> ws;
    for (const auto& f : files) ws.push_back(load_warrior(f, m));

    std::ofstream trace;
    mars::TraceSink sink;
    if (!trace_path.empty()) {
        trace.open(trace_path, std::ios::binary | std::ios::trunc);
        if (!trace) throw std::runtime_error("cannot write " + trace_path);
        sink = [&trace, &m](const mars::TraceEvent& ev) {
            nlohmann::json j{{"cycle", ev.cycle},
                             {"warrior", ev.warrior},
                             {"pc", ev.pc},
                             {"instruction", redcode::to_string(ev.instruction, m.core_size)},
                             {"process_died", ev.process_died},
                             {"warrior_died", ev.warrior_died}};
            trace << j.dump() << '\n';
        };
    }
    const mars::BattleOutcome out = mars::run_battle(ws, m, seed, sink);
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t i = 0; i < ws.size(); ++i) {
        rows.push_back({{"name", ws[i].name},
                        {"hash", redcode::content_hash_hex(ws[i])},
                        {"placement", out.placements().at(i)},
                        {"lifespan", out.lifespan(i)},
                        {"survived", out.lifespan(i) == out.max_cycles()},
                        {"fitness", mars::fitness(i, out)},
                        {"memory_coverage", out.memory_coverage(i)}});
    }
    std::cout << nlohmann::json{{"seed", seed}, {"cycles_run", out.cycles_run()}, {"warriors", rows}}.dump(2)
              << "\n";
    return kExitOk;
}

// --- merge-archives --------------------------------------------------------

int cmd_merge(const std::vector<fs::path>& inputs, const std::string& pool_dir, const fs::path& out,
              const mars::MarsConfig& m, std::uint64_t seed) {
    std::vector<archive::Archive> parts;
    for (const auto& p : inputs) parts.push_back(archive::load(p));
    if (!pool_dir.empty()) {
        // Stored fitness values come from different pools; put them on one scale first.
        const auto pool = experiment::load_corpus(pool_dir, m.parse_options());
        if (pool.empty()) throw PreconditionError("pool directory " + pool_dir + " holds no .red files");
        mars::PairingCache cache(m);
        for (auto& a : parts) a = archive::rescore(a, pool, m, seed, &cache);
    }
    const archive::Archive merged = archive::merge(parts);
    archive::save(merged, out, m.core_size);
    std::cout << nlohmann::json{{"inputs", inputs.size()},
                                {"rescored", !pool_dir.empty()},
                                {"elites", merged.size()},
                                {"coverage", merged.coverage()},
                                {"qd_score", merged.qd_score()}}
                     .dump()
              << "\n";
    return kExitOk;
}

// --- node ------------------------------------------------------------------

// Standalone node over TCP, or over a local AXL shim.
int cmd_node(const fs::path& config_path, const std::string& peers_path) {
    const nlohmann::json j = load_json(config_path);
    drq::NodeConfig nc;
    nc.node_id = j.value("node_id", nc.node_id);
    nc.rounds = j.value("rounds", nc.rounds);
    nc.iters_per_round = j.value("iters_per_round", nc.iters_per_round);
    nc.p_new = j.value("p_new", nc.p_new);
    if (j.contains("champion_window")) {
        nc.champion_window = j["champion_window"].is_null()
                                 ? std::nullopt
                                 : std::optional<std::size_t>(j["champion_window"].get<std::size_t>());
    }
    nc.topic = j.value("topic", nc.topic);
    nc.rng_seed = j.value("seed", std::uint64_t{0});
    if (j.contains("mars")) nc.mars = experiment::mars_from_json(j["mars"]);
    if (j.contains("grid")) {
        nc.tsp_bins = j["grid"].value("tsp_bins", nc.tsp_bins);
        nc.mc_bins = j["grid"].value("mc_bins", nc.mc_bins);
    }
    nc.rules_digest = mutation::PromptTemplates::load_default().rules_digest(nc.mars);
    nc.validate();
    const gossip::GossipConfig gcfg =
        j.contains("gossip") ? gossip::GossipConfig::from_json(j["gossip"]) : gossip::GossipConfig{};
    const fs::path out = j.value("out", "node-" + nc.node_id);
    const std::string seeds_dir = j.value("seeds_dir", experiment::default_seeds_dir().string());
    const double linger = j.value("linger_s", 3.0);

    std::vector<gossip::PeerAddress> peers;
    if (!peers_path.empty()) peers = gossip::parse_peers_file(read_file(peers_path));

    std::shared_ptr<gossip::Transport> transport;
    std::shared_ptr<gossip::TcpTransport> tcp;
    std::shared_ptr<gossip::AxlTransport> axl;
    const std::string kind = j.value("transport", std::string("tcp"));
    if (kind == "tcp") {
        const gossip::PeerId self = j.contains("peer_id")
                                        ? gossip::PeerId::from_hex(j["peer_id"].get<std::string>())
                                        : gossip::PeerId::random(derive_seed(nc.rng_seed, fnv1a(nc.node_id)));
        gossip::TcpTransport::Options o;
        o.listen_host = j.value("listen_host", o.listen_host);
        o.listen_port = j.value("listen_port", o.listen_port);
        tcp = std::make_shared<gossip::TcpTransport>(self, o);
        for (const auto& p : peers) {
            if (p.id != self) tcp->add_peer(p);
        }
        tcp->start();
        transport = tcp;
    } else if (kind == "axl") {
        axl = std::make_shared<gossip::AxlTransport>(j.at("axl_url").get<std::string>());
        axl->start();
        transport = axl;
    } else {
        throw PreconditionError("transport must be 'tcp' or 'axl'");
    }
    std::cerr << "node " << nc.node_id << " peer " << transport->self().hex();
    if (tcp) std::cerr << " listening on " << tcp->port();
    std::cerr << "\n";

    auto engine = std::make_shared<gossip::GossipEngine>(gcfg, transport, derive_seed(nc.rng_seed, 0x67),
                                                         [t0 = gossip::steady_seconds()] {
                                                             return gossip::steady_seconds() - t0;
                                                         });
    for (const auto& p : peers) engine->add_peer(p.id);
    auto exchange = std::make_shared<gossip::GossipExchange>(engine, nc.topic, nc.mars.core_size);
    gossip::HeartbeatThread beat(*engine,
                                 std::chrono::milliseconds(static_cast<long>(1000 * gcfg.heartbeat_interval)));

    const nlohmann::json op_spec = j.value("operator", nlohmann::json{{"type", "mock"}, {"profile", "uniform"}});
    drq::Node node(nc, experiment::make_operator(op_spec, nc.mars.parse_options()),
                   experiment::load_corpus(seeds_dir, nc.mars.parse_options()), exchange);

    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    fs::create_directories(out);
    std::ofstream rounds(out / "rounds.jsonl", std::ios::trunc);
    std::ofstream champions(out / "champions.jsonl", std::ios::trunc);
    const double t0 = gossip::steady_seconds();
    while (!node.finished() && !g_stop) {
        const double start = gossip::steady_seconds() - t0;
        node.begin_round();
        while (!g_stop && node.step()) {
        }
        drq::RoundReport r = node.end_round();
        r.started_at = start;
        r.finished_at = gossip::steady_seconds() - t0;
        rounds << r.to_json().dump() << "\n" << std::flush;
        if (node.last_champion()) champions << node.last_champion()->to_json(nc.mars.core_size).dump() << "\n";
        std::cerr << "round " << r.round << " coverage " << r.coverage << " qd " << r.qd_score << " received "
                  << r.received << "\n";
    }
    archive::save(node.archive(), out / "archive.jsonl", nc.mars.core_size);
    // Let the last champion reach the mesh before tearing down.
    std::this_thread::sleep_for(std::chrono::milliseconds(static_cast<long>(1000 * linger)));
    beat.stop();
    if (tcp) tcp->stop();
    if (axl) axl->stop();
    return g_stop ? kExitFail : kExitOk;
}

// --- axl-shim --------------------------------------------------------------

int cmd_axl_shim(const std::string& key, const std::string& host, int http_port, int tcp_port,
                 const std::string& peers_path) {
    const gossip::PeerId self = gossip::PeerId::from_hex(key);
    gossip::TcpTransport::Options o;
    o.listen_port = tcp_port;
    auto tcp = std::make_shared<gossip::TcpTransport>(self, o);
    std::vector<gossip::PeerId> ids;
    if (!peers_path.empty()) {
        for (const auto& p : gossip::parse_peers_file(read_file(peers_path))) {
            if (p.id == self) continue;
            tcp->add_peer(p);
            ids.push_back(p.id);
        }
    }
    tcp->start();
    gossip::AxlShim shim(tcp, host, http_port);
    shim.set_peers(ids);
    shim.start();
    std::cerr << "axl shim " << shim.base_url() << " peer " << self.hex() << " tcp " << tcp->port() << "\n";
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
    shim.stop();
    tcp->stop();
    return kExitOk;
}

// --- sim / report / eval-generality ---------------------------------------

int cmd_sim(const fs::path& exp_path, const fs::path& out) {
    const auto cfg = experiment::ExperimentConfig::load(exp_path);
    try {
        const auto res = experiment::run_experiment(cfg, out);
        int failed = 0;
        for (const auto& t : res.trials) {
            failed += t.failed ? 1 : 0;
            std::cerr << "trial " << t.seed << (t.failed ? " FAILED: " + t.error : " ok") << ", "
                      << t.calls_logged << " calls, merged coverage "
                      << t.summary["merged_final"].value("coverage", 0.0) << "\n";
        }
        std::cout << out.string() << "\n";
        return failed == 0 ? kExitOk : kExitFail;
    } catch (const experiment::BudgetMismatch& e) {
        std::cerr << "budget mismatch: " << e.what() << "\n";
        return kExitBudget;
    }
}

int cmd_report(const std::vector<fs::path>& dirs, bool csv, bool svg, const fs::path& out) {
    const auto r = experiment::report(dirs);
    if (!csv && !svg) csv = svg = true;
    fs::create_directories(out);
    if (csv) {
        write_file(out / "results.csv", r.main_csv);
        write_file(out / "merged.csv", r.merged_csv);
        write_file(out / "rounds.csv", r.rounds_csv);
    }
    if (svg) {
        write_file(out / "generality.svg", r.generality_svg);
        write_file(out / "merged_qd.svg", r.merged_qd_svg);
    }
    std::cout << r.main_csv;
    return kExitOk;
}

int cmd_eval_generality(const fs::path& file, const fs::path& corpus_dir, const mars::MarsConfig& m,
                        std::uint64_t seed) {
    const auto w = load_warrior(file, m);
    const auto corpus = experiment::load_corpus(corpus_dir, m.parse_options());
    nlohmann::json rows = nlohmann::json::array();
    mars::PairingCache cache(m);
    for (const auto& h : corpus) rows.push_back({{"opponent", h.name}, {"win_or_tie", mars::win_tie(w, h, m, seed, &cache)}});
    std::cout << nlohmann::json{{"warrior", w.name},
                                {"generality", experiment::generality(w, corpus, m, seed, &cache)},
                                {"corpus_size", corpus.size()},
                                {"results", rows}}
                     .dump(2)
              << "\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"dei: distributed quality-diversity Core War evolution"};
    app.require_subcommand(1);

    int parse_core = 8000;
    fs::path parse_file;
    auto* parse = app.add_subcommand("parse", "Assemble a warrior and print its canonical form");
    parse->add_option("file", parse_file, "Redcode source")->required()->check(CLI::ExistingFile);
    parse->add_option("--core-size", parse_core, "Core size")->capture_default_str();

    MarsFlags battle_mars;
    battle_mars.rounds = 1;
    std::vector<fs::path> battle_files;
    std::uint64_t battle_seed = 0;
    std::string trace;
    auto* battle = app.add_subcommand("battle", "Run one battle and print lifespans and fitness");
    battle->add_option("warriors", battle_files, "Redcode sources")->required()->check(CLI::ExistingFile);
    battle->add_option("--seed", battle_seed, "Placement seed")->capture_default_str();
    battle->add_option("--trace", trace, "Write a per-cycle JSON-lines trace here");
    battle_mars.add(battle);

    MarsFlags merge_mars;
    std::vector<fs::path> merge_inputs;
    std::string merge_pool;
    fs::path merge_out = "merged.jsonl";
    std::uint64_t merge_seed = 0;
    auto* merge = app.add_subcommand("merge-archives", "Merge node archives cell by cell");
    merge->add_option("archives", merge_inputs, "Archive JSON-lines files")->required()->check(CLI::ExistingFile);
    merge->add_option("--pool", merge_pool, "Re-score every archive against the warriors in this directory")
        ->check(CLI::ExistingDirectory);
    merge->add_option("--out", merge_out, "Output archive")->capture_default_str();
    merge->add_option("--seed", merge_seed, "Battle seed for re-scoring")->capture_default_str();
    merge_mars.add(merge);

    fs::path node_config;
    std::string node_peers;
    auto* node = app.add_subcommand("node", "Run one standalone node in real time");
    node->add_option("--config", node_config, "Node JSON config")->required()->check(CLI::ExistingFile);
    node->add_option("--peers", node_peers, "Peers file: <peer-id-hex> <host:port> per line")
        ->check(CLI::ExistingFile);

    std::string shim_key;
    std::string shim_host = "127.0.0.1";
    int shim_port = 9002;
    int shim_tcp = 0;
    std::string shim_peers;
    auto* shim = app.add_subcommand("axl-shim", "Local AXL-compatible HTTP bridge over TCP");
    shim->add_option("--key", shim_key, "Own 64-hex public key")->required();
    shim->add_option("--host", shim_host, "HTTP bind address")->capture_default_str();
    shim->add_option("--port", shim_port, "HTTP port")->capture_default_str();
    shim->add_option("--tcp-port", shim_tcp, "TCP port for peer traffic (0: any)")->capture_default_str();
    shim->add_option("--peers", shim_peers, "Peers file")->check(CLI::ExistingFile);

    fs::path sim_exp;
    fs::path sim_out = "runs";
    auto* sim = app.add_subcommand("sim", "Run an experiment in process over the simulated network");
    sim->add_option("--experiment", sim_exp, "Experiment JSON")->required()->check(CLI::ExistingFile);
    sim->add_option("--out", sim_out, "Run directory")->capture_default_str();

    std::vector<fs::path> report_dirs;
    bool report_csv = false;
    bool report_svg = false;
    fs::path report_out = "report";
    auto* rep = app.add_subcommand("report", "Tables and plots from run directories");
    rep->add_option("runs", report_dirs, "Run directories")->required()->check(CLI::ExistingDirectory);
    rep->add_flag("--csv", report_csv, "Write CSV tables");
    rep->add_flag("--svg", report_svg, "Write SVG plots");
    rep->add_option("--out", report_out, "Output directory")->capture_default_str();

    MarsFlags gen_mars;
    fs::path gen_file;
    fs::path gen_corpus = experiment::default_heldout_dir();
    std::uint64_t gen_seed = 0;
    auto* gen = app.add_subcommand("eval-generality", "Fraction of a corpus a warrior beats or ties");
    gen->add_option("warrior", gen_file, "Redcode source")->required()->check(CLI::ExistingFile);
    gen->add_option("--corpus", gen_corpus, "Directory of .red files")->capture_default_str();
    gen->add_option("--seed", gen_seed, "Battle seed")->capture_default_str();
    gen_mars.add(gen);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*parse) return cmd_parse(parse_file, parse_core);
        if (*battle) return cmd_battle(battle_files, battle_mars.config(), battle_seed, trace);
        if (*merge) return cmd_merge(merge_inputs, merge_pool, merge_out, merge_mars.config(), merge_seed);
        if (*node) return cmd_node(node_config, node_peers);
        if (*shim) return cmd_axl_shim(shim_key, shim_host, shim_port, shim_tcp, shim_peers);
        if (*sim) return cmd_sim(sim_exp, sim_out);
        if (*rep) return cmd_report(report_dirs, report_csv, report_svg, report_out);
        if (*gen) return cmd_eval_generality(gen_file, gen_corpus, gen_mars.config(), gen_seed);
    } catch (const std::exception& e) {
        std::cerr << "dei: " << e.what() << "\n";
        return kExitFail;
    }
    return kExitFail;
}
