// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 when any
// criterion fails. Usage: acceptance <path-to-dei-cli> [--only <n>]

#include "dei/common.hpp"
#include "dei/experiment.hpp"
#include "dei/gossip_net.hpp"
#include "gossip_harness.hpp"
#include "warrior_gen.hpp"

#include "httplib.h"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>

namespace fs = std::filesystem;
using namespace dei;
using redcode::Warrior;

namespace {

// Tolerances and sizes fixed by the acceptance contract.
constexpr double kGoldenSecondsEach = 1.0;
constexpr int kFitnessPairs = 1000;
constexpr int kFitnessHorizon = 100;
constexpr double kFitnessTolerance = 1e-12;
constexpr int kArchiveSequences = 10000;
constexpr int kGossipMessages = 1000;
constexpr double kPropagationThreshold = 0.99;
constexpr double kChurnThreshold = 0.95;
constexpr double kGossipSeconds = 60.0;
constexpr double kNoBarrierTolerance = 0.05;
constexpr double kLatencyFactor = 10.0;
constexpr int kSoloT = 250;
constexpr int kEnsembleT = 62;
constexpr int kParityGap = 2;
constexpr int kFuzzCount = 10000;
constexpr int kDirectionalRounds = 10;
constexpr long kDirectionalBudget = 2500;
constexpr int kDirectionalMaxCycles = 8000;

struct Outcome {
    bool pass = false;
    std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v, int digits = 4) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

std::string fmt_sci(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

fs::path scratch_dir(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("dei-acceptance-" + name + "-" + std::to_string(::getpid()));
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

const Warrior kImp = redcode::parse("MOV 0, 1");
const Warrior kDat = redcode::parse("DAT #0, #0");

// --- 1. VM golden behaviours -----------------------------------------------

Outcome vm_golden() {
    std::vector<std::string> fails;
    std::vector<std::string> times;
    auto timed = [&](const std::string& name, const std::function<bool()>& fn) {
        const auto t0 = std::chrono::steady_clock::now();
        const bool ok = fn();
        const double s = seconds_since(t0);
        times.push_back(name + "=" + fmt(s, 3) + "s");
        if (!ok) fails.push_back(name);
        if (s >= kGoldenSecondsEach) fails.push_back(name + " too slow");
    };
    const mars::MarsConfig cfg;  // 8000 cells, 80000 cycles, 20 rounds per pair
    timed("imp-alone", [&] {
        const std::vector<Warrior> ws{kImp};
        const auto o = mars::run_battle(ws, cfg, 1);
        return o.lifespan(0) == cfg.max_cycles && o.cycles_run() == cfg.max_cycles;
    });
    timed("dat-alone", [&] {
        const std::vector<Warrior> ws{kDat};
        const auto o = mars::run_battle(ws, cfg, 1);
        // Lifespan is the last cycle alive; 0 means it died executing cycle 1.
        return o.lifespan(0) == 0 && o.cycles_run() == 1 && !o.alive(0, 1);
    });
    timed("imp-vs-imp", [&] {
        const auto st = mars::play_pairing(kImp, kImp, cfg, 7);
        return st.battles == cfg.rounds_per_pair && st.ties == cfg.rounds_per_pair && st.wins == 0 && st.losses == 0;
    });
    timed("trace-rerun", [&] {
        const Warrior dwarf = redcode::parse(read_file(data_dir() / "warriors/seeds/dwarf.red"));
        const std::vector<Warrior> ws{dwarf, kImp};
        mars::MarsConfig short_cfg = cfg;
        short_cfg.max_cycles = 20000;
        auto trace_of = [&] {
            std::ostringstream out;
            mars::run_battle(ws, short_cfg, 99, [&out](const mars::TraceEvent& e) {
                out << e.cycle << ' ' << e.warrior << ' ' << e.pc << ' ' << redcode::to_string(e.instruction) << ' '
                    << e.process_died << e.warrior_died << '\n';
            });
            return out.str();
        };
        const std::string a = trace_of();
        const std::string b = trace_of();
        return !a.empty() && a == b;
    });
    std::string detail;
    for (const auto& t : times) detail += t + " ";
    if (!fails.empty()) {
        detail += "failed:";
        for (const auto& f : fails) detail += " " + f;
    }
    return {fails.empty(), detail};
}

// --- 2. Fitness oracle -------------------------------------------------------

// Survival share summed timestep by timestep over explicit masks.
double oracle_fitness(std::size_t i, const std::vector<std::vector<int>>& alive) {
    const double n = static_cast<double>(alive.size());
    const std::size_t t = alive[0].size();
    double f = 0.0;
    for (std::size_t tau = 0; tau < t; ++tau) {
        int denom = 0;
        for (const auto& m : alive) denom += m[tau];
        if (denom > 0) f += (n / static_cast<double>(t)) * alive[i][tau] / denom;
    }
    return f;
}

Outcome fitness_oracle() {
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<int> life(0, kFitnessHorizon);
    double worst = 0.0;
    bool sum_ok = true;
    for (int k = 0; k < kFitnessPairs; ++k) {
        const std::vector<int> lifes{life(rng), life(rng)};
        // Masks built directly: alive at tau (1-based) while tau <= lifespan.
        std::vector<std::vector<int>> masks(2, std::vector<int>(kFitnessHorizon, 0));
        for (int w = 0; w < 2; ++w) {
            for (int tau = 1; tau <= kFitnessHorizon; ++tau) masks[w][tau - 1] = tau <= lifes[w] ? 1 : 0;
        }
        const auto o = mars::BattleOutcome::from_lifespans(lifes, kFitnessHorizon);
        double sum = 0.0;
        for (std::size_t i = 0; i < 2; ++i) {
            const double f = mars::fitness(i, o);
            worst = std::max(worst, std::abs(f - oracle_fitness(i, masks)));
            sum += f;
        }
        sum_ok = sum_ok && sum <= 2.0 + kFitnessTolerance;
    }
    const auto both = mars::BattleOutcome::from_lifespans({kFitnessHorizon, kFitnessHorizon}, kFitnessHorizon);
    const bool symmetric = mars::fitness(0, both) == 1.0 && mars::fitness(1, both) == 1.0;
    return {worst <= kFitnessTolerance && symmetric && sum_ok,
            "pairs=" + std::to_string(kFitnessPairs) + " max|diff|=" + fmt_sci(worst) +
                " symmetric=" + (symmetric ? "1.0 exactly" : "no") + " sum<=N=" + (sum_ok ? "yes" : "no")};
}

// --- 3. Archive properties ---------------------------------------------------

Outcome archive_properties() {
    std::mt19937_64 rng(31337);
    const archive::BcGrid grid;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    auto random_bc = [&] {
        // Log-uniform TSP so every column is reached.
        const double tsp = std::exp(u(rng) * std::log(grid.tsp_max() * 1.5));
        return mars::BehavioralCharacteristic{tsp, u(rng)};
    };
    auto variant = [](int k) { return redcode::parse("ADD #" + std::to_string(k % 4000) + ", 3\nJMP -1"); };
    long ops = 0;
    std::map<std::string, int> violations;
    for (int seq = 0; seq < kArchiveSequences; ++seq) {
        archive::Archive a(grid);
        archive::Archive b(grid);
        std::map<std::pair<int, int>, double> model;  // brute-force shadow of `a`
        const int len = 1 + static_cast<int>(rng() % 40);
        for (int step = 0; step < len; ++step, ++ops) {
            const auto bc = random_bc();
            const archive::Cell c = grid.bin(bc);
            const std::pair<int, int> key{c.tsp_bin, c.mc_bin};
            const double f = std::floor(u(rng) * 20.0) / 10.0;  // coarse values force ties
            switch (rng() % 3) {
                case 0: {
                    const double before = a.find(c) ? a.find(c)->fitness : -1.0;
                    a.update(variant(step), f, bc);
                    auto [it, fresh] = model.emplace(key, f);
                    if (!fresh && f > it->second) it->second = f;
                    if (a.find(c)->fitness < before) ++violations["monotonicity"];
                    break;
                }
                case 1: {
                    const archive::Archive before = a;
                    archive::Elite e;
                    e.warrior = variant(step + 7);
                    e.fitness = f + 5.0;  // would win any fitness contest
                    e.bc = bc;
                    a.seed(std::vector<archive::Elite>{e});
                    for (const auto* old : before.elites()) {
                        if (!(*a.find(old->cell) == *old)) ++violations["seed-displaced"];
                    }
                    if (!before.occupied(c)) model.emplace(key, e.fitness);
                    break;
                }
                default:
                    b.update(variant(step + 13), f, bc);
                    break;
            }
            double qd = 0.0;
            for (const auto& [k, v] : model) qd += v;
            const double cov = static_cast<double>(model.size()) / static_cast<double>(grid.total_cells());
            if (std::abs(a.coverage() - cov) > 1e-12) ++violations["coverage"];
            if (std::abs(a.qd_score() - qd) > 1e-9) ++violations["qd-score"];
        }
        const std::vector<archive::Archive> aa{a, a};
        if (!(archive::merge(aa) == a)) ++violations["merge-idempotence"];
        const std::vector<archive::Archive> ab{a, b};
        const archive::Archive m = archive::merge(ab);
        if (m.coverage() + 1e-12 < std::max(a.coverage(), b.coverage())) ++violations["merge-coverage"];
        for (const auto* e : a.elites()) {
            if (m.find(e->cell)->fitness < e->fitness) ++violations["merge-fitness"];
        }
    }
    std::string detail = "sequences=" + std::to_string(kArchiveSequences) + " ops=" + std::to_string(ops);
    for (const auto& [k, v] : violations) detail += " " + k + "=" + std::to_string(v);
    return {violations.empty(), detail};
}

// --- 4. Gossip propagation and churn ----------------------------------------

Outcome gossip_propagation() {
    const auto t0 = std::chrono::steady_clock::now();
    bool ok = true;
    std::string detail;
    for (int n : {4, 8, 16, 32}) {
        // 20 independently seeded clusters x 50 messages.
        const auto r = testing::run_propagation(n, 20, kGossipMessages / 20, 7);
        ok = ok && r.messages == kGossipMessages && r.fraction() >= kPropagationThreshold;
        detail += "N=" + std::to_string(n) + ":" + std::to_string(r.delivered_in_time) + "/" +
                  std::to_string(r.messages) + " ";
    }
    for (int n : {8, 16, 32}) {
        const auto r = testing::run_churn(n, 20, 30, 11);
        ok = ok && r.fraction() >= kChurnThreshold;
        detail += "churn N=" + std::to_string(n) + ":" + fmt(100.0 * r.fraction(), 1) + "% ";
    }
    const double s = seconds_since(t0);
    ok = ok && s < kGossipSeconds;
    detail += "runtime=" + fmt(s, 1) + "s";
    return {ok, detail};
}

// --- 5. No-barrier property --------------------------------------------------

experiment::ExperimentConfig small_ensemble(const std::vector<std::string>& profiles) {
    experiment::ExperimentConfig c;
    c.condition = experiment::Condition::Diverse;
    c.rounds = 4;
    c.iters_per_round = 20;
    c.mars.max_cycles = 2000;
    c.mars.rounds_per_pair = 2;
    c.trial_seeds = {1};
    c.merge_rescore = experiment::MergeRescore::Stored;
    for (std::size_t i = 0; i < profiles.size(); ++i) {
        experiment::NodeSpec n;
        n.id = "n" + std::to_string(i);
        n.op = {{"type", "mock"}, {"profile", profiles[i]}};
        c.nodes.push_back(n);
    }
    return c;
}

Outcome no_barrier() {
    const std::vector<std::string> profiles{"bomber", "replicator", "scanner", "imp"};
    auto round_seconds = [](const nlohmann::json& summary, std::size_t node) {
        std::vector<double> out;
        for (const auto& s : summary["nodes"][node]["round_seconds"]) out.push_back(s.get<double>());
        return out;
    };
    experiment::ExperimentConfig base = small_ensemble(profiles);
    const auto dir = scratch_dir("nobarrier");
    const auto fast = experiment::run_trial(base, 5, dir / "fast");
    experiment::ExperimentConfig slow_cfg = base;
    slow_cfg.nodes[3].latency = kLatencyFactor * base.nodes[3].latency;
    const auto slow = experiment::run_trial(slow_cfg, 5, dir / "slow");
    slow_cfg.barrier = true;
    const auto barrier = experiment::run_trial(slow_cfg, 5, dir / "barrier");
    if (fast.failed || slow.failed || barrier.failed) return {false, "trial failed"};

    double worst = 0.0;
    for (std::size_t i = 0; i < 3; ++i) {
        const auto a = round_seconds(fast.summary, i);
        const auto b = round_seconds(slow.summary, i);
        if (a.size() != b.size()) return {false, "round count differs"};
        for (std::size_t r = 0; r < a.size(); ++r) worst = std::max(worst, std::abs(b[r] - a[r]) / a[r]);
    }
    // Contrast: with a barrier the fast nodes finish only when the slow one does.
    auto finish = [](const fs::path& node_dir) {
        const std::string text = read_file(node_dir / "rounds.jsonl");
        const std::string last = text.substr(text.rfind('\n', text.size() - 2) + 1);
        return nlohmann::json::parse(last)["finished_at"].get<double>();
    };
    const double t_async = finish(slow.dir / "node-n0");
    const double t_barrier = finish(barrier.dir / "node-n0");
    fs::remove_all(dir);
    return {worst <= kNoBarrierTolerance,
            "max relative per-round change for fast nodes=" + fmt(100.0 * worst, 2) + "% (limit 5%); node n0 done at t=" +
                fmt(t_async, 1) + "s async vs " + fmt(t_barrier, 1) + "s with barrier"};
}

// --- 6. Budget parity --------------------------------------------------------

Outcome budget_parity() {
    auto cfg_for = [](std::vector<std::string> profiles) {
        experiment::ExperimentConfig c = small_ensemble(profiles);
        c.condition = profiles.size() == 1 ? experiment::Condition::Solo : experiment::Condition::Diverse;
        c.rounds = 2;
        c.iters_per_round.reset();
        c.total_budget = static_cast<long>(c.rounds) * kSoloT;
        c.mars.max_cycles = 500;
        c.mars.rounds_per_pair = 1;
        return c;
    };
    const auto solo_cfg = cfg_for({"bomber"});
    const auto ens_cfg = cfg_for({"bomber", "replicator", "scanner", "imp"});
    if (solo_cfg.resolved_iters() != kSoloT || ens_cfg.resolved_iters() != kEnsembleT) {
        return {false, "T resolved to " + std::to_string(solo_cfg.resolved_iters()) + " / " +
                           std::to_string(ens_cfg.resolved_iters())};
    }
    const auto dir = scratch_dir("budget");
    const auto solo = experiment::run_experiment(solo_cfg, dir / "solo");
    const auto ens = experiment::run_experiment(ens_cfg, dir / "ensemble");
    // Count calls per round from the per-node round logs.
    auto per_round = [](const fs::path& trial, const nlohmann::json& summary) {
        std::map<int, long> calls;
        for (const auto& n : summary["nodes"]) {
            std::istringstream in(read_file(trial / ("node-" + n["id"].get<std::string>()) / "rounds.jsonl"));
            for (std::string line; std::getline(in, line);) {
                const auto j = nlohmann::json::parse(line);
                calls[j["round"].get<int>()] += j["calls_used"].get<long>();
            }
        }
        return calls;
    };
    const auto s = per_round(solo.trials[0].dir, solo.trials[0].summary);
    const auto e = per_round(ens.trials[0].dir, ens.trials[0].summary);
    bool ok = s.size() == static_cast<std::size_t>(solo_cfg.rounds) && s.size() == e.size();
    std::string detail;
    for (const auto& [r, calls] : s) {
        const long other = e.count(r) ? e.at(r) : -1;
        ok = ok && calls - other == kParityGap;
        detail += "round " + std::to_string(r) + ": " + std::to_string(calls) + " vs " + std::to_string(other) + "; ";
    }
    detail += "totals " + std::to_string(solo.trials[0].calls_logged) + " vs " + std::to_string(ens.trials[0].calls_logged);
    fs::remove_all(dir);
    return {ok, detail};
}

// --- 7. Determinism through the CLI -----------------------------------------

std::map<std::string, std::string> tree(const fs::path& root) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
        if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = read_file(e.path());
    }
    return out;
}

Outcome determinism(const std::string& cli) {
    const auto dir = scratch_dir("determinism");
    experiment::ExperimentConfig c = small_ensemble({"bomber", "replicator", "scanner", "imp"});
    c.rounds = 3;
    c.iters_per_round = 10;
    c.trial_seeds = {1, 2};
    c.merge_rescore = experiment::MergeRescore::Final;
    write_file(dir / "exp.json", c.to_json().dump(2));
    for (const char* run : {"a", "b"}) {
        const std::string cmd = cli + " sim --experiment " + (dir / "exp.json").string() + " --out " +
                                (dir / run / "run").string() + " >/dev/null 2>&1 && " + cli + " report " +
                                (dir / run / "run").string() + " --csv --svg --out " + (dir / run / "report").string() +
                                " >/dev/null 2>&1";
        if (std::system(cmd.c_str()) != 0) return {false, "dei command failed: " + cmd};
    }
    const auto a = tree(dir / "a");
    const auto b = tree(dir / "b");
    std::size_t archives = 0;
    for (const auto& [k, v] : a) archives += k.find("archive.jsonl") != std::string::npos ? 1 : 0;
    const bool same = a == b && !a.empty();
    fs::remove_all(dir);
    return {same && archives > 0, std::to_string(a.size()) + " files (" + std::to_string(archives) +
                                      " archives, reports) " + (same ? "byte-identical" : "DIFFER")};
}

// --- 8. Directional ordering at desk scale ----------------------------------

experiment::ExperimentConfig directional_config(experiment::Condition cond, const std::vector<std::string>& profiles) {
    experiment::ExperimentConfig c;
    c.name = std::string(experiment::to_string(cond));
    c.condition = cond;
    c.rounds = kDirectionalRounds;
    c.total_budget = kDirectionalBudget;
    c.mars.max_cycles = kDirectionalMaxCycles;
    c.mars.rounds_per_pair = 4;
    c.trial_seeds = {1, 2, 3, 4, 5};
    // Coverage does not depend on re-scoring; stored fitness keeps the run short.
    c.merge_rescore = experiment::MergeRescore::Stored;
    c.evaluate_generality = false;
    for (std::size_t i = 0; i < profiles.size(); ++i) {
        experiment::NodeSpec n;
        n.id = "n" + std::to_string(i);
        n.op = {{"type", "mock"}, {"profile", profiles[i]}};
        c.nodes.push_back(n);
    }
    return c;
}

struct ConditionStats {
    std::string label;
    std::vector<double> coverage;
    std::vector<double> qd;
};

ConditionStats run_condition(const std::string& label, const experiment::ExperimentConfig& cfg, const fs::path& dir) {
    const auto res = experiment::run_experiment(cfg, dir / label);
    ConditionStats s{label, {}, {}};
    for (const auto& t : res.trials) {
        if (t.failed) throw std::runtime_error(label + " trial " + std::to_string(t.seed) + " failed: " + t.error);
        s.coverage.push_back(t.summary["merged_final"]["coverage"].get<double>());
        s.qd.push_back(t.summary["merged_final"]["qd_score"].get<double>());
    }
    return s;
}

// Cohen's d with pooled sample std.
double cohens_d(const std::vector<double>& a, const std::vector<double>& b) {
    const auto sa = experiment::summarize(a);
    const auto sb = experiment::summarize(b);
    const double pooled = std::sqrt(((sa.n - 1) * sa.std * sa.std + (sb.n - 1) * sb.std * sb.std) /
                                    static_cast<double>(sa.n + sb.n - 2));
    return pooled > 0.0 ? (sa.mean - sb.mean) / pooled : 0.0;
}

Outcome directional() {
    using experiment::Condition;
    const auto t0 = std::chrono::steady_clock::now();
    const std::vector<std::string> profiles{"bomber", "replicator", "scanner", "imp"};
    const auto dir = scratch_dir("directional");
    const auto diverse = run_condition("diverse", directional_config(Condition::Diverse, profiles), dir);
    std::vector<ConditionStats> others;
    for (const auto& p : profiles) {
        others.push_back(run_condition("homogeneous-" + p,
                                       directional_config(Condition::Homogeneous, {p, p, p, p}), dir));
        others.push_back(run_condition("solo-" + p, directional_config(Condition::Solo, {p}), dir));
    }
    const auto d = experiment::summarize(diverse.coverage);
    bool ok = true;
    std::string detail = "coverage diverse=" + experiment::format_summary(d);
    // The ordering must hold against every homogeneous ensemble and every solo node.
    for (const auto& o : others) {
        const auto s = experiment::summarize(o.coverage);
        ok = ok && d.mean > s.mean;
        detail += "; " + o.label + "=" + experiment::format_summary(s) + " (" +
                  (s.mean > 0 ? "+" + fmt(100.0 * (d.mean - s.mean) / s.mean, 1) + "%" : "n/a") +
                  ", d=" + fmt(cohens_d(diverse.coverage, o.coverage), 2) + ")";
    }
    fs::remove_all(dir);
    detail += "; runtime=" + fmt(seconds_since(t0), 0) + "s";
    return {ok, detail};
}

// --- 9. AXL shim conformance -------------------------------------------------

Outcome axl_shim() {
    gossip::MemoryHub hub;
    const auto a = gossip::PeerId::random(101);
    const auto b = gossip::PeerId::random(102);
    gossip::AxlShim shim_a(hub.attach(a));
    gossip::AxlShim shim_b(hub.attach(b));
    shim_a.start();
    shim_b.start();
    httplib::Client ca("127.0.0.1", shim_a.port());
    httplib::Client cb("127.0.0.1", shim_b.port());

    std::vector<std::string> fails;
    const auto empty = cb.Get("/recv");
    if (!empty || empty->status != 204) fails.push_back("empty queue not 204");

    std::string payload;
    for (int rep = 0; rep < 4; ++rep) {
        for (int i = 0; i < 256; ++i) payload.push_back(static_cast<char>(i));
    }
    const auto sent = ca.Post("/send", httplib::Headers{{"X-Destination-Peer-Id", b.hex()}}, payload,
                              "application/octet-stream");
    if (!sent || sent->status != 200) fails.push_back("send not 200");
    const auto got = cb.Get("/recv");
    if (!got || got->status != 200) {
        fails.push_back("delivery not 200");
    } else {
        if (got->get_header_value("X-From-Peer-Id") != a.hex()) fails.push_back("wrong X-From-Peer-Id");
        if (got->body != payload) fails.push_back("payload differs");
    }
    const auto after = cb.Get("/recv");
    if (!after || after->status != 204) fails.push_back("queue not drained");
    shim_a.stop();
    shim_b.stop();
    std::string detail = "204 on empty, 200 + X-From-Peer-Id, " + std::to_string(payload.size()) + "-byte binary loopback";
    if (!fails.empty()) {
        detail += "; failed:";
        for (const auto& f : fails) detail += " " + f;
    }
    return {fails.empty(), detail};
}

// --- 10. Parser fuzz ---------------------------------------------------------

Outcome parser_fuzz() {
    std::mt19937_64 rng(4242);
    int round_trip_failures = 0;
    for (int i = 0; i < kFuzzCount; ++i) {
        const Warrior w = testing::arbitrary_warrior(rng);
        try {
            if (!(redcode::parse(redcode::serialize(w)) == w)) ++round_trip_failures;
        } catch (const std::exception&) {
            ++round_trip_failures;
        }
    }
    std::vector<std::string> bases;
    for (const auto& e : fs::directory_iterator(data_dir() / "warriors/heldout")) bases.push_back(read_file(e.path()));
    std::sort(bases.begin(), bases.end());
    int rejected = 0;
    int accepted = 0;
    int unexpected = 0;
    for (int i = 0; i < kFuzzCount; ++i) {
        const std::string text = testing::mangle(bases[rng() % bases.size()], rng);
        try {
            redcode::validate(redcode::parse(text));
            ++accepted;
        } catch (const redcode::SyntaxError&) {
            ++rejected;
        } catch (...) {
            ++unexpected;
        }
    }
    return {round_trip_failures == 0 && unexpected == 0,
            "round-trip " + std::to_string(kFuzzCount - round_trip_failures) + "/" + std::to_string(kFuzzCount) +
                "; mangled inputs: " + std::to_string(accepted) + " parsed, " + std::to_string(rejected) +
                " SyntaxError, " + std::to_string(unexpected) + " other"};
}

}  // namespace

int main(int argc, char** argv) {
    if (argc < 2) {
        std::cerr << "usage: acceptance <path-to-dei> [--only N]\n";
        return 2;
    }
    const std::string cli = argv[1];
    int only = 0;
    if (argc == 4 && std::string(argv[2]) == "--only") only = std::atoi(argv[3]);

    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"VM golden behaviours", vm_golden},
        {"fitness oracle equivalence", fitness_oracle},
        {"archive properties", archive_properties},
        {"gossip propagation and churn recovery", gossip_propagation},
        {"no-barrier property", no_barrier},
        {"budget parity", budget_parity},
        {"end-to-end determinism", [&] { return determinism(cli); }},
        {"directional ordering (diverse > homogeneous, diverse > solo)", directional},
        {"AXL shim conformance", axl_shim},
        {"parser fuzz", parser_fuzz},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        if (only != 0 && static_cast<int>(i + 1) != only) continue;
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failed += o.pass ? 0 : 1;
        std::cout << (o.pass ? "PASS" : "FAIL") << " [" << (i + 1) << "] " << criteria[i].first << " :: " << o.detail
                  << std::endl;
    }
    return failed == 0 ? 0 : 1;
}
