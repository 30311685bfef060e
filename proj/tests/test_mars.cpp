#include "doctest.h"

#include "dei/common.hpp"
#include "dei/mars.hpp"
#include "warrior_gen.hpp"

using namespace dei::mars;
using dei::redcode::Instruction;
using dei::redcode::Opcode;
using dei::redcode::parse;

namespace {

// Direct transcription of the survival-share sum, one timestep at a time.
double oracle_fitness(std::size_t i, const std::vector<std::vector<std::uint8_t>>& masks) {
    const std::size_t n = masks.size();
    const std::size_t t = masks[0].size();
    double f = 0.0;
    for (std::size_t tau = 0; tau < t; ++tau) {
        int denom = 0;
        for (const auto& m : masks) denom += m[tau];
        if (denom == 0) continue;
        f += (static_cast<double>(n) / static_cast<double>(t)) * masks[i][tau] / denom;
    }
    return f;
}

std::vector<std::vector<std::uint8_t>> masks_of(const BattleOutcome& o) {
    std::vector<std::vector<std::uint8_t>> out;
    for (std::size_t i = 0; i < o.n_warriors(); ++i) out.push_back(o.alive_mask(i));
    return out;
}

MarsConfig solo_config(int cycles) {
    MarsConfig cfg;
    cfg.max_cycles = cycles;
    return cfg;
}

// Cell at `offset` from where warrior 0 was loaded.
const Instruction& cell(const BattleOutcome& o, int offset) {
    const int cs = static_cast<int>(o.final_core().size());
    return o.final_core()[static_cast<std::size_t>(((o.placements()[0] + offset) % cs + cs) % cs)];
}

BattleOutcome solo(const std::string& src, int cycles, std::uint64_t seed = 1) {
    const std::vector<Warrior> ws{parse(src)};
    return run_battle(ws, solo_config(cycles), seed);
}

const Warrior kImp = parse("MOV 0, 1");
const Warrior kDat = parse("DAT #0, #0");

}  // namespace

TEST_CASE("config defaults and validation") {
    const MarsConfig cfg;
    CHECK(cfg.core_size == 8000);
    CHECK(cfg.max_cycles == 80000);
    CHECK(cfg.rounds_per_pair == 20);
    CHECK(cfg.min_separation == 100);
    CHECK(cfg.process_limit == 0);
    CHECK(cfg.effective_process_limit() == 8000);
    CHECK_NOTHROW(cfg.validate());

    MarsConfig bad = cfg;
    bad.core_size = 200;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = cfg;
    bad.min_separation = 50;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = cfg;
    bad.process_limit = 8001;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad.process_limit = 64;
    CHECK_NOTHROW(bad.validate());
}

TEST_CASE("fitness matches the spec examples") {
    constexpr int kT = 80000;
    CHECK(fitness(0, BattleOutcome::from_lifespans({kT, kT}, kT)) == 1.0);
    CHECK(fitness(1, BattleOutcome::from_lifespans({kT, kT}, kT)) == 1.0);
    CHECK(fitness(0, BattleOutcome::from_lifespans({0, kT}, kT)) == 0.0);
    const BattleOutcome half = BattleOutcome::from_lifespans({kT, kT / 2}, kT);
    CHECK(fitness(0, half) == doctest::Approx(1.5).epsilon(1e-12));
    CHECK(fitness(0, half) == doctest::Approx(oracle_fitness(0, masks_of(half))).epsilon(1e-12));
    CHECK(fitness(0, half) + fitness(1, half) <= 2.0 + 1e-12);
}

TEST_CASE("fitness agrees with the brute-force oracle on random lifespans") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 500; ++trial) {
        const int t = 1 + static_cast<int>(rng() % 60);
        const std::size_t n = 1 + rng() % 5;
        std::vector<int> lifes;
        for (std::size_t i = 0; i < n; ++i) lifes.push_back(static_cast<int>(rng() % (t + 1)));
        const BattleOutcome o = BattleOutcome::from_lifespans(lifes, t);
        const auto masks = masks_of(o);
        double sum = 0.0;
        bool always_someone = true;
        for (int tau = 1; tau <= t; ++tau) {
            bool any = false;
            for (std::size_t i = 0; i < n; ++i) any = any || o.alive(i, tau);
            always_someone = always_someone && any;
        }
        for (std::size_t i = 0; i < n; ++i) {
            const double f = fitness(i, o);
            CHECK(f == doctest::Approx(oracle_fitness(i, masks)).epsilon(1e-12));
            CHECK(f >= 0.0);
            CHECK(f <= static_cast<double>(n) + 1e-12);
            sum += f;
        }
        CHECK(sum <= static_cast<double>(n) + 1e-9);
        if (always_someone) CHECK(sum == doctest::Approx(static_cast<double>(n)).epsilon(1e-12));
    }
}

TEST_CASE("Imp alone touches one new cell per cycle") {
    for (int cycles : {1, 2, 3, 17}) {
        const BattleOutcome o = solo("MOV 0, 1", cycles);
        CHECK(o.lifespan(0) == cycles);
        CHECK(o.touched_count(0) == static_cast<std::size_t>(cycles + 1));
    }
    const BattleOutcome full = solo("MOV 0, 1", 80000);
    CHECK(full.lifespan(0) == 80000);
    CHECK(full.touched_count(0) == 8000);
    CHECK(full.memory_coverage(0) == 1.0);
}

TEST_CASE("DAT vs Imp: the DAT warrior dies in the first cycle") {
    const std::vector<Warrior> ws{kDat, kImp};
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const BattleOutcome o = run_battle(ws, MarsConfig{}, seed);
        CHECK(o.lifespan(0) == 0);
        CHECK(o.lifespan(1) == 80000);
        CHECK(o.cycles_run() == 1);
        CHECK_FALSE(o.alive(0, 1));
        CHECK(o.alive(1, 80000));
    }
}

TEST_CASE("Imp vs Imp: both alive at the last cycle") {
    const std::vector<Warrior> ws{kImp, kImp};
    const BattleOutcome o = run_battle(ws, MarsConfig{}, 5);
    CHECK(o.lifespan(0) == 80000);
    CHECK(o.lifespan(1) == 80000);
    CHECK(fitness(0, o) == 1.0);
}

TEST_CASE("Dwarf hand-stepped for two loops") {
    const BattleOutcome o =
        solo(dei::read_file(dei::data_dir() / "warriors/seeds/dwarf.red"), 6);
    CHECK(cell(o, 3) == Instruction{Opcode::DAT, dei::redcode::Modifier::F,
                                    dei::redcode::Mode::Immediate, dei::redcode::Mode::Immediate, 0, 8});
    CHECK(cell(o, 7).b_value == 4);
    CHECK(cell(o, 11).b_value == 8);
    CHECK(cell(o, 15).b_value == 0);
    CHECK(o.touched_count(0) == 6);
}

TEST_CASE("division by zero writes the other field, then kills the process") {
    const BattleOutcome o = solo("DIV.F 1, 2\nDAT #0, #3\nDAT #8, #6", 5);
    CHECK(o.lifespan(0) == 0);
    CHECK(cell(o, 2).a_value == 8);
    CHECK(cell(o, 2).b_value == 2);
}

TEST_CASE("post-increment and A-predecrement addressing") {
    const BattleOutcome post = solo("MOV.AB #7, >1\nDAT #0, #1\nDAT #0, #0\nJMP 0", 1);
    CHECK(cell(post, 1).b_value == 2);
    CHECK(cell(post, 2).b_value == 7);

    const BattleOutcome pre = solo("MOV.A #5, {1\nDAT #2, #0\nDAT 0, 0", 1);
    CHECK(cell(pre, 1).a_value == 1);
    CHECK(cell(pre, 2).a_value == 5);
}

TEST_CASE("predecrement cells count towards memory coverage") {
    // Each cycle touches pc, the decremented pointer cell and one new target.
    const BattleOutcome o = solo("JMP 0, <-5", 10);
    CHECK(o.touched_count(0) == 12);
}

TEST_CASE("DJN counts down through an immediate B field") {
    const BattleOutcome o = solo("DJN 0, #3", 100);
    CHECK(o.lifespan(0) == 3);
    CHECK(cell(o, 0).b_value == 0);
}

TEST_CASE("SEQ.I compares whole instructions") {
    CHECK(solo("SEQ.I 3, 4\nDAT 0, 0\nJMP 0\nNOP 1, 1\nNOP 1, 1", 50).lifespan(0) == 50);
    CHECK(solo("SEQ.I 3, 4\nDAT 0, 0\nJMP 0\nNOP 1, 1\nNOP 1, 2", 50).lifespan(0) == 1);
    CHECK(solo("SNE.I 3, 4\nDAT 0, 0\nJMP 0\nNOP 1, 1\nNOP 1, 2", 50).lifespan(0) == 50);
}

TEST_CASE("JMZ.F needs both fields zero, JMN.F either non-zero") {
    CHECK(solo("JMZ.F 2, 1\nDAT #0, #1\nJMP 0", 20).lifespan(0) == 1);
    CHECK(solo("JMZ.F 2, 1\nDAT #0, #0\nJMP 0", 20).lifespan(0) == 20);
    CHECK(solo("JMN.F 2, 1\nDAT #0, #1\nJMP 0", 20).lifespan(0) == 20);
    CHECK(solo("JMN.F 2, 1\nDAT #0, #0\nJMP 0", 20).lifespan(0) == 1);
}

TEST_CASE("SPL queues the next instruction before the new process") {
    std::vector<int> pcs;
    const std::vector<Warrior> ws{parse("SPL 2\nDAT 0, 0\nJMP 0")};
    const BattleOutcome o = run_battle(ws, solo_config(4), 3, [&](const TraceEvent& ev) {
        pcs.push_back(ev.pc);
    });
    const int base = o.placements()[0];
    REQUIRE(pcs.size() == 4);
    CHECK(pcs[0] == base);
    CHECK(pcs[1] == base + 1);
    CHECK(pcs[2] == base + 2);
    CHECK(pcs[3] == base + 2);
}

TEST_CASE("process limit caps SPL growth") {
    // 1 + 2 + 4 + 8 executions unlimited, 9 with three slots; the last one kills.
    const std::string cascade = "SPL 1\nSPL 1\nSPL 1\nDAT 0, 0";
    CHECK(solo(cascade, 100).lifespan(0) == 14);
    MarsConfig cfg = solo_config(100);
    cfg.process_limit = 3;
    const std::vector<Warrior> ws{parse(cascade)};
    CHECK(run_battle(ws, cfg, 1).lifespan(0) == 8);
}

TEST_CASE("placement keeps the configured separation") {
    MarsConfig cfg;
    cfg.max_cycles = 1;
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        const std::vector<Warrior> two{kImp, kImp};
        const auto p2 = run_battle(two, cfg, seed).placements();
        const int d = ((p2[1] - p2[0]) % 8000 + 8000) % 8000;
        CHECK(d >= 100);
        CHECK(8000 - d >= 100);

        const std::vector<Warrior> three{kImp, kImp, kImp};
        const auto p3 = run_battle(three, cfg, seed).placements();
        for (std::size_t i = 0; i < 3; ++i) {
            for (std::size_t j = i + 1; j < 3; ++j) {
                const int dd = ((p3[j] - p3[i]) % 8000 + 8000) % 8000;
                CHECK(std::min(dd, 8000 - dd) >= 100);
            }
        }
    }
}

TEST_CASE("warriors that cannot fit raise PlacementError") {
    MarsConfig cfg;
    cfg.core_size = 250;
    const std::vector<Warrior> three{kImp, kImp, kImp};
    CHECK_THROWS_AS(run_battle(three, cfg, 1), PlacementError);
}

TEST_CASE("over-long warriors raise ConfigError") {
    MarsConfig cfg;
    cfg.max_warrior_length = 1;
    cfg.min_separation = 1;
    const std::vector<Warrior> ws{parse("MOV 0, 1\nDAT 0, 0")};
    CHECK_THROWS_AS(run_battle(ws, cfg, 1), ConfigError);
}

TEST_CASE("fuzzed battles: determinism, closure and fitness bounds") {
    std::mt19937_64 rng(2024);
    MarsConfig cfg;
    cfg.core_size = 256;
    cfg.max_cycles = 600;
    cfg.max_warrior_length = 20;
    cfg.min_separation = 20;
    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t n = 2 + rng() % 3;
        std::vector<Warrior> ws;
        for (std::size_t i = 0; i < n; ++i) ws.push_back(dei::testing::arbitrary_warrior(rng, 256, 20));
        const std::uint64_t seed = rng();
        std::vector<TraceEvent> trace;
        const BattleOutcome a = run_battle(ws, cfg, seed, [&](const TraceEvent& e) { trace.push_back(e); });
        const BattleOutcome b = run_battle(ws, cfg, seed);
        for (std::size_t i = 0; i < n; ++i) {
            CHECK(a.lifespan(i) == b.lifespan(i));
            CHECK(a.touched(i) == b.touched(i));
            CHECK(a.touched(i).size() == 256);
        }
        CHECK(a.final_core() == b.final_core());
        for (const Instruction& in : a.final_core()) {
            CHECK((in.a_value >= 0 && in.a_value < 256));
            CHECK((in.b_value >= 0 && in.b_value < 256));
        }
        for (const TraceEvent& e : trace) CHECK((e.pc >= 0 && e.pc < 256));

        const auto masks = masks_of(a);
        double sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t t = 1; t < masks[i].size(); ++t) CHECK(masks[i][t] <= masks[i][t - 1]);
            const double f = fitness(i, a);
            CHECK(f == doctest::Approx(oracle_fitness(i, masks)).epsilon(1e-12));
            sum += f;
        }
        CHECK(sum <= static_cast<double>(n) + 1e-9);
    }
}

TEST_CASE("evaluate: Imp against Imp and DAT against anything") {
    const std::vector<Warrior> imp_pool{kImp};
    const Evaluation e = evaluate(kImp, imp_pool, MarsConfig{}, 9);
    CHECK(e.fitness == 1.0);
    CHECK(e.bc.mc >= 0.99);
    CHECK(e.bc.mc <= 1.0);
    CHECK(e.bc.tsp == 80000.0);

    const std::vector<Warrior> pool{kImp, parse(dei::read_file(dei::data_dir() / "warriors/seeds/dwarf.red"))};
    const Evaluation d = evaluate(kDat, pool, MarsConfig{}, 9);
    CHECK(d.fitness == 0.0);
    CHECK(d.bc.tsp == 0.0);

    CHECK_THROWS_AS(evaluate(kImp, std::vector<Warrior>{}, MarsConfig{}, 1), dei::PreconditionError);
}

TEST_CASE("evaluate is deterministic and the cache is transparent") {
    MarsConfig cfg;
    cfg.max_cycles = 4000;
    cfg.rounds_per_pair = 5;
    const Warrior dwarf = parse(dei::read_file(dei::data_dir() / "warriors/seeds/dwarf.red"));
    const Warrior mice = parse(dei::read_file(dei::data_dir() / "warriors/seeds/mice.red"));
    const std::vector<Warrior> pool{kImp, dwarf};
    const Evaluation a = evaluate(mice, pool, cfg, 77);
    const Evaluation b = evaluate(mice, pool, cfg, 77);
    CHECK(a.fitness == b.fitness);
    CHECK(a.bc == b.bc);

    PairingCache cache(cfg);
    const Evaluation c = evaluate(mice, pool, cfg, 77, &cache);
    const Evaluation d = evaluate(mice, pool, cfg, 77, &cache);
    CHECK(c.fitness == a.fitness);
    CHECK(c.bc == a.bc);
    CHECK(d.bc == a.bc);
    CHECK(cache.misses() == 2);
    CHECK(cache.hits() == 2);

    PairingCache other(MarsConfig{});
    CHECK_THROWS_AS(evaluate(mice, pool, cfg, 77, &other), dei::PreconditionError);
}

TEST_CASE("win_tie predicate") {
    MarsConfig cfg;
    CHECK(win_tie(kImp, kImp, cfg, 1));
    CHECK(win_tie(kImp, kDat, cfg, 1));
    CHECK_FALSE(win_tie(kDat, kImp, cfg, 1));
    const PairingStats s = play_pairing(kImp, kImp, cfg, 1);
    CHECK(s.ties == 20);
    CHECK(s.battles == 20);
}
