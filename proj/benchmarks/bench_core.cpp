#include <benchmark/benchmark.h>

#include "dei/archive.hpp"
#include "dei/gossip.hpp"
#include "dei/mars.hpp"
#include "dei/redcode.hpp"

using namespace dei;

namespace {

const redcode::Warrior kImp = redcode::parse("MOV 0, 1");
const redcode::Warrior kDwarf = redcode::parse("ADD #4, 3\nMOV 2, @2\nJMP -2\nDAT #0, #0");

}  // namespace

static void BM_Parse(benchmark::State& state) {
    const std::string src = redcode::serialize(kDwarf);
    for (auto _ : state) benchmark::DoNotOptimize(redcode::parse(src));
}
BENCHMARK(BM_Parse);

// Imp vs Dwarf runs to max_cycles, so cycles/s is the interpreter speed.
static void BM_Battle(benchmark::State& state) {
    mars::MarsConfig cfg;
    cfg.max_cycles = static_cast<int>(state.range(0));
    const std::vector<redcode::Warrior> ws{kImp, kDwarf};
    std::uint64_t seed = 0;
    for (auto _ : state) benchmark::DoNotOptimize(mars::run_battle(ws, cfg, ++seed));
    state.counters["cycles/s"] = benchmark::Counter(static_cast<double>(state.iterations()) * cfg.max_cycles,
                                                    benchmark::Counter::kIsRate);
}
BENCHMARK(BM_Battle)->Arg(8000)->Arg(80000)->Unit(benchmark::kMillisecond);

static void BM_Evaluate(benchmark::State& state) {
    mars::MarsConfig cfg;
    cfg.max_cycles = 8000;
    cfg.rounds_per_pair = 4;
    const std::vector<redcode::Warrior> pool{kImp, kDwarf};
    std::uint64_t seed = 0;
    for (auto _ : state) benchmark::DoNotOptimize(mars::evaluate(kDwarf, pool, cfg, ++seed));
}
BENCHMARK(BM_Evaluate)->Unit(benchmark::kMillisecond);

static void BM_ArchiveMerge(benchmark::State& state) {
    std::vector<archive::Archive> parts(4);
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (auto& a : parts) {
        for (int i = 0; i < 200; ++i) {
            a.update(kImp, u(rng), {1.0 + u(rng) * 1e6, u(rng)});
        }
    }
    for (auto _ : state) benchmark::DoNotOptimize(archive::merge(parts));
}
BENCHMARK(BM_ArchiveMerge);

static void BM_FrameRoundTrip(benchmark::State& state) {
    gossip::Frame f;
    f.kind = gossip::FrameKind::Publish;
    f.topic = "dei/champions";
    f.msg_id = "id";
    f.body = std::string(static_cast<std::size_t>(state.range(0)), 'x');
    for (auto _ : state) benchmark::DoNotOptimize(gossip::decode_frame(gossip::encode_frame(f)));
    state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations()) * state.range(0));
}
BENCHMARK(BM_FrameRoundTrip)->Arg(256)->Arg(65536);

BENCHMARK_MAIN();
