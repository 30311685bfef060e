#include "dei/archive.hpp"

#include "dei/common.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace dei::archive {

namespace {

constexpr int kFormatVersion = 1;
constexpr const char* kFormatName = "dei-archive";

}  // namespace

// --- BcGrid ----------------------------------------------------------------

BcGrid::BcGrid()
    : BcGrid(kDefaultBins, kDefaultBins,
             static_cast<double>(redcode::kDefaultMaxLength) * mars::MarsConfig{}.max_cycles) {}

BcGrid::BcGrid(int tsp_bins, int mc_bins, double tsp_max, double tsp_min)
    : tsp_bins_(tsp_bins), mc_bins_(mc_bins), tsp_min_(tsp_min), tsp_max_(tsp_max) {
    if (tsp_bins < 1 || mc_bins < 1) throw PreconditionError("grid needs at least one bin per axis");
    if (!(tsp_min > 0.0) || !(tsp_max > tsp_min)) {
        throw PreconditionError("TSP range must satisfy 0 < tsp_min < tsp_max");
    }
    const double lo = std::log(tsp_min);
    const double span = std::log(tsp_max) - lo;
    tsp_edges_.resize(static_cast<std::size_t>(tsp_bins) + 1);
    for (int k = 0; k <= tsp_bins; ++k) {
        tsp_edges_[static_cast<std::size_t>(k)] = std::exp(lo + span * k / tsp_bins);
    }
    tsp_edges_.front() = tsp_min;
    tsp_edges_.back() = tsp_max;
}

BcGrid BcGrid::for_config(const mars::MarsConfig& cfg, int tsp_bins, int mc_bins) {
    return BcGrid(tsp_bins, mc_bins,
                  static_cast<double>(cfg.max_warrior_length) * static_cast<double>(cfg.max_cycles));
}

Cell BcGrid::bin(const BehavioralCharacteristic& bc) const noexcept {
    // Interior edges at or below tsp give the bin number.
    const auto first = tsp_edges_.begin() + 1;
    const auto last = tsp_edges_.end() - 1;
    const int t = static_cast<int>(std::upper_bound(first, last, bc.tsp) - first);
    int m = static_cast<int>(std::floor(bc.mc * mc_bins_));
    m = std::clamp(m, 0, mc_bins_ - 1);
    return Cell{t, m};
}

std::size_t BcGrid::index(Cell c) const {
    if (c.tsp_bin < 0 || c.tsp_bin >= tsp_bins_ || c.mc_bin < 0 || c.mc_bin >= mc_bins_) {
        throw PreconditionError("cell outside the grid");
    }
    return static_cast<std::size_t>(c.tsp_bin) * static_cast<std::size_t>(mc_bins_) +
           static_cast<std::size_t>(c.mc_bin);
}

Cell BcGrid::cell_at(std::size_t index) const {
    if (index >= total_cells()) throw PreconditionError("cell index outside the grid");
    const auto mb = static_cast<std::size_t>(mc_bins_);
    return Cell{static_cast<int>(index / mb), static_cast<int>(index % mb)};
}

// --- Archive ---------------------------------------------------------------

Archive::Archive(BcGrid grid) : grid_(std::move(grid)), cells_(grid_.total_cells()) {}

bool Archive::update(const Warrior& w, double f, const BehavioralCharacteristic& bc, int round,
                     std::string origin) {
    if (!(f >= 0.0)) throw PreconditionError("elite fitness must be >= 0");
    const Cell c = grid_.bin(bc);
    auto& slot = cells_[grid_.index(c)];
    if (slot && !(f > slot->fitness)) return false;
    if (!slot) ++count_;
    slot = Elite{w, f, bc, c, round, std::move(origin)};
    return true;
}

std::size_t Archive::seed(std::span<const Elite> received) {
    std::size_t placed = 0;
    for (const Elite& r : received) {
        Elite e = r;
        e.cell = grid_.bin(e.bc);
        auto& slot = cells_[grid_.index(e.cell)];
        if (slot) continue;
        slot = std::move(e);
        ++count_;
        ++placed;
    }
    return placed;
}

const Elite& Archive::sample_uniform(std::uint64_t seed) const {
    if (count_ == 0) throw EmptyArchive("cannot sample from an empty archive");
    std::mt19937_64 rng(seed);
    std::size_t k = std::uniform_int_distribution<std::size_t>(0, count_ - 1)(rng);
    for (const auto& slot : cells_) {
        if (!slot) continue;
        if (k == 0) return *slot;
        --k;
    }
    throw EmptyArchive("archive occupancy count out of sync");
}

const Elite* Archive::find(Cell c) const {
    const auto& slot = cells_[grid_.index(c)];
    return slot ? &*slot : nullptr;
}

std::vector<const Elite*> Archive::elites() const {
    std::vector<const Elite*> out;
    out.reserve(count_);
    for (const auto& slot : cells_) {
        if (slot) out.push_back(&*slot);
    }
    return out;
}

double Archive::coverage() const noexcept {
    return static_cast<double>(count_) / static_cast<double>(grid_.total_cells());
}

double Archive::qd_score() const noexcept {
    double s = 0.0;
    for (const auto& slot : cells_) {
        if (slot) s += slot->fitness;
    }
    return s;
}

void Archive::put(Elite e) {
    auto& slot = cells_[grid_.index(e.cell)];
    if (!slot) ++count_;
    slot = std::move(e);
}

std::optional<double> niche_novelty(std::span<const Elite> received, const Archive& previous) {
    if (received.empty()) return std::nullopt;
    std::size_t fresh = 0;
    for (const Elite& e : received) {
        if (!previous.occupied(previous.grid().bin(e.bc))) ++fresh;
    }
    return static_cast<double>(fresh) / static_cast<double>(received.size());
}

Archive merge(std::span<const Archive> archives) {
    if (archives.empty()) return Archive{};
    Archive out(archives.front().grid());
    for (const Archive& a : archives) {
        if (!(a.grid() == out.grid())) throw GridMismatch("archives use different BC grids");
        for (const Elite* e : a.elites()) {
            const Elite* cur = out.find(e->cell);
            if (cur == nullptr || e->fitness > cur->fitness) out.put(*e);
        }
    }
    return out;
}

Archive rescore(const Archive& a, std::span<const Warrior> pool, const mars::MarsConfig& cfg,
                std::uint64_t seed, mars::PairingCache* cache) {
    Archive out(a.grid());
    for (const Elite* e : a.elites()) {
        Elite copy = *e;
        copy.fitness = mars::evaluate(e->warrior, pool, cfg, seed, cache).fitness;
        out.put(std::move(copy));
    }
    return out;
}

// --- Persistence -----------------------------------------------------------

nlohmann::json grid_to_json(const BcGrid& g) {
    return {{"tsp_bins", g.tsp_bins()},
            {"mc_bins", g.mc_bins()},
            {"tsp_min", g.tsp_min()},
            {"tsp_max", g.tsp_max()}};
}

BcGrid grid_from_json(const nlohmann::json& j) {
    return BcGrid(j.at("tsp_bins").get<int>(), j.at("mc_bins").get<int>(),
                  j.at("tsp_max").get<double>(), j.value("tsp_min", 1.0));
}

nlohmann::json warrior_to_json(const Warrior& w, int core_size) {
    Warrior bare = w;
    bare.name.clear();
    bare.author.clear();
    bare.origin.clear();
    return {{"name", w.name},
            {"author", w.author},
            {"origin", w.origin},
            {"hash", redcode::content_hash_hex(w)},
            {"code", redcode::serialize(bare, core_size)}};
}

Warrior warrior_from_json(const nlohmann::json& j, int core_size) {
    Warrior w = redcode::parse(j.at("code").get<std::string>(),
                               redcode::ParseOptions{.core_size = core_size,
                                                     .max_length = redcode::kDefaultMaxLength});
    w.name = j.value("name", "");
    w.author = j.value("author", "");
    w.origin = j.value("origin", "");
    if (j.contains("hash") && j.at("hash").get<std::string>() != redcode::content_hash_hex(w)) {
        throw FormatError("warrior hash does not match its code");
    }
    return w;
}

nlohmann::json elite_to_json(const Elite& e, int core_size) {
    return {{"cell", {e.cell.tsp_bin, e.cell.mc_bin}},
            {"fitness", e.fitness},
            {"bc", {{"tsp", e.bc.tsp}, {"mc", e.bc.mc}}},
            {"round", e.round},
            {"origin", e.origin},
            {"warrior", warrior_to_json(e.warrior, core_size)}};
}

Elite elite_from_json(const nlohmann::json& j, int core_size) {
    Elite e;
    e.cell = Cell{j.at("cell").at(0).get<int>(), j.at("cell").at(1).get<int>()};
    e.fitness = j.at("fitness").get<double>();
    e.bc.tsp = j.at("bc").at("tsp").get<double>();
    e.bc.mc = j.at("bc").at("mc").get<double>();
    e.round = j.value("round", 0);
    e.origin = j.value("origin", "");
    e.warrior = warrior_from_json(j.at("warrior"), core_size);
    return e;
}

std::string to_jsonl(const Archive& a, int core_size) {
    std::string out = nlohmann::json{{"format", kFormatName},
                                     {"version", kFormatVersion},
                                     {"grid", grid_to_json(a.grid())},
                                     {"core_size", core_size},
                                     {"elites", a.size()}}
                          .dump();
    out += '\n';
    for (const Elite* e : a.elites()) {
        out += elite_to_json(*e, core_size).dump();
        out += '\n';
    }
    return out;
}

Archive from_jsonl(std::string_view text) {
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t lineno = 0;
    std::optional<Archive> a;
    int core_size = redcode::kDefaultCoreSize;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& ex) {
            throw FormatError("line " + std::to_string(lineno) + ": " + ex.what());
        }
        try {
            if (!a) {
                if (j.value("format", "") != kFormatName) {
                    throw FormatError("missing archive header");
                }
                if (j.at("version").get<int>() > kFormatVersion) {
                    throw FormatError("archive format version too new");
                }
                core_size = j.value("core_size", redcode::kDefaultCoreSize);
                a.emplace(grid_from_json(j.at("grid")));
                continue;
            }
            Elite e = elite_from_json(j, core_size);
            if (!(a->grid().bin(e.bc) == e.cell)) {
                throw FormatError("elite cell does not match its BC");
            }
            if (a->occupied(e.cell)) throw FormatError("duplicate cell");
            a->put(std::move(e));
        } catch (const FormatError& ex) {
            throw FormatError("line " + std::to_string(lineno) + ": " + ex.what());
        } catch (const nlohmann::json::exception& ex) {
            throw FormatError("line " + std::to_string(lineno) + ": " + ex.what());
        } catch (const redcode::SyntaxError& ex) {
            throw FormatError("line " + std::to_string(lineno) + ": bad warrior code: " + ex.what());
        }
    }
    if (!a) throw FormatError("empty archive file");
    return std::move(*a);
}

void save(const Archive& a, const std::filesystem::path& path, int core_size) {
    write_file(path, to_jsonl(a, core_size));
}

Archive load(const std::filesystem::path& path) { return from_jsonl(read_file(path)); }

}  // namespace dei::archive
