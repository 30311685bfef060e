#pragma once

// MAP-Elites archive over (TSP, MC) and the archive-level metrics.

#include "dei/mars.hpp"

#include <filesystem>
#include <nlohmann/json.hpp>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace dei::archive {

using mars::BehavioralCharacteristic;
using redcode::Warrior;

class EmptyArchive : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class GridMismatch : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Cell {
    int tsp_bin = 0;
    int mc_bin = 0;
    bool operator==(const Cell&) const = default;
};

// TSP axis is log-spaced over [tsp_min, tsp_max]; MC is linear over [0, 1].
// Out-of-range values clamp to the edge bins.
class BcGrid {
public:
    static constexpr int kDefaultBins = 10;

    BcGrid();
    BcGrid(int tsp_bins, int mc_bins, double tsp_max, double tsp_min = 1.0);

    // Grid for a MarsConfig: TSP spans [1, max_warrior_length x max_cycles].
    static BcGrid for_config(const mars::MarsConfig& cfg, int tsp_bins = kDefaultBins,
                             int mc_bins = kDefaultBins);

    int tsp_bins() const noexcept { return tsp_bins_; }
    int mc_bins() const noexcept { return mc_bins_; }
    double tsp_min() const noexcept { return tsp_min_; }
    double tsp_max() const noexcept { return tsp_max_; }
    std::size_t total_cells() const noexcept {
        return static_cast<std::size_t>(tsp_bins_) * static_cast<std::size_t>(mc_bins_);
    }
    const std::vector<double>& tsp_edges() const noexcept { return tsp_edges_; }

    Cell bin(const BehavioralCharacteristic& bc) const noexcept;
    std::size_t index(Cell c) const;
    Cell cell_at(std::size_t index) const;

    bool operator==(const BcGrid& o) const noexcept {
        return tsp_bins_ == o.tsp_bins_ && mc_bins_ == o.mc_bins_ && tsp_min_ == o.tsp_min_ &&
               tsp_max_ == o.tsp_max_;
    }

private:
    int tsp_bins_;
    int mc_bins_;
    double tsp_min_;
    double tsp_max_;
    std::vector<double> tsp_edges_;
};

struct Elite {
    Warrior warrior;
    double fitness = 0.0;
    BehavioralCharacteristic bc;
    Cell cell;
    int round = 0;
    std::string origin;

    bool operator==(const Elite&) const = default;
};

class Archive {
public:
    explicit Archive(BcGrid grid = BcGrid{});

    const BcGrid& grid() const noexcept { return grid_; }

    // MAP-Elites insertion: accepted iff the cell is empty or f strictly beats
    // the incumbent.
    bool update(const Warrior& w, double f, const BehavioralCharacteristic& bc, int round = 0,
                std::string origin = {});

    // Inserts into empty cells only; returns how many were placed.
    std::size_t seed(std::span<const Elite> received);

    const Elite& sample_uniform(std::uint64_t seed) const;

    const Elite* find(Cell c) const;
    bool occupied(Cell c) const { return find(c) != nullptr; }
    std::size_t size() const noexcept { return count_; }
    bool empty() const noexcept { return count_ == 0; }
    // Occupied cells in ascending cell index.
    std::vector<const Elite*> elites() const;

    double coverage() const noexcept;
    double qd_score() const noexcept;

    // Replaces the occupant of e.cell unconditionally. Used by merge and load.
    void put(Elite e);

    bool operator==(const Archive&) const = default;

private:
    BcGrid grid_;
    std::vector<std::optional<Elite>> cells_;
    std::size_t count_ = 0;
};

// Fraction of received elites whose cell is empty in `previous`; absent when
// nothing was received.
std::optional<double> niche_novelty(std::span<const Elite> received, const Archive& previous);

// Per cell, the highest stored fitness; ties keep the earlier archive.
Archive merge(std::span<const Archive> archives);

// Copy with every stored fitness re-measured against `pool`. Cells and BCs are
// kept so the archive layout does not change.
Archive rescore(const Archive& a, std::span<const Warrior> pool, const mars::MarsConfig& cfg,
                std::uint64_t seed, mars::PairingCache* cache = nullptr);

// --- Persistence -----------------------------------------------------------

nlohmann::json grid_to_json(const BcGrid& g);
BcGrid grid_from_json(const nlohmann::json& j);

nlohmann::json warrior_to_json(const Warrior& w, int core_size = redcode::kDefaultCoreSize);
Warrior warrior_from_json(const nlohmann::json& j, int core_size = redcode::kDefaultCoreSize);

nlohmann::json elite_to_json(const Elite& e, int core_size = redcode::kDefaultCoreSize);
Elite elite_from_json(const nlohmann::json& j, int core_size = redcode::kDefaultCoreSize);

// Header line with the grid, then one elite per line in cell order.
std::string to_jsonl(const Archive& a, int core_size = redcode::kDefaultCoreSize);
Archive from_jsonl(std::string_view text);
void save(const Archive& a, const std::filesystem::path& path,
          int core_size = redcode::kDefaultCoreSize);
Archive load(const std::filesystem::path& path);

}  // namespace dei::archive
