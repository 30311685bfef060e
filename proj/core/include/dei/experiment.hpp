#pragma once

// Experiment orchestration: solo / homogeneous / diverse conditions at equal
// operator-call budget, generality on a held-out corpus, merged archives,
// and the CSV/SVG reporter.

#include "dei/drq.hpp"
#include "dei/gossip.hpp"

#include <filesystem>
#include <nlohmann/json.hpp>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace dei::experiment {

using redcode::Warrior;

// Logged operator calls disagree with the configured budget.
class BudgetMismatch : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class Condition { Solo, Homogeneous, Diverse };
std::string_view to_string(Condition c);
Condition condition_from_string(std::string_view s);

// How the merged archive compares elites coming from different nodes.
enum class MergeRescore {
    Stored,  // use the fitness each node stored
    Final,   // re-measure the final merged archive against the shared pool
};

struct NodeSpec {
    std::string id;
    // {"type":"mock","profile":"bomber"} or {"type":"mock","bias":{...}} or
    // {"type":"llm","model":...,"base_url":...,"record":...,"replay":...}
    nlohmann::json op = {{"type", "mock"}, {"profile", "uniform"}};
    // Simulated seconds per operator call.
    double latency = 1.0;
};

struct TransportSpec {
    std::string type = "sim";  // "sim" or "tcp"
    gossip::SimNetworkConfig sim;
};

struct ExperimentConfig {
    std::string name = "experiment";
    Condition condition = Condition::Solo;
    int rounds = 10;
    // Whole-run operator calls across all nodes. When set and
    // iters_per_round is not, T = total_budget / (rounds * nodes).
    std::optional<long> total_budget;
    std::optional<int> iters_per_round;
    double p_new = 0.1;
    std::optional<std::size_t> champion_window = 5;
    mars::MarsConfig mars;
    int tsp_bins = archive::BcGrid::kDefaultBins;
    int mc_bins = archive::BcGrid::kDefaultBins;
    std::filesystem::path seeds_dir;    // empty: bundled seeds
    std::filesystem::path heldout_dir;  // empty: bundled held-out corpus
    std::vector<std::uint64_t> trial_seeds{1, 2, 3, 4, 5};
    std::vector<NodeSpec> nodes;
    TransportSpec transport;
    gossip::GossipConfig gossip;
    // Wait for every node to finish round r before anyone starts r+1.
    bool barrier = false;
    MergeRescore merge_rescore = MergeRescore::Final;
    // Off skips the held-out battles; generality fields are then null.
    bool evaluate_generality = true;
    std::string topic = "dei/champions";

    // T after resolving total_budget.
    int resolved_iters() const;
    long configured_calls() const { return static_cast<long>(rounds) * resolved_iters() * static_cast<long>(nodes.size()); }
    // Structural checks, identity rules per condition, and budget rounding.
    void validate() const;

    nlohmann::json to_json() const;
    static ExperimentConfig from_json(const nlohmann::json& j);
    static ExperimentConfig load(const std::filesystem::path& path);
};

nlohmann::json mars_to_json(const mars::MarsConfig& m);
// Missing keys keep their defaults; the result is validated.
mars::MarsConfig mars_from_json(const nlohmann::json& j);

// Warriors in *.red files under dir, sorted by file name.
std::vector<Warrior> load_corpus(const std::filesystem::path& dir, const redcode::ParseOptions& opts = {});
std::filesystem::path default_seeds_dir();
std::filesystem::path default_heldout_dir();

// Fraction of the corpus that w beats or ties. Throws PreconditionError on an
// empty corpus.
double generality(const Warrior& w, std::span<const Warrior> corpus, const mars::MarsConfig& cfg,
                  std::uint64_t seed, mars::PairingCache* cache = nullptr);

std::shared_ptr<mutation::MutationOperator> make_operator(const nlohmann::json& spec,
                                                          const redcode::ParseOptions& opts);
// identity().tag() of the operator make_operator would build, without building it.
std::string operator_tag(const nlohmann::json& spec);

struct TrialResult {
    std::uint64_t seed = 0;
    bool failed = false;
    std::string error;
    long calls_logged = 0;
    std::filesystem::path dir;
    nlohmann::json summary;
};

struct ExperimentResult {
    std::filesystem::path dir;
    std::vector<TrialResult> trials;
};

// Runs every trial seed into out_dir/trial-<seed>/. Throws BudgetMismatch
// when a completed trial logged a call count other than configured_calls().
ExperimentResult run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& out_dir);

// One trial; exposed for tests.
TrialResult run_trial(const ExperimentConfig& cfg, std::uint64_t seed, const std::filesystem::path& dir);

// --- Reporting -------------------------------------------------------------

struct Summary {
    double mean = 0.0;
    double std = 0.0;  // sample std; 0 with one value
    std::size_t n = 0;
};
// Throws PreconditionError on an empty input.
Summary summarize(std::span<const double> xs);
// "0.700 ± 0.050", or "0.650" for a single value, or "—" when absent.
std::string format_summary(const std::optional<Summary>& s, int digits = 3);

struct ReportOutput {
    std::string main_csv;    // condition,model,metric,mean,std,trials,display
    std::string merged_csv;  // final merged archive per condition
    std::string rounds_csv;  // per-round series used by the plots
    std::string generality_svg;
    std::string merged_qd_svg;
};

// Pure function of the run directories' contents. Throws PreconditionError on
// an empty list.
ReportOutput report(const std::vector<std::filesystem::path>& run_dirs);
void write_report(const ReportOutput& r, const std::filesystem::path& out_dir);

}  // namespace dei::experiment
