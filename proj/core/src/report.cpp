#include "dei/common.hpp"
#include "dei/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>

namespace dei::experiment {

namespace {

struct Group {
    std::string condition;
    std::string model;
    std::map<std::string, std::vector<double>> metrics;  // metric -> one value per trial
    // series -> round -> values across trials
    std::map<std::string, std::map<int, std::vector<double>>> series;
};

using GroupKey = std::pair<std::string, std::string>;

std::string model_label(const nlohmann::json& experiment) {
    std::set<std::string> tags;
    for (const auto& n : experiment.at("nodes")) tags.insert(operator_tag(n.value("operator", nlohmann::json::object())));
    if (tags.size() == 1) return *tags.begin();
    std::string out;
    for (const auto& t : tags) out += (out.empty() ? "" : "+") + t;
    return out;
}

std::optional<double> mean_of(const std::vector<double>& xs) {
    if (xs.empty()) return std::nullopt;
    double s = 0.0;
    for (double x : xs) s += x;
    return s / static_cast<double>(xs.size());
}

std::string fixed(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
    return out + "\"";
}

std::string xml_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '&': out += "&amp;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf"};

// Plain line chart: one polyline per group of per-round means.
std::string line_svg(const std::string& title, const std::string& ylabel,
                     const std::vector<std::pair<std::string, std::map<int, double>>>& lines) {
    constexpr double kW = 640, kH = 400, kL = 60, kR = 200, kT = 40, kB = 50;
    int max_round = 1;
    double ymax = 0.0;
    for (const auto& [_, pts] : lines) {
        for (const auto& [r, v] : pts) {
            max_round = std::max(max_round, r);
            ymax = std::max(ymax, v);
        }
    }
    if (ymax <= 0.0) ymax = 1.0;
    ymax *= 1.05;
    const double pw = kW - kL - kR, ph = kH - kT - kB;
    auto x_of = [&](int r) { return kL + (max_round == 1 ? pw / 2 : pw * (r - 1) / (max_round - 1)); };
    auto y_of = [&](double v) { return kT + ph * (1.0 - v / ymax); };

    std::ostringstream o;
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    o << "<text x=\"" << kL << "\" y=\"24\" font-size=\"14\">" << xml_escape(title) << "</text>\n";
    o << "<line x1=\"" << kL << "\" y1=\"" << kT + ph << "\" x2=\"" << kL + pw << "\" y2=\"" << kT + ph
      << "\" stroke=\"black\"/>\n";
    o << "<line x1=\"" << kL << "\" y1=\"" << kT << "\" x2=\"" << kL << "\" y2=\"" << kT + ph
      << "\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 4; ++i) {
        const double v = ymax * i / 4.0;
        o << "<text x=\"" << kL - 6 << "\" y=\"" << y_of(v) + 4 << "\" text-anchor=\"end\">" << fixed(v, 2)
          << "</text>\n";
    }
    for (int r = 1; r <= max_round; ++r) {
        o << "<text x=\"" << x_of(r) << "\" y=\"" << kT + ph + 16 << "\" text-anchor=\"middle\">" << r
          << "</text>\n";
    }
    o << "<text x=\"" << kL + pw / 2 << "\" y=\"" << kH - 10 << "\" text-anchor=\"middle\">round</text>\n";
    o << "<text x=\"16\" y=\"" << kT + ph / 2 << "\" transform=\"rotate(-90 16 " << kT + ph / 2
      << ")\" text-anchor=\"middle\">" << xml_escape(ylabel) << "</text>\n";
    std::size_t idx = 0;
    for (const auto& [label, pts] : lines) {
        const char* color = kPalette[idx % std::size(kPalette)];
        std::string path;
        for (const auto& [r, v] : pts) path += fixed(x_of(r), 1) + "," + fixed(y_of(v), 1) + " ";
        o << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"" << path << "\"/>\n";
        const double ly = kT + 16.0 * idx;
        o << "<line x1=\"" << kL + pw + 12 << "\" y1=\"" << ly << "\" x2=\"" << kL + pw + 32 << "\" y2=\"" << ly
          << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
        o << "<text x=\"" << kL + pw + 36 << "\" y=\"" << ly + 4 << "\">" << xml_escape(label) << "</text>\n";
        ++idx;
    }
    o << "</svg>\n";
    return o.str();
}

}  // namespace

Summary summarize(std::span<const double> xs) {
    if (xs.empty()) throw PreconditionError("cannot summarize an empty sample");
    Summary s;
    s.n = xs.size();
    for (double x : xs) s.mean += x;
    s.mean /= static_cast<double>(s.n);
    if (s.n > 1) {
        double ss = 0.0;
        for (double x : xs) ss += (x - s.mean) * (x - s.mean);
        s.std = std::sqrt(ss / static_cast<double>(s.n - 1));
    }
    return s;
}

std::string format_summary(const std::optional<Summary>& s, int digits) {
    if (!s) return "—";
    if (s->n == 1) return fixed(s->mean, digits);
    return fixed(s->mean, digits) + " ± " + fixed(s->std, digits);
}

ReportOutput report(const std::vector<std::filesystem::path>& run_dirs) {
    if (run_dirs.empty()) throw PreconditionError("report needs at least one run directory");
    std::map<GroupKey, Group> groups;
    std::vector<GroupKey> order;
    std::map<GroupKey, std::map<std::string, std::vector<double>>> merged;

    for (const auto& dir : run_dirs) {
        const auto meta_path = dir / "experiment.json";
        if (!std::filesystem::exists(meta_path)) throw PreconditionError("no experiment.json in " + dir.string());
        const nlohmann::json meta = nlohmann::json::parse(read_file(meta_path));
        const GroupKey key{meta.at("condition").get<std::string>(), model_label(meta)};
        if (!groups.count(key)) {
            order.push_back(key);
            groups[key].condition = key.first;
            groups[key].model = key.second;
        }
        Group& g = groups[key];

        std::vector<std::filesystem::path> trials;
        for (const auto& e : std::filesystem::directory_iterator(dir)) {
            if (e.is_directory() && std::filesystem::exists(e.path() / "summary.json")) trials.push_back(e.path());
        }
        std::sort(trials.begin(), trials.end());
        for (const auto& t : trials) {
            const nlohmann::json s = nlohmann::json::parse(read_file(t / "summary.json"));
            if (s.value("failed", false)) continue;
            std::vector<double> peak, fin, eta;
            std::map<int, std::vector<double>> gen_by_round;
            for (const auto& n : s.at("nodes")) {
                if (!n["peak_generality"].is_null()) peak.push_back(n["peak_generality"].get<double>());
                if (!n["final_generality"].is_null()) fin.push_back(n["final_generality"].get<double>());
                if (!n["mean_niche_novelty"].is_null()) eta.push_back(n["mean_niche_novelty"].get<double>());
                const auto& gens = n.at("generality_by_round");
                for (std::size_t r = 0; r < gens.size(); ++r) {
                    if (!gens[r].is_null()) gen_by_round[static_cast<int>(r + 1)].push_back(gens[r].get<double>());
                }
            }
            if (auto m = mean_of(peak)) g.metrics["peak_generality"].push_back(*m);
            if (auto m = mean_of(fin)) g.metrics["final_generality"].push_back(*m);
            if (auto m = mean_of(eta)) g.metrics["niche_novelty"].push_back(*m);
            for (const auto& [r, xs] : gen_by_round) g.series["generality"][r].push_back(*mean_of(xs));
            for (const auto& m : s.at("merged_by_round")) {
                const int r = m.at("round").get<int>();
                g.series["merged_coverage"][r].push_back(m.at("coverage").get<double>());
                g.series["merged_qd_score"][r].push_back(m.at("qd_score").get<double>());
            }
            const auto& mf = s.at("merged_final");
            if (!mf.is_null()) {
                merged[key]["coverage"].push_back(mf.at("coverage").get<double>());
                merged[key]["qd_score"].push_back(mf.at("qd_score").get<double>());
            }
        }
    }

    ReportOutput out;
    out.main_csv = "condition,model,metric,mean,std,trials,display\n";
    for (const auto& key : order) {
        const Group& g = groups[key];
        for (const char* metric : {"peak_generality", "final_generality", "niche_novelty"}) {
            const auto it = g.metrics.find(metric);
            std::optional<Summary> s;
            if (it != g.metrics.end() && !it->second.empty()) s = summarize(it->second);
            out.main_csv += csv_field(g.condition) + "," + csv_field(g.model) + "," + metric + "," +
                            (s ? fixed(s->mean, 6) : "") + "," + (s ? fixed(s->std, 6) : "") + "," +
                            std::to_string(s ? s->n : 0) + "," + format_summary(s) + "\n";
        }
    }
    out.merged_csv = "condition,model,metric,mean,std,trials,display\n";
    for (const auto& key : order) {
        for (const char* metric : {"coverage", "qd_score"}) {
            const auto& xs = merged[key][metric];
            std::optional<Summary> s;
            if (!xs.empty()) s = summarize(xs);
            out.merged_csv += csv_field(key.first) + "," + csv_field(key.second) + "," + metric + "," +
                              (s ? fixed(s->mean, 6) : "") + "," + (s ? fixed(s->std, 6) : "") + "," +
                              std::to_string(s ? s->n : 0) + "," + format_summary(s) + "\n";
        }
    }
    out.rounds_csv = "condition,model,series,round,mean,std,trials\n";
    std::vector<std::pair<std::string, std::map<int, double>>> gen_lines, qd_lines;
    for (const auto& key : order) {
        const Group& g = groups[key];
        const std::string label = g.condition + " " + g.model;
        for (const auto& [name, by_round] : g.series) {
            std::map<int, double> means;
            for (const auto& [r, xs] : by_round) {
                const Summary s = summarize(xs);
                means[r] = s.mean;
                out.rounds_csv += csv_field(g.condition) + "," + csv_field(g.model) + "," + name + "," +
                                  std::to_string(r) + "," + fixed(s.mean, 6) + "," + fixed(s.std, 6) + "," +
                                  std::to_string(s.n) + "\n";
            }
            if (name == "generality") gen_lines.emplace_back(label, means);
            if (name == "merged_qd_score") qd_lines.emplace_back(label, means);
        }
    }
    out.generality_svg = line_svg("Champion generality on the held-out corpus", "generality", gen_lines);
    out.merged_qd_svg = line_svg("Merged archive QD score", "QD score", qd_lines);
    return out;
}

void write_report(const ReportOutput& r, const std::filesystem::path& out_dir) {
    std::filesystem::create_directories(out_dir);
    write_file(out_dir / "results.csv", r.main_csv);
    write_file(out_dir / "merged.csv", r.merged_csv);
    write_file(out_dir / "rounds.csv", r.rounds_csv);
    write_file(out_dir / "generality.svg", r.generality_svg);
    write_file(out_dir / "merged_qd.svg", r.merged_qd_svg);
}

}  // namespace dei::experiment
