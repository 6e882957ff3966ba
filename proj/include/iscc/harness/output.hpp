#pragma once

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "iscc/harness/experiment.hpp"

namespace iscc {

/*! Fixed-format number for CSV output; empty for NaN. */
inline std::string fmt(double v)
{
    if (std::isnan(v)) return "";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

inline std::string pair_label(const ClassPair& p) { return std::to_string(p.first) + "-" + std::to_string(p.second); }

/*! CSV fields never contain commas except in error messages; those are quoted. */
inline std::string csv_field(const std::string& s)
{
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char ch : s) {
        if (ch == '"') q += '"';
        q += ch == '\n' ? ' ' : ch;
    }
    return q + "\"";
}

inline std::string runs_csv(const std::vector<RunRecord>& recs, bool timing)
{
    std::ostringstream os;
    os << "scheme,cell,seed,alpha,min_pair,accuracy,ci_halfwidth,outer_iters,wall_ms,cell_value,kkt,status\n";
    for (const auto& r : recs)
        os << r.scheme << ',' << r.cell << ',' << r.seed << ',' << fmt(r.alpha) << ','
           << (r.ok() ? pair_label(r.min_pair) : "") << ',' << fmt(r.accuracy) << ',' << fmt(r.ci_halfwidth) << ','
           << r.outer_iters << ',' << (timing ? fmt(r.wall_ms) : "") << ',' << fmt(r.cell_value) << ',' << fmt(r.kkt)
           << ',' << csv_field(r.status) << '\n';
    return os.str();
}

inline std::string pairs_csv(const std::vector<RunRecord>& recs, int L)
{
    std::ostringstream os;
    os << "scheme,cell,seed,pair,gain\n";
    auto pairs = class_pairs(L);
    for (const auto& r : recs) {
        if (!r.ok()) continue;
        for (std::size_t p = 0; p < pairs.size() && static_cast<int>(p) < r.pair_gains.size(); ++p)
            os << r.scheme << ',' << r.cell << ',' << r.seed << ',' << pair_label(pairs[p]) << ','
               << fmt(r.pair_gains(static_cast<int>(p))) << '\n';
    }
    return os.str();
}

struct CellSummary {
    int cell = 0;
    double cell_value = 0.0;
    std::string scheme;
    int runs = 0;
    int failed = 0;
    double mean_alpha = 0.0, ci_alpha = 0.0;
    double mean_accuracy = 0.0, ci_accuracy = 0.0;
};

/*! Mean and 95% normal half-width over seeds for each (cell, scheme); failed runs are counted, not averaged. */
inline std::vector<CellSummary> aggregate(const std::vector<RunRecord>& recs, const std::vector<std::string>& schemes)
{
    std::map<std::pair<int, int>, std::vector<const RunRecord*>> groups;
    for (const auto& r : recs) {
        int s = static_cast<int>(std::find(schemes.begin(), schemes.end(), r.scheme) - schemes.begin());
        groups[{r.cell, s}].push_back(&r);
    }
    auto mean_ci = [](const std::vector<double>& v, double& mean, double& ci) {
        mean = ci = std::numeric_limits<double>::quiet_NaN();
        if (v.empty()) return;
        double s = 0.0;
        for (double x : v) s += x;
        mean = s / v.size();
        if (v.size() < 2) {
            ci = 0.0;
            return;
        }
        double q = 0.0;
        for (double x : v) q += (x - mean) * (x - mean);
        ci = 1.959963984540054 * std::sqrt(q / (v.size() - 1) / v.size());
    };
    std::vector<CellSummary> out;
    for (const auto& [key, rs] : groups) {
        CellSummary c;
        c.cell = key.first;
        c.scheme = schemes[key.second];
        c.cell_value = rs.front()->cell_value;
        std::vector<double> a, acc;
        for (const RunRecord* r : rs) {
            ++c.runs;
            if (!r->ok()) {
                ++c.failed;
                continue;
            }
            a.push_back(r->alpha);
            acc.push_back(r->accuracy);
        }
        mean_ci(a, c.mean_alpha, c.ci_alpha);
        mean_ci(acc, c.mean_accuracy, c.ci_accuracy);
        out.push_back(c);
    }
    return out;
}

inline std::string aggregate_csv(const std::vector<CellSummary>& cs, const std::string& axis)
{
    std::ostringstream os;
    os << "axis,cell,cell_value,scheme,runs,failed,mean_alpha,ci_alpha,mean_accuracy,ci_accuracy\n";
    for (const auto& c : cs)
        os << axis << ',' << c.cell << ',' << fmt(c.cell_value) << ',' << c.scheme << ',' << c.runs << ',' << c.failed
           << ',' << fmt(c.mean_alpha) << ',' << fmt(c.ci_alpha) << ',' << fmt(c.mean_accuracy) << ','
           << fmt(c.ci_accuracy) << '\n';
    return os.str();
}

/*! Writes runs.csv, pairs.csv, aggregate.csv and manifest.json into dir (created if missing). */
inline void emit_outputs(const std::vector<RunRecord>& recs, const ExperimentConfig& cfg, const std::string& dir, int L)
{
    require(!recs.empty(), "emit_outputs: no records");
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw std::runtime_error("cannot create output directory " + dir + ": " + ec.message());
    const fs::path base(dir);
    write_text_file((base / "runs.csv").string(), runs_csv(recs, cfg.timing));
    write_text_file((base / "pairs.csv").string(), pairs_csv(recs, L));
    write_text_file((base / "aggregate.csv").string(), aggregate_csv(aggregate(recs, cfg.schemes), cfg.sweep.axis));

    std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char stamp[32];
    std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    int failed = 0;
    for (const auto& r : recs) failed += !r.ok();
    json manifest{{"config_hash", config_hash(cfg)},
                  {"config", to_json(cfg)},
                  {"records", recs.size()},
                  {"failed", failed},
                  {"files", {"runs.csv", "pairs.csv", "aggregate.csv"}},
                  {"created_utc", stamp}};
    write_text_file((base / "manifest.json").string(), manifest.dump(2) + "\n");
}

} // namespace iscc
