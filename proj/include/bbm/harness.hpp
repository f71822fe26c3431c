#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "bbm/extended.hpp"
#include "bbm/offspring.hpp"
#include "bbm/path.hpp"

namespace bbm::harness {

enum class Status { pass, fail, skipped };
const char* to_string(Status s);

struct Check {
    std::string name;
    Status status = Status::fail;
    double value = 0.0;
    double target = 0.0;
    double se = 0.0;
    double tolerance = 0.0;
    std::string note;
};

/// A CSV table; cells are preformatted so that output is byte-stable.
struct Table {
    std::string name;
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    void add(std::vector<std::string> row) { rows.push_back(std::move(row)); }
};

/// Shortest round-trip decimal ("%.17g"), "inf"/"-inf" for sentinels.
std::string fmt(double x);
std::string fmt(const ExtendedReal& x);

struct RunReport {
    std::string experiment;
    std::vector<Check> checks;
    std::vector<Table> tables;
    nlohmann::json estimates = nlohmann::json::object();
    std::size_t capped = 0;
    double wall_seconds = 0.0;

    bool passed() const;  // no check failed (skipped checks do not count)
    const Check* find(const std::string& name) const;
    void absorb(RunReport other);
};

/// Rescaled path description: "smooth" (cubic spline through the knots) or
/// "grid" (piecewise linear). Knot values come from `values` when given, else
/// from the polynomial sum_k polynomial[k] s^k sampled at `resolution`+1 knots.
struct PathSpec {
    std::string kind = "smooth";
    SplineBoundary boundary = SplineBoundary::clamped_start;
    std::size_t resolution = 64;
    std::vector<double> polynomial;  // empty means f = 0
    std::vector<double> values;

    Path build() const;
    std::string describe() const;
};

/// Top-level configuration. Experiment sections live in `sections` and are read
/// with per-key defaults, so an empty file runs the acceptance-sized defaults.
struct ExperimentConfig {
    std::string name = "all";
    std::uint64_t seed = 1;
    std::optional<std::size_t> replicates;  // overrides every replicate count
    bool bridge_correction = false;
    ModelParams model;
    double se_multiplier = 3.0;
    nlohmann::json sections = nlohmann::json::object();

    nlohmann::json section(const std::string& name) const;
    std::size_t reps(const nlohmann::json& sec, const std::string& key, std::size_t fallback) const;
    nlohmann::json echo() const;
};

ExperimentConfig load_config(const std::filesystem::path& file);
ExperimentConfig config_from_json(const nlohmann::json& j);
PathSpec path_spec_from_json(const nlohmann::json& j);
ModelParams model_from_json(const nlohmann::json& j);

RunReport run_many_to_one(const ExperimentConfig& config);
RunReport run_pgf_bound(const ExperimentConfig& config);
RunReport run_martingale_suite(const ExperimentConfig& config);
RunReport run_cross_measure(const ExperimentConfig& config);
RunReport run_growth(const ExperimentConfig& config);
RunReport run_rate_examples(const ExperimentConfig& config);
RunReport run_counterexample(const ExperimentConfig& config);
RunReport run_diagnose_paths(const ExperimentConfig& config);
RunReport run_all(const ExperimentConfig& config);

/// Writes every table as <out>/<name>.csv, a checks.csv and summary.json.
void write_report(const RunReport& report, const ExperimentConfig& config, const std::filesystem::path& out);

}  // namespace bbm::harness
