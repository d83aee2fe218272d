#pragma once

// Config-driven runs behind the command-line front end: dataset generation,
// single estimates, replicate experiments and asymptotics reports.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hypoips/registry.hpp"

namespace hypoips {

struct ExperimentConfig {
    std::string model;
    std::vector<double> theta_true;
    ExperimentDesign design;  // design.seed mirrors seed
    InitialLaw initial;
    int replicates = 1;
    std::vector<Method> methods{Method::LG};
    std::vector<ObservationMode> modes{ObservationMode::Complete};
    AdamConfig adam;
    AdamConfig adam_partial;
    double bound_margin = 0.5;
    std::vector<Interval> bounds;
    std::uint64_t seed = 0;
    std::string output_dir = "out";
    int workers = 1;
    /// Drops the dt^2/2 generator term from the smooth LG mean.
    bool drop_second_order = false;
    std::vector<double> prior_mean;
    std::vector<std::vector<double>> prior_cov;
    FactorValidation validation = FactorValidation::FirstStep;
    /// Dataset CSV for `estimate`; empty means simulate replicate 0.
    std::string dataset;
    int mc_replicas = 4;
    /// Estimates file for the CLT diagnostic in `asymptotics`; optional.
    std::string estimates_csv;

    ParameterVector truth() const;
    EstimationOptions estimation_options() const;
    /// ADAM settings for one run; uniform starts are keyed by (seed, replicate).
    AdamConfig adam_for(ObservationMode mode, int replicate) const;
};

/// Parses a config, filling defaults and checking it against the model.
/// Every problem is reported as ConfigError.
ExperimentConfig config_from_json(const nlohmann::json& j);
/// Fully materialized form; config_from_json(config_to_json(c)) == c.
nlohmann::json config_to_json(const ExperimentConfig& c);
ExperimentConfig load_config(const std::filesystem::path& path);

bool operator==(const ExperimentConfig& a, const ExperimentConfig& b);

struct RunOutcome {
    int attempted = 0;
    int failed = 0;
    bool all_failed() const noexcept { return attempted > 0 && failed == attempted; }
};

/// rep{k}.csv / rep{k}.meta.json for every replicate plus manifest.json.
RunOutcome run_simulate(const ExperimentConfig& cfg, const std::filesystem::path& out);
/// estimate.json with one result per configured method.
RunOutcome run_estimate(const ExperimentConfig& cfg, const std::filesystem::path& out);
/// estimates.csv, timings.csv, summary.json, boxplot.csv, manifest.json.
RunOutcome run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& out);
/// asymptotics.json.
RunOutcome run_asymptotics(const ExperimentConfig& cfg, const std::filesystem::path& out);

struct EstimateRow {
    int replicate = 0;
    Method method = Method::LG;
    ObservationMode mode = ObservationMode::Complete;
    bool ok = true;
    std::vector<double> theta;
    double final_contrast = 0.0;
    std::vector<double> truth;
};

struct EstimatesTable {
    std::vector<std::string> names;
    std::vector<EstimateRow> rows;
};

std::string estimates_csv(const EstimatesTable& t);
EstimatesTable parse_estimates_csv(const std::string& text);
EstimatesTable read_estimates_csv(const std::filesystem::path& path);

/// Per (method, mode, component) mean and unbiased stddev of relative
/// discrepancies plus the five-number summary; a pure function of the table.
nlohmann::json summarize(const EstimatesTable& t);
std::string boxplot_csv(const nlohmann::json& summary);

/// Type-7 (linear interpolation) sample quantile of sorted data.
double quantile_sorted(const std::vector<double>& sorted, double p);

}  // namespace hypoips
