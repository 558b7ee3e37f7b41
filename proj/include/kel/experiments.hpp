#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

namespace kel::experiments {

// Parsed experiment configuration. `raw` keeps the full JSON so each runner
// can read its own extra knobs; `thresholds` is echoed into the sidecar.
struct ExperimentConfig {
    std::string name;
    nlohmann::json curve;
    nlohmann::json density;
    double alpha = 2.0, p = 1.0, q = 1.0;
    std::vector<int> n_grid;
    std::vector<int> m_grid;
    std::vector<std::uint64_t> seeds;
    int N_ref = 1024;
    nlohmann::json thresholds;
    nlohmann::json raw;
    std::string base_dir;

    static ExperimentConfig load(const std::string& path);
    static ExperimentConfig from_json(const nlohmann::json& j, const std::string& base_dir);
    double threshold(const std::string& key, double fallback) const;
    bool assert_enabled(const std::string& key) const;
};

// One CSV row: experiment,param,seed,stat,value,runtime_s. The runtime field
// is left empty in the body so reruns are byte-identical; wall times live in
// the sidecar.
struct Row {
    std::string experiment;
    std::string param;
    std::string seed;
    std::string stat;
    double value = 0;
};

struct ExperimentResult {
    std::vector<Row> rows;
    nlohmann::json sidecar;
    bool thresholds_met = true;
    std::vector<std::string> failures;
};

ExperimentResult run_mc_convergence(const ExperimentConfig& cfg);
ExperimentResult run_gamma_sequence(const ExperimentConfig& cfg);
ExperimentResult run_compactness_probe(const ExperimentConfig& cfg);
ExperimentResult run_transport_rates(const ExperimentConfig& cfg);
ExperimentResult run_ngon_min(const ExperimentConfig& cfg);
ExperimentResult run_blatt_divergence(const ExperimentConfig& cfg);

// Dispatch by experiment name: mc, gamma, compactness, transport_rates,
// ngon_min, blatt.
ExperimentResult run_experiment(const std::string& name, const ExperimentConfig& cfg);

void write_rows_csv(const std::vector<Row>& rows, const std::string& path);
void write_sidecar(const nlohmann::json& sidecar, const std::string& path);

struct SlopeFit {
    double slope = 0, intercept = 0, r2 = 0, stderr_slope = 0;
};

// Least squares of log y against log x; entries with y <= 0 are rejected.
SlopeFit fit_loglog(const std::vector<double>& xs, const std::vector<double>& ys);

double median(std::vector<double> v);

}  // namespace kel::experiments
