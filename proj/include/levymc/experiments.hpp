#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "levymc/density.hpp"

namespace levymc::xp {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
    std::string scenario;
    nlohmann::json params; // scenario defaults merged underneath
    std::uint64_t seed = 20240501;
    unsigned threads = 1;
    std::string out_dir; // empty = write nothing

    static ExperimentConfig from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

struct Criterion {
    std::string id;
    bool pass = false;
    std::string detail;
};

struct ExperimentResult {
    std::string scenario;
    nlohmann::json params;
    std::uint64_t seed = 0;
    nlohmann::json oracle;                 // exact-arm values
    nlohmann::json mc;                     // MC-arm values with error bars
    std::vector<den::ProbeReport> probes;
    std::vector<Criterion> criteria;
    double wall_seconds = 0.0; // never serialised: result.json stays seed-determined

    bool all_pass() const;
    nlohmann::json to_json() const;
};

std::vector<std::string> scenario_names();
nlohmann::json default_params(const std::string& scenario);
bool has_scenario(const std::string& scenario);

// Runs the scenario; writes result.json / CSV / SVG into out_dir when set.
ExperimentResult run_experiment(const ExperimentConfig& config);

ExperimentResult run_scaling_flat(const ExperimentConfig& config);
ExperimentResult run_affine_dilation(const ExperimentConfig& config);
ExperimentResult run_killed_halfline(const ExperimentConfig& config);
ExperimentResult run_exit_polynomial(const ExperimentConfig& config);
ExperimentResult run_isotropic_manifold(const ExperimentConfig& config);
ExperimentResult run_lie_group_levy(const ExperimentConfig& config);

}  // namespace levymc::xp
