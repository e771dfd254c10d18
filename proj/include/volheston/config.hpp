#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "volheston/grid.hpp"
#include "volheston/model.hpp"

namespace volheston {

struct ConfigError : std::runtime_error {
    std::vector<std::string> issues;
    explicit ConfigError(std::vector<std::string> list)
        : std::runtime_error(join(list)), issues(std::move(list)) {}
    static std::string join(const std::vector<std::string>& list) {
        std::string s = "configuration invalid:";
        for (const auto& e : list) s += "\n  - " + e;
        return s;
    }
};

struct ExperimentConfig {
    // [model]
    int d = 0;
    std::vector<double> alpha;
    std::vector<double> beta_kernel;
    std::vector<double> v0;
    std::vector<double> mu0;
    std::vector<double> D; // row-major d*d
    std::vector<double> rho;
    std::vector<double> theta;
    std::vector<double> sigma_v;
    double r = 0.02;
    // [jumps]
    bool jumps_enabled = false;
    double jump_intensity = 0.0;
    double jump_kappa = 0.0;
    // [grid]
    double T = 1.0;
    int n = 100;
    // [mc]
    int paths = 10000;
    std::uint64_t seed = 1;
    // [utility]
    std::string utility_kind = "exponential";
    double gamma = 0.2;
    std::vector<double> zeta;
    // [output]
    std::string out_dir = "out";
    std::string out_format = "csv";

    ModelParams to_model_params() const;
    TimeGrid to_grid() const { return TimeGrid(T, n); }
    UtilityProblem to_utility() const;

    // Canonical "section.key=value" listing (sorted) and its FNV-1a hash.
    std::string canonical_string() const;
    std::string config_hash() const;
};

struct ConfigOverrides {
    std::optional<std::uint64_t> seed;
    std::optional<int> paths;
    std::optional<int> n;
    std::optional<std::string> utility;
    std::optional<double> gamma;
    std::optional<std::string> out_dir;
};

// Parses the flat TOML-style file and validates every field; throws
// ConfigError carrying one message per offending key.
ExperimentConfig load_config(const std::string& path, const ConfigOverrides& overrides = {});

} // namespace volheston
