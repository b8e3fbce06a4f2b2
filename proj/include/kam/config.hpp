#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "kam/iterate.hpp"
#include "kam/measure.hpp"
#include "kam/pde.hpp"

namespace kam {

class ConfigError : public Error {
public:
    using Error::Error;
};

/// Explicit frequency and spectrum model, used by series problems and measure sweeps.
struct ModelSpec {
    Eigen::VectorXd omega0;
    Eigen::MatrixXd matrix;
    SpectrumModel sm;

    FrequencyMap frequency_map() const { return FrequencyMap(omega0, matrix); }
};

enum class ProblemKind { NLS, KleinGordon, Series };

struct RunConfig {
    /// "TheoremA" or "TheoremAPrime".
    std::string mode = "TheoremA";
    /// "double" or "extended".
    std::string precision = "double";
    std::uint64_t seed = 1;

    ProblemKind kind = ProblemKind::NLS;
    PdeSetup pde;
    std::filesystem::path series_file;
    double series_e = 0.0;
    std::vector<Site> series_normal_sites;
    std::optional<ModelSpec> model;

    Eigen::VectorXd xi;
    double lipschitz_step = 1e-6;
    int random_samples = 0;
    std::vector<double> box_lower, box_upper;

    SchemeConstants scheme;
    int nu_max = 3;
    double norm_floor = 1e-13;
    int workers = 1;
    StepOptions step;

    int resolution = 100;
    std::vector<double> gammas;
    int levels = 2;
    std::optional<ExcisionBands> bands;
    int max_site = 0;

    std::filesystem::path output = "out";

    int n() const;
};

/// Parses and validates a configuration; relative paths resolve against base_dir.
RunConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
RunConfig load_config(const std::filesystem::path& path);

/// Fully resolved configuration, defaults included.
nlohmann::json config_to_json(const RunConfig& cfg);

}  // namespace kam
