#pragma once

#include <filesystem>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "kam/config.hpp"

namespace kam {

/// Exit codes shared by every subcommand.
enum ExitCode : int { kExitOk = 0, kExitFailure = 1, kExitConfig = 2, kExitDivergence = 3 };

/// The configured problem at one parameter value.
struct ProblemInstance {
    /// Hamiltonian in mode coordinates; empty for series problems.
    Series h;
    NormalForm nf;
    Series p;
    double xp = 0.0;
    std::vector<Site> tangential;
    FrequencyMap fm;
    SpectrumModel sm;
};

ProblemInstance make_instance(const RunConfig& cfg, const Eigen::VectorXd& xi, const DomainWeights& w);

/// The primary xi followed by the seeded random samples in the box.
std::vector<Eigen::VectorXd> sample_points(const RunConfig& cfg);

/// The sample at xi and its neighbours xi + h e_j used for Lipschitz quotients.
std::vector<ParamSample> make_bundle(const RunConfig& cfg, const Eigen::VectorXd& xi, const Schedule& schedule);

nlohmann::json report_json(const HypothesisReport& rep);
nlohmann::json record_json(const TraceRecord& rec, int rho);
nlohmann::json excision_json(const Inadmissible& ex, int nu, int rho);
nlohmann::json convergence_json(const ConvergenceReport& rep);

// Each command writes its files under `out` and returns the summary it wrote.
nlohmann::json cmd_build(const RunConfig& cfg, const std::filesystem::path& out);
nlohmann::json cmd_step(const RunConfig& cfg, const std::filesystem::path& out);
nlohmann::json cmd_run(const RunConfig& cfg, const std::filesystem::path& out);
nlohmann::json cmd_measure(const RunConfig& cfg, const std::filesystem::path& out);
nlohmann::json cmd_check(const RunConfig& cfg, const std::filesystem::path& out);

}  // namespace kam
