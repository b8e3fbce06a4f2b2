#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "kam/kamstep.hpp"

namespace kam {

struct ScheduleEntry {
    int nu = 0;
    double r = 0.0, a = 0.0, gamma = 0.0, M = 0.0, s = 0.0, mu = 0.0, eta = 0.0;
    /// Cutoffs used at this level; zero at nu = 0.
    double K = 0.0, I = 0.0;
};

/// All nu-indexed sequences of the iteration, materialized to nu_max + 1.
struct Schedule {
    SchemeConstants sc;
    std::vector<ScheduleEntry> entries;

    int nu_max() const { return static_cast<int>(entries.size()) - 2; }
    StepState state(int nu) const;
};

/// Smallest integer alpha with ratio^{3 alpha - 1} >= target.
int minimal_alpha(double ratio = 7.0 / 6.0, double target = 8.0);

Schedule build_schedule(const SchemeConstants& sc, int nu_max);

/// One parameter sample: the primary sample comes first in a bundle.
struct ParamSample {
    Eigen::VectorXd xi;
    NormalForm nf;
    Series p;
};

struct RunOptions {
    int nu_max = 6;
    double norm_floor = 1e-13;
    StepOptions step;
    int workers = 1;
    /// Keep P_nu of the primary sample in every record.
    bool keep_series = false;
};

struct TraceRecord {
    int nu = 0;
    double xp = 0.0;
    std::size_t terms = 0;
    Eigen::VectorXd omega;
    std::map<Site, double> Omega;
    double omega_drift = 0.0;
    double Omega_drift = 0.0;
    std::optional<HypothesisReport> report;
    double wall_ms = 0.0;
    std::optional<Series> p;
};

struct RunTrace {
    std::vector<TraceRecord> records;
    std::optional<Inadmissible> excision;
    int excised_at = -1;
    /// "nu_max", "norm_floor" or "excised".
    std::string stop_reason;
    NormalForm final_nf;
    /// Samples dropped from the Lipschitz bundle after an inadmissible divisor.
    int dropped_samples = 0;

    int completed_steps() const { return static_cast<int>(records.size()) - 1; }
};

RunTrace run(std::vector<ParamSample> bundle, const Schedule& schedule, const RunOptions& opt);

struct ConvergenceReport {
    double beta = 0.0;
    bool converged = false;
    int steps = 0;
    std::vector<double> step_drift;
    std::vector<double> step_budget;
    bool step_drift_ok = true;
    double total_drift = 0.0;
    double drift_budget = 0.0;
    bool total_drift_ok = true;
    /// Fraction of audited steps passing each of H1..H9.
    std::array<double, 9> pass_rate{};
};

/// Fits log|P_{nu+1}| = beta log|P_nu| through the origin; needs three nonzero norms.
double fit_decay_exponent(const std::vector<double>& norms);

ConvergenceReport convergence_report(const RunTrace& trace, const SchemeConstants& sc);

}  // namespace kam
