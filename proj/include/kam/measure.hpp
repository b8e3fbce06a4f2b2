#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "kam/iterate.hpp"
#include "kam/spectra.hpp"

namespace kam {

struct Violation {
    int nu = 0;
    IntVec k;
    LVec l;
};

/// Axis-aligned box sampled at cell centers, axis 0 varying fastest.
class ParameterGrid {
public:
    ParameterGrid(std::vector<double> lower, std::vector<double> upper, int resolution);

    int dim() const { return static_cast<int>(lower_.size()); }
    int resolution() const { return resolution_; }
    std::size_t cell_count() const { return records_.size(); }
    const std::vector<double>& lower() const { return lower_; }
    const std::vector<double>& upper() const { return upper_; }
    double box_volume() const;
    double cell_volume() const;
    /// Cell centers in structure-of-arrays layout, one column per axis.
    const std::vector<std::vector<double>>& columns() const { return cols_; }
    Eigen::VectorXd center(std::size_t cell) const;

    /// Empty iff the cell survives; holds the first violation otherwise.
    const std::vector<Violation>& record(std::size_t cell) const { return records_[cell]; }
    std::vector<Violation>& record(std::size_t cell) { return records_[cell]; }
    bool excised(std::size_t cell) const { return !records_[cell].empty(); }
    std::size_t excised_count() const;
    double excised_measure() const { return static_cast<double>(excised_count()) * cell_volume(); }
    double surviving_measure() const { return box_volume() - excised_measure(); }
    double surviving_fraction() const;
    void clear();

private:
    std::vector<double> lower_, upper_;
    int resolution_ = 0;
    std::vector<std::vector<double>> cols_;
    std::vector<std::vector<Violation>> records_;
};

/// Cutoffs per level: level nu scans K[nu] < |k| <= K[nu+1] with Minus sites |i| < I[nu+1].
struct ExcisionBands {
    std::vector<double> K;
    std::vector<double> I;

    int levels() const { return static_cast<int>(K.size()) - 1; }
    void validate() const;
};

/// Bands from the schedule's cutoffs for levels 0..levels-1.
ExcisionBands bands_from_schedule(const Schedule& schedule, int levels);

struct ResonanceConstants {
    /// Measured lower bound |<l, Omega>| >= c7 <l>_d over the Plus class.
    double c7 = 0.0;
    /// c8 = 2 (gamma + |omega|_Pi) / c7, so that only <l>_d <= c8 |k| can resonate.
    double c8 = 0.0;
    double omega_sup = 0.0;
};

ResonanceConstants measure_c8(const ParameterGrid& grid, const FrequencyMap& fm, const SpectrumModel& sm, double gamma,
                              int max_site);

struct ExcisionOptions {
    int workers = 1;
    /// Sites enumerated for the Plus class; zero derives the cap from c8 K.
    int max_site = 0;
};

struct ExcisionSummary {
    std::size_t candidates = 0;
    std::size_t strips_hit = 0;
    std::vector<std::string> notes;
    ResonanceConstants rc;
};

/// Marks each cell whose center violates the modified Diophantine condition in some band.
ExcisionSummary excise(ParameterGrid& grid, const FrequencyMap& fm, const SpectrumModel& sm,
                       const DiophantineParams& dp, const ExcisionBands& bands, double gamma,
                       const ExcisionOptions& opt = {});

struct WidthCheck {
    double measured = 0.0;
    /// threshold / |k|_1.
    double bound = 0.0;
    /// measured / bound, the implied c(n).
    double ratio = 0.0;
    /// Exact measure of the strip for the affine divisor.
    double analytic = 0.0;
};

WidthCheck resonance_width_check(const IntVec& k, const LVec& l, const ParameterGrid& grid, const FrequencyMap& fm,
                                 const SpectrumModel& sm, const DiophantineParams& dp, double gamma);

struct PartnerCount {
    long long count = 0;
    /// |k|^{c1/d} |i|^{c1}.
    double scale = 0.0;
    /// Smallest c with count <= (c + 1) scale.
    double implied_c = 0.0;
};

/// Counts lattice sites j with ||i|^d - |j|^d| <= c8 |k|; for rho = 1 the lattice is {1, 2, ...}.
PartnerCount count_resonant_partners(const Site& i, int rho, double k_norm, double d, double c8, double c1 = 1.0);

struct SweepRow {
    double gamma = 0.0;
    double excised_measure = 0.0;
    double surviving_fraction = 0.0;
    std::size_t cells = 0;
    int resolution = 0;
};

struct SweepResult {
    std::vector<SweepRow> rows;
    /// Least-squares slope of log(excised) against log(gamma); NaN when fewer than two rows excise anything.
    double slope = 0.0;
    bool slope_defined = false;
    bool spans_decade = false;
};

struct GridSpec {
    std::vector<double> lower, upper;
    int resolution = 100;
};

SweepResult measure_sweep(const GridSpec& spec, const std::vector<double>& gammas, const FrequencyMap& fm,
                          const SpectrumModel& sm, const DiophantineParams& dp, const ExcisionBands& bands,
                          const ExcisionOptions& opt = {});

std::string sweep_csv(const SweepResult& res);

}  // namespace kam
