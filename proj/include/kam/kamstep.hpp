#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "kam/series.hpp"
#include "kam/spectra.hpp"

namespace kam {

/// N = e + <omega, y> + sum_i Omega_i z_i zbar_i at one parameter sample.
struct NormalForm {
    double e = 0.0;
    Eigen::VectorXd omega;
    std::map<Site, double> Omega;

    double Omega_at(const Site& s) const;
    Series to_series(int rho, const std::string& tag = {}) const;
};

/// Constants fixed for the whole iteration.
struct SchemeConstants {
    int n = 1;
    int rho = 1;
    double d = 1.0;
    double delta = -1.0;
    double tau = 0.0;
    double c_rho = 2.5;
    double c1_rho = 1.0;
    double alpha1 = 5.0;
    double alpha2 = 5.0;
    double mu0 = 1e-4;
    double s0 = 1e-8;
    double r0 = 1.0;
    double a0 = 1.0;
    double gamma0 = 0.1;
    double M0 = 1.0;
    double pbar = 0.0;
    double sigma = 0.75;
    /// Base of the logarithm in the cutoff formula; e by default.
    double log_base = 2.718281828459045;
    bool special_form = false;
    /// TheoremA mode: rho = 1, c(rho) = 5/2 and the H7' form of H7.
    bool theorem_a = true;
    bool extended = false;

    DiophantineParams diophantine() const;
    double mu_star() const;
    void validate() const;
};

/// Scalars of step nu and of step nu + 1.
struct StepState {
    int nu = 0;
    double r = 1.0, a = 1.0, gamma = 0.1, M = 1.0, s = 1e-8, mu = 1e-4, eta = 0.0;
    double r_next = 0.0, a_next = 0.0, gamma_next = 0.0, M_next = 0.0, s_next = 0.0, mu_next = 0.0;
    SchemeConstants sc;

    /// Weights of the current domain D(r, s) with target weight a.
    DomainWeights weights() const;
    /// Weights of the next domain D(r_+, s_+).
    DomainWeights next_weights() const;
    /// Weights used for the generating function on the intermediate domain.
    DomainWeights generator_weights() const;
};

/// Closed form of int_X^inf t^p e^{-b t} dt for integer p >= 0.
long double tail_integral(int p, long double b, long double x);

struct Cutoffs {
    double K = 0.0;
    double I = 0.0;
    double K_formula = 0.0;
    double I_formula = 0.0;
    double h1_lhs = 0.0;
    double h2_lhs = 0.0;
    bool K_override = false;
    bool I_override = false;
};

/// ([log_b(1/mu)] + 1)^{3 alpha}.
double cutoff_formula(double mu, double alpha, double log_base);
Cutoffs compute_cutoffs(const StepState& st);

struct Truncated {
    Series R;
    Series tail;
};

/// Splits P into the part removed in this step and the remainder.
Truncated truncate(const Series& p, double K, double I);

/// k = 0 terms linear in y and k = 0 diagonal z zbar terms of R.
Series normal_part(const Series& r, bool special_form);

/// Signed normal index l = q - qbar of a monomial.
LVec l_of(const ModeKey& key);

struct Inadmissible {
    IntVec k;
    LVec l;
    double divisor = 0.0;
    double threshold = 0.0;

    std::string describe(int rho) const;
};

using HomologicalOutcome = std::variant<Series, Inadmissible>;

/// Solves {N, F} + R - [R] = 0 coefficientwise: F = -i P / D.
HomologicalOutcome solve_homological(const NormalForm& nf, const Series& r, const Series& r_normal, double gamma,
                                     const DiophantineParams& dp);

struct StepOptions {
    int lie_j_max = 32;
    int lie_max_fourier = -1;
    /// Non-positive means the maximal grading of H.
    int lie_max_degree = 0;
    double lie_rel_tol = 1e-17;
};

struct StepResult {
    NormalForm next;
    Series p_next;
    Eigen::VectorXd omega_hat;
    std::map<Site, double> Omega_hat;
    LieStats lie;
};

/// Computes H o Phi_+ and splits it into the new normal form and perturbation.
StepResult apply_step(const NormalForm& nf, const Series& p, const Series& f, const Series& r_normal,
                      const DomainWeights& w, const StepOptions& opt = {});

/// |W (Phi - id)| majorant for the time-one map of F.
double displacement_bound(const Series& f, const DomainWeights& w, const StepOptions& opt);

/// Everything the audit needs from one executed step.
struct StepMeasurements {
    double xp = 0.0;
    double xp_lip = 0.0;
    double xr = 0.0;
    double xr_lip = 0.0;
    double x_tail = 0.0;
    double xf = 0.0;
    double xf_lip = 0.0;
    double phi_dev = 0.0;
    double omega_hat = 0.0;
    double Omega_hat = 0.0;
    double omega_hat_lip = 0.0;
    double Omega_hat_lip = 0.0;
    double xp_next = 0.0;
    double xp_next_lip = 0.0;
};

struct HypothesisEntry {
    double lhs = 0.0;
    double rhs = 0.0;
    bool pass = false;
};

struct HypothesisReport {
    int nu = 0;
    std::array<HypothesisEntry, 9> H{};
    HypothesisEntry xp_bound;
    long double Gamma = 0.0L;
    long double C = 0.0L;
    long double Gamma_bound_log10 = 0.0L;
    bool Gamma_within_bound = false;
    double K = 0.0;
    double I = 0.0;
    bool K_override = false;
    bool I_override = false;
    double mu_P = 0.0;
    /// c1..c6 implied by the value estimates and by the Lipschitz estimates (zero where an
    /// estimate has no such part); c is their maximum.
    std::array<double, 6> c_value{};
    std::array<double, 6> c_lip{};
    std::array<double, 6> c{};
    StepMeasurements norms;

    bool all_pass() const;
};

/// sum_{0<|k|<=K} |k|^{4 tau + 4} e^{-|k| (r - r_+)/8} over Z^n.
long double gamma_sum(int n, double tau, double K, double r_gap);
/// r sum_{i != 0} |i|^{2 c + 2} e^{-(a - a_+)|i|} over Z^rho.
long double c_sum(int rho, double c_rho, double r, double a_gap);
/// log10 of (4[tau] + n + 4)! 2^{(nu + 6)(4 tau + n + 4)}.
long double gamma_bound_log10(int n, double tau, int nu);
/// Number of k in Z^n with |k|_1 = t.
long double lattice_shell(int n, long long t);

HypothesisReport audit_hypotheses(const StepState& st, const Cutoffs& cut, const StepMeasurements& m);

struct DiophantineViolation {
    IntVec k;
    LVec l;
    double divisor = 0.0;
    double threshold = 0.0;
};

/// Scans |k| <= K, |l| <= 2 over the given sites with the gamma_+ thresholds.
std::optional<DiophantineViolation> propagate_diophantine(const NormalForm& nf, double gamma_next, int k_max,
                                                          double I, const std::vector<Site>& sites,
                                                          const DiophantineParams& dp);

/// Sup-norm majorants of the frequency corrections.
double omega_sup(const Eigen::VectorXd& v);
double Omega_weighted_sup(const std::map<Site, double>& v, double delta);

}  // namespace kam
