#pragma once

#include <map>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "kam/series.hpp"

namespace kam {

/// omega(xi) = omega0 + A xi with A invertible.
class FrequencyMap {
public:
    FrequencyMap() = default;
    FrequencyMap(Eigen::VectorXd omega0, Eigen::MatrixXd a);
    static FrequencyMap shifted_identity(Eigen::VectorXd omega0);

    int n() const { return static_cast<int>(omega0_.size()); }
    const Eigen::VectorXd& omega0() const { return omega0_; }
    const Eigen::MatrixXd& matrix() const { return a_; }

    Eigen::VectorXd eval(const Eigen::VectorXd& xi) const;
    /// Induced 2-norm of A, which is |omega|^L for the Euclidean distance on xi.
    double lipschitz() const;
    /// Lipschitz constant of the inverse map.
    double inverse_lipschitz() const;

private:
    Eigen::VectorXd omega0_;
    Eigen::MatrixXd a_;
};

Eigen::VectorXd eval_omega(const FrequencyMap& fm, const Eigen::VectorXd& xi);

/// Omega_i(xi) = |i|^d + correction_i + <v_i, xi> |i|^delta.
struct SpectrumModel {
    double d = 1.0;
    double delta = -1.0;
    int rho = 1;
    std::map<Site, double> principal_corrections;
    std::map<Site, std::vector<double>> tail;
    std::vector<Site> tangential;

    bool is_tangential(const Site& i) const;
    /// xi-independent part |i|^d + correction_i.
    double principal(const Site& i) const;
    /// Gradient of Omega_i in xi; empty when the site has no tail entry.
    std::vector<double> gradient(const Site& i) const;
    double eval(const Site& i, const Eigen::VectorXd& xi) const;
};

double eval_Omega(const SpectrumModel& sm, const Site& i, const Eigen::VectorXd& xi);

/// Checks Omega_i != 0 and, for rho = 1, Omega_i != Omega_j for |i| != |j| over the box.
void check_spectrum_on_box(const SpectrumModel& sm, const std::vector<double>& lo, const std::vector<double>& hi,
                           int max_site);

/// Finitely supported integer vector on the normal lattice, sorted by site.
using LVec = std::vector<std::pair<Site, int>>;

LVec make_l(std::initializer_list<std::pair<Site, int>> entries);
int l_norm(const LVec& l);

struct DivisorClass {
    enum Kind { Zero, Plus, Minus };
    Kind kind = Zero;
    /// Site of the +1 entry for the Minus class.
    Site site{};
};

DivisorClass classify_l(const LVec& l);
double bracket_ld(const LVec& l, double d);

/// Modified Diophantine condition constants.
struct DiophantineParams {
    int n = 1;
    int rho = 1;
    double d = 1.0;
    double tau = 0.0;
    double c_rho = 2.5;
    double c1_rho = 1.0;
    bool extended = false;

    static double min_tau(int n, double d, double c_rho) { return n + (c_rho + 2.0) / d + 4.0; }
    /// Throws when tau or c(rho) violate their lower bounds.
    void validate() const;
};

/// <k, omega> + sum_i l_i Omega_i using a per-site frequency lookup.
template <class OmegaFn>
double divisor_value(const IntVec& k, const Eigen::VectorXd& omega, const LVec& l, OmegaFn&& big_omega,
                     bool extended = false) {
    if (extended) {
        long double acc = 0.0L;
        for (std::size_t j = 0; j < k.size(); ++j) acc += static_cast<long double>(k[j]) * omega[j];
        for (const auto& [site, v] : l) acc += static_cast<long double>(v) * big_omega(site);
        return static_cast<double>(acc);
    }
    double acc = 0.0;
    for (std::size_t j = 0; j < k.size(); ++j) acc += k[j] * omega[j];
    for (const auto& [site, v] : l) acc += v * big_omega(site);
    return acc;
}

double divisor(const IntVec& k, const LVec& l, const Eigen::VectorXd& xi, const FrequencyMap& fm,
               const SpectrumModel& sm, bool extended = false);

/// gamma / A_{k,l}; ld is <l>_d and only used for the Plus class.
double diophantine_threshold(int k_norm, const DivisorClass& cls, double ld, double gamma, double tau,
                             double c_rho);

bool is_admissible(const Eigen::VectorXd& xi, const IntVec& k, const LVec& l, double gamma,
                   const DiophantineParams& params, const FrequencyMap& fm, const SpectrumModel& sm);

/// C_m (j/V)^{2/m} with C_m = (2 pi)^2 B_m^{-2/m}, B_m the unit-ball volume.
double weyl_lambda(int m, double volume, double j);

}  // namespace kam
