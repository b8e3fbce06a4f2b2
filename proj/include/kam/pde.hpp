#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "kam/kamstep.hpp"
#include "kam/spectra.hpp"

namespace kam {

enum class PdeKind { NLS, KleinGordon };

struct PdeSetup {
    PdeKind kind = PdeKind::NLS;
    /// Dimension of the NLS domain; d = 2/m.
    int m = 1;
    /// Dimension of the Klein-Gordon torus.
    int rho = 1;
    std::vector<Site> tangential;
    int mode_cutoff = 8;
    /// NLS nonlinearity f(t) = sum_p f[p-1] t^p.
    std::vector<double> f;
    /// Klein-Gordon exponent in u e^{alpha u^2}.
    double alpha = 1.0;
    int series_truncation = 6;
    /// Modulus |w| at each tangential site.
    std::vector<double> amplitudes;
    /// Order of the Taylor jet in the actions kept by the embedding.
    int y_jet = 1;
    /// Additive corrections to the normal spectrum, keyed by site.
    std::map<Site, double> spectrum_corrections;

    void validate() const;
};

/// Hamiltonian in the complex mode coordinates w (stored as z), with n = 0.
struct BuiltHamiltonian {
    Series h;
    /// The interaction part G, so that h = sum lambda_j |w_j|^2 + g.
    Series g;
    /// Linear frequencies at xi for every retained site.
    std::map<Site, double> lambda;
    std::vector<Site> sites;
    SpectrumModel sm;
    FrequencyMap fm;
};

/// Retained lattice sites: 1..cutoff for NLS, |j|_1 <= cutoff on Z^rho for Klein-Gordon.
std::vector<Site> retained_sites(const PdeSetup& setup);

BuiltHamiltonian nls_hamiltonian(const PdeSetup& setup, const Eigen::VectorXd& xi);
BuiltHamiltonian kg_hamiltonian(const PdeSetup& setup, const Eigen::VectorXd& xi);
BuiltHamiltonian build_hamiltonian(const PdeSetup& setup, const Eigen::VectorXd& xi);

struct KamForm {
    NormalForm nf;
    Series p;
    double xp = 0.0;
};

/// Substitutes w = sqrt(A + y) e^{i x} at tangential sites and w = z elsewhere, then moves the
/// k = 0 constant, y-linear and diagonal z zbar terms into the normal form.
KamForm action_angle_embed(const Series& h, const std::vector<Site>& tangential, const std::vector<double>& amplitudes,
                           int y_jet, const DomainWeights& w);

/// Momentum sum_l k_l i_l + sum_i (q_i - qbar_i) i of a monomial.
Site momentum(const ModeKey& key, const std::vector<Site>& tangential);

struct SpecialFormCheck {
    bool ok = true;
    std::optional<ModeKey> violator;
};

SpecialFormCheck check_special_form(const Series& p, const std::vector<Site>& tangential);

struct RegularityReport {
    std::vector<double> input_norms;
    std::vector<double> gradient_norms;
    /// Log-log slope of |G_zbar|^{a,p} against |z|^{a,p}; NaN when G vanishes.
    double exponent = 0.0;
    bool vanishes = false;
};

/// Scales a fixed direction z by each amplitude and fits the growth of the zbar-gradient.
RegularityReport regularity_check(const Series& g, double a, double p, const std::vector<double>& amplitudes);

}  // namespace kam
