#include <algorithm>
#include <cfloat>
#include <cmath>
#include <vector>

#include "kam/kamstep.hpp"

namespace kam {

long double lattice_shell(int n, long long t) {
    if (t == 0) return 1.0L;
    long double total = 0.0L;
    long double binom_n = 1.0L;   // C(n, j)
    long double binom_t = 1.0L;   // C(t - 1, j - 1)
    long double pow2 = 1.0L;
    for (int j = 1; j <= n && j <= t; ++j) {
        binom_n = binom_n * (n - j + 1) / j;
        if (j > 1) binom_t = binom_t * static_cast<long double>(t - j + 1) / (j - 1);
        pow2 *= 2.0L;
        total += pow2 * binom_n * binom_t;
    }
    return total;
}

namespace {

// sum_{t=1}^{tmax} shell(dim, t) t^p e^{-b t}, summed in log space and stopped
// once the terms past the peak are negligible.
long double weighted_lattice_sum(int dim, long double p, long double b, long double tmax) {
    const long double peak = (p + dim - 1) / b;
    long double sum = 0.0L;
    long double log_scale = -INFINITY;
    std::vector<long double> logs;
    for (long long t = 1; t <= tmax; ++t) {
        const long double lt =
            std::log(lattice_shell(dim, t)) + p * std::log(static_cast<long double>(t)) - b * t;
        if (lt > log_scale) {
            sum = sum * std::exp(log_scale - lt) + 1.0L;
            log_scale = lt;
        } else {
            sum += std::exp(lt - log_scale);
        }
        if (t > peak && lt - log_scale < -60.0L) break;
    }
    if (sum == 0.0L) return 0.0L;
    return sum * std::exp(log_scale);
}

double clamp_finite(long double v) {
    if (std::isnan(v)) return DBL_MAX;
    if (v > DBL_MAX) return DBL_MAX;
    if (v < -DBL_MAX) return -DBL_MAX;
    return static_cast<double>(v);
}

HypothesisEntry entry(long double lhs, long double rhs, bool strict) {
    HypothesisEntry e;
    e.lhs = clamp_finite(lhs);
    e.rhs = clamp_finite(rhs);
    e.pass = strict ? lhs < rhs : lhs <= rhs;
    return e;
}

}  // namespace

long double gamma_sum(int n, double tau, double K, double r_gap) {
    if (K < 1.0) return 0.0L;
    if (!(r_gap > 0.0)) throw Error("gamma_sum needs r - r_+ > 0");
    return weighted_lattice_sum(n, 4.0L * tau + 4.0L, r_gap / 8.0L, std::floor(static_cast<long double>(K)));
}

long double c_sum(int rho, double c_rho, double r, double a_gap) {
    if (!(a_gap > 0.0)) throw Error("c_sum needs a - a_+ > 0");
    return r * weighted_lattice_sum(rho, 2.0L * c_rho + 2.0L, a_gap, INFINITY);
}

long double gamma_bound_log10(int n, double tau, int nu) {
    const int f = 4 * static_cast<int>(std::floor(tau)) + n + 4;
    return std::lgamma(static_cast<long double>(f) + 1.0L) / std::log(10.0L) +
           (nu + 6.0L) * (4.0L * tau + n + 4.0L) * std::log10(2.0L);
}

bool HypothesisReport::all_pass() const {
    for (const auto& h : H)
        if (!h.pass) return false;
    return true;
}

HypothesisReport audit_hypotheses(const StepState& st, const Cutoffs& cut, const StepMeasurements& m) {
    const SchemeConstants& sc = st.sc;
    HypothesisReport rep;
    rep.nu = st.nu;
    rep.norms = m;
    rep.K = cut.K;
    rep.I = cut.I;
    rep.K_override = cut.K_override;
    rep.I_override = cut.I_override;

    const long double rg = st.r - st.r_next;
    const long double ag = st.a - st.a_next;
    const long double Gam = gamma_sum(sc.n, sc.tau, cut.K, static_cast<double>(rg));
    const long double C = c_sum(sc.rho, sc.c_rho, st.r, static_cast<double>(ag));
    rep.Gamma = Gam;
    rep.C = C;
    rep.Gamma_bound_log10 = gamma_bound_log10(sc.n, sc.tau, st.nu);
    rep.Gamma_within_bound = Gam == 0.0L || std::log10(Gam) <= rep.Gamma_bound_log10;

    const long double mu = st.mu, gamma = st.gamma, M = st.M, s = st.s;
    const long double mu_p = m.xp / st.gamma;
    rep.mu_P = static_cast<double>(mu_p);

    // Constants implied by the measured norms at the actual perturbation size, one per
    // inequality: each hypothesis consumes the constant of the estimate it relies on.
    std::array<long double, 6> cv{}, cl{};
    const long double gc = Gam * C;
    auto b8 = [&](long double x) {
        const long double e = std::cbrt(x);
        return (gamma * x * x + gamma * x * x * Gam / (rg * e * e)) * C;
    };
    auto b9 = [&](long double x) {
        const long double e = std::cbrt(x);
        return M * x * x * gc / (rg * e * e) + M * x * x * x * gc * gc / (rg * rg * std::pow(e, 4.0L)) + M * x * x;
    };
    if (mu_p > 0.0L) {
        cv[0] = m.x_tail / (gamma * mu_p * mu_p);
        if (gc > 0.0L) {
            cv[1] = m.xf / (mu_p * gc);
            cl[1] = m.xf_lip / ((M / gamma) * mu_p * gc);
            cv[2] = m.phi_dev / (mu_p * gc);
        }
        cv[3] = std::max(m.omega_hat, m.Omega_hat) / (gamma * mu_p);
        cl[3] = std::max(m.omega_hat_lip, m.Omega_hat_lip) / (M * mu_p);
        cv[4] = (m.omega_hat + 2.0L * m.Omega_hat) / (gamma * mu_p);
        const long double v8 = b8(mu_p), v9 = b9(mu_p);
        cv[5] = v8 > 0.0L ? m.xp_next / v8 : 0.0L;
        cl[5] = v9 > 0.0L ? m.xp_next_lip / v9 : 0.0L;
    }
    for (std::size_t i = 0; i < 6; ++i) {
        rep.c_value[i] = clamp_finite(cv[i]);
        rep.c_lip[i] = clamp_finite(cl[i]);
        rep.c[i] = std::max(rep.c_value[i], rep.c_lip[i]);
    }

    const long double c2 = cv[1], c4 = cl[3], c5 = cv[4];
    rep.H[0] = entry(cut.h1_lhs, mu, false);
    rep.H[1] = entry(cut.h2_lhs, mu, false);
    rep.H[2] = entry(c2 * mu * gc, rg / 8.0L, true);
    rep.H[3] = entry(c2 * s * s * mu * gc, 5.0L * st.s_next * st.s_next, true);
    rep.H[4] = entry(c2 * s * mu * gc, st.s_next, true);
    rep.H[5] = entry(2.0L * c4 * M * mu, sc.M0 - M / 2.0L, false);
    const long double K = cut.K, I = cut.I;
    const long double k_growth = sc.theorem_a ? 1.0L + std::pow(K, static_cast<long double>(sc.tau))
                                              : std::pow(1.0L + K, static_cast<long double>(sc.tau));
    const long double i_growth = std::pow(I, static_cast<long double>(sc.theorem_a ? 2.5 : sc.c_rho));
    rep.H[6] = entry(c5 == 0.0L ? 0.0L : c5 * mu * k_growth * K * i_growth, gamma - st.gamma_next, false);
    rep.H[7] = entry(cv[5] == 0.0L ? 0.0L : cv[5] * b8(mu), static_cast<long double>(st.gamma_next) * st.mu_next, false);
    rep.H[8] = entry(cl[5] == 0.0L ? 0.0L : cl[5] * b9(mu), static_cast<long double>(st.M_next) * st.mu_next, false);
    rep.xp_bound = entry(m.xp, gamma * mu, false);
    return rep;
}

}  // namespace kam
