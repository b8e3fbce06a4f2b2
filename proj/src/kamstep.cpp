#include "kam/kamstep.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace kam {

namespace {

ModeKey y_key(int n, int j) {
    ModeKey key;
    key.k.assign(static_cast<std::size_t>(n), 0);
    key.m.assign(static_cast<std::size_t>(n), 0);
    key.m[j] = 1;
    return key;
}

ModeKey zz_key(int n, const Site& s) {
    ModeKey key;
    key.k.assign(static_cast<std::size_t>(n), 0);
    key.m.assign(static_cast<std::size_t>(n), 0);
    key.q.push_back({s, 1});
    key.qbar.push_back({s, 1});
    return key;
}

ModeKey const_key(int n) {
    ModeKey key;
    key.k.assign(static_cast<std::size_t>(n), 0);
    key.m.assign(static_cast<std::size_t>(n), 0);
    return key;
}

double sup_majorant(const Series& g, double r, double s) {
    double t = 0.0;
    for (const auto& [key, c] : g.terms()) t += std::abs(c) * std::exp(key.k_norm() * r) * std::pow(s, key.degree());
    return t;
}

}  // namespace

double NormalForm::Omega_at(const Site& s) const {
    auto it = Omega.find(s);
    if (it == Omega.end()) throw Error("no normal frequency stored for site " + format_site(s, kMaxRho));
    return it->second;
}

Series NormalForm::to_series(int rho, const std::string& tag) const {
    const int n = static_cast<int>(omega.size());
    Series out(n, rho, tag);
    out.add(const_key(n), e);
    for (int j = 0; j < n; ++j) out.add(y_key(n, j), omega[j]);
    for (const auto& [s, v] : Omega) out.add(zz_key(n, s), v);
    return out;
}

DiophantineParams SchemeConstants::diophantine() const {
    DiophantineParams dp;
    dp.n = n;
    dp.rho = rho;
    dp.d = d;
    dp.tau = tau;
    dp.c_rho = c_rho;
    dp.c1_rho = c1_rho;
    dp.extended = extended;
    return dp;
}

double SchemeConstants::mu_star() const { return std::pow(mu0, 1.0 - sigma); }

void SchemeConstants::validate() const {
    if (!(mu0 > 0.0 && mu0 < 1.0)) throw Error("mu0 must lie in (0, 1)");
    if (!(s0 > 0.0 && s0 < 1.0)) throw Error("s0 must lie in (0, 1)");
    if (!(r0 > 0.0 && a0 > 0.0 && gamma0 > 0.0 && M0 > 0.0)) throw Error("scheme scalars must be positive");
    if (!(sigma >= 0.75 && sigma < 1.0)) throw Error("sigma must lie in [3/4, 1)");
    if (!(alpha1 > 0.0 && alpha2 > 0.0)) throw Error("alpha1, alpha2 must be positive");
    if (!(log_base > 1.0)) throw Error("log base must exceed 1");
    if (!(delta < 0.0)) throw Error("delta must be negative");
    if (theorem_a && rho != 1) throw Error("TheoremA mode needs rho = 1");
    diophantine().validate();
}

DomainWeights StepState::weights() const {
    DomainWeights w;
    w.a = a / 4.0;
    w.abar = a;
    w.p = sc.pbar;
    w.pbar = sc.pbar;
    w.r = r;
    w.s = s;
    return w;
}

DomainWeights StepState::next_weights() const {
    DomainWeights w;
    w.a = a_next / 4.0;
    w.abar = a_next;
    w.p = sc.pbar;
    w.pbar = sc.pbar;
    w.r = r_next;
    w.s = s_next;
    return w;
}

DomainWeights StepState::generator_weights() const {
    DomainWeights w;
    w.a = a / 4.0;
    w.abar = a_next;
    w.p = sc.pbar;
    w.pbar = sc.pbar;
    w.r = r_next + 0.875 * (r - r_next);
    w.s = s;
    return w;
}

long double tail_integral(int p, long double b, long double x) {
    if (p < 0 || !(b > 0.0L)) throw Error("tail_integral needs p >= 0 and b > 0");
    if (std::isinf(x)) return 0.0L;
    if (x < 0.0L) x = 0.0L;
    // e^{-bx} sum_j p!/j! x^j / b^{p-j+1}
    long double sum = 0.0L;
    long double coef = 1.0L / b;  // j = p term: x^p / b
    long double xp = 1.0L;
    std::vector<long double> powers(static_cast<std::size_t>(p) + 1);
    for (int j = 0; j <= p; ++j) {
        powers[static_cast<std::size_t>(j)] = xp;
        xp *= x;
    }
    for (int j = p; j >= 0; --j) {
        sum += coef * powers[static_cast<std::size_t>(j)];
        coef *= static_cast<long double>(j) / b;
    }
    return std::exp(-b * x) * sum;
}

double cutoff_formula(double mu, double alpha, double log_base) {
    if (!(mu > 0.0 && mu < 1.0)) throw Error("cutoff formula needs 0 < mu < 1");
    const double lg = std::log(1.0 / mu) / std::log(log_base);
    return std::pow(std::floor(lg) + 1.0, 3.0 * alpha);
}

namespace {

double minimal_cutoff(int p, long double b, long double mu) {
    if (tail_integral(p, b, 0.0L) <= mu) return 0.0;
    long double hi = 1.0L;
    while (tail_integral(p, b, hi) > mu) hi *= 2.0L;
    long double lo = hi / 2.0L;
    while (hi - lo > 1.0L) {
        const long double mid = std::floor((lo + hi) / 2.0L);
        if (tail_integral(p, b, mid) > mu)
            lo = mid;
        else
            hi = mid;
    }
    return static_cast<double>(hi);
}

}  // namespace

Cutoffs compute_cutoffs(const StepState& st) {
    const double rg = st.r - st.r_next;
    const double ag = st.a - st.a_next;
    if (!(rg > 0.0) || !(ag > 0.0)) throw Error("compute_cutoffs: r - r_+ and a - a_+ must be positive");
    Cutoffs c;
    c.K_formula = cutoff_formula(st.mu, st.sc.alpha1, st.sc.log_base);
    c.I_formula = cutoff_formula(st.mu, st.sc.alpha2, st.sc.log_base);
    c.K = c.K_formula;
    c.I = c.I_formula;
    const int pk = st.sc.n + 4;
    const int pi = st.sc.rho + 4;
    const long double bk = rg / 16.0L;
    if (tail_integral(pk, bk, c.K) > st.mu) {
        c.K = minimal_cutoff(pk, bk, st.mu);
        c.K_override = true;
    }
    if (tail_integral(pi, ag, c.I) > st.mu) {
        c.I = minimal_cutoff(pi, ag, st.mu);
        c.I_override = true;
    }
    c.h1_lhs = static_cast<double>(tail_integral(pk, bk, c.K));
    c.h2_lhs = static_cast<double>(tail_integral(pi, ag, c.I));
    return c;
}

Truncated truncate(const Series& p, double K, double I) {
    Truncated out{Series(p.n(), p.rho(), p.tag()), Series(p.n(), p.rho(), p.tag())};
    for (const auto& [key, c] : p.terms()) {
        bool keep = false;
        const int kn = key.k_norm();
        const int mn = key.m_norm();
        const int dq = pow_total(key.q);
        const int dqb = pow_total(key.qbar);
        if (kn <= K) {
            if (dq + dqb == 0) {
                keep = mn == 1 || (mn == 0 && kn > 0);
            } else if (mn == 0 && dq + dqb == 1) {
                keep = true;
            } else if (mn == 0 && dq + dqb == 2) {
                if (dq == 2 || dqb == 2) {
                    keep = true;
                } else {
                    const int ni = key.q.front().site.norm();
                    const int nj = key.qbar.front().site.norm();
                    keep = (kn == 0 && ni == nj) || ni <= I;
                }
            }
        }
        (keep ? out.R : out.tail).add(key, c);
    }
    return out;
}

Series normal_part(const Series& r, bool special_form) {
    Series out(r.n(), r.rho(), r.tag());
    for (const auto& [key, c] : r.terms()) {
        if (!key.k_zero()) continue;
        const int dq = pow_total(key.q);
        const int dqb = pow_total(key.qbar);
        if (dq + dqb == 0 && key.m_norm() == 1) {
            out.add(key, c);
            continue;
        }
        if (key.m_norm() != 0 || dq != 1 || dqb != 1) continue;
        const Site& i = key.q.front().site;
        const Site& j = key.qbar.front().site;
        if (i.norm() != j.norm()) continue;
        if (i != j) {
            throw Error(std::string("off-diagonal k = 0 term z_i zbar_j with |i| = |j| present") +
                        (special_form ? "; the perturbation is not of special form" : ""));
        }
        out.add(key, c);
    }
    return out;
}

LVec l_of(const ModeKey& key) {
    LVec l;
    for (const auto& e : key.q) l.push_back({e.site, e.pow});
    for (const auto& e : key.qbar) {
        auto it = std::find_if(l.begin(), l.end(), [&](const auto& x) { return x.first == e.site; });
        if (it == l.end())
            l.push_back({e.site, -e.pow});
        else
            it->second -= e.pow;
    }
    std::erase_if(l, [](const auto& x) { return x.second == 0; });
    std::sort(l.begin(), l.end());
    return l;
}

std::string Inadmissible::describe(int rho) const {
    std::ostringstream os;
    os << "k=[";
    for (std::size_t j = 0; j < k.size(); ++j) os << (j ? "," : "") << k[j];
    os << "] l={";
    for (std::size_t t = 0; t < l.size(); ++t) os << (t ? "," : "") << format_site(l[t].first, rho) << ":" << l[t].second;
    os << "} divisor=" << divisor << " threshold=" << threshold;
    return os.str();
}

HomologicalOutcome solve_homological(const NormalForm& nf, const Series& r, const Series& r_normal, double gamma,
                                     const DiophantineParams& dp) {
    Series f(r.n(), r.rho(), r.tag());
    if (static_cast<int>(nf.omega.size()) != r.n()) throw Error("normal form dimension differs from series");
    auto big_omega = [&](const Site& s) { return nf.Omega_at(s); };
    for (const auto& [key, c] : r.sorted_terms()) {
        if (r_normal.terms().count(key)) continue;
        const LVec l = l_of(key);
        const int kn = key.k_norm();
        if (kn == 0 && l.empty()) throw Error("solve_homological: resonant k = 0, l = 0 term outside [R]");
        const double dv = divisor_value(key.k, nf.omega, l, big_omega, dp.extended);
        const DivisorClass cls = classify_l(l);
        const double thr = diophantine_threshold(kn, cls, bracket_ld(l, dp.d), gamma, dp.tau, dp.c_rho);
        if (!(std::fabs(dv) >= thr)) return Inadmissible{key.k, l, dv, thr};
        if (dp.extended) {
            const long double re = static_cast<long double>(c.imag()) / dv;
            const long double im = -static_cast<long double>(c.real()) / dv;
            f.add(key, cplx{static_cast<double>(re), static_cast<double>(im)});
        } else {
            f.add(key, cplx{c.imag() / dv, -c.real() / dv});
        }
    }
    return f;
}

StepResult apply_step(const NormalForm& nf, const Series& p, const Series& f, const Series& r_normal,
                      const DomainWeights& w, const StepOptions& opt) {
    const int n = p.n();
    const Series n_series = nf.to_series(p.rho(), p.tag());
    const Series h = n_series + p;
    LieOptions lo;
    lo.j_max = opt.lie_j_max;
    lo.max_fourier = opt.lie_max_fourier;
    lo.max_degree = opt.lie_max_degree > 0 ? opt.lie_max_degree : h.max_degree();
    lo.rel_tol = opt.lie_rel_tol;
    lo.weights = w;
    StepResult out;
    const Series increment = lie_increment(h, f, lo, &out.lie);

    out.next = nf;
    out.next.e += p.coeff(const_key(n)).real();
    out.omega_hat = Eigen::VectorXd::Zero(n);
    for (int j = 0; j < n; ++j) {
        out.omega_hat[j] = r_normal.coeff(y_key(n, j)).real();
        out.next.omega[j] += out.omega_hat[j];
    }
    for (const auto& [key, c] : r_normal.terms()) {
        if (pow_total(key.q) != 1) continue;
        const Site& s = key.q.front().site;
        auto it = out.next.Omega.find(s);
        if (it == out.next.Omega.end()) throw Error("normal part touches a site without a stored frequency");
        it->second += c.real();
        out.Omega_hat[s] = c.real();
    }
    // H o Phi - N_+ = (P - [R] - P_0000) + sum_{j>=1} ad_F^j(H)/j!, which avoids
    // subtracting the large normal form coefficients.
    out.p_next = p - r_normal;
    out.p_next.erase(const_key(n));
    out.p_next += increment;
    return out;
}

double displacement_bound(const Series& f, const DomainWeights& w, const StepOptions& opt) {
    if (f.empty()) return 0.0;
    const int n = f.n();
    LieOptions lo;
    lo.j_max = opt.lie_j_max;
    lo.max_fourier = opt.lie_max_fourier;
    lo.rel_tol = opt.lie_rel_tol;
    lo.weights = w;
    double total = 0.0;
    for (int j = 0; j < n; ++j) {
        // x_j o phi - x_j = sum_{m>=1} ad_F^{m-1}(F_{y_j}) / m!
        Series term = d_dy(f, j);
        Series dx = term;
        for (int m = 2; m <= opt.lie_j_max && !term.empty(); ++m) {
            term = poisson_bracket(term, f, Truncation{-1, opt.lie_max_fourier});
            term *= cplx{1.0 / m, 0.0};
            dx += term;
            if (sup_majorant(term, w.r, w.s) <= opt.lie_rel_tol * sup_majorant(dx, w.r, w.s)) break;
        }
        total += sup_majorant(dx, w.r, w.s);

        Series y(n, f.rho(), f.tag());
        y.add(y_key(n, j), 1.0);
        total += sup_majorant(lie_transform(y, f, lo) - y, w.r, w.s) / (w.s * w.s);
    }
    std::map<Site, bool> sites;
    for (const auto& [key, c] : f.terms()) {
        for (const auto& e : key.q) sites[e.site] = true;
        for (const auto& e : key.qbar) sites[e.site] = true;
    }
    for (const auto& [s, unused] : sites) {
        const double wt = std::pow(static_cast<double>(s.norm()), w.pbar) * std::exp(w.abar * s.norm());
        Series z(n, f.rho(), f.tag());
        ModeKey kz = const_key(n);
        kz.q.push_back({s, 1});
        z.add(kz, 1.0);
        total += wt * sup_majorant(lie_transform(z, f, lo) - z, w.r, w.s) / w.s;
    }
    return total;
}

std::optional<DiophantineViolation> propagate_diophantine(const NormalForm& nf, double gamma_next, int k_max,
                                                          double I, const std::vector<Site>& sites,
                                                          const DiophantineParams& dp) {
    const int n = static_cast<int>(nf.omega.size());
    std::vector<LVec> ls{{}};
    for (std::size_t a = 0; a < sites.size(); ++a) {
        for (int sa : {1, -1}) {
            ls.push_back({{sites[a], sa}});
            ls.push_back({{sites[a], 2 * sa}});
            for (std::size_t b = a + 1; b < sites.size(); ++b)
                for (int sb : {1, -1}) {
                    LVec l{{sites[a], sa}, {sites[b], sb}};
                    std::sort(l.begin(), l.end());
                    ls.push_back(l);
                }
        }
    }
    auto big_omega = [&](const Site& s) { return nf.Omega_at(s); };
    IntVec k(static_cast<std::size_t>(n), -k_max);
    for (;;) {
        int kn = 0;
        for (int v : k) kn += std::abs(v);
        if (kn <= k_max) {
            for (const LVec& l : ls) {
                const DivisorClass cls = classify_l(l);
                if (kn == 0 && cls.kind == DivisorClass::Zero) continue;
                if (cls.kind == DivisorClass::Minus && !(cls.site.norm() < I)) continue;
                const double dv = divisor_value(k, nf.omega, l, big_omega, dp.extended);
                const double thr = diophantine_threshold(kn, cls, bracket_ld(l, dp.d), gamma_next, dp.tau, dp.c_rho);
                if (!(std::fabs(dv) >= thr)) return DiophantineViolation{k, l, dv, thr};
            }
        }
        int j = 0;
        while (j < n && k[j] == k_max) k[j++] = -k_max;
        if (j == n) break;
        ++k[j];
    }
    return std::nullopt;
}

double omega_sup(const Eigen::VectorXd& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

double Omega_weighted_sup(const std::map<Site, double>& v, double delta) {
    double best = 0.0;
    for (const auto& [s, x] : v) best = std::max(best, std::fabs(x) * std::pow(static_cast<double>(s.norm()), -delta));
    return best;
}

}  // namespace kam
