#include "kam/pde.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <set>

namespace kam {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double factorial(int k) {
    double f = 1.0;
    for (int i = 2; i <= k; ++i) f *= i;
    return f;
}

// Number of orderings of a non-decreasing index sequence.
double orderings(const std::vector<int>& idx) {
    double count = factorial(static_cast<int>(idx.size()));
    std::size_t run = 1;
    for (std::size_t i = 1; i <= idx.size(); ++i) {
        if (i < idx.size() && idx[i] == idx[i - 1]) {
            ++run;
        } else {
            count /= factorial(static_cast<int>(run));
            run = 1;
        }
    }
    return count;
}

// Calls fn on every non-decreasing sequence of length len over [0, size).
void for_each_multiset(int size, int len, const std::function<void(const std::vector<int>&)>& fn) {
    if (len == 0) {
        fn({});
        return;
    }
    if (size == 0) return;
    std::vector<int> idx(static_cast<std::size_t>(len), 0);
    for (;;) {
        fn(idx);
        int pos = len - 1;
        while (pos >= 0 && idx[static_cast<std::size_t>(pos)] == size - 1) --pos;
        if (pos < 0) return;
        const int v = idx[static_cast<std::size_t>(pos)] + 1;
        for (int t = pos; t < len; ++t) idx[static_cast<std::size_t>(t)] = v;
    }
}

Site add_sites(const Site& a, const Site& b, int sign) {
    Site s;
    for (int d = 0; d < kMaxRho; ++d) s.c[d] = a.c[d] + sign * b.c[d];
    return s;
}

ModeKey w_key(const std::vector<Site>& q, const std::vector<Site>& qbar) {
    ModeKey key;
    for (const auto& s : q) pow_add(key.q, s, 1);
    for (const auto& s : qbar) pow_add(key.qbar, s, 1);
    return key;
}

void add_quadratic(BuiltHamiltonian& bh, int rho) {
    bh.h = Series(0, rho);
    for (const auto& [s, lam] : bh.lambda) bh.h.add(w_key({s}, {s}), lam);
    bh.h += bh.g;
}

double generalized_binomial(double e, int t) {
    double c = 1.0;
    for (int i = 0; i < t; ++i) c *= (e - i) / (i + 1);
    return c;
}

}  // namespace

void PdeSetup::validate() const {
    if (tangential.empty()) throw Error("at least one tangential site is required");
    if (amplitudes.size() != tangential.size()) throw Error("one amplitude per tangential site is required");
    if (series_truncation < 4) throw Error("series_truncation must be at least 4");
    if (mode_cutoff < 1) throw Error("mode_cutoff must be positive");
    if (y_jet < 0) throw Error("y_jet must be non-negative");
    std::set<Site> seen;
    for (const auto& s : tangential)
        if (!seen.insert(s).second) throw Error("tangential sites must be distinct");
    const auto sites = retained_sites(*this);
    const std::set<Site> retained(sites.begin(), sites.end());
    for (const auto& s : tangential)
        if (!retained.count(s)) throw Error("tangential site " + format_site(s, kMaxRho) + " is beyond the mode cutoff");
    if (kind == PdeKind::NLS) {
        if (m < 1) throw Error("NLS domain dimension must be positive");
    } else {
        if (rho < 1 || rho > kMaxRho) throw Error("Klein-Gordon torus dimension out of range");
        if (!seen.count(Site{})) throw Error("Klein-Gordon tangential sites must contain 0");
        if (alpha == 0.0) throw Error("alpha = 0 leaves no nonlinearity");
    }
}

std::vector<Site> retained_sites(const PdeSetup& setup) {
    std::vector<Site> out;
    if (setup.kind == PdeKind::NLS) {
        for (int j = 1; j <= setup.mode_cutoff; ++j) out.push_back(Site::of(j));
        return out;
    }
    const int L = setup.mode_cutoff;
    Site s;
    std::function<void(int, int)> rec = [&](int dim, int budget) {
        if (dim == setup.rho) {
            out.push_back(s);
            return;
        }
        for (int v = -budget; v <= budget; ++v) {
            s.c[dim] = v;
            rec(dim + 1, budget - std::abs(v));
        }
        s.c[dim] = 0;
    };
    rec(0, L);
    std::sort(out.begin(), out.end());
    return out;
}

BuiltHamiltonian nls_hamiltonian(const PdeSetup& setup, const Eigen::VectorXd& xi) {
    if (setup.kind != PdeKind::NLS) throw Error("nls_hamiltonian needs an NLS setup");
    setup.validate();
    const int n = static_cast<int>(setup.tangential.size());
    if (xi.size() != n) throw Error("xi must have one entry per tangential site");
    BuiltHamiltonian bh;
    bh.sites = retained_sites(setup);
    bh.sm.d = 2.0 / setup.m;
    bh.sm.rho = 1;
    bh.sm.principal_corrections = setup.spectrum_corrections;
    bh.sm.tangential = setup.tangential;
    Eigen::VectorXd omega0(n);
    for (int l = 0; l < n; ++l) {
        const Site& t = setup.tangential[static_cast<std::size_t>(l)];
        double v = std::pow(static_cast<double>(t.norm()), bh.sm.d);
        if (auto it = setup.spectrum_corrections.find(t); it != setup.spectrum_corrections.end()) v += it->second;
        omega0[l] = v;
    }
    bh.fm = FrequencyMap::shifted_identity(omega0);
    const Eigen::VectorXd om = bh.fm.eval(xi);
    for (const auto& s : bh.sites) {
        auto it = std::find(setup.tangential.begin(), setup.tangential.end(), s);
        bh.lambda[s] = it == setup.tangential.end() ? bh.sm.eval(s, xi) : om[it - setup.tangential.begin()];
    }

    // G = sum_p f_p/(p+1) int |u|^{2(p+1)}, u = sum_j w_j e^{ijx}/sqrt(2 pi).
    bh.g = Series(0, 1);
    const int ns = static_cast<int>(bh.sites.size());
    for (std::size_t pi = 0; pi < setup.f.size(); ++pi) {
        const int p = static_cast<int>(pi) + 1;
        if (2 * (p + 1) > setup.series_truncation || setup.f[pi] == 0.0) continue;
        const double scale = setup.f[pi] / (p + 1) * std::pow(kTwoPi, -p);
        std::map<int, std::vector<std::pair<std::vector<int>, double>>> by_sum;
        for_each_multiset(ns, p + 1, [&](const std::vector<int>& idx) {
            int sum = 0;
            for (int i : idx) sum += bh.sites[static_cast<std::size_t>(i)].c[0];
            by_sum[sum].emplace_back(idx, orderings(idx));
        });
        for (const auto& [sum, group] : by_sum) {
            for (const auto& [a, ca] : group) {
                for (const auto& [b, cb] : group) {
                    std::vector<Site> qa, qb;
                    for (int i : a) qa.push_back(bh.sites[static_cast<std::size_t>(i)]);
                    for (int i : b) qb.push_back(bh.sites[static_cast<std::size_t>(i)]);
                    bh.g.add(w_key(qa, qb), scale * ca * cb);
                }
            }
        }
    }
    add_quadratic(bh, 1);
    return bh;
}

BuiltHamiltonian kg_hamiltonian(const PdeSetup& setup, const Eigen::VectorXd& xi) {
    if (setup.kind != PdeKind::KleinGordon) throw Error("kg_hamiltonian needs a Klein-Gordon setup");
    setup.validate();
    const int n = static_cast<int>(setup.tangential.size());
    if (xi.size() != n) throw Error("xi must have one entry per tangential site");
    BuiltHamiltonian bh;
    bh.sites = retained_sites(setup);
    bh.sm.d = 1.0;
    bh.sm.rho = setup.rho;
    bh.sm.principal_corrections = setup.spectrum_corrections;
    bh.sm.tangential = setup.tangential;
    Eigen::VectorXd omega0(n);
    for (int l = 0; l < n; ++l) omega0[l] = setup.tangential[static_cast<std::size_t>(l)].norm() - 1.0;
    bh.fm = FrequencyMap::shifted_identity(omega0);
    const Eigen::VectorXd om = bh.fm.eval(xi);
    for (const auto& s : bh.sites) {
        auto it = std::find(setup.tangential.begin(), setup.tangential.end(), s);
        const double lam = it == setup.tangential.end() ? bh.sm.eval(s, xi) : om[it - setup.tangential.begin()];
        if (!(lam > 0.0)) throw Error("linear frequency at site " + format_site(s, setup.rho) + " is not positive");
        bh.lambda[s] = lam;
    }

    // F(u) = sum_{k>=2} alpha^{k-1} u^{2k} / (2 k!), u = sum_j (w_j phi_j + wbar_j conj phi_j)/sqrt(2 lambda_j).
    bh.g = Series(0, setup.rho);
    const int ns = static_cast<int>(bh.sites.size());
    const double vol = std::pow(kTwoPi, setup.rho);
    for (int k = 2; 2 * k <= setup.series_truncation; ++k) {
        const double scale = std::pow(setup.alpha, k - 1) / (2.0 * factorial(k)) * std::pow(vol, 1.0 - k);
        // Factor index f < ns is w_f, f >= ns is wbar_{f - ns}.
        for_each_multiset(2 * ns, 2 * k, [&](const std::vector<int>& idx) {
            Site mom;
            double c = scale * orderings(idx);
            std::vector<Site> q, qb;
            for (int f : idx) {
                const bool conj = f >= ns;
                const Site& s = bh.sites[static_cast<std::size_t>(conj ? f - ns : f)];
                mom = add_sites(mom, s, conj ? -1 : 1);
                c /= std::sqrt(2.0 * bh.lambda.at(s));
                (conj ? qb : q).push_back(s);
            }
            if (mom.is_zero()) bh.g.add(w_key(q, qb), c);
        });
    }
    add_quadratic(bh, setup.rho);
    return bh;
}

BuiltHamiltonian build_hamiltonian(const PdeSetup& setup, const Eigen::VectorXd& xi) {
    return setup.kind == PdeKind::NLS ? nls_hamiltonian(setup, xi) : kg_hamiltonian(setup, xi);
}

KamForm action_angle_embed(const Series& h, const std::vector<Site>& tangential, const std::vector<double>& amplitudes,
                           int y_jet, const DomainWeights& w) {
    if (h.n() != 0) throw Error("action_angle_embed expects a series in mode coordinates (n = 0)");
    if (amplitudes.size() != tangential.size()) throw Error("one amplitude per tangential site is required");
    if (y_jet < 0) throw Error("y_jet must be non-negative");
    for (double a : amplitudes)
        if (!(a > 0.0)) throw Error("tangential amplitudes must be positive");
    const int n = static_cast<int>(tangential.size());
    std::map<Site, int> slot;
    for (int l = 0; l < n; ++l) slot[tangential[static_cast<std::size_t>(l)]] = l;

    Series full(n, h.rho(), h.tag());
    std::set<Site> normal_sites;
    for (const auto& [key, c] : h.terms()) {
        std::vector<int> al(static_cast<std::size_t>(n), 0), be(static_cast<std::size_t>(n), 0);
        ModeKey base;
        base.k.assign(static_cast<std::size_t>(n), 0);
        base.m.assign(static_cast<std::size_t>(n), 0);
        for (const auto& e : key.q) {
            if (auto it = slot.find(e.site); it != slot.end()) {
                al[static_cast<std::size_t>(it->second)] += e.pow;
            } else {
                pow_add(base.q, e.site, e.pow);
                normal_sites.insert(e.site);
            }
        }
        for (const auto& e : key.qbar) {
            if (auto it = slot.find(e.site); it != slot.end()) {
                be[static_cast<std::size_t>(it->second)] += e.pow;
            } else {
                pow_add(base.qbar, e.site, e.pow);
                normal_sites.insert(e.site);
            }
        }
        for (int l = 0; l < n; ++l) base.k[static_cast<std::size_t>(l)] = al[static_cast<std::size_t>(l)] - be[static_cast<std::size_t>(l)];

        // prod_l (A_l + y_l)^{e_l}, A_l = |w_l|^2, expanded to total y order y_jet.
        std::vector<int> t(static_cast<std::size_t>(n), 0);
        std::function<void(int, int, cplx)> rec = [&](int l, int budget, cplx acc) {
            if (l == n) {
                ModeKey k2 = base;
                for (int j = 0; j < n; ++j) k2.m[static_cast<std::size_t>(j)] = t[static_cast<std::size_t>(j)];
                full.add(k2, acc);
                return;
            }
            const double e = 0.5 * (al[static_cast<std::size_t>(l)] + be[static_cast<std::size_t>(l)]);
            const double A = amplitudes[static_cast<std::size_t>(l)] * amplitudes[static_cast<std::size_t>(l)];
            const int tmax = e == 0.0 ? 0 : budget;
            for (int tt = 0; tt <= tmax; ++tt) {
                const double bc = generalized_binomial(e, tt);
                if (bc == 0.0) break;
                t[static_cast<std::size_t>(l)] = tt;
                rec(l + 1, budget - tt, acc * (bc * std::pow(A, e - tt)));
            }
            t[static_cast<std::size_t>(l)] = 0;
        };
        rec(0, y_jet, c);
    }

    KamForm out;
    out.nf.omega = Eigen::VectorXd::Zero(n);
    out.p = Series(n, h.rho(), h.tag());
    for (const auto& [key, c] : full.terms()) {
        const int dq = pow_total(key.q), dqb = pow_total(key.qbar);
        if (key.k_zero() && dq == 0 && dqb == 0 && key.m_norm() == 0) {
            out.nf.e += c.real();
            continue;
        }
        if (key.k_zero() && dq == 0 && dqb == 0 && key.m_norm() == 1) {
            for (int j = 0; j < n; ++j)
                if (key.m[static_cast<std::size_t>(j)] == 1) out.nf.omega[j] += c.real();
            continue;
        }
        if (key.k_zero() && key.m_norm() == 0 && dq == 1 && dqb == 1 && key.q.front().site == key.qbar.front().site) {
            out.nf.Omega[key.q.front().site] += c.real();
            continue;
        }
        out.p.add(key, c);
    }
    for (const auto& s : normal_sites) out.nf.Omega.try_emplace(s, 0.0);
    out.xp = majorant_xnorm(out.p, w);
    return out;
}

Site momentum(const ModeKey& key, const std::vector<Site>& tangential) {
    if (key.k.size() != tangential.size()) throw Error("momentum needs one tangential site per angle");
    Site m;
    for (std::size_t l = 0; l < key.k.size(); ++l)
        for (int d = 0; d < kMaxRho; ++d) m.c[d] += key.k[l] * tangential[l].c[d];
    for (const auto& e : key.q)
        for (int d = 0; d < kMaxRho; ++d) m.c[d] += e.pow * e.site.c[d];
    for (const auto& e : key.qbar)
        for (int d = 0; d < kMaxRho; ++d) m.c[d] -= e.pow * e.site.c[d];
    return m;
}

SpecialFormCheck check_special_form(const Series& p, const std::vector<Site>& tangential) {
    SpecialFormCheck out;
    for (const auto& [key, c] : p.sorted_terms()) {
        if (!momentum(key, tangential).is_zero()) {
            out.ok = false;
            out.violator = key;
            return out;
        }
    }
    return out;
}

RegularityReport regularity_check(const Series& g, double a, double p, const std::vector<double>& amplitudes) {
    if (amplitudes.size() < 2) throw Error("regularity_check needs at least two amplitudes");
    if (g.n() != 0) throw Error("regularity_check expects a series in mode coordinates (n = 0)");
    std::set<Site> sites;
    for (const auto& [key, c] : g.terms()) {
        for (const auto& e : key.q) sites.insert(e.site);
        for (const auto& e : key.qbar) sites.insert(e.site);
    }
    RegularityReport rep;
    // Unit direction in l^{a,p} with equal weighted entries.
    std::map<Site, double> dir;
    for (const auto& s : sites) {
        const double ni = std::max(1, s.norm());
        dir[s] = 1.0 / (std::pow(ni, p) * std::exp(a * s.norm()) * std::sqrt(static_cast<double>(sites.size())));
    }
    std::map<Site, Series> grads;
    for (const auto& s : sites) grads.emplace(s, d_dzbar(g, s));
    for (double t : amplitudes) {
        PhasePoint pt;
        std::vector<std::pair<Site, cplx>> zin, grad;
        for (const auto& [s, v] : dir) {
            pt.z[s] = t * v;
            pt.zbar[s] = t * v;
            zin.emplace_back(s, t * v);
        }
        for (const auto& [s, gs] : grads) grad.emplace_back(s, evaluate(gs, pt));
        rep.input_norms.push_back(weighted_seq_norm(zin, a, p));
        rep.gradient_norms.push_back(weighted_seq_norm(grad, a, p));
    }
    const bool all_zero = std::all_of(rep.gradient_norms.begin(), rep.gradient_norms.end(), [](double v) { return v == 0.0; });
    if (sites.empty() || all_zero) {
        rep.vanishes = true;
        rep.exponent = std::nan("");
        return rep;
    }
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double cnt = static_cast<double>(amplitudes.size());
    for (std::size_t i = 0; i < amplitudes.size(); ++i) {
        const double x = std::log(rep.input_norms[i]);
        const double y = std::log(rep.gradient_norms[i]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    rep.exponent = (cnt * sxy - sx * sy) / (cnt * sxx - sx * sx);
    return rep;
}

}  // namespace kam
