#include "kam/series.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

#include "kam/kernels.hpp"

namespace kam {

namespace {

constexpr cplx kI{0.0, 1.0};

// Multiplication by +-i is exact, unlike a general complex product.
inline cplx times_i(cplx c) { return {-c.imag(), c.real()}; }

inline void hash_mix(std::size_t& seed, std::size_t v) {
    seed ^= v + 0x9e3779b97f4a7c15ULL + (seed << 6) + (seed >> 2);
}

}  // namespace

Site Site::of(std::initializer_list<int> coords) {
    if (coords.size() > static_cast<std::size_t>(kMaxRho))
        throw Error("site dimension exceeds " + std::to_string(kMaxRho));
    Site s;
    std::copy(coords.begin(), coords.end(), s.c.begin());
    return s;
}

std::size_t SiteHash::operator()(const Site& s) const noexcept {
    std::size_t h = 0;
    for (int v : s.c) hash_mix(h, std::hash<int>{}(v));
    return h;
}

int pow_of(const PowMap& pm, const Site& s) {
    auto it = std::lower_bound(pm.begin(), pm.end(), s,
                               [](const SitePow& e, const Site& t) { return e.site < t; });
    return (it != pm.end() && it->site == s) ? it->pow : 0;
}

void pow_add(PowMap& pm, const Site& s, int delta) {
    auto it = std::lower_bound(pm.begin(), pm.end(), s,
                               [](const SitePow& e, const Site& t) { return e.site < t; });
    if (it != pm.end() && it->site == s) {
        it->pow += delta;
        if (it->pow < 0) throw Error("negative power in mode key");
        if (it->pow == 0) pm.erase(it);
        return;
    }
    if (delta < 0) throw Error("negative power in mode key");
    if (delta > 0) pm.insert(it, SitePow{s, delta});
}

PowMap pow_merge(const PowMap& a, const PowMap& b) {
    PowMap out;
    out.reserve(a.size() + b.size());
    auto ia = a.begin();
    auto ib = b.begin();
    while (ia != a.end() && ib != b.end()) {
        if (ia->site < ib->site) {
            out.push_back(*ia++);
        } else if (ib->site < ia->site) {
            out.push_back(*ib++);
        } else {
            out.push_back(SitePow{ia->site, ia->pow + ib->pow});
            ++ia;
            ++ib;
        }
    }
    out.insert(out.end(), ia, a.end());
    out.insert(out.end(), ib, b.end());
    return out;
}

int pow_total(const PowMap& pm) {
    int t = 0;
    for (const auto& e : pm) t += e.pow;
    return t;
}

int ModeKey::k_norm() const {
    int t = 0;
    for (int v : k) t += std::abs(v);
    return t;
}

int ModeKey::m_norm() const {
    int t = 0;
    for (int v : m) t += v;
    return t;
}

bool ModeKey::k_zero() const {
    return std::all_of(k.begin(), k.end(), [](int v) { return v == 0; });
}

bool operator<(const ModeKey& a, const ModeKey& b) {
    return std::tie(a.k, a.m, a.q, a.qbar) < std::tie(b.k, b.m, b.q, b.qbar);
}

std::size_t KeyHash::operator()(const ModeKey& key) const noexcept {
    std::size_t h = key.k.size();
    for (int v : key.k) hash_mix(h, static_cast<std::size_t>(v + 1000003));
    for (int v : key.m) hash_mix(h, static_cast<std::size_t>(v) * 31u + 7u);
    SiteHash sh;
    for (const auto& e : key.q) hash_mix(h, sh(e.site) * 17u + static_cast<std::size_t>(e.pow));
    hash_mix(h, 0x51ed27u);
    for (const auto& e : key.qbar) hash_mix(h, sh(e.site) * 13u + static_cast<std::size_t>(e.pow));
    return h;
}

ModeKey make_key(int n, std::vector<int> k, std::vector<int> m, PowMap q, PowMap qbar) {
    if (k.empty()) k.assign(static_cast<std::size_t>(n), 0);
    if (m.empty()) m.assign(static_cast<std::size_t>(n), 0);
    if (static_cast<int>(k.size()) != n || static_cast<int>(m.size()) != n)
        throw Error("mode key length does not match n");
    for (int v : m)
        if (v < 0) throw Error("negative y power");
    ModeKey key;
    key.k.assign(k.begin(), k.end());
    key.m.assign(m.begin(), m.end());
    for (const auto& e : q) pow_add(key.q, e.site, e.pow);
    for (const auto& e : qbar) pow_add(key.qbar, e.site, e.pow);
    return key;
}

Series::Series(int n, int rho, std::string tag) : n_(n), rho_(rho), tag_(std::move(tag)) {
    if (n < 0) throw Error("n must be non-negative");
    if (rho < 1 || rho > kMaxRho) throw Error("rho out of range");
}

void Series::add(const ModeKey& key, cplx c) {
    auto it = terms_.find(key);
    if (it == terms_.end()) {
        if (c != cplx{}) terms_.emplace(key, c);
        return;
    }
    it->second += c;
    if (it->second == cplx{}) terms_.erase(it);
}

void Series::set(const ModeKey& key, cplx c) {
    if (c == cplx{})
        terms_.erase(key);
    else
        terms_[key] = c;
}

cplx Series::coeff(const ModeKey& key) const {
    auto it = terms_.find(key);
    return it == terms_.end() ? cplx{} : it->second;
}

void Series::canonicalize() {
    for (auto it = terms_.begin(); it != terms_.end();) {
        if (it->second == cplx{})
            it = terms_.erase(it);
        else
            ++it;
    }
}

Series& Series::operator+=(const Series& other) {
    if (!same_space(other)) throw Error("series spaces differ");
    for (const auto& [key, c] : other.terms_) add(key, c);
    return *this;
}

Series& Series::operator-=(const Series& other) {
    if (!same_space(other)) throw Error("series spaces differ");
    for (const auto& [key, c] : other.terms_) add(key, -c);
    return *this;
}

Series& Series::operator*=(cplx factor) {
    for (auto& [key, c] : terms_) c *= factor;
    canonicalize();
    return *this;
}

int Series::max_degree() const {
    int d = 0;
    for (const auto& [key, c] : terms_) d = std::max(d, key.degree());
    return d;
}

int Series::max_fourier() const {
    int d = 0;
    for (const auto& [key, c] : terms_) d = std::max(d, key.k_norm());
    return d;
}

std::vector<std::pair<ModeKey, cplx>> Series::sorted_terms() const {
    std::vector<std::pair<ModeKey, cplx>> out(terms_.begin(), terms_.end());
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    return out;
}

bool operator==(const Series& a, const Series& b) {
    return a.n_ == b.n_ && a.rho_ == b.rho_ && a.tag_ == b.tag_ && a.terms_ == b.terms_;
}

Series operator+(Series a, const Series& b) { return a += b; }
Series operator-(Series a, const Series& b) { return a -= b; }
Series operator*(Series a, cplx factor) { return a *= factor; }

Series operator*(const Series& a, const Series& b) {
    if (!a.same_space(b)) throw Error("series spaces differ");
    Series out(a.n(), a.rho(), a.tag());
    for (const auto& [ka, ca] : a.terms()) {
        for (const auto& [kb, cb] : b.terms()) {
            ModeKey key;
            key.k.resize(ka.k.size());
            key.m.resize(ka.m.size());
            for (std::size_t j = 0; j < ka.k.size(); ++j) {
                key.k[j] = ka.k[j] + kb.k[j];
                key.m[j] = ka.m[j] + kb.m[j];
            }
            key.q = pow_merge(ka.q, kb.q);
            key.qbar = pow_merge(ka.qbar, kb.qbar);
            out.add(key, ca * cb);
        }
    }
    return out;
}

Series conjugate_mirror(const Series& f) {
    Series out(f.n(), f.rho(), f.tag());
    out.reserve(f.size());
    for (const auto& [key, c] : f.terms()) {
        ModeKey mk;
        mk.k.resize(key.k.size());
        for (std::size_t j = 0; j < key.k.size(); ++j) mk.k[j] = -key.k[j];
        mk.m = key.m;
        mk.q = key.qbar;
        mk.qbar = key.q;
        out.set(mk, std::conj(c));
    }
    return out;
}

double reality_defect(const Series& f) {
    double scale = 0.0;
    for (const auto& [key, c] : f.terms()) scale = std::max(scale, std::abs(c));
    if (scale == 0.0) return 0.0;
    const Series mirror = conjugate_mirror(f);
    double worst = 0.0;
    for (const auto& [key, c] : mirror.terms()) worst = std::max(worst, std::abs(f.coeff(key) - c));
    for (const auto& [key, c] : f.terms())
        if (mirror.terms().find(key) == mirror.terms().end()) worst = std::max(worst, std::abs(c));
    return worst / scale;
}

bool is_real(const Series& f, double rel_tol) { return reality_defect(f) <= rel_tol; }

Series d_dx(const Series& f, int j) {
    if (j < 0 || j >= f.n()) throw Error("angle index out of range");
    Series out(f.n(), f.rho(), f.tag());
    for (const auto& [key, c] : f.terms())
        if (key.k[j] != 0) out.add(key, times_i(c * static_cast<double>(key.k[j])));
    return out;
}

Series d_dy(const Series& f, int j) {
    if (j < 0 || j >= f.n()) throw Error("action index out of range");
    Series out(f.n(), f.rho(), f.tag());
    for (const auto& [key, c] : f.terms()) {
        if (key.m[j] == 0) continue;
        ModeKey nk = key;
        nk.m[j] -= 1;
        out.add(nk, c * static_cast<double>(key.m[j]));
    }
    return out;
}

Series d_dz(const Series& f, const Site& s) {
    Series out(f.n(), f.rho(), f.tag());
    for (const auto& [key, c] : f.terms()) {
        const int p = pow_of(key.q, s);
        if (p == 0) continue;
        ModeKey nk = key;
        pow_add(nk.q, s, -1);
        out.add(nk, c * static_cast<double>(p));
    }
    return out;
}

Series d_dzbar(const Series& f, const Site& s) {
    Series out(f.n(), f.rho(), f.tag());
    for (const auto& [key, c] : f.terms()) {
        const int p = pow_of(key.qbar, s);
        if (p == 0) continue;
        ModeKey nk = key;
        pow_add(nk.qbar, s, -1);
        out.add(nk, c * static_cast<double>(p));
    }
    return out;
}

cplx evaluate(const Series& f, const PhasePoint& pt) {
    if (static_cast<int>(pt.x.size()) != f.n() || static_cast<int>(pt.y.size()) != f.n())
        throw Error("phase point dimension does not match series");
    auto lookup = [](const std::map<Site, cplx>& v, const Site& s) {
        auto it = v.find(s);
        return it == v.end() ? cplx{} : it->second;
    };
    cplx total{};
    for (const auto& [key, c] : f.terms()) {
        cplx phase{};
        cplx mono{1.0, 0.0};
        for (int j = 0; j < f.n(); ++j) {
            phase += static_cast<double>(key.k[j]) * pt.x[j];
            for (int e = 0; e < key.m[j]; ++e) mono *= pt.y[j];
        }
        for (const auto& e : key.q) mono *= std::pow(lookup(pt.z, e.site), e.pow);
        for (const auto& e : key.qbar) mono *= std::pow(lookup(pt.zbar, e.site), e.pow);
        total += c * std::exp(kI * phase) * mono;
    }
    return total;
}

namespace {

struct FlatTerm {
    const ModeKey* key;
    cplx c;
    int deg;
};

std::vector<FlatTerm> flatten(const Series& s) {
    std::vector<FlatTerm> out;
    out.reserve(s.size());
    for (const auto& [key, c] : s.terms()) out.push_back({&key, c, key.degree()});
    return out;
}

ModeKey combine(const ModeKey& a, const ModeKey& b) {
    ModeKey key;
    key.k.resize(a.k.size());
    key.m.resize(a.m.size());
    for (std::size_t j = 0; j < a.k.size(); ++j) {
        key.k[j] = a.k[j] + b.k[j];
        key.m[j] = a.m[j] + b.m[j];
    }
    key.q = pow_merge(a.q, b.q);
    key.qbar = pow_merge(a.qbar, b.qbar);
    return key;
}

bool fourier_ok(const ModeKey& a, const ModeKey& b, int max_fourier) {
    if (max_fourier < 0) return true;
    int t = 0;
    for (std::size_t j = 0; j < a.k.size(); ++j) t += std::abs(a.k[j] + b.k[j]);
    return t <= max_fourier;
}

// Accumulates sum_j F_x G_y + i sum_s F_z G_zbar into out with the given sign.
// The bracket is the difference of two such half products, which makes
// {F,G} = -{G,F} hold coefficient for coefficient.
void half_bracket(const Series& f, const Series& g, Truncation tr, double sign, Series& out) {
    const auto gf = flatten(g);
    const int n = f.n();
    std::vector<std::vector<int>> with_m(static_cast<std::size_t>(n));
    std::unordered_map<Site, std::vector<int>, SiteHash> with_qbar;
    for (int idx = 0; idx < static_cast<int>(gf.size()); ++idx) {
        const ModeKey& b = *gf[idx].key;
        for (int j = 0; j < n; ++j)
            if (b.m[j] > 0) with_m[j].push_back(idx);
        for (const auto& e : b.qbar) with_qbar[e.site].push_back(idx);
    }
    for (const auto& [ka, ca] : f.terms()) {
        const int dega = ka.degree();
        for (int j = 0; j < n; ++j) {
            if (ka.k[j] == 0) continue;
            for (int idx : with_m[j]) {
                const FlatTerm& t = gf[idx];
                if (tr.max_degree >= 0 && dega + t.deg - 2 > tr.max_degree) continue;
                if (!fourier_ok(ka, *t.key, tr.max_fourier)) continue;
                ModeKey key = combine(ka, *t.key);
                key.m[j] -= 1;
                const double factor = sign * static_cast<double>(ka.k[j]) * static_cast<double>(t.key->m[j]);
                out.add(key, times_i((ca * t.c) * factor));
            }
        }
        for (const auto& e : ka.q) {
            auto it = with_qbar.find(e.site);
            if (it == with_qbar.end()) continue;
            for (int idx : it->second) {
                const FlatTerm& t = gf[idx];
                if (tr.max_degree >= 0 && dega + t.deg - 2 > tr.max_degree) continue;
                if (!fourier_ok(ka, *t.key, tr.max_fourier)) continue;
                ModeKey key = combine(ka, *t.key);
                pow_add(key.q, e.site, -1);
                pow_add(key.qbar, e.site, -1);
                const double factor = sign * static_cast<double>(e.pow) *
                                      static_cast<double>(pow_of(t.key->qbar, e.site));
                out.add(key, times_i((ca * t.c) * factor));
            }
        }
    }
}

}  // namespace

Series poisson_bracket(const Series& f, const Series& g, Truncation trunc) {
    if (!f.same_space(g) || f.tag() != g.tag())
        throw Error("poisson_bracket: operands differ in n, rho or param_tag");
    Series first(f.n(), f.rho(), f.tag());
    half_bracket(f, g, trunc, 1.0, first);
    Series second(f.n(), f.rho(), f.tag());
    half_bracket(g, f, trunc, 1.0, second);
    for (const auto& [key, c] : second.terms()) first.add(key, -c);
    return first;
}

void DomainWeights::validate() const {
    if (!(a >= 0.0)) throw Error("weight a must be non-negative");
    if (!(abar > a)) throw Error("weight abar must exceed a");
    if (!(p >= 0.0)) throw Error("weight p must be non-negative");
    if (!(pbar >= p)) throw Error("weight pbar must be at least p");
    if (!(r > 0.0)) throw Error("strip width r must be positive");
    if (!(s > 0.0)) throw Error("domain size s must be positive");
}

double weighted_seq_norm(const std::vector<std::pair<Site, cplx>>& z, double a, double p) {
    if (a < 0.0 || p < 0.0) throw Error("weights must be non-negative");
    std::vector<double> mag2;
    std::vector<double> wt2;
    mag2.reserve(z.size());
    wt2.reserve(z.size());
    for (const auto& [site, v] : z) {
        const int ni = site.norm();
        if (ni == 0) throw Error("site with |i| = 0 is tangential");
        mag2.push_back(std::norm(v));
        wt2.push_back(std::pow(static_cast<double>(ni), 2.0 * p) * std::exp(2.0 * a * ni));
    }
    return std::sqrt(kernels::dot(mag2.data(), wt2.data(), mag2.size()));
}

double majorant_xnorm(const Series& f, const DomainWeights& w) {
    if (f.empty()) return 0.0;
    std::vector<double> mag;
    std::vector<double> factor;
    mag.reserve(f.size());
    factor.reserve(f.size());
    const double log_s = std::log(w.s);
    // On ||z||_{a,p} < s every |z_j| is at most s |j|^{-p} e^{-a|j|}; a z_i derivative
    // removes one such factor and adds the target weight |i|^{pbar} e^{abar|i|}.
    auto log_site = [](const Site& st, double pw, double ex) {
        const double ni = st.norm();
        return (ni > 0.0 ? pw * std::log(ni) : 0.0) + ex * ni;
    };
    for (const auto& [key, c] : f.terms()) {
        double log_dom = 0.0;
        for (const auto& e : key.q) log_dom -= e.pow * log_site(e.site, w.p, w.a);
        for (const auto& e : key.qbar) log_dom -= e.pow * log_site(e.site, w.p, w.a);
        double deriv = static_cast<double>(key.m_norm() + key.k_norm());
        auto site_weight = [&](const SitePow& e) {
            return e.pow * std::exp(log_site(e.site, w.pbar, w.abar) + log_site(e.site, w.p, w.a));
        };
        for (const auto& e : key.q) deriv += site_weight(e);
        for (const auto& e : key.qbar) deriv += site_weight(e);
        if (deriv == 0.0) continue;
        mag.push_back(std::abs(c));
        factor.push_back(deriv * std::exp(key.k_norm() * w.r + (key.degree() - 2) * log_s + log_dom));
    }
    return kernels::dot(mag.data(), factor.data(), mag.size());
}

double lipschitz_seminorm(const std::vector<Sample>& family, const DomainWeights& w) {
    if (family.size() < 2) throw Error("lipschitz_seminorm needs at least two samples");
    double best = 0.0;
    bool any_pair = false;
    for (std::size_t i = 0; i < family.size(); ++i) {
        for (std::size_t j = i + 1; j < family.size(); ++j) {
            const auto& a = family[i];
            const auto& b = family[j];
            if (a.xi.size() != b.xi.size()) throw Error("parameter samples differ in dimension");
            double dist2 = 0.0;
            for (std::size_t t = 0; t < a.xi.size(); ++t) dist2 += (a.xi[t] - b.xi[t]) * (a.xi[t] - b.xi[t]);
            if (dist2 == 0.0) continue;
            if (!a.f.same_space(b.f)) throw Error("series spaces differ");
            Series diff(a.f.n(), a.f.rho());
            for (const auto& [key, c] : a.f.terms()) diff.add(key, c);
            for (const auto& [key, c] : b.f.terms()) diff.add(key, -c);
            best = std::max(best, majorant_xnorm(diff, w) / std::sqrt(dist2));
            any_pair = true;
        }
    }
    if (!any_pair) throw Error("lipschitz_seminorm needs two distinct samples");
    return best;
}

Series lie_increment(const Series& h, const Series& f, const LieOptions& opt, LieStats* stats) {
    Series total(h.n(), h.rho(), h.tag());
    if (stats) *stats = LieStats{};
    if (f.empty()) return total;
    const Truncation tr{opt.max_degree, opt.max_fourier};
    Series term = h;
    Series higher(h.n(), h.rho(), h.tag());
    std::vector<double> norms;
    int used = 0;
    for (int j = 1; j <= opt.j_max; ++j) {
        term = poisson_bracket(term, f, tr);
        term *= cplx{1.0 / j, 0.0};
        if (term.empty()) break;
        const double nrm = majorant_xnorm(term, opt.weights);
        norms.push_back(nrm);
        total += term;
        used = j;
        const std::size_t c = norms.size();
        if (c >= 3 && norms[c - 1] >= norms[c - 2] && norms[c - 2] >= norms[c - 3] && nrm > 0.0)
            throw DivergenceError("Lie series terms stopped decaying at order " + std::to_string(j));
        if (j >= 2) {
            higher += term;
            if (j >= 3 && opt.rel_tol > 0.0 && nrm <= opt.rel_tol * majorant_xnorm(higher, opt.weights)) break;
        }
    }
    if (stats) {
        stats->terms_used = used;
        stats->term_norms = std::move(norms);
    }
    return total;
}

Series lie_transform(const Series& h, const Series& f, const LieOptions& opt, LieStats* stats) {
    return h + lie_increment(h, f, opt, stats);
}

Series lie_transform(const Series& h, const Series& f, int max_degree, int max_fourier) {
    LieOptions opt;
    opt.max_degree = max_degree;
    opt.max_fourier = max_fourier;
    return lie_transform(h, f, opt);
}

}  // namespace kam
