#include "kam/spectra.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace kam {

FrequencyMap::FrequencyMap(Eigen::VectorXd omega0, Eigen::MatrixXd a) : omega0_(std::move(omega0)), a_(std::move(a)) {
    if (a_.rows() != a_.cols() || a_.rows() != omega0_.size())
        throw Error("frequency map: A must be square and match omega0");
    if (a_.size() == 0) throw Error("frequency map: empty");
    Eigen::FullPivLU<Eigen::MatrixXd> lu(a_);
    if (!lu.isInvertible()) throw Error("frequency map: A is singular");
}

FrequencyMap FrequencyMap::shifted_identity(Eigen::VectorXd omega0) {
    const auto n = omega0.size();
    return FrequencyMap(std::move(omega0), Eigen::MatrixXd::Identity(n, n));
}

Eigen::VectorXd FrequencyMap::eval(const Eigen::VectorXd& xi) const {
    if (xi.size() != omega0_.size()) throw Error("parameter dimension does not match frequency map");
    return omega0_ + a_ * xi;
}

double FrequencyMap::lipschitz() const {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(a_);
    return svd.singularValues()(0);
}

double FrequencyMap::inverse_lipschitz() const {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(a_);
    return 1.0 / svd.singularValues()(svd.singularValues().size() - 1);
}

Eigen::VectorXd eval_omega(const FrequencyMap& fm, const Eigen::VectorXd& xi) { return fm.eval(xi); }

bool SpectrumModel::is_tangential(const Site& i) const {
    return std::find(tangential.begin(), tangential.end(), i) != tangential.end();
}

double SpectrumModel::principal(const Site& i) const {
    const int ni = i.norm();
    if (ni == 0) throw Error("normal frequency requested at |i| = 0");
    if (is_tangential(i)) throw Error("site " + format_site(i, rho) + " is tangential");
    double v = std::pow(static_cast<double>(ni), d);
    auto it = principal_corrections.find(i);
    if (it != principal_corrections.end()) v += it->second;
    return v;
}

std::vector<double> SpectrumModel::gradient(const Site& i) const {
    auto it = tail.find(i);
    if (it == tail.end()) return {};
    std::vector<double> g = it->second;
    const double scale = std::pow(static_cast<double>(i.norm()), delta);
    for (double& v : g) v *= scale;
    return g;
}

double SpectrumModel::eval(const Site& i, const Eigen::VectorXd& xi) const {
    double v = principal(i);
    const auto g = gradient(i);
    if (!g.empty()) {
        if (static_cast<Eigen::Index>(g.size()) != xi.size()) throw Error("tail coefficient length mismatch");
        for (std::size_t t = 0; t < g.size(); ++t) v += g[t] * xi[static_cast<Eigen::Index>(t)];
    }
    return v;
}

double eval_Omega(const SpectrumModel& sm, const Site& i, const Eigen::VectorXd& xi) { return sm.eval(i, xi); }

namespace {

std::vector<Eigen::VectorXd> box_corners(const std::vector<double>& lo, const std::vector<double>& hi) {
    const std::size_t n = lo.size();
    std::vector<Eigen::VectorXd> out;
    for (std::size_t mask = 0; mask < (std::size_t{1} << n); ++mask) {
        Eigen::VectorXd c(static_cast<Eigen::Index>(n));
        for (std::size_t j = 0; j < n; ++j) c[static_cast<Eigen::Index>(j)] = (mask >> j) & 1 ? hi[j] : lo[j];
        out.push_back(c);
    }
    return out;
}

std::vector<Site> sites_up_to(int rho, int max_site) {
    std::vector<Site> out;
    if (rho == 1) {
        for (int i = -max_site; i <= max_site; ++i)
            if (i != 0) out.push_back(Site::of(i));
        return out;
    }
    for (int i = -max_site; i <= max_site; ++i)
        for (int j = -max_site; j <= max_site; ++j) {
            if (rho == 2) {
                Site s = Site::of({i, j});
                if (!s.is_zero() && s.norm() <= max_site) out.push_back(s);
                continue;
            }
            for (int k = -max_site; k <= max_site; ++k) {
                Site s = Site::of({i, j, k});
                if (!s.is_zero() && s.norm() <= max_site) out.push_back(s);
            }
        }
    return out;
}

}  // namespace

void check_spectrum_on_box(const SpectrumModel& sm, const std::vector<double>& lo, const std::vector<double>& hi,
                           int max_site) {
    if (lo.size() != hi.size()) throw Error("box bounds differ in dimension");
    const auto corners = box_corners(lo, hi);
    // Each Omega_i is affine in xi, so its range over the box is spanned by the corners.
    std::vector<std::pair<Site, std::pair<double, double>>> ranges;
    for (const Site& s : sites_up_to(sm.rho, max_site)) {
        if (sm.is_tangential(s)) continue;
        double mn = INFINITY, mx = -INFINITY;
        for (const auto& c : corners) {
            const double v = sm.eval(s, c);
            mn = std::min(mn, v);
            mx = std::max(mx, v);
        }
        if (mn <= 0.0 && mx >= 0.0) throw Error("Omega vanishes on the box at site " + format_site(s, sm.rho));
        ranges.push_back({s, {mn, mx}});
    }
    if (sm.rho != 1) return;
    for (std::size_t a = 0; a < ranges.size(); ++a)
        for (std::size_t b = a + 1; b < ranges.size(); ++b) {
            if (ranges[a].first.norm() == ranges[b].first.norm()) continue;
            double mn = INFINITY, mx = -INFINITY;
            for (const auto& c : corners) {
                const double v = sm.eval(ranges[a].first, c) - sm.eval(ranges[b].first, c);
                mn = std::min(mn, v);
                mx = std::max(mx, v);
            }
            if (mn <= 0.0 && mx >= 0.0)
                throw Error("Omega_i = Omega_j on the box for sites " + format_site(ranges[a].first, 1) + ", " +
                            format_site(ranges[b].first, 1));
        }
}

LVec make_l(std::initializer_list<std::pair<Site, int>> entries) {
    LVec out;
    for (const auto& [s, v] : entries) {
        auto it = std::find_if(out.begin(), out.end(), [&](const auto& e) { return e.first == s; });
        if (it == out.end())
            out.push_back({s, v});
        else
            it->second += v;
    }
    std::erase_if(out, [](const auto& e) { return e.second == 0; });
    std::sort(out.begin(), out.end());
    return out;
}

int l_norm(const LVec& l) {
    int t = 0;
    for (const auto& e : l) t += std::abs(e.second);
    return t;
}

DivisorClass classify_l(const LVec& l) {
    if (l_norm(l) > 2) throw Error("classify_l: |l| > 2");
    DivisorClass cls;
    if (l.empty()) return cls;
    if (l.size() == 2 && l[0].second * l[1].second == -1) {
        cls.kind = DivisorClass::Minus;
        cls.site = l[0].second == 1 ? l[0].first : l[1].first;
        return cls;
    }
    cls.kind = DivisorClass::Plus;
    return cls;
}

double bracket_ld(const LVec& l, double d) {
    double acc = 0.0;
    for (const auto& [s, v] : l) acc += v * std::pow(static_cast<double>(s.norm()), d);
    return std::fabs(acc);
}

void DiophantineParams::validate() const {
    if (d <= 0.0) throw Error("growth exponent d must be positive");
    if (c_rho < c1_rho + rho) throw Error("c(rho) must be at least c1(rho) + rho");
    if (tau < min_tau(n, d, c_rho) - 1e-12)
        throw Error("tau must be at least n + (c(rho)+2)/d + 4 = " + std::to_string(min_tau(n, d, c_rho)));
}

double divisor(const IntVec& k, const LVec& l, const Eigen::VectorXd& xi, const FrequencyMap& fm,
               const SpectrumModel& sm, bool extended) {
    if (static_cast<int>(k.size()) != fm.n()) throw Error("k length does not match n");
    const Eigen::VectorXd omega = fm.eval(xi);
    return divisor_value(k, omega, l, [&](const Site& s) { return sm.eval(s, xi); }, extended);
}

double diophantine_threshold(int k_norm, const DivisorClass& cls, double ld, double gamma, double tau,
                             double c_rho) {
    if (k_norm == 0 && cls.kind == DivisorClass::Zero) throw Error("k = 0 with l = 0 is excluded");
    const double base = gamma / (1.0 + std::pow(static_cast<double>(k_norm), tau));
    switch (cls.kind) {
        case DivisorClass::Zero:
            return base;
        case DivisorClass::Plus:
            return base * ld;
        case DivisorClass::Minus:
            return base / std::pow(static_cast<double>(cls.site.norm()), c_rho);
    }
    return base;
}

bool is_admissible(const Eigen::VectorXd& xi, const IntVec& k, const LVec& l, double gamma,
                   const DiophantineParams& params, const FrequencyMap& fm, const SpectrumModel& sm) {
    const DivisorClass cls = classify_l(l);
    int kn = 0;
    for (int v : k) kn += std::abs(v);
    const double thr = diophantine_threshold(kn, cls, bracket_ld(l, params.d), gamma, params.tau, params.c_rho);
    return std::fabs(divisor(k, l, xi, fm, sm, params.extended)) >= thr;
}

double weyl_lambda(int m, double volume, double j) {
    if (m < 1 || volume <= 0.0 || j < 1.0) throw Error("weyl_lambda: need m >= 1, V > 0, j >= 1");
    const double half = 0.5 * m;
    const double ball = std::pow(std::numbers::pi, half) / std::tgamma(half + 1.0);
    const double cm = 4.0 * std::numbers::pi * std::numbers::pi * std::pow(ball, -2.0 / m);
    return cm * std::pow(j / volume, 2.0 / m);
}

}  // namespace kam
