#include "kam/measure.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <future>
#include <iomanip>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

#include "kam/kernels.hpp"

namespace kam {

namespace {

// Normal lattice: {1, 2, ...} for rho = 1, Z^rho without 0 otherwise; tangential sites removed.
std::vector<Site> normal_sites(int rho, double max_norm, const SpectrumModel& sm) {
    std::vector<Site> out;
    const int cap = static_cast<int>(std::floor(max_norm));
    if (rho == 1) {
        for (int i = 1; i <= cap; ++i)
            if (!sm.is_tangential(Site::of(i))) out.push_back(Site::of(i));
        return out;
    }
    Site s;
    std::function<void(int, int)> rec = [&](int dim, int budget) {
        if (dim == rho) {
            if (!s.is_zero() && !sm.is_tangential(s)) out.push_back(s);
            return;
        }
        for (int v = -budget; v <= budget; ++v) {
            s.c[dim] = v;
            rec(dim + 1, budget - std::abs(v));
        }
        s.c[dim] = 0;
    };
    rec(0, cap);
    std::sort(out.begin(), out.end(), [](const Site& a, const Site& b) {
        return a.norm() != b.norm() ? a.norm() < b.norm() : a < b;
    });
    return out;
}

// Integer vectors with lo < |k|_1 <= hi.
std::vector<IntVec> k_band(int n, double lo, double hi) {
    std::vector<IntVec> out;
    const int cap = static_cast<int>(std::floor(hi));
    IntVec k(static_cast<std::size_t>(n), 0);
    std::function<void(int, int)> rec = [&](int dim, int budget) {
        if (dim == n) {
            const int norm = cap - budget;
            if (norm > lo) out.push_back(k);
            return;
        }
        for (int v = -budget; v <= budget; ++v) {
            k[static_cast<std::size_t>(dim)] = v;
            rec(dim + 1, budget - std::abs(v));
        }
        k[static_cast<std::size_t>(dim)] = 0;
    };
    rec(0, cap);
    return out;
}

int k_norm(const IntVec& k) {
    int t = 0;
    for (int v : k) t += std::abs(v);
    return t;
}

// The divisor <k, omega(xi)> + <l, Omega(xi)> is c0 + <g, xi>.
struct Affine {
    double c0 = 0.0;
    Eigen::VectorXd g;
};

Affine divisor_affine(const IntVec& k, const LVec& l, const FrequencyMap& fm, const SpectrumModel& sm) {
    const int n = fm.n();
    Affine a;
    a.g = Eigen::VectorXd::Zero(n);
    for (int j = 0; j < n; ++j) {
        a.c0 += k[static_cast<std::size_t>(j)] * fm.omega0()[j];
        a.g += k[static_cast<std::size_t>(j)] * fm.matrix().row(j).transpose();
    }
    for (const auto& [site, v] : l) {
        a.c0 += v * sm.principal(site);
        const auto grad = sm.gradient(site);
        for (std::size_t t = 0; t < grad.size() && static_cast<int>(t) < n; ++t)
            a.g[static_cast<Eigen::Index>(t)] += v * grad[t];
    }
    return a;
}

std::pair<double, double> range_on_box(const Affine& a, const std::vector<double>& lo, const std::vector<double>& hi) {
    double mn = a.c0, mx = a.c0;
    for (std::size_t j = 0; j < lo.size(); ++j) {
        const double u = a.g[static_cast<Eigen::Index>(j)] * lo[j];
        const double v = a.g[static_cast<Eigen::Index>(j)] * hi[j];
        mn += std::min(u, v);
        mx += std::max(u, v);
    }
    return {mn, mx};
}

// P(sum_j X_j <= t) for independent X_j uniform on [0, w_j], all w_j > 0.
double uniform_sum_cdf(const std::vector<double>& w, double t) {
    const std::size_t n = w.size();
    if (n == 0) return t >= 0.0 ? 1.0 : 0.0;
    const double total = std::accumulate(w.begin(), w.end(), 0.0);
    if (t <= 0.0) return 0.0;
    if (t >= total) return 1.0;
    double acc = 0.0;
    for (std::size_t mask = 0; mask < (std::size_t{1} << n); ++mask) {
        double shift = 0.0;
        int bits = 0;
        for (std::size_t j = 0; j < n; ++j)
            if ((mask >> j) & 1) {
                shift += w[j];
                ++bits;
            }
        const double x = t - shift;
        if (x > 0.0) acc += (bits % 2 ? -1.0 : 1.0) * std::pow(x, static_cast<double>(n));
    }
    double denom = std::tgamma(static_cast<double>(n) + 1.0);
    for (double v : w) denom *= v;
    return std::clamp(acc / denom, 0.0, 1.0);
}

struct Strip {
    int nu = 0;
    IntVec k;
    LVec l;
    Affine a;
    double thr = 0.0;
};

}  // namespace

ParameterGrid::ParameterGrid(std::vector<double> lower, std::vector<double> upper, int resolution)
    : lower_(std::move(lower)), upper_(std::move(upper)), resolution_(resolution) {
    if (lower_.empty() || lower_.size() != upper_.size()) throw Error("grid box needs matching lower and upper bounds");
    if (resolution_ < 1) throw Error("grid resolution must be positive");
    for (std::size_t j = 0; j < lower_.size(); ++j)
        if (!(upper_[j] > lower_[j])) throw Error("grid box must have positive extent on every axis");
    std::size_t count = 1;
    for (std::size_t j = 0; j < lower_.size(); ++j) count *= static_cast<std::size_t>(resolution_);
    cols_.assign(lower_.size(), std::vector<double>(count));
    for (std::size_t c = 0; c < count; ++c) {
        std::size_t rem = c;
        for (std::size_t j = 0; j < lower_.size(); ++j) {
            const std::size_t idx = rem % static_cast<std::size_t>(resolution_);
            rem /= static_cast<std::size_t>(resolution_);
            const double h = (upper_[j] - lower_[j]) / resolution_;
            cols_[j][c] = lower_[j] + (static_cast<double>(idx) + 0.5) * h;
        }
    }
    records_.assign(count, {});
}

double ParameterGrid::box_volume() const {
    double v = 1.0;
    for (std::size_t j = 0; j < lower_.size(); ++j) v *= upper_[j] - lower_[j];
    return v;
}

double ParameterGrid::cell_volume() const { return box_volume() / static_cast<double>(cell_count()); }

Eigen::VectorXd ParameterGrid::center(std::size_t cell) const {
    Eigen::VectorXd x(dim());
    for (int j = 0; j < dim(); ++j) x[j] = cols_[static_cast<std::size_t>(j)][cell];
    return x;
}

std::size_t ParameterGrid::excised_count() const {
    return static_cast<std::size_t>(
        std::count_if(records_.begin(), records_.end(), [](const auto& r) { return !r.empty(); }));
}

double ParameterGrid::surviving_fraction() const {
    return 1.0 - static_cast<double>(excised_count()) / static_cast<double>(cell_count());
}

void ParameterGrid::clear() {
    for (auto& r : records_) r.clear();
}

void ExcisionBands::validate() const {
    if (K.size() < 2 || K.size() != I.size()) throw Error("excision bands need matching K and I lists of length >= 2");
    for (std::size_t i = 0; i + 1 < K.size(); ++i)
        if (K[i + 1] < K[i] || I[i + 1] < I[i]) throw Error("excision cutoffs must be non-decreasing");
}

ExcisionBands bands_from_schedule(const Schedule& schedule, int levels) {
    if (levels < 1 || levels + 1 > static_cast<int>(schedule.entries.size()))
        throw Error("schedule has fewer levels than requested");
    ExcisionBands b;
    for (int nu = 0; nu <= levels; ++nu) {
        b.K.push_back(schedule.entries[static_cast<std::size_t>(nu)].K);
        b.I.push_back(schedule.entries[static_cast<std::size_t>(nu)].I);
    }
    return b;
}

ResonanceConstants measure_c8(const ParameterGrid& grid, const FrequencyMap& fm, const SpectrumModel& sm, double gamma,
                              int max_site) {
    ResonanceConstants rc;
    const int n = fm.n();
    for (int j = 0; j < n; ++j) {
        Affine a;
        a.c0 = fm.omega0()[j];
        a.g = fm.matrix().row(j).transpose();
        const auto [mn, mx] = range_on_box(a, grid.lower(), grid.upper());
        rc.omega_sup = std::max({rc.omega_sup, std::fabs(mn), std::fabs(mx)});
    }
    // The Plus class ratio |<l, Omega>| / <l>_d is minimized over single sites and pairs of sites;
    // a pair is a weighted mean of its two single-site ratios, so single sites suffice.
    rc.c7 = std::numeric_limits<double>::infinity();
    for (const auto& s : normal_sites(sm.rho, max_site, sm)) {
        const LVec l{{s, 1}};
        const Affine a = divisor_affine(IntVec(static_cast<std::size_t>(n), 0), l, fm, sm);
        const auto [mn, mx] = range_on_box(a, grid.lower(), grid.upper());
        const double low = mn > 0.0 ? mn : (mx < 0.0 ? -mx : 0.0);
        rc.c7 = std::min(rc.c7, low / bracket_ld(l, sm.d));
    }
    if (!std::isfinite(rc.c7) || !(rc.c7 > 0.0)) throw Error("spectrum does not separate the Plus class from zero on the box");
    rc.c8 = 2.0 * (gamma + rc.omega_sup) / rc.c7;
    return rc;
}

ExcisionSummary excise(ParameterGrid& grid, const FrequencyMap& fm, const SpectrumModel& sm,
                       const DiophantineParams& dp, const ExcisionBands& bands, double gamma,
                       const ExcisionOptions& opt) {
    bands.validate();
    if (grid.dim() != fm.n()) throw Error("grid dimension must match the number of frequencies");
    if (gamma < 0.0) throw Error("gamma must be non-negative");
    ExcisionSummary sum;
    const int n = fm.n();
    const double d = sm.d;
    const double k_top = bands.K.back();
    const int site_cap =
        opt.max_site > 0 ? opt.max_site : static_cast<int>(std::ceil(std::pow(2.0 * (1.0 + k_top), 1.0 / d))) + 1;
    sum.rc = measure_c8(grid, fm, sm, gamma, std::max(site_cap, 1));
    const double c8 = sum.rc.c8;
    if (gamma == 0.0) return sum;

    // Collect every (k, l) whose threshold strip meets the box, in a fixed order.
    std::vector<Strip> strips;
    for (int nu = 0; nu < bands.levels(); ++nu) {
        const double klo = bands.K[static_cast<std::size_t>(nu)], khi = bands.K[static_cast<std::size_t>(nu) + 1];
        if (std::floor(khi) <= klo) {
            sum.notes.push_back("level " + std::to_string(nu) + ": empty band skipped");
            continue;
        }
        const double ld_cap = c8 * khi;
        const double norm_cap = opt.max_site > 0 ? opt.max_site : std::pow(ld_cap, 1.0 / d);
        const auto sites = normal_sites(sm.rho, norm_cap, sm);
        std::vector<LVec> ls;
        ls.push_back({});
        for (std::size_t a = 0; a < sites.size(); ++a) {
            const double pa = std::pow(static_cast<double>(sites[a].norm()), d);
            if (pa <= ld_cap) ls.push_back({{sites[a], 1}});
            if (2.0 * pa <= ld_cap) ls.push_back({{sites[a], 2}});
            for (std::size_t b = a + 1; b < sites.size(); ++b) {
                const double pb = std::pow(static_cast<double>(sites[b].norm()), d);
                if (pa + pb > ld_cap) continue;
                LVec l{{sites[a], 1}, {sites[b], 1}};
                std::sort(l.begin(), l.end());
                ls.push_back(l);
            }
        }
        const double i_cap = bands.I[static_cast<std::size_t>(nu) + 1];
        const auto all_sites = normal_sites(sm.rho, std::max(norm_cap, std::pow(std::pow(i_cap, d) + c8 * khi, 1.0 / d)), sm);
        for (const auto& i : all_sites) {
            if (!(i.norm() < i_cap)) continue;
            const double pi = std::pow(static_cast<double>(i.norm()), d);
            for (const auto& j : all_sites) {
                if (j == i) continue;
                if (std::fabs(pi - std::pow(static_cast<double>(j.norm()), d)) > c8 * khi) continue;
                LVec l{{i, 1}, {j, -1}};
                std::sort(l.begin(), l.end());
                ls.push_back(l);
            }
        }
        for (const auto& k : k_band(n, klo, khi)) {
            const int kn = k_norm(k);
            for (const auto& l : ls) {
                ++sum.candidates;
                const DivisorClass cls = classify_l(l);
                if (cls.kind == DivisorClass::Minus && !(cls.site.norm() < i_cap)) continue;
                const double thr = diophantine_threshold(kn, cls, bracket_ld(l, d), gamma, dp.tau, dp.c_rho);
                const Affine a = divisor_affine(k, l, fm, sm);
                const auto [mn, mx] = range_on_box(a, grid.lower(), grid.upper());
                if (mn >= thr || mx <= -thr) continue;
                strips.push_back(Strip{nu, k, l, a, thr});
            }
        }
    }
    sum.strips_hit = strips.size();

    // Cells are independent: each worker owns a contiguous block.
    const std::size_t cells = grid.cell_count();
    const int workers = std::max(1, opt.workers);
    const std::size_t block = (cells + static_cast<std::size_t>(workers) - 1) / static_cast<std::size_t>(workers);
    auto work = [&](std::size_t begin, std::size_t end) {
        if (begin >= end) return;
        const std::size_t count = end - begin;
        std::vector<const double*> cols(static_cast<std::size_t>(n));
        for (int j = 0; j < n; ++j) cols[static_cast<std::size_t>(j)] = grid.columns()[static_cast<std::size_t>(j)].data() + begin;
        std::vector<std::uint8_t> flags(count);
        for (const auto& s : strips) {
            std::fill(flags.begin(), flags.end(), 0);
            if (kernels::mark_affine_below(cols.data(), cols.size(), count, s.a.c0, s.a.g.data(), s.thr, flags.data()) == 0)
                continue;
            for (std::size_t c = 0; c < count; ++c)
                if (flags[c] && !grid.excised(begin + c)) grid.record(begin + c).push_back(Violation{s.nu, s.k, s.l});
        }
    };
    std::vector<std::future<void>> jobs;
    for (int w = 0; w < workers; ++w) {
        const std::size_t b = std::min(cells, static_cast<std::size_t>(w) * block);
        const std::size_t e = std::min(cells, b + block);
        jobs.push_back(std::async(workers == 1 ? std::launch::deferred : std::launch::async, work, b, e));
    }
    for (auto& j : jobs) j.get();
    return sum;
}

WidthCheck resonance_width_check(const IntVec& k, const LVec& l, const ParameterGrid& grid, const FrequencyMap& fm,
                                 const SpectrumModel& sm, const DiophantineParams& dp, double gamma) {
    if (static_cast<int>(k.size()) != fm.n() || grid.dim() != fm.n()) throw Error("k, grid and frequency map disagree on n");
    const int kn = k_norm(k);
    Eigen::VectorXd lg = Eigen::VectorXd::Zero(fm.n());
    for (const auto& [site, v] : l) {
        const auto grad = sm.gradient(site);
        for (std::size_t t = 0; t < grad.size() && static_cast<int>(t) < fm.n(); ++t) lg[static_cast<Eigen::Index>(t)] += v * grad[t];
    }
    const double M = lg.norm();
    if (kn == 0 || kn < 16.0 * M) throw Error("resonance_width_check needs |k| >= 16 M");
    const double thr = diophantine_threshold(kn, classify_l(l), bracket_ld(l, sm.d), gamma, dp.tau, dp.c_rho);
    const Affine a = divisor_affine(k, l, fm, sm);

    WidthCheck wc;
    std::size_t hits = 0;
    for (std::size_t c = 0; c < grid.cell_count(); ++c) {
        double v = a.c0;
        for (int j = 0; j < grid.dim(); ++j) v += a.g[j] * grid.columns()[static_cast<std::size_t>(j)][c];
        hits += std::fabs(v) < thr;
    }
    wc.measured = static_cast<double>(hits) * grid.cell_volume();
    wc.bound = thr / kn;
    wc.ratio = wc.measured / wc.bound;

    // Shift every nonconstant coordinate to [0, |g_j| w_j] and integrate the slab exactly.
    std::vector<double> widths;
    double base = a.c0;
    for (int j = 0; j < grid.dim(); ++j) {
        const double gj = a.g[j];
        if (gj == 0.0) continue;
        const double lo = grid.lower()[static_cast<std::size_t>(j)], hi = grid.upper()[static_cast<std::size_t>(j)];
        base += std::min(gj * lo, gj * hi);
        widths.push_back(std::fabs(gj) * (hi - lo));
    }
    const double frac = uniform_sum_cdf(widths, thr - base) - uniform_sum_cdf(widths, -thr - base);
    wc.analytic = frac * grid.box_volume();
    return wc;
}

PartnerCount count_resonant_partners(const Site& i, int rho, double k_norm, double d, double c8, double c1) {
    if (!(d > 0.0) || !(c8 > 0.0) || !(k_norm > 0.0)) throw Error("count_resonant_partners needs d, c8, |k| > 0");
    const double pi = std::pow(static_cast<double>(i.norm()), d);
    const double window = c8 * k_norm;
    const double reach = std::pow(pi + window, 1.0 / d);
    PartnerCount pc;
    SpectrumModel lattice;
    lattice.rho = rho;
    for (const auto& j : normal_sites(rho, reach + 1.0, lattice))
        if (std::fabs(pi - std::pow(static_cast<double>(j.norm()), d)) <= window) ++pc.count;
    pc.scale = std::pow(k_norm, c1 / d) * std::pow(static_cast<double>(std::max(1, i.norm())), c1);
    pc.implied_c = std::max(0.0, static_cast<double>(pc.count) / pc.scale - 1.0);
    return pc;
}

SweepResult measure_sweep(const GridSpec& spec, const std::vector<double>& gammas, const FrequencyMap& fm,
                          const SpectrumModel& sm, const DiophantineParams& dp, const ExcisionBands& bands,
                          const ExcisionOptions& opt) {
    if (gammas.empty()) throw Error("measure_sweep needs at least one gamma");
    SweepResult res;
    ParameterGrid grid(spec.lower, spec.upper, spec.resolution);
    for (double g : gammas) {
        grid.clear();
        excise(grid, fm, sm, dp, bands, g, opt);
        res.rows.push_back(SweepRow{g, grid.excised_measure(), grid.surviving_fraction(), grid.cell_count(), spec.resolution});
    }
    std::vector<std::pair<double, double>> pts;
    for (const auto& r : res.rows)
        if (r.excised_measure > 0.0 && r.gamma > 0.0) pts.emplace_back(std::log(r.gamma), std::log(r.excised_measure));
    const auto [gmin, gmax] = std::minmax_element(gammas.begin(), gammas.end());
    res.spans_decade = *gmin > 0.0 && *gmax / *gmin >= 10.0;
    std::set<double> distinct;
    for (const auto& p : pts) distinct.insert(p.first);
    if (distinct.size() < 2) {
        res.slope = std::nan("");
        return res;
    }
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (const auto& [x, y] : pts) {
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    const double m = static_cast<double>(pts.size());
    res.slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    res.slope_defined = true;
    return res;
}

std::string sweep_csv(const SweepResult& res) {
    std::ostringstream os;
    os << "gamma,excised_measure,surviving_fraction,cells,resolution\n";
    os << std::setprecision(17);
    for (const auto& r : res.rows)
        os << r.gamma << ',' << r.excised_measure << ',' << r.surviving_fraction << ',' << r.cells << ',' << r.resolution << '\n';
    return os.str();
}

}  // namespace kam
