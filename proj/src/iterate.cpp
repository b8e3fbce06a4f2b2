#include "kam/iterate.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <future>

namespace kam {

StepState Schedule::state(int nu) const {
    if (nu < 0 || nu + 1 >= static_cast<int>(entries.size())) throw Error("schedule has no level " + std::to_string(nu));
    const ScheduleEntry& e = entries[static_cast<std::size_t>(nu)];
    const ScheduleEntry& f = entries[static_cast<std::size_t>(nu) + 1];
    StepState st;
    st.nu = nu;
    st.r = e.r;
    st.a = e.a;
    st.gamma = e.gamma;
    st.M = e.M;
    st.s = e.s;
    st.mu = e.mu;
    st.eta = e.eta;
    st.r_next = f.r;
    st.a_next = f.a;
    st.gamma_next = f.gamma;
    st.M_next = f.M;
    st.s_next = f.s;
    st.mu_next = f.mu;
    st.sc = sc;
    return st;
}

int minimal_alpha(double ratio, double target) {
    if (!(ratio > 1.0) || !(target > 0.0)) throw Error("minimal_alpha needs ratio > 1 and target > 0");
    int alpha = 1;
    while (std::pow(ratio, 3.0 * alpha - 1.0) < target) ++alpha;
    return alpha;
}

Schedule build_schedule(const SchemeConstants& sc, int nu_max) {
    sc.validate();
    if (nu_max < 0) throw Error("nu_max must be non-negative");
    Schedule out;
    out.sc = sc;
    for (int nu = 0; nu <= nu_max + 1; ++nu) {
        const double half = std::ldexp(1.0, -(nu + 1));
        const double growth = std::pow(7.0 / 6.0, nu);
        ScheduleEntry e;
        e.nu = nu;
        e.r = sc.r0 * (0.5 + half);
        e.a = sc.a0 * (0.5 + half);
        e.gamma = sc.gamma0 * (0.5 + half);
        e.M = sc.M0 * (2.0 - std::ldexp(1.0, -nu));
        e.mu = std::pow(sc.mu0, growth);
        e.s = std::pow(sc.s0, growth);
        e.eta = std::cbrt(e.mu);
        out.entries.push_back(e);
    }
    for (int nu = 0; nu <= nu_max; ++nu) {
        const Cutoffs c = compute_cutoffs(out.state(nu));
        out.entries[static_cast<std::size_t>(nu) + 1].K = c.K;
        out.entries[static_cast<std::size_t>(nu) + 1].I = c.I;
    }
    return out;
}

namespace {

struct SampleStep {
    Series r;
    Series tail;
    Series f;
    StepResult res;
    std::optional<Inadmissible> excision;
};

SampleStep step_sample(const ParamSample& smp, const StepState& st, const Cutoffs& cut, const RunOptions& opt) {
    SampleStep out;
    Truncated tr = truncate(smp.p, cut.K, cut.I);
    out.r = std::move(tr.R);
    out.tail = std::move(tr.tail);
    const Series rn = normal_part(out.r, st.sc.special_form);
    HomologicalOutcome h = solve_homological(smp.nf, out.r, rn, st.gamma, st.sc.diophantine());
    if (auto* bad = std::get_if<Inadmissible>(&h)) {
        out.excision = *bad;
        return out;
    }
    out.f = std::move(std::get<Series>(h));
    out.res = apply_step(smp.nf, smp.p, out.f, rn, st.weights(), opt.step);
    return out;
}

double xi_distance(const Eigen::VectorXd& a, const Eigen::VectorXd& b) { return (a - b).norm(); }

template <class Fn>
double pair_lipschitz(const std::vector<ParamSample>& bundle, Fn&& diff) {
    double best = 0.0;
    for (std::size_t i = 0; i < bundle.size(); ++i)
        for (std::size_t j = i + 1; j < bundle.size(); ++j) {
            const double d = xi_distance(bundle[i].xi, bundle[j].xi);
            if (d > 0.0) best = std::max(best, diff(i, j) / d);
        }
    return best;
}

double series_lipschitz(const std::vector<ParamSample>& bundle, const std::vector<const Series*>& fs,
                        const DomainWeights& w) {
    if (bundle.size() < 2) return 0.0;
    std::vector<Sample> fam;
    fam.reserve(bundle.size());
    for (std::size_t i = 0; i < bundle.size(); ++i) {
        Sample s;
        s.xi.assign(bundle[i].xi.data(), bundle[i].xi.data() + bundle[i].xi.size());
        s.f = *fs[i];
        fam.push_back(std::move(s));
    }
    return lipschitz_seminorm(fam, w);
}

double Omega_drift(const std::map<Site, double>& now, const std::map<Site, double>& ref, double delta) {
    std::map<Site, double> diff;
    for (const auto& [s, v] : now) diff[s] = v - ref.at(s);
    return Omega_weighted_sup(diff, delta);
}

TraceRecord make_record(int nu, const ParamSample& primary, const NormalForm& nf0, const StepState& st,
                        const RunOptions& opt) {
    TraceRecord rec;
    rec.nu = nu;
    rec.xp = majorant_xnorm(primary.p, st.weights());
    rec.terms = primary.p.size();
    rec.omega = primary.nf.omega;
    rec.Omega = primary.nf.Omega;
    rec.omega_drift = omega_sup(primary.nf.omega - nf0.omega);
    rec.Omega_drift = Omega_drift(primary.nf.Omega, nf0.Omega, st.sc.delta);
    if (opt.keep_series) rec.p = primary.p;
    return rec;
}

}  // namespace

RunTrace run(std::vector<ParamSample> bundle, const Schedule& schedule, const RunOptions& opt) {
    if (bundle.empty()) throw Error("run needs at least one parameter sample");
    const int nu_max = std::min(opt.nu_max, schedule.nu_max());
    if (nu_max < 0) throw Error("nu_max must be non-negative");
    const SchemeConstants& sc = schedule.sc;
    for (const auto& smp : bundle) {
        if (smp.p.n() != sc.n || smp.p.rho() != sc.rho) throw Error("perturbation does not match the scheme dimensions");
        if (smp.nf.omega.size() != sc.n) throw Error("normal form does not match the scheme dimensions");
    }

    RunTrace trace;
    const NormalForm nf0 = bundle.front().nf;
    trace.records.push_back(make_record(0, bundle.front(), nf0, schedule.state(0), opt));
    trace.stop_reason = "nu_max";

    for (int nu = 0; nu < nu_max; ++nu) {
        const auto t0 = std::chrono::steady_clock::now();
        TraceRecord& cur = trace.records.back();
        if (cur.xp > 0.0 && cur.xp < opt.norm_floor) {
            trace.stop_reason = "norm_floor";
            break;
        }
        const StepState st = schedule.state(nu);
        const Cutoffs cut = compute_cutoffs(st);

        std::vector<SampleStep> steps(bundle.size());
        const int workers = std::max(1, opt.workers);
        for (std::size_t start = 0; start < bundle.size(); start += static_cast<std::size_t>(workers)) {
            const std::size_t stop = std::min(bundle.size(), start + static_cast<std::size_t>(workers));
            std::vector<std::future<SampleStep>> jobs;
            for (std::size_t b = start + 1; b < stop; ++b)
                jobs.push_back(std::async(std::launch::async, step_sample, std::cref(bundle[b]), std::cref(st),
                                          std::cref(cut), std::cref(opt)));
            steps[start] = step_sample(bundle[start], st, cut, opt);
            for (std::size_t b = start + 1; b < stop; ++b) steps[b] = jobs[b - start - 1].get();
        }

        if (steps.front().excision) {
            trace.excision = steps.front().excision;
            trace.excised_at = nu;
            trace.stop_reason = "excised";
            break;
        }
        for (std::size_t b = bundle.size(); b-- > 1;) {
            if (steps[b].excision) {
                bundle.erase(bundle.begin() + static_cast<std::ptrdiff_t>(b));
                steps.erase(steps.begin() + static_cast<std::ptrdiff_t>(b));
                ++trace.dropped_samples;
            }
        }

        const DomainWeights w = st.weights();
        const DomainWeights wn = st.next_weights();
        const DomainWeights wg = st.generator_weights();
        DomainWeights wt = wn;
        wt.r = st.r_next + 0.875 * (st.r - st.r_next);
        const SampleStep& s0 = steps.front();

        auto gather = [&](auto member) {
            std::vector<const Series*> out;
            for (const auto& s : steps) out.push_back(&member(s));
            return out;
        };
        std::vector<const Series*> ps;
        for (const auto& b : bundle) ps.push_back(&b.p);

        StepMeasurements m;
        m.xp = majorant_xnorm(bundle.front().p, w);
        m.xp_lip = series_lipschitz(bundle, ps, w);
        m.xr = majorant_xnorm(s0.r, w);
        m.xr_lip = series_lipschitz(bundle, gather([](const SampleStep& s) -> const Series& { return s.r; }), w);
        m.x_tail = majorant_xnorm(s0.tail, wt);
        m.xf = majorant_xnorm(s0.f, wg);
        m.xf_lip = series_lipschitz(bundle, gather([](const SampleStep& s) -> const Series& { return s.f; }), wg);
        m.phi_dev = displacement_bound(s0.f, wn, opt.step);
        m.omega_hat = omega_sup(s0.res.omega_hat);
        m.Omega_hat = Omega_weighted_sup(s0.res.Omega_hat, sc.delta);
        m.omega_hat_lip = pair_lipschitz(
            bundle, [&](std::size_t i, std::size_t j) { return omega_sup(steps[i].res.omega_hat - steps[j].res.omega_hat); });
        m.Omega_hat_lip = pair_lipschitz(bundle, [&](std::size_t i, std::size_t j) {
            std::map<Site, double> diff = steps[i].res.Omega_hat;
            for (const auto& [s, v] : steps[j].res.Omega_hat) diff[s] -= v;
            return Omega_weighted_sup(diff, sc.delta);
        });
        m.xp_next = majorant_xnorm(s0.res.p_next, wn);
        m.xp_next_lip =
            series_lipschitz(bundle, gather([](const SampleStep& s) -> const Series& { return s.res.p_next; }), wn);
        cur.report = audit_hypotheses(st, cut, m);

        for (std::size_t b = 0; b < bundle.size(); ++b) {
            bundle[b].nf = steps[b].res.next;
            bundle[b].p = std::move(steps[b].res.p_next);
        }
        const auto t1 = std::chrono::steady_clock::now();
        cur.wall_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
        trace.records.push_back(make_record(nu + 1, bundle.front(), nf0, schedule.state(nu + 1), opt));
    }
    trace.final_nf = bundle.front().nf;
    return trace;
}

double fit_decay_exponent(const std::vector<double>& norms) {
    std::vector<double> logs;
    for (double v : norms)
        if (v > 0.0) logs.push_back(std::log(v));
    if (logs.size() < 3) throw Error("decay fit needs at least three nonzero norms");
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i + 1 < logs.size(); ++i) {
        num += logs[i] * logs[i + 1];
        den += logs[i] * logs[i];
    }
    if (den == 0.0) throw Error("decay fit is degenerate");
    return num / den;
}

ConvergenceReport convergence_report(const RunTrace& trace, const SchemeConstants& sc) {
    ConvergenceReport rep;
    rep.steps = trace.completed_steps();
    std::vector<double> norms;
    for (const auto& r : trace.records) norms.push_back(r.xp);
    rep.beta = fit_decay_exponent(norms);
    rep.converged = rep.beta > 1.0 + 1e-9;

    const double mu_star = sc.mu_star();
    rep.drift_budget = sc.gamma0 * mu_star;
    for (std::size_t i = 0; i + 1 < trace.records.size(); ++i) {
        const double d = omega_sup(trace.records[i + 1].omega - trace.records[i].omega);
        const double budget = sc.gamma0 * mu_star * std::ldexp(1.0, -static_cast<int>(i + 1));
        rep.step_drift.push_back(d);
        rep.step_budget.push_back(budget);
        // Factor-2 slack on the geometric halving.
        if (d > 2.0 * budget) rep.step_drift_ok = false;
    }
    rep.total_drift = trace.records.back().omega_drift;
    rep.total_drift_ok = rep.total_drift <= rep.drift_budget;

    int audited = 0;
    for (const auto& r : trace.records) {
        if (!r.report) continue;
        ++audited;
        for (std::size_t h = 0; h < 9; ++h)
            if (r.report->H[h].pass) rep.pass_rate[h] += 1.0;
    }
    if (audited > 0)
        for (double& v : rep.pass_rate) v /= audited;
    return rep;
}

}  // namespace kam
