#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <numbers>
#include <random>

#include "kam/iterate.hpp"
#include "support.hpp"

using namespace kam;

namespace {

Site S(int i) { return Site::of(i); }

SchemeConstants toy_scheme() {
    SchemeConstants sc;
    sc.n = 1;
    sc.rho = 1;
    sc.d = 2.0;
    sc.tau = DiophantineParams::min_tau(1, 2.0, 2.5);
    sc.mu0 = 1e-4;
    sc.s0 = 1e-8;
    sc.a0 = 0.1;
    sc.gamma0 = 0.1;
    return sc;
}

NormalForm toy_nf(double shift = 0.0) {
    NormalForm nf;
    nf.omega = Eigen::VectorXd::Constant(1, 2.3 + shift);
    for (int i = 1; i <= 4; ++i) nf.Omega[S(i)] = i * i + 0.5 * std::numbers::inv_pi + 0.1 * shift;
    return nf;
}

// Small real perturbation made of low-degree terms plus a tail.
Series toy_p(std::mt19937_64& rng, double scale) {
    kamtest::RandomSpec spec;
    spec.n = 1;
    spec.max_k = 2;
    spec.max_site = 4;
    spec.max_degree = 3;
    spec.terms = 8;
    Series p = kamtest::random_series(rng, spec, true);
    // Remove k = 0 terms that would have to be absorbed into the normal form.
    p = p.filtered([](const ModeKey& k, cplx) { return !k.k_zero(); });
    p *= cplx{scale, 0.0};
    return p;
}

RunTrace synthetic_trace(const std::vector<double>& norms) {
    RunTrace t;
    for (std::size_t i = 0; i < norms.size(); ++i) {
        TraceRecord r;
        r.nu = static_cast<int>(i);
        r.xp = norms[i];
        r.omega = Eigen::VectorXd::Zero(1);
        t.records.push_back(r);
    }
    return t;
}

}  // namespace

TEST_CASE("minimal alpha") {
    CHECK(minimal_alpha() == 5);
    CHECK(std::pow(7.0 / 6.0, 3.0 * 5 - 1.0) >= 8.0);
    CHECK(std::pow(7.0 / 6.0, 3.0 * 4 - 1.0) < 8.0);
}

TEST_CASE("schedule sequences") {
    SchemeConstants sc = toy_scheme();
    sc.r0 = 1.3;
    sc.a0 = 0.7;
    sc.gamma0 = 0.4;
    sc.M0 = 2.0;
    const Schedule sch = build_schedule(sc, 12);
    REQUIRE(sch.entries.size() == 14);
    CHECK(sch.nu_max() == 12);
    CHECK(sch.entries[1].mu == doctest::Approx(std::pow(10.0, -14.0 / 3.0)).epsilon(1e-12));
    CHECK(sch.entries[1].mu == doctest::Approx(2.1544e-5).epsilon(1e-4));
    CHECK(sch.entries[0].K == 0.0);

    for (int nu = 0; nu + 1 < static_cast<int>(sch.entries.size()); ++nu) {
        const auto& e = sch.entries[nu];
        const auto& f = sch.entries[nu + 1];
        CHECK(f.r + sc.r0 / std::ldexp(1.0, nu + 2) == doctest::Approx(e.r).epsilon(1e-12));
        CHECK(f.a + sc.a0 / std::ldexp(1.0, nu + 2) == doctest::Approx(e.a).epsilon(1e-12));
        CHECK(f.r == doctest::Approx(e.r / 2 + sc.r0 / 4).epsilon(1e-12));
        CHECK(f.gamma == doctest::Approx(e.gamma / 2 + sc.gamma0 / 4).epsilon(1e-12));
        CHECK(f.M == doctest::Approx(e.M / 2 + sc.M0).epsilon(1e-12));
        CHECK(std::pow(f.mu, 6.0) == doctest::Approx(std::pow(e.mu, 7.0)).epsilon(1e-12));
        CHECK(f.s == doctest::Approx(std::pow(e.s, 7.0 / 6.0)).epsilon(1e-12));
        CHECK(f.r < e.r);
        CHECK(f.a < e.a);
        CHECK(f.gamma < e.gamma);
        CHECK(f.s < e.s);
        CHECK(f.mu < e.mu);
        CHECK(f.K >= e.K);
        CHECK(f.I >= e.I);
        CHECK(f.M > 0.0);
    }
    for (const auto& e : sch.entries) CHECK(e.mu <= std::pow(sc.mu0, 1.0 + e.nu / 6.0) * (1 + 1e-12));
    // Limits of the geometric sequences.
    CHECK(sch.entries.back().r == doctest::Approx(sc.r0 / 2).epsilon(1e-4));
    CHECK(sch.entries.back().gamma == doctest::Approx(sc.gamma0 / 2).epsilon(1e-4));

    SchemeConstants bad = sc;
    bad.mu0 = 1.0;
    CHECK_THROWS_AS(build_schedule(bad, 3), Error);
    CHECK_THROWS_AS(sch.state(13), Error);

    const StepState st = sch.state(2);
    CHECK(st.s_next == sch.entries[3].s);
    CHECK(st.eta == doctest::Approx(std::cbrt(st.mu)));
}

TEST_CASE("run with zero perturbation") {
    const SchemeConstants sc = toy_scheme();
    const Schedule sch = build_schedule(sc, 4);
    ParamSample smp{Eigen::VectorXd::Zero(1), toy_nf(), Series(1, 1)};
    RunOptions opt;
    opt.nu_max = 4;
    const RunTrace t = run({smp}, sch, opt);
    CHECK(t.records.size() == 5);
    CHECK(t.completed_steps() == 4);
    for (const auto& r : t.records) CHECK(r.xp == 0.0);
    CHECK(t.final_nf.omega == smp.nf.omega);
    CHECK(t.stop_reason == "nu_max");
}

TEST_CASE("one step removes a single nonresonant term") {
    const SchemeConstants sc = toy_scheme();
    const Schedule sch = build_schedule(sc, 1);
    Series p(1, 1);
    p.add(make_key(1, {1}, {1}), cplx{1e-8, 2e-8});
    p.add(make_key(1, {-1}, {1}), cplx{1e-8, -2e-8});
    ParamSample smp{Eigen::VectorXd::Zero(1), toy_nf(), p};
    RunOptions opt;
    opt.nu_max = 1;
    const RunTrace t = run({smp}, sch, opt);
    REQUIRE(t.records.size() == 2);
    CHECK(t.records[0].xp > 0.0);
    CHECK(t.records[1].xp <= sc.mu0 * t.records[0].xp);
    REQUIRE(t.records[0].report.has_value());
}

TEST_CASE("excision stops the trace") {
    const SchemeConstants sc = toy_scheme();
    const Schedule sch = build_schedule(sc, 3);
    NormalForm nf = toy_nf();
    nf.omega[0] = 1e-6;
    Series p(1, 1);
    p.add(make_key(1, {1}, {}), 1e-9);
    p.add(make_key(1, {-1}, {}), 1e-9);
    ParamSample smp{Eigen::VectorXd::Zero(1), nf, p};
    RunOptions opt;
    opt.nu_max = 3;
    const RunTrace t = run({smp}, sch, opt);
    CHECK(t.stop_reason == "excised");
    CHECK(t.excised_at == 0);
    REQUIRE(t.excision.has_value());
    CHECK(t.records.size() == 1);
}

TEST_CASE("lockstep bundle run") {
    const SchemeConstants sc = toy_scheme();
    const Schedule sch = build_schedule(sc, 3);
    std::mt19937_64 rng(17);
    const Series p0 = toy_p(rng, 1e-7);
    std::vector<ParamSample> bundle;
    for (double h : {0.0, 1e-3}) {
        Series p = p0 * cplx{1.0 + 10.0 * h, 0.0};
        bundle.push_back(ParamSample{Eigen::VectorXd::Constant(1, h), toy_nf(h), p});
    }
    RunOptions opt;
    opt.nu_max = 3;
    opt.norm_floor = 0.0;
    opt.workers = 2;
    opt.keep_series = true;
    const RunTrace t = run(bundle, sch, opt);
    REQUIRE(t.completed_steps() == 3);
    for (std::size_t i = 0; i + 1 < t.records.size(); ++i) {
        const auto& rep = *t.records[i].report;
        CHECK(rep.norms.xp == doctest::Approx(t.records[i].xp));
        CHECK(rep.norms.xp_lip > 0.0);
        CHECK(rep.norms.xp_next == doctest::Approx(t.records[i + 1].xp));
        CHECK(std::isfinite(rep.norms.xf_lip));
        CHECK(t.records[i + 1].xp < t.records[i].xp);
        REQUIRE(t.records[i].p.has_value());
    }

    const ConvergenceReport cr = convergence_report(t, sc);
    CHECK(cr.steps == 3);
    CHECK(cr.beta > 1.1);
    CHECK(cr.converged);
    CHECK(cr.total_drift_ok);
    CHECK(cr.step_drift_ok);
    double sum = 0.0;
    for (double d : cr.step_drift) sum += d;
    CHECK(cr.total_drift <= sum * (1 + 1e-12) + 1e-300);
}

TEST_CASE("decay exponent fit") {
    const double mu0 = 1e-4;
    std::vector<double> sched;
    for (int nu = 0; nu < 5; ++nu) sched.push_back(std::pow(mu0, std::pow(7.0 / 6.0, nu)));
    CHECK(fit_decay_exponent(sched) == doctest::Approx(7.0 / 6.0).epsilon(1e-12));

    const SchemeConstants sc = toy_scheme();
    const ConvergenceReport flat = convergence_report(synthetic_trace({1e-3, 1e-3, 1e-3, 1e-3}), sc);
    CHECK(flat.beta == doctest::Approx(1.0));
    CHECK_FALSE(flat.converged);
    CHECK_THROWS_AS(fit_decay_exponent({1e-3, 0.0, 1e-6}), Error);
}
