#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <sstream>

#include "kam/kernels.hpp"
#include "kam/measure.hpp"

using namespace kam;

namespace {

Site S(int i) { return Site::of(i); }

IntVec K1(int a) { return IntVec{a}; }
IntVec K2(int a, int b) { return IntVec{a, b}; }

// omega(xi) = xi on a 1-D box, Omega_i = i^2: only l = 0 resonates near xi = 0.
struct OneDim {
    FrequencyMap fm = FrequencyMap::shifted_identity(Eigen::VectorXd::Zero(1));
    SpectrumModel sm;
    DiophantineParams dp;
    OneDim() {
        sm.d = 2.0;
        dp.n = 1;
        dp.d = 2.0;
        dp.tau = DiophantineParams::min_tau(1, 2.0, 2.5);
    }
};

// Two frequencies shifted by xi against a d = 2/3 normal spectrum.
struct Desk {
    FrequencyMap fm;
    SpectrumModel sm;
    DiophantineParams dp;
    ExcisionBands bands{{0.0, 2.0, 4.0}, {0.0, 6.0, 10.0}};
    Desk() {
        Eigen::VectorXd w0(2);
        w0 << 1.2, 1.9;
        fm = FrequencyMap::shifted_identity(w0);
        sm.d = 2.0 / 3.0;
        dp.n = 2;
        dp.d = sm.d;
        dp.tau = DiophantineParams::min_tau(2, sm.d, 2.5);
    }
};

std::vector<bool> flags_of(const ParameterGrid& g) {
    std::vector<bool> f(g.cell_count());
    for (std::size_t c = 0; c < g.cell_count(); ++c) f[c] = g.excised(c);
    return f;
}

}  // namespace

TEST_CASE("parameter grid") {
    ParameterGrid g({-1.0, 0.0}, {1.0, 0.5}, 10);
    CHECK(g.cell_count() == 100);
    CHECK(g.box_volume() == doctest::Approx(1.0));
    CHECK(g.cell_volume() * g.cell_count() == doctest::Approx(g.box_volume()));
    CHECK(g.center(0)[0] == doctest::Approx(-0.9));
    CHECK(g.center(0)[1] == doctest::Approx(0.025));
    CHECK(g.center(11)[0] == doctest::Approx(-0.7));
    CHECK(g.center(11)[1] == doctest::Approx(0.075));
    CHECK(g.excised_count() == 0);
    CHECK(g.surviving_fraction() == 1.0);
    CHECK_THROWS_AS(ParameterGrid({0.0}, {0.0}, 4), Error);
    CHECK_THROWS_AS(ParameterGrid({0.0}, {1.0}, 0), Error);
}

TEST_CASE("excision on a one-dimensional box") {
    OneDim m;
    const ExcisionBands band{{0.0, 1.0}, {0.0, 0.0}};

    SUBCASE("gamma = 0 excises nothing") {
        ParameterGrid g({-0.5}, {0.5}, 101);
        excise(g, m.fm, m.sm, m.dp, band, 0.0);
        CHECK(g.excised_count() == 0);
    }

    SUBCASE("excised interval is |xi| < gamma / 2") {
        const double gamma = 0.1;
        ParameterGrid g({-0.5}, {0.5}, 1000);
        const ExcisionSummary s = excise(g, m.fm, m.sm, m.dp, band, gamma);
        CHECK(std::fabs(g.excised_measure() - gamma) <= 1e-3);
        for (std::size_t c = 0; c < g.cell_count(); ++c) {
            const double x = g.center(c)[0];
            CHECK(g.excised(c) == (std::fabs(x) < gamma / 2));
            if (g.excised(c)) {
                REQUIRE(g.record(c).size() == 1);
                CHECK(g.record(c)[0].l.empty());
                CHECK(g.record(c)[0].nu == 0);
            }
        }
        CHECK(s.strips_hit == 2);
    }

    SUBCASE("a cell centered on a resonance is excised") {
        // Centers at -0.4, -0.2, 0, 0.2, 0.4; xi = 0 solves <k, omega> = 0.
        ParameterGrid g({-0.5}, {0.5}, 5);
        excise(g, m.fm, m.sm, m.dp, band, 1e-9);
        CHECK(g.excised(2));
        CHECK(g.excised_count() == 1);
    }

    SUBCASE("empty band is noted") {
        ParameterGrid g({-0.5}, {0.5}, 10);
        const ExcisionSummary s = excise(g, m.fm, m.sm, m.dp, ExcisionBands{{0.0, 1.0, 1.0}, {0.0, 0.0, 0.0}}, 0.1);
        REQUIRE(s.notes.size() == 1);
        CHECK(s.notes[0].find("level 1") != std::string::npos);
    }
}

TEST_CASE("resonance width") {
    OneDim m;
    ParameterGrid g({-0.5}, {0.5}, 4000);
    const double cell = 1.0 / 4000;

    const WidthCheck w1 = resonance_width_check(K1(1), {}, g, m.fm, m.sm, m.dp, 0.1);
    CHECK(w1.analytic == doctest::Approx(0.1));
    CHECK(std::fabs(w1.measured - w1.analytic) <= cell);
    CHECK(w1.ratio == doctest::Approx(2.0).epsilon(2 * cell / 0.1));

    const WidthCheck w2 = resonance_width_check(K1(1), {}, g, m.fm, m.sm, m.dp, 0.2);
    CHECK(w2.measured == doctest::Approx(2.0 * w1.measured).epsilon(2 * cell / 0.1));
    CHECK(w2.analytic == doctest::Approx(2.0 * w1.analytic));

    const double gamma = 0.3;
    double prev = INFINITY;
    for (int k = 1; k <= 3; ++k) {
        const WidthCheck w = resonance_width_check(K1(k), {}, g, m.fm, m.sm, m.dp, gamma);
        const double exact = 2.0 * gamma / ((1.0 + std::pow(k, m.dp.tau)) * k);
        CHECK(w.analytic == doctest::Approx(exact));
        CHECK(std::fabs(w.measured - exact) <= cell);
        CHECK(w.measured <= prev);
        prev = w.measured;
    }

    SUBCASE("two-dimensional strip against the closed form") {
        Desk d;
        ParameterGrid g2({-0.5, -0.5}, {0.5, 0.5}, 400);
        const LVec l{{S(1), -1}};
        const WidthCheck w = resonance_width_check(K2(1, 0), l, g2, d.fm, d.sm, d.dp, 0.2);
        // |1.2 + xi_1 - 1| < 0.1: xi_1 in (-0.3, -0.1).
        CHECK(w.analytic == doctest::Approx(0.2));
        CHECK(std::fabs(w.measured - w.analytic) <= 2.0 / 400);
        const WidthCheck wd = resonance_width_check(K2(1, -1), {}, g2, d.fm, d.sm, d.dp, 0.2);
        CHECK(std::fabs(wd.measured - wd.analytic) <= 4.0 / 400);
        CHECK(wd.analytic > 0.0);
    }

    SUBCASE("|k| >= 16 M is required") {
        OneDim t;
        t.sm.tail[S(3)] = {0.5};
        t.sm.delta = 0.0;
        CHECK_THROWS_AS(resonance_width_check(K1(7), {{S(3), 1}}, g, t.fm, t.sm, t.dp, 0.1), Error);
        CHECK_NOTHROW(resonance_width_check(K1(8), {{S(3), 1}}, g, t.fm, t.sm, t.dp, 0.1));
    }
}

TEST_CASE("resonant partner counts") {
    CHECK(count_resonant_partners(S(100), 1, 1.0, 0.5, 1.0).count == 41);

    // d >= 1 and a window below the local gap: only the |j| = |i| shell.
    CHECK(count_resonant_partners(S(10), 1, 1.0, 2.0, 0.5).count == 1);
    const PartnerCount shell = count_resonant_partners(Site::of({2, 1}), 2, 1.0, 2.0, 0.5);
    CHECK(shell.count == 12);

    // Growth like |k|^{1/d} for d = 1/2: slope 2 in the window size.
    std::vector<double> xs, ys;
    for (double k : {4.0, 8.0, 16.0}) {
        xs.push_back(std::log(k));
        ys.push_back(std::log(static_cast<double>(count_resonant_partners(S(1), 1, k, 0.5, 1.0).count)));
    }
    const double slope = (ys[2] - ys[0]) / (xs[2] - xs[0]);
    CHECK(slope == doctest::Approx(2.0).epsilon(0.1));

    const PartnerCount pc = count_resonant_partners(S(100), 1, 2.0, 0.5, 1.0);
    CHECK(pc.scale == doctest::Approx(400.0));
    CHECK(static_cast<double>(pc.count) <= (pc.implied_c + 1.0) * pc.scale * (1 + 1e-12));
    CHECK_THROWS_AS(count_resonant_partners(S(1), 1, 1.0, 0.0, 1.0), Error);
}

TEST_CASE("resonance constants") {
    Desk d;
    ParameterGrid g({-0.1, -0.1}, {0.1, 0.1}, 4);
    const ResonanceConstants rc = measure_c8(g, d.fm, d.sm, 0.1, 50);
    CHECK(rc.omega_sup == doctest::Approx(2.0));
    CHECK(rc.c7 == doctest::Approx(1.0));
    CHECK(rc.c8 == doctest::Approx(2.0 * 2.1));
}

TEST_CASE("excision invariants") {
    Desk d;
    const GridSpec spec{{-0.5, -0.5}, {0.5, 0.5}, 60};

    SUBCASE("nesting across levels") {
        ParameterGrid one(spec.lower, spec.upper, spec.resolution), two = one;
        excise(one, d.fm, d.sm, d.dp, ExcisionBands{{0.0, 2.0}, {0.0, 6.0}}, 0.1);
        excise(two, d.fm, d.sm, d.dp, d.bands, 0.1);
        const auto f1 = flags_of(one), f2 = flags_of(two);
        for (std::size_t c = 0; c < f1.size(); ++c)
            if (f1[c]) CHECK(f2[c]);
        CHECK(two.excised_count() >= one.excised_count());
        CHECK(one.excised_count() > 0);
    }

    SUBCASE("monotone in gamma") {
        ParameterGrid lo(spec.lower, spec.upper, spec.resolution), hi = lo;
        excise(lo, d.fm, d.sm, d.dp, d.bands, 0.05);
        excise(hi, d.fm, d.sm, d.dp, d.bands, 0.1);
        const auto a = flags_of(lo), b = flags_of(hi);
        bool subset = true;
        for (std::size_t c = 0; c < a.size(); ++c) subset = subset && (!a[c] || b[c]);
        CHECK(subset);
        CHECK(hi.excised_count() > lo.excised_count());
    }

    SUBCASE("refinement stability") {
        ParameterGrid coarse(spec.lower, spec.upper, 50), fine(spec.lower, spec.upper, 100);
        excise(coarse, d.fm, d.sm, d.dp, d.bands, 0.1);
        excise(fine, d.fm, d.sm, d.dp, d.bands, 0.1);
        // Coarse cells whose excision flag is not constant over their four children.
        std::size_t boundary = 0;
        for (std::size_t c = 0; c < coarse.cell_count(); ++c) {
            const std::size_t i = c % 50, j = c / 50;
            int count = 0;
            for (std::size_t di = 0; di < 2; ++di)
                for (std::size_t dj = 0; dj < 2; ++dj) count += fine.excised((2 * j + dj) * 100 + 2 * i + di);
            if (count != 0 && count != 4) ++boundary;
            else if ((count == 4) != coarse.excised(c)) ++boundary;
        }
        CHECK(std::fabs(coarse.excised_measure() - fine.excised_measure()) <=
              static_cast<double>(boundary) * coarse.cell_volume());
    }

    SUBCASE("workers and instruction sets agree") {
        ParameterGrid a(spec.lower, spec.upper, spec.resolution), b = a, c = a;
        ExcisionOptions many;
        many.workers = 4;
        kernels::set_isa(kernels::Isa::Scalar);
        excise(a, d.fm, d.sm, d.dp, d.bands, 0.1);
        kernels::set_isa(kernels::Isa::Avx2);
        excise(b, d.fm, d.sm, d.dp, d.bands, 0.1);
        excise(c, d.fm, d.sm, d.dp, d.bands, 0.1, many);
        for (std::size_t i = 0; i < a.cell_count(); ++i) {
            REQUIRE(a.record(i).size() == b.record(i).size());
            REQUIRE(a.record(i).size() == c.record(i).size());
            if (!a.record(i).empty()) {
                CHECK(a.record(i)[0].k == b.record(i)[0].k);
                CHECK(a.record(i)[0].l == b.record(i)[0].l);
                CHECK(a.record(i)[0].k == c.record(i)[0].k);
                CHECK(a.record(i)[0].l == c.record(i)[0].l);
            }
        }
    }

    SUBCASE("every record names a violated divisor") {
        ParameterGrid g(spec.lower, spec.upper, 30);
        excise(g, d.fm, d.sm, d.dp, d.bands, 0.1);
        for (std::size_t c = 0; c < g.cell_count(); ++c) {
            if (!g.excised(c)) continue;
            const Violation& v = g.record(c)[0];
            CHECK_FALSE(is_admissible(g.center(c), v.k, v.l, 0.1, d.dp, d.fm, d.sm));
        }
    }
}

TEST_CASE("measure sweep") {
    OneDim m;
    const ExcisionBands band{{0.0, 1.0}, {0.0, 0.0}};
    const GridSpec spec{{-0.5}, {0.5}, 20000};

    SUBCASE("pure l = 0 model scales linearly") {
        const SweepResult r = measure_sweep(spec, {0.01, 0.03, 0.1}, m.fm, m.sm, m.dp, band);
        REQUIRE(r.rows.size() == 3);
        CHECK(r.slope_defined);
        CHECK(r.spans_decade);
        CHECK(r.slope == doctest::Approx(1.0).epsilon(2e-3));
        CHECK(r.rows[2].excised_measure == doctest::Approx(0.1).epsilon(1e-3));
        CHECK(r.rows[0].cells == 20000);
    }

    SUBCASE("no excision leaves the slope undefined") {
        const SweepResult r = measure_sweep(spec, {0.0, 0.0, 0.0}, m.fm, m.sm, m.dp, band);
        CHECK_FALSE(r.slope_defined);
        CHECK(std::isnan(r.slope));
    }

    SUBCASE("csv") {
        const SweepResult r = measure_sweep(GridSpec{{-0.5}, {0.5}, 10}, {0.1}, m.fm, m.sm, m.dp, band);
        std::istringstream in(sweep_csv(r));
        std::string header, row, extra;
        std::getline(in, header);
        std::getline(in, row);
        CHECK(header == "gamma,excised_measure,surviving_fraction,cells,resolution");
        CHECK(row == "0.10000000000000001,0.10000000000000001,0.90000000000000002,10,10");
        CHECK_FALSE(std::getline(in, extra));
    }

    CHECK_THROWS_AS(measure_sweep(spec, {}, m.fm, m.sm, m.dp, band), Error);
}
