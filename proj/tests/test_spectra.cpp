#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "kam/spectra.hpp"

using namespace kam;

namespace {

IntVec kv(std::initializer_list<int> v) { return IntVec(v.begin(), v.end()); }

Eigen::VectorXd vec(std::initializer_list<double> v) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) out[i++] = x;
    return out;
}

}  // namespace

TEST_CASE("frequency map evaluation") {
    FrequencyMap id = FrequencyMap::shifted_identity(Eigen::VectorXd::Zero(2));
    CHECK(id.eval(vec({1, 2})).isApprox(vec({1, 2})));
    FrequencyMap shifted = FrequencyMap::shifted_identity(vec({0.3, 1.7}));
    CHECK(shifted.eval(Eigen::VectorXd::Zero(2)) == vec({0.3, 1.7}));

    std::mt19937_64 rng(1);
    std::normal_distribution<double> nd;
    Eigen::MatrixXd a(3, 3);
    for (int i = 0; i < 9; ++i) a(i / 3, i % 3) = nd(rng);
    FrequencyMap fm(vec({1, 2, 3}), a);
    Eigen::VectorXd x1 = vec({nd(rng), nd(rng), nd(rng)});
    Eigen::VectorXd x2 = vec({nd(rng), nd(rng), nd(rng)});
    CHECK((fm.eval(x1) - fm.eval(x2) - a * (x1 - x2)).norm() < 1e-13);
    CHECK(fm.lipschitz() >= (fm.eval(x1) - fm.eval(x2)).norm() / (x1 - x2).norm() - 1e-12);

    Eigen::MatrixXd sing(2, 2);
    sing << 1, 2, 2, 4;
    CHECK_THROWS_AS(FrequencyMap(vec({0, 0}), sing), Error);
}

TEST_CASE("normal frequencies") {
    SpectrumModel sm;
    sm.d = 2.0;
    CHECK(sm.eval(Site::of(3), vec({0.0})) == doctest::Approx(9.0));
    sm.d = 0.5;
    CHECK(sm.eval(Site::of(16), vec({0.0})) == doctest::Approx(4.0));

    SpectrumModel tail;
    tail.d = 2.0;
    tail.delta = -1.0;
    tail.tail[Site::of(2)] = {1.0, 0.0};
    CHECK(tail.eval(Site::of(2), vec({0.5, 0.0})) == doctest::Approx(4.25));

    tail.tangential = {Site::of(1)};
    CHECK_THROWS_AS(tail.eval(Site::of(1), vec({0, 0})), Error);
    CHECK_THROWS_AS(tail.eval(Site::of(0), vec({0, 0})), Error);
}

TEST_CASE("spectrum check on a box") {
    SpectrumModel sm;
    sm.d = 1.0;
    sm.tail[Site::of(2)] = {1.0};
    sm.delta = 0.0;
    CHECK_NOTHROW(check_spectrum_on_box(sm, {-0.4}, {0.4}, 5));
    // Omega_2 = 2 + xi meets Omega_3 = 3 at xi = 1.
    CHECK_THROWS_AS(check_spectrum_on_box(sm, {0.5}, {1.5}, 5), Error);
}

TEST_CASE("classification of l") {
    CHECK(classify_l({}).kind == DivisorClass::Zero);
    auto minus = classify_l(make_l({{Site::of(5), 1}, {Site::of(3), -1}}));
    CHECK(minus.kind == DivisorClass::Minus);
    CHECK(minus.site == Site::of(5));
    CHECK(classify_l(make_l({{Site::of(4), 2}})).kind == DivisorClass::Plus);
    CHECK(classify_l(make_l({{Site::of(4), -1}})).kind == DivisorClass::Plus);
    CHECK(classify_l(make_l({{Site::of(4), -1}, {Site::of(2), -1}})).kind == DivisorClass::Plus);
    CHECK_THROWS_AS(classify_l(make_l({{Site::of(4), 2}, {Site::of(1), 1}})), Error);

    // Every l = e_i - e_j with i != j is Minus(i).
    int count = 0;
    const int L = 6;
    for (int i = -L; i <= L; ++i)
        for (int j = -L; j <= L; ++j) {
            if (i == 0 || j == 0 || i == j) continue;
            auto c = classify_l(make_l({{Site::of(i), 1}, {Site::of(j), -1}}));
            count += c.kind == DivisorClass::Minus && c.site == Site::of(i);
        }
    CHECK(count == 2 * L * (2 * L - 1));
}

TEST_CASE("bracket of l") {
    CHECK(bracket_ld({}, 2.0) == 0.0);
    CHECK(bracket_ld(make_l({{Site::of(3), 1}, {Site::of(2), -1}}), 2.0) == doctest::Approx(5.0));
    CHECK(bracket_ld(make_l({{Site::of(1), 1}, {Site::of(-1), 1}}), 2.0) == doctest::Approx(2.0));
}

TEST_CASE("divisor values") {
    FrequencyMap fm(vec({1.0, std::numbers::sqrt2}), Eigen::MatrixXd::Identity(2, 2));
    SpectrumModel sm;
    sm.d = 0.5;
    const Eigen::VectorXd xi = vec({0.01, -0.02});
    CHECK(divisor(kv({0, 0}), {}, xi, fm, sm) == 0.0);
    CHECK(divisor(kv({0, 0}), make_l({{Site::of(4), 1}, {Site::of(-4), -1}}), xi, fm, sm) == 0.0);

    std::mt19937_64 rng(4);
    std::uniform_int_distribution<int> kd(-9, 9), sd(1, 20);
    for (int t = 0; t < 50; ++t) {
        IntVec k = kv({kd(rng), kd(rng)});
        const int i = sd(rng), j = sd(rng);
        LVec l = make_l({{Site::of(i), 1}, {Site::of(j), 1}});
        const Eigen::VectorXd om = fm.eval(xi);
        const double want = k[0] * om[0] + k[1] * om[1] + std::sqrt(double(i)) + std::sqrt(double(j));
        CHECK(divisor(k, l, xi, fm, sm) == doctest::Approx(want).epsilon(1e-14));
        CHECK(divisor(k, l, xi, fm, sm, true) == doctest::Approx(want).epsilon(1e-14));
    }
}

TEST_CASE("diophantine thresholds") {
    DivisorClass zero;
    CHECK(diophantine_threshold(1, zero, 0.0, 0.1, 10.0, 2.5) == doctest::Approx(0.05));
    DivisorClass minus{DivisorClass::Minus, Site::of(2)};
    CHECK(diophantine_threshold(1, minus, 0.0, 0.1, 10.0, 2.5) ==
          doctest::Approx(0.1 / (2.0 * std::pow(2.0, 2.5))).epsilon(1e-14));
    CHECK(diophantine_threshold(1, minus, 0.0, 0.1, 10.0, 2.5) == doctest::Approx(8.8388e-3).epsilon(1e-4));
    DivisorClass plus{DivisorClass::Plus, {}};
    CHECK(diophantine_threshold(0, plus, 3.0, 0.1, 10.0, 2.5) == doctest::Approx(0.3));
    CHECK_THROWS_AS(diophantine_threshold(0, zero, 0.0, 0.1, 10.0, 2.5), Error);

    // Linear in gamma, monotone in |k| and in the Minus site.
    for (int k = 0; k < 6; ++k) {
        for (int s = 1; s < 6; ++s) {
            DivisorClass m{DivisorClass::Minus, Site::of(s)};
            const double t1 = diophantine_threshold(k, m, 0.0, 0.1, 7.5, 2.5);
            CHECK(diophantine_threshold(k, m, 0.0, 0.3, 7.5, 2.5) == doctest::Approx(3 * t1).epsilon(1e-14));
            CHECK(diophantine_threshold(k + 1, m, 0.0, 0.1, 7.5, 2.5) <= t1);
            DivisorClass m2{DivisorClass::Minus, Site::of(s + 1)};
            CHECK(diophantine_threshold(k, m2, 0.0, 0.1, 7.5, 2.5) <= t1);
        }
    }
}

TEST_CASE("admissibility boundary is inclusive") {
    FrequencyMap fm(vec({0.0}), Eigen::MatrixXd::Identity(1, 1));
    SpectrumModel sm;
    DiophantineParams p;
    p.n = 1;
    p.d = 1.0;
    p.c_rho = 2.5;
    p.tau = DiophantineParams::min_tau(1, 1.0, 2.5);
    CHECK_NOTHROW(p.validate());
    const double gamma = 0.1;
    const double thr = gamma / (1.0 + 1.0);
    IntVec k = kv({1});
    CHECK_FALSE(is_admissible(vec({0.0}), k, {}, gamma, p, fm, sm));
    CHECK(is_admissible(vec({2 * thr}), k, {}, gamma, p, fm, sm));
    CHECK(is_admissible(vec({thr}), k, {}, gamma, p, fm, sm));
    CHECK_FALSE(is_admissible(vec({std::nextafter(thr, 0.0)}), k, {}, gamma, p, fm, sm));

    DiophantineParams bad = p;
    bad.tau = 3.0;
    CHECK_THROWS_AS(bad.validate(), Error);
    bad = p;
    bad.c_rho = 1.5;
    CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("weyl law") {
    CHECK(weyl_lambda(2, std::numbers::pi, 5.0) == doctest::Approx(20.0));
    CHECK(weyl_lambda(1, 1.0, 1.0) == doctest::Approx(std::numbers::pi * std::numbers::pi));
    for (int m = 1; m <= 4; ++m)
        for (double j : {1.0, 7.0, 30.0})
            CHECK(weyl_lambda(m, 2.0, 2 * j) / weyl_lambda(m, 2.0, j) == doctest::Approx(std::pow(2.0, 2.0 / m)));
    CHECK_THROWS_AS(weyl_lambda(0, 1.0, 1.0), Error);
}

TEST_CASE("spectral separation collapses for d < 1") {
    SpectrumModel sm;
    sm.d = 2.0 / 3.0;
    const Eigen::VectorXd xi = vec({0.0});
    double prev_gap = INFINITY;
    for (int J : {10, 100, 1000, 10000}) {
        const double gap = sm.eval(Site::of(J + 1), xi) - sm.eval(Site::of(J), xi);
        CHECK(gap <= sm.d * std::pow(J, sm.d - 1.0));
        CHECK(gap < prev_gap);
        prev_gap = gap;
    }
}
