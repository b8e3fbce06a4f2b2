#pragma once

#include <random>

#include "kam/series.hpp"

namespace kamtest {

using kam::cplx;

struct RandomSpec {
    int n = 2;
    int rho = 1;
    int max_k = 2;
    int max_site = 4;
    int max_degree = 3;
    int terms = 6;
};

inline kam::ModeKey random_key(std::mt19937_64& rng, const RandomSpec& spec) {
    std::uniform_int_distribution<int> kd(-spec.max_k, spec.max_k);
    std::uniform_int_distribution<int> sd(1, spec.max_site);
    std::uniform_int_distribution<int> coin(0, 1);
    std::uniform_int_distribution<int> degd(0, spec.max_degree);
    kam::ModeKey key;
    key.k.resize(spec.n);
    key.m.resize(spec.n);
    for (int j = 0; j < spec.n; ++j) key.k[j] = kd(rng);
    int budget = degd(rng);
    while (budget > 0) {
        const int pick = std::uniform_int_distribution<int>(0, 2)(rng);
        if (pick == 0 && budget >= 2) {
            key.m[std::uniform_int_distribution<int>(0, spec.n - 1)(rng)] += 1;
            budget -= 2;
            continue;
        }
        kam::Site s;
        for (int d = 0; d < spec.rho; ++d) s.c[d] = sd(rng) * (coin(rng) && spec.rho > 1 ? -1 : 1);
        kam::pow_add(coin(rng) ? key.q : key.qbar, s, 1);
        budget -= 1;
    }
    return key;
}

inline kam::Series random_series(std::mt19937_64& rng, const RandomSpec& spec, bool real = false) {
    std::normal_distribution<double> nd;
    kam::Series f(spec.n, spec.rho);
    for (int t = 0; t < spec.terms; ++t) f.add(random_key(rng, spec), cplx{nd(rng), nd(rng)});
    if (real) {
        kam::Series mirror = kam::conjugate_mirror(f);
        f += mirror;
    }
    return f;
}

inline double max_coeff(const kam::Series& f) {
    double m = 0.0;
    for (const auto& [k, c] : f.terms()) m = std::max(m, std::abs(c));
    return m;
}

inline kam::PhasePoint random_point(std::mt19937_64& rng, int n, int rho, int max_site, double scale = 0.5) {
    std::uniform_real_distribution<double> ud(-scale, scale);
    kam::PhasePoint pt;
    for (int j = 0; j < n; ++j) {
        pt.x.emplace_back(ud(rng) * 6.0, 0.0);
        pt.y.emplace_back(ud(rng), ud(rng));
    }
    // Enumerate every site of the box so random keys always find a value.
    std::vector<kam::Site> sites;
    if (rho == 1) {
        for (int i = -max_site; i <= max_site; ++i) sites.push_back(kam::Site::of(i));
    } else {
        for (int i = -max_site; i <= max_site; ++i)
            for (int j = -max_site; j <= max_site; ++j) sites.push_back(kam::Site::of({i, j}));
    }
    for (const auto& s : sites) {
        pt.z[s] = cplx{ud(rng), ud(rng)};
        pt.zbar[s] = cplx{ud(rng), ud(rng)};
    }
    return pt;
}

}  // namespace kamtest
