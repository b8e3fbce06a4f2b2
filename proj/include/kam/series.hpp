#pragma once

#include <array>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <boost/container/small_vector.hpp>

namespace kam {

using cplx = std::complex<double>;

/// Largest supported dimension of the normal lattice.
inline constexpr int kMaxRho = 3;

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Raised when a Lie series stops decaying; the CLI maps it to exit code 3.
class DivergenceError : public Error {
public:
    using Error::Error;
};

/// A point of the normal lattice Z^rho. Unused coordinates stay zero.
struct Site {
    std::array<int, kMaxRho> c{};

    static Site of(int i) {
        Site s;
        s.c[0] = i;
        return s;
    }
    static Site of(std::initializer_list<int> coords);

    int norm() const {
        int t = 0;
        for (int v : c) t += v < 0 ? -v : v;
        return t;
    }
    bool is_zero() const { return c[0] == 0 && c[1] == 0 && c[2] == 0; }

    friend bool operator==(const Site&, const Site&) = default;
    friend auto operator<=>(const Site&, const Site&) = default;
};

struct SiteHash {
    std::size_t operator()(const Site& s) const noexcept;
};

struct SitePow {
    Site site;
    int pow = 0;

    friend bool operator==(const SitePow&, const SitePow&) = default;
    friend auto operator<=>(const SitePow&, const SitePow&) = default;
};

using IntVec = boost::container::small_vector<int, 4>;
/// Sorted by site, every power strictly positive.
using PowMap = boost::container::small_vector<SitePow, 4>;

int pow_of(const PowMap& pm, const Site& s);
/// Adds delta to the power at s, keeping the map sorted and free of zeros.
void pow_add(PowMap& pm, const Site& s, int delta);
PowMap pow_merge(const PowMap& a, const PowMap& b);
int pow_total(const PowMap& pm);

/// Multi-index of the monomial y^m z^q zbar^qbar e^{i<k,x>}.
struct ModeKey {
    IntVec k;
    IntVec m;
    PowMap q;
    PowMap qbar;

    int degree() const { return 2 * m_norm() + pow_total(q) + pow_total(qbar); }
    int k_norm() const;
    int m_norm() const;
    bool k_zero() const;

    friend bool operator==(const ModeKey&, const ModeKey&) = default;
    friend bool operator<(const ModeKey& a, const ModeKey& b);
};

struct KeyHash {
    std::size_t operator()(const ModeKey& key) const noexcept;
};

/// Key with zero k and m of length n and the given normal powers.
ModeKey make_key(int n, std::vector<int> k, std::vector<int> m, PowMap q = {}, PowMap qbar = {});

using TermMap = std::unordered_map<ModeKey, cplx, KeyHash>;

/// Sparse Taylor-Fourier polynomial on T^n x R^n x l^{a,p} x l^{a,p}.
class Series {
public:
    Series() = default;
    Series(int n, int rho, std::string tag = {});

    int n() const { return n_; }
    int rho() const { return rho_; }
    const std::string& tag() const { return tag_; }
    void set_tag(std::string tag) { tag_ = std::move(tag); }

    const TermMap& terms() const { return terms_; }
    std::size_t size() const { return terms_.size(); }
    bool empty() const { return terms_.empty(); }

    void add(const ModeKey& key, cplx c);
    void set(const ModeKey& key, cplx c);
    cplx coeff(const ModeKey& key) const;
    void erase(const ModeKey& key) { terms_.erase(key); }
    void reserve(std::size_t count) { terms_.reserve(count); }

    /// Drops coefficients that are exactly zero.
    void canonicalize();

    Series& operator+=(const Series& other);
    Series& operator-=(const Series& other);
    Series& operator*=(cplx factor);

    int max_degree() const;
    int max_fourier() const;

    std::vector<std::pair<ModeKey, cplx>> sorted_terms() const;

    template <class Pred>
    Series filtered(Pred&& pred) const {
        Series out(n_, rho_, tag_);
        for (const auto& [key, c] : terms_)
            if (pred(key, c)) out.terms_.emplace(key, c);
        return out;
    }

    bool same_space(const Series& other) const { return n_ == other.n_ && rho_ == other.rho_; }

    friend bool operator==(const Series& a, const Series& b);

private:
    int n_ = 0;
    int rho_ = 1;
    std::string tag_;
    TermMap terms_;
};

Series operator+(Series a, const Series& b);
Series operator-(Series a, const Series& b);
Series operator*(Series a, cplx factor);
Series operator*(const Series& a, const Series& b);

/// Image under complex conjugation: (k, m, q, qbar, c) -> (-k, m, qbar, q, conj c).
Series conjugate_mirror(const Series& f);
/// Largest |coeff(-k,m,qbar,q) - conj coeff(k,m,q,qbar)| relative to the largest coefficient.
double reality_defect(const Series& f);
bool is_real(const Series& f, double rel_tol = 1e-12);

// Derivatives.
Series d_dx(const Series& f, int j);
Series d_dy(const Series& f, int j);
Series d_dz(const Series& f, const Site& s);
Series d_dzbar(const Series& f, const Site& s);

/// Evaluation point for series. Angles may be complex.
struct PhasePoint {
    std::vector<cplx> x;
    std::vector<cplx> y;
    std::map<Site, cplx> z;
    std::map<Site, cplx> zbar;
};

cplx evaluate(const Series& f, const PhasePoint& pt);

/// Truncation applied to results of bracket products. Negative means unbounded.
struct Truncation {
    int max_degree = -1;
    int max_fourier = -1;
};

/// {F,G} = sum_j (F_x G_y - F_y G_x) + i sum_s (F_z G_zbar - F_zbar G_z).
Series poisson_bracket(const Series& f, const Series& g, Truncation trunc = {});

struct DomainWeights {
    double a = 0.0;
    double p = 0.0;
    double abar = 0.1;
    double pbar = 0.0;
    double r = 0.1;
    double s = 1.0;

    void validate() const;
};

/// sqrt(sum |z_i|^2 |i|^{2p} e^{2a|i|}).
double weighted_seq_norm(const std::vector<std::pair<Site, cplx>>& z, double a, double p);

/// Coefficient majorant of |X_F| on D_{a,p}(r,s).
double majorant_xnorm(const Series& f, const DomainWeights& w);

struct Sample {
    std::vector<double> xi;
    Series f;
};

/// max over sample pairs of |X_{F_xi - F_eps}| / |xi - eps|.
double lipschitz_seminorm(const std::vector<Sample>& family, const DomainWeights& w);

struct LieOptions {
    int max_degree = -1;
    int max_fourier = -1;
    int j_max = 32;
    /// Stop once a term's majorant falls below rel_tol times the sum of the terms of order >= 2.
    double rel_tol = 0.0;
    DomainWeights weights{};
};

struct LieStats {
    int terms_used = 0;
    std::vector<double> term_norms;
};

/// H o phi_F^1 = sum_j ad_F^j(H)/j!, ad_F(.) = {., F}.
Series lie_transform(const Series& h, const Series& f, const LieOptions& opt, LieStats* stats = nullptr);
/// The terms j >= 1 of the same series, without H itself.
Series lie_increment(const Series& h, const Series& f, const LieOptions& opt, LieStats* stats = nullptr);
Series lie_transform(const Series& h, const Series& f, int max_degree, int max_fourier);

// Text format, one term per line.
std::string format_site(const Site& s, int rho);
std::string to_text(const Series& f);
Series from_text(std::string_view text);

}  // namespace kam
