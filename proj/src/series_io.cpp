#include <charconv>
#include <sstream>

#include "kam/series.hpp"

namespace kam {

namespace {

std::string fmt_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::string fmt_powmap(const PowMap& pm, int rho) {
    std::string out = "{";
    for (std::size_t i = 0; i < pm.size(); ++i) {
        if (i) out += ',';
        out += format_site(pm[i].site, rho);
        out += ':';
        out += std::to_string(pm[i].pow);
    }
    return out + "}";
}

template <class Vec>
std::string fmt_ints(const Vec& v) {
    std::string out = "[";
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ',';
        out += std::to_string(v[i]);
    }
    return out + "]";
}

class Cursor {
public:
    Cursor(std::string_view s, int line) : s_(s), line_(line) {}

    void skip_ws() {
        while (pos_ < s_.size() && (s_[pos_] == ' ' || s_[pos_] == '\t' || s_[pos_] == '\r')) ++pos_;
    }
    bool peek(char c) {
        skip_ws();
        return pos_ < s_.size() && s_[pos_] == c;
    }
    void expect(char c) {
        if (!peek(c)) fail(std::string("expected '") + c + "'");
        ++pos_;
    }
    void expect_word(std::string_view w) {
        skip_ws();
        if (s_.substr(pos_, w.size()) != w) fail("expected '" + std::string(w) + "'");
        pos_ += w.size();
    }
    int read_int() {
        skip_ws();
        int v = 0;
        auto res = std::from_chars(s_.data() + pos_, s_.data() + s_.size(), v);
        if (res.ec != std::errc{}) fail("expected integer");
        pos_ = static_cast<std::size_t>(res.ptr - s_.data());
        return v;
    }
    double read_double() {
        skip_ws();
        double v = 0;
        auto res = std::from_chars(s_.data() + pos_, s_.data() + s_.size(), v);
        if (res.ec != std::errc{}) fail("expected number");
        pos_ = static_cast<std::size_t>(res.ptr - s_.data());
        return v;
    }
    bool at_end() {
        skip_ws();
        return pos_ >= s_.size();
    }
    [[noreturn]] void fail(const std::string& what) const {
        throw Error("series text line " + std::to_string(line_) + ": " + what);
    }

private:
    std::string_view s_;
    std::size_t pos_ = 0;
    int line_;
};

IntVec read_ints(Cursor& c) {
    IntVec v;
    c.expect('[');
    if (c.peek(']')) {
        c.expect(']');
        return v;
    }
    for (;;) {
        v.push_back(c.read_int());
        if (c.peek(',')) {
            c.expect(',');
            continue;
        }
        c.expect(']');
        return v;
    }
}

Site read_site(Cursor& c) {
    if (!c.peek('(')) return Site::of(c.read_int());
    c.expect('(');
    Site s;
    for (int d = 0;; ++d) {
        if (d >= kMaxRho) c.fail("site has too many coordinates");
        s.c[d] = c.read_int();
        if (c.peek(',')) {
            c.expect(',');
            continue;
        }
        c.expect(')');
        return s;
    }
}

PowMap read_powmap(Cursor& c) {
    PowMap pm;
    c.expect('{');
    if (c.peek('}')) {
        c.expect('}');
        return pm;
    }
    for (;;) {
        Site s = read_site(c);
        c.expect(':');
        int p = c.read_int();
        if (p <= 0) c.fail("powers must be positive");
        pow_add(pm, s, p);
        if (c.peek(',')) {
            c.expect(',');
            continue;
        }
        c.expect('}');
        return pm;
    }
}

}  // namespace

std::string format_site(const Site& s, int rho) {
    if (rho == 1) return std::to_string(s.c[0]);
    std::string out = "(";
    for (int d = 0; d < rho; ++d) {
        if (d) out += ',';
        out += std::to_string(s.c[d]);
    }
    return out + ")";
}

std::string to_text(const Series& f) {
    std::ostringstream os;
    os << "# n=" << f.n() << " rho=" << f.rho() << " tag=" << f.tag() << '\n';
    for (const auto& [key, c] : f.sorted_terms()) {
        os << "k=" << fmt_ints(key.k) << " m=" << fmt_ints(key.m) << " q=" << fmt_powmap(key.q, f.rho())
           << " qbar=" << fmt_powmap(key.qbar, f.rho()) << " re=" << fmt_double(c.real())
           << " im=" << fmt_double(c.imag()) << '\n';
    }
    return os.str();
}

Series from_text(std::string_view text) {
    int n = -1;
    int rho = 1;
    std::string tag;
    Series out;
    bool started = false;
    int line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        std::string_view line = text.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
        if (line.front() == '#') {
            std::istringstream hs{std::string(line.substr(1))};
            std::string tok;
            while (hs >> tok) {
                if (tok.rfind("n=", 0) == 0) n = std::stoi(tok.substr(2));
                else if (tok.rfind("rho=", 0) == 0) rho = std::stoi(tok.substr(4));
                else if (tok.rfind("tag=", 0) == 0) tag = tok.substr(4);
            }
            continue;
        }
        Cursor c(line, line_no);
        c.expect_word("k=");
        IntVec k = read_ints(c);
        c.expect_word("m=");
        IntVec m = read_ints(c);
        c.expect_word("q=");
        PowMap q = read_powmap(c);
        c.expect_word("qbar=");
        PowMap qbar = read_powmap(c);
        c.expect_word("re=");
        double re = c.read_double();
        c.expect_word("im=");
        double im = c.read_double();
        if (!c.at_end()) c.fail("trailing characters");
        if (!started) {
            if (n < 0) n = static_cast<int>(k.size());
            out = Series(n, rho, tag);
            started = true;
        }
        if (static_cast<int>(k.size()) != n || static_cast<int>(m.size()) != n) c.fail("k/m length differs from n");
        for (int v : m)
            if (v < 0) c.fail("negative y power");
        ModeKey key{k, m, q, qbar};
        out.add(key, cplx{re, im});
    }
    if (!started) out = Series(n < 0 ? 0 : n, rho, tag);
    return out;
}

}  // namespace kam
