#include "kam/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace kam {

using nlohmann::json;

namespace {

Site parse_site(const json& j, int rho) {
    if (j.is_number_integer()) {
        if (rho != 1) throw ConfigError("site " + j.dump() + " needs " + std::to_string(rho) + " coordinates");
        return Site::of(j.get<int>());
    }
    if (!j.is_array() || static_cast<int>(j.size()) != rho)
        throw ConfigError("site " + j.dump() + " needs " + std::to_string(rho) + " coordinates");
    Site s;
    for (int d = 0; d < rho; ++d) s.c[d] = j[static_cast<std::size_t>(d)].get<int>();
    return s;
}

json site_json(const Site& s, int rho) {
    if (rho == 1) return s.c[0];
    json a = json::array();
    for (int d = 0; d < rho; ++d) a.push_back(s.c[d]);
    return a;
}

std::vector<Site> parse_sites(const json& j, int rho) {
    std::vector<Site> out;
    for (const auto& e : j) out.push_back(parse_site(e, rho));
    return out;
}

std::map<Site, double> parse_site_values(const json& j, int rho) {
    std::map<Site, double> out;
    for (const auto& e : j) out[parse_site(e.at("site"), rho)] = e.at("value").get<double>();
    return out;
}

json site_values_json(const std::map<Site, double>& m, int rho) {
    json a = json::array();
    for (const auto& [s, v] : m) a.push_back({{"site", site_json(s, rho)}, {"value", v}});
    return a;
}

Eigen::VectorXd parse_vector(const json& j) {
    const auto v = j.get<std::vector<double>>();
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

json vector_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

ModelSpec parse_model(const json& j) {
    ModelSpec m;
    m.omega0 = parse_vector(j.at("omega0"));
    const auto n = m.omega0.size();
    m.matrix = Eigen::MatrixXd::Identity(n, n);
    if (j.contains("matrix")) {
        const auto rows = j.at("matrix").get<std::vector<std::vector<double>>>();
        if (static_cast<Eigen::Index>(rows.size()) != n) throw ConfigError("model.matrix must be n x n");
        for (Eigen::Index r = 0; r < n; ++r) {
            if (static_cast<Eigen::Index>(rows[static_cast<std::size_t>(r)].size()) != n)
                throw ConfigError("model.matrix must be n x n");
            for (Eigen::Index c = 0; c < n; ++c) m.matrix(r, c) = rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
        }
    }
    const json sp = j.value("spectrum", json::object());
    m.sm.d = sp.value("d", 1.0);
    m.sm.delta = sp.value("delta", -1.0);
    m.sm.rho = sp.value("rho", 1);
    if (sp.contains("corrections")) m.sm.principal_corrections = parse_site_values(sp.at("corrections"), m.sm.rho);
    if (sp.contains("tail"))
        for (const auto& e : sp.at("tail")) m.sm.tail[parse_site(e.at("site"), m.sm.rho)] = e.at("coeffs").get<std::vector<double>>();
    if (sp.contains("tangential")) m.sm.tangential = parse_sites(sp.at("tangential"), m.sm.rho);
    if (!(m.sm.d > 0.0)) throw ConfigError("model.spectrum.d must be positive");
    if (std::fabs(m.matrix.determinant()) < 1e-14) throw ConfigError("model.matrix must be invertible");
    return m;
}

json model_json(const ModelSpec& m) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < m.matrix.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.matrix.cols(); ++c) row.push_back(m.matrix(r, c));
        rows.push_back(row);
    }
    json tail = json::array();
    for (const auto& [s, v] : m.sm.tail) tail.push_back({{"site", site_json(s, m.sm.rho)}, {"coeffs", v}});
    json tang = json::array();
    for (const auto& s : m.sm.tangential) tang.push_back(site_json(s, m.sm.rho));
    return {{"omega0", vector_json(m.omega0)},
            {"matrix", rows},
            {"spectrum",
             {{"d", m.sm.d},
              {"delta", m.sm.delta},
              {"rho", m.sm.rho},
              {"corrections", site_values_json(m.sm.principal_corrections, m.sm.rho)},
              {"tail", tail},
              {"tangential", tang}}}};
}

void require_positive(double v, const char* name) {
    if (!(v > 0.0)) throw ConfigError(std::string(name) + " must be positive");
}

void parse_scheme(const json& s, RunConfig& cfg, int rho, double d) {
    SchemeConstants& sc = cfg.scheme;
    sc.n = cfg.n();
    sc.rho = rho;
    sc.d = d;
    sc.theorem_a = cfg.mode == "TheoremA";
    sc.special_form = s.value("special_form", cfg.mode == "TheoremAPrime" || cfg.kind != ProblemKind::Series);
    sc.extended = cfg.precision == "extended";
    sc.mu0 = s.value("mu0", sc.mu0);
    sc.s0 = s.value("s0", sc.s0);
    sc.r0 = s.value("r0", sc.r0);
    sc.a0 = s.value("a0", sc.a0);
    sc.gamma0 = s.value("gamma0", sc.gamma0);
    sc.M0 = s.value("M0", sc.M0);
    sc.sigma = s.value("sigma", sc.sigma);
    sc.pbar = s.value("pbar", sc.pbar);
    sc.alpha1 = s.value("alpha1", sc.alpha1);
    sc.alpha2 = s.value("alpha2", sc.alpha2);
    sc.log_base = s.value("log_base", sc.log_base);
    sc.delta = s.value("delta", sc.delta);
    sc.c_rho = sc.theorem_a ? 2.5 : s.value("c_rho", sc.c_rho);
    sc.c1_rho = s.value("c1_rho", sc.c1_rho);
    cfg.nu_max = s.value("nu_max", cfg.nu_max);
    for (auto [v, name] : {std::pair{sc.mu0, "scheme.mu0"}, {sc.s0, "scheme.s0"}, {sc.r0, "scheme.r0"},
                           {sc.a0, "scheme.a0"}, {sc.gamma0, "scheme.gamma0"}, {sc.M0, "scheme.M0"}})
        require_positive(v, name);
    if (cfg.nu_max < 0) throw ConfigError("scheme.nu_max must be non-negative");
    const double tau_min = DiophantineParams::min_tau(sc.n, sc.d, sc.c_rho);
    if (s.contains("tau") && !s.at("tau").is_null()) {
        sc.tau = s.at("tau").get<double>();
        if (sc.tau < tau_min - 1e-12)
            throw ConfigError("scheme.tau = " + std::to_string(sc.tau) + " is below n + (c(rho)+2)/d + 4 = " +
                              std::to_string(tau_min));
    } else {
        sc.tau = tau_min;
    }
    try {
        sc.validate();
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        throw ConfigError(std::string("scheme: ") + e.what());
    }
}

RunConfig parse_impl(const json& j, const std::filesystem::path& base_dir) {
    if (!j.is_object()) throw ConfigError("configuration must be a JSON object");
    RunConfig cfg;
    cfg.mode = j.value("mode", cfg.mode);
    if (cfg.mode != "TheoremA" && cfg.mode != "TheoremAPrime") throw ConfigError("mode must be TheoremA or TheoremAPrime");
    cfg.precision = j.value("precision", cfg.precision);
    if (cfg.precision != "double" && cfg.precision != "extended") throw ConfigError("precision must be double or extended");
    cfg.seed = j.value("seed", cfg.seed);

    const json p = j.value("problem", json::object());
    const std::string kind = p.value("kind", std::string("nls"));
    if (j.contains("model")) cfg.model = parse_model(j.at("model"));
    int rho = 1;
    double d = 1.0;
    if (kind == "nls" || kind == "klein_gordon") {
        cfg.kind = kind == "nls" ? ProblemKind::NLS : ProblemKind::KleinGordon;
        PdeSetup& s = cfg.pde;
        s.kind = kind == "nls" ? PdeKind::NLS : PdeKind::KleinGordon;
        s.m = p.value("m", 1);
        s.rho = cfg.kind == ProblemKind::NLS ? 1 : p.value("rho", 1);
        rho = s.rho;
        d = cfg.kind == ProblemKind::NLS ? 2.0 / s.m : 1.0;
        if (!p.contains("tangential")) throw ConfigError("problem.tangential is required");
        s.tangential = parse_sites(p.at("tangential"), rho);
        s.mode_cutoff = p.value("mode_cutoff", s.mode_cutoff);
        s.f = p.value("f", std::vector<double>{1.0});
        s.alpha = p.value("alpha", s.alpha);
        s.series_truncation = p.value("series_truncation", s.series_truncation);
        s.amplitudes = p.value("amplitudes", std::vector<double>(s.tangential.size(), 1e-3));
        s.y_jet = p.value("y_jet", s.y_jet);
        if (p.contains("spectrum_corrections")) s.spectrum_corrections = parse_site_values(p.at("spectrum_corrections"), rho);
        try {
            s.validate();
        } catch (const Error& e) {
            throw ConfigError(std::string("problem: ") + e.what());
        }
    } else if (kind == "series") {
        cfg.kind = ProblemKind::Series;
        if (!cfg.model) throw ConfigError("a series problem needs a model section");
        if (!p.contains("series_file")) throw ConfigError("problem.series_file is required");
        cfg.series_file = p.at("series_file").get<std::string>();
        if (cfg.series_file.is_relative() && !base_dir.empty()) cfg.series_file = base_dir / cfg.series_file;
        cfg.series_e = p.value("e", 0.0);
        rho = cfg.model->sm.rho;
        d = cfg.model->sm.d;
        if (p.contains("normal_sites")) cfg.series_normal_sites = parse_sites(p.at("normal_sites"), rho);
    } else {
        throw ConfigError("problem.kind must be nls, klein_gordon or series");
    }

    const int n = cfg.n();
    cfg.xi = j.contains("xi") ? parse_vector(j.at("xi")) : Eigen::VectorXd::Zero(n);
    if (cfg.xi.size() != n) throw ConfigError("xi must have one entry per tangential frequency");
    if (cfg.model && cfg.model->omega0.size() != n) throw ConfigError("model.omega0 must have one entry per tangential frequency");

    const json smp = j.value("samples", json::object());
    cfg.lipschitz_step = smp.value("lipschitz_step", cfg.lipschitz_step);
    cfg.random_samples = smp.value("random", cfg.random_samples);
    require_positive(cfg.lipschitz_step, "samples.lipschitz_step");
    if (cfg.random_samples < 0) throw ConfigError("samples.random must be non-negative");

    if (j.contains("box")) {
        cfg.box_lower = j.at("box").at("lower").get<std::vector<double>>();
        cfg.box_upper = j.at("box").at("upper").get<std::vector<double>>();
        if (static_cast<int>(cfg.box_lower.size()) != n || static_cast<int>(cfg.box_upper.size()) != n)
            throw ConfigError("box bounds must have one entry per tangential frequency");
        for (int i = 0; i < n; ++i)
            if (!(cfg.box_upper[static_cast<std::size_t>(i)] > cfg.box_lower[static_cast<std::size_t>(i)]))
                throw ConfigError("box must have positive extent");
    }
    if (cfg.random_samples > 0 && cfg.box_lower.empty()) throw ConfigError("random samples need a box");

    parse_scheme(j.value("scheme", json::object()), cfg, rho, d);

    const json run = j.value("run", json::object());
    cfg.norm_floor = run.value("norm_floor", cfg.norm_floor);
    cfg.workers = run.value("workers", cfg.workers);
    if (cfg.workers < 1) throw ConfigError("run.workers must be at least 1");
    cfg.step.lie_j_max = run.value("lie_j_max", cfg.step.lie_j_max);
    cfg.step.lie_max_fourier = run.value("lie_max_fourier", cfg.step.lie_max_fourier);
    cfg.step.lie_max_degree = run.value("lie_max_degree", cfg.step.lie_max_degree);
    if (cfg.step.lie_j_max < 1) throw ConfigError("run.lie_j_max must be at least 1");

    const json grid = j.value("grid", json::object());
    cfg.resolution = grid.value("resolution", cfg.resolution);
    cfg.gammas = grid.value("gammas", cfg.gammas);
    cfg.levels = grid.value("levels", cfg.levels);
    cfg.max_site = grid.value("max_site", cfg.max_site);
    if (grid.contains("K") || grid.contains("I")) {
        ExcisionBands b;
        b.K = grid.at("K").get<std::vector<double>>();
        b.I = grid.at("I").get<std::vector<double>>();
        try {
            b.validate();
        } catch (const Error& e) {
            throw ConfigError(std::string("grid: ") + e.what());
        }
        cfg.bands = b;
        cfg.levels = b.levels();
    }
    if (cfg.resolution < 1) throw ConfigError("grid.resolution must be positive");
    if (cfg.levels < 1) throw ConfigError("grid.levels must be positive");

    cfg.output = j.value("output", std::string("out"));
    return cfg;
}

}  // namespace

int RunConfig::n() const {
    if (kind == ProblemKind::Series) return model ? static_cast<int>(model->omega0.size()) : 0;
    return static_cast<int>(pde.tangential.size());
}

RunConfig parse_config(const json& j, const std::filesystem::path& base_dir) {
    try {
        return parse_impl(j, base_dir);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed configuration: ") + e.what());
    }
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open configuration " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("malformed configuration " + path.string() + ": " + e.what());
    }
    return parse_config(j, path.parent_path());
}

json config_to_json(const RunConfig& cfg) {
    json j;
    j["mode"] = cfg.mode;
    j["precision"] = cfg.precision;
    j["seed"] = cfg.seed;
    const int rho = cfg.scheme.rho;
    json p;
    if (cfg.kind == ProblemKind::Series) {
        p["kind"] = "series";
        p["series_file"] = cfg.series_file.string();
        p["e"] = cfg.series_e;
        json ns = json::array();
        for (const auto& s : cfg.series_normal_sites) ns.push_back(site_json(s, rho));
        p["normal_sites"] = ns;
    } else {
        const PdeSetup& s = cfg.pde;
        p["kind"] = cfg.kind == ProblemKind::NLS ? "nls" : "klein_gordon";
        p["m"] = s.m;
        p["rho"] = s.rho;
        json t = json::array();
        for (const auto& site : s.tangential) t.push_back(site_json(site, rho));
        p["tangential"] = t;
        p["mode_cutoff"] = s.mode_cutoff;
        p["f"] = s.f;
        p["alpha"] = s.alpha;
        p["series_truncation"] = s.series_truncation;
        p["amplitudes"] = s.amplitudes;
        p["y_jet"] = s.y_jet;
        p["spectrum_corrections"] = site_values_json(s.spectrum_corrections, rho);
    }
    j["problem"] = p;
    if (cfg.model) j["model"] = model_json(*cfg.model);
    j["xi"] = vector_json(cfg.xi);
    j["samples"] = {{"lipschitz_step", cfg.lipschitz_step}, {"random", cfg.random_samples}};
    if (!cfg.box_lower.empty()) j["box"] = {{"lower", cfg.box_lower}, {"upper", cfg.box_upper}};
    const SchemeConstants& sc = cfg.scheme;
    j["scheme"] = {{"n", sc.n},         {"rho", sc.rho},         {"d", sc.d},
                   {"mu0", sc.mu0},     {"s0", sc.s0},           {"r0", sc.r0},
                   {"a0", sc.a0},       {"gamma0", sc.gamma0},   {"M0", sc.M0},
                   {"tau", sc.tau},     {"nu_max", cfg.nu_max},  {"sigma", sc.sigma},
                   {"pbar", sc.pbar},   {"alpha1", sc.alpha1},   {"alpha2", sc.alpha2},
                   {"log_base", sc.log_base}, {"delta", sc.delta}, {"c_rho", sc.c_rho},
                   {"c1_rho", sc.c1_rho}, {"special_form", sc.special_form}, {"mu_star", sc.mu_star()}};
    j["run"] = {{"norm_floor", cfg.norm_floor},
                {"workers", cfg.workers},
                {"lie_j_max", cfg.step.lie_j_max},
                {"lie_max_fourier", cfg.step.lie_max_fourier},
                {"lie_max_degree", cfg.step.lie_max_degree}};
    json grid = {{"resolution", cfg.resolution}, {"gammas", cfg.gammas}, {"levels", cfg.levels}, {"max_site", cfg.max_site}};
    if (cfg.bands) {
        grid["K"] = cfg.bands->K;
        grid["I"] = cfg.bands->I;
    }
    j["grid"] = grid;
    j["output"] = cfg.output.string();
    return j;
}

}  // namespace kam
