#include "kam/app.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

namespace kam {

using nlohmann::json;

namespace {

json site_json(const Site& s, int rho) {
    if (rho == 1) return s.c[0];
    json a = json::array();
    for (int d = 0; d < rho; ++d) a.push_back(s.c[d]);
    return a;
}

json vec_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

json site_map_json(const std::map<Site, double>& m, int rho) {
    json a = json::array();
    for (const auto& [s, v] : m) a.push_back({{"site", site_json(s, rho)}, {"value", v}});
    return a;
}

json l_json(const LVec& l, int rho) {
    json a = json::array();
    for (const auto& [s, v] : l) a.push_back({{"site", site_json(s, rho)}, {"power", v}});
    return a;
}

double log10l_or_null(long double v) { return v > 0.0L ? static_cast<double>(std::log10(v)) : -INFINITY; }

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error("cannot write " + path.string());
    os << text;
}

void write_json(const std::filesystem::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open series file " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::filesystem::path prepare(const std::filesystem::path& out) {
    std::filesystem::create_directories(out);
    return out;
}

std::vector<Site> series_sites(const Series& p, const std::vector<Site>& extra) {
    std::set<Site> sites(extra.begin(), extra.end());
    for (const auto& [key, c] : p.terms()) {
        for (const auto& sp : key.q) sites.insert(sp.site);
        for (const auto& sp : key.qbar) sites.insert(sp.site);
    }
    return {sites.begin(), sites.end()};
}

Schedule schedule_for(const RunConfig& cfg, int nu_max) { return build_schedule(cfg.scheme, std::max(nu_max, 1)); }

RunOptions run_options(const RunConfig& cfg, int nu_max) {
    RunOptions opt;
    opt.nu_max = nu_max;
    opt.norm_floor = cfg.norm_floor;
    opt.workers = cfg.workers;
    opt.step = cfg.step;
    return opt;
}

}  // namespace

ProblemInstance make_instance(const RunConfig& cfg, const Eigen::VectorXd& xi, const DomainWeights& w) {
    ProblemInstance inst;
    if (cfg.kind == ProblemKind::Series) {
        const ModelSpec& m = *cfg.model;
        inst.fm = m.frequency_map();
        inst.sm = m.sm;
        inst.p = from_text(read_text(cfg.series_file));
        if (inst.p.n() != cfg.n() || inst.p.rho() != m.sm.rho)
            throw ConfigError("series file dimensions do not match the model");
        inst.nf.e = cfg.series_e;
        inst.nf.omega = inst.fm.eval(xi);
        for (const Site& s : series_sites(inst.p, cfg.series_normal_sites))
            if (!m.sm.is_tangential(s)) inst.nf.Omega[s] = m.sm.eval(s, xi);
        inst.tangential = m.sm.tangential;
        inst.xp = majorant_xnorm(inst.p, w);
        return inst;
    }
    BuiltHamiltonian bh = build_hamiltonian(cfg.pde, xi);
    KamForm kf = action_angle_embed(bh.h, cfg.pde.tangential, cfg.pde.amplitudes, cfg.pde.y_jet, w);
    inst.h = std::move(bh.h);
    inst.nf = std::move(kf.nf);
    inst.p = std::move(kf.p);
    inst.xp = kf.xp;
    inst.tangential = cfg.pde.tangential;
    inst.fm = cfg.model ? cfg.model->frequency_map() : bh.fm;
    inst.sm = cfg.model ? cfg.model->sm : bh.sm;
    return inst;
}

std::vector<Eigen::VectorXd> sample_points(const RunConfig& cfg) {
    std::vector<Eigen::VectorXd> pts{cfg.xi};
    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int s = 0; s < cfg.random_samples; ++s) {
        Eigen::VectorXd xi(cfg.n());
        for (int i = 0; i < cfg.n(); ++i) {
            const auto u = static_cast<std::size_t>(i);
            xi[i] = cfg.box_lower[u] + unit(rng) * (cfg.box_upper[u] - cfg.box_lower[u]);
        }
        pts.push_back(xi);
    }
    return pts;
}

std::vector<ParamSample> make_bundle(const RunConfig& cfg, const Eigen::VectorXd& xi, const Schedule& schedule) {
    const DomainWeights w = schedule.state(0).weights();
    std::vector<ParamSample> bundle;
    for (int j = -1; j < cfg.n(); ++j) {
        Eigen::VectorXd x = xi;
        if (j >= 0) x[j] += cfg.lipschitz_step;
        ProblemInstance inst = make_instance(cfg, x, w);
        bundle.push_back({x, std::move(inst.nf), std::move(inst.p)});
    }
    return bundle;
}

json report_json(const HypothesisReport& rep) {
    json h = json::array();
    for (std::size_t i = 0; i < rep.H.size(); ++i)
        h.push_back({{"name", "H" + std::to_string(i + 1)}, {"lhs", rep.H[i].lhs}, {"rhs", rep.H[i].rhs}, {"pass", rep.H[i].pass}});
    const StepMeasurements& m = rep.norms;
    return {{"nu", rep.nu},
            {"H", h},
            {"xp_bound", {{"lhs", rep.xp_bound.lhs}, {"rhs", rep.xp_bound.rhs}, {"pass", rep.xp_bound.pass}}},
            {"log10_Gamma", log10l_or_null(rep.Gamma)},
            {"log10_C", log10l_or_null(rep.C)},
            {"log10_Gamma_bound", static_cast<double>(rep.Gamma_bound_log10)},
            {"Gamma_within_bound", rep.Gamma_within_bound},
            {"K", rep.K},
            {"I", rep.I},
            {"K_override", rep.K_override},
            {"I_override", rep.I_override},
            {"mu_P", rep.mu_P},
            {"c_value", rep.c_value},
            {"c_lip", rep.c_lip},
            {"c", rep.c},
            {"norms",
             {{"xp", m.xp},           {"xp_lip", m.xp_lip},           {"xr", m.xr},
              {"xr_lip", m.xr_lip},   {"x_tail", m.x_tail},           {"xf", m.xf},
              {"xf_lip", m.xf_lip},   {"phi_dev", m.phi_dev},         {"omega_hat", m.omega_hat},
              {"Omega_hat", m.Omega_hat}, {"omega_hat_lip", m.omega_hat_lip}, {"Omega_hat_lip", m.Omega_hat_lip},
              {"xp_next", m.xp_next}, {"xp_next_lip", m.xp_next_lip}}},
            {"all_pass", rep.all_pass()}};
}

json record_json(const TraceRecord& rec, int rho) {
    json j = {{"nu", rec.nu},
              {"xp", rec.xp},
              {"terms", rec.terms},
              {"omega", vec_json(rec.omega)},
              {"Omega", site_map_json(rec.Omega, rho)},
              {"omega_drift", rec.omega_drift},
              {"Omega_drift", rec.Omega_drift}};
    if (rec.report) j["report"] = report_json(*rec.report);
    return j;
}

json excision_json(const Inadmissible& ex, int nu, int rho) {
    return {{"event", "excised"},
            {"nu", nu},
            {"k", std::vector<int>(ex.k.begin(), ex.k.end())},
            {"l", l_json(ex.l, rho)},
            {"divisor", ex.divisor},
            {"threshold", ex.threshold}};
}

json convergence_json(const ConvergenceReport& rep) {
    return {{"beta", rep.beta},
            {"converged", rep.converged},
            {"steps", rep.steps},
            {"step_drift", rep.step_drift},
            {"step_budget", rep.step_budget},
            {"step_drift_ok", rep.step_drift_ok},
            {"total_drift", rep.total_drift},
            {"drift_budget", rep.drift_budget},
            {"total_drift_ok", rep.total_drift_ok},
            {"pass_rate", rep.pass_rate}};
}

json cmd_build(const RunConfig& cfg, const std::filesystem::path& out) {
    prepare(out);
    const Schedule sch = schedule_for(cfg, 1);
    const ProblemInstance inst = make_instance(cfg, cfg.xi, sch.state(0).weights());
    const int rho = cfg.scheme.rho;
    if (cfg.kind != ProblemKind::Series) write_text(out / "hamiltonian.series", to_text(inst.h));
    write_text(out / "perturbation.series", to_text(inst.p));
    json header = {{"config", config_to_json(cfg)},
                   {"xi", vec_json(cfg.xi)},
                   {"hamiltonian_terms", inst.h.size()},
                   {"hamiltonian_degree", inst.h.empty() ? 0 : inst.h.max_degree()},
                   {"perturbation_terms", inst.p.size()},
                   {"xp", inst.xp},
                   {"normal_form",
                    {{"e", inst.nf.e}, {"omega", vec_json(inst.nf.omega)}, {"Omega", site_map_json(inst.nf.Omega, rho)}}}};
    if (cfg.kind != ProblemKind::Series) {
        json sites = json::array();
        for (const Site& s : retained_sites(cfg.pde)) sites.push_back(site_json(s, rho));
        header["sites"] = sites;
    }
    write_json(out / "header.json", header);
    return header;
}

json cmd_step(const RunConfig& cfg, const std::filesystem::path& out) {
    prepare(out);
    const Schedule sch = schedule_for(cfg, 1);
    RunOptions opt = run_options(cfg, 1);
    opt.norm_floor = 0.0;
    opt.keep_series = true;
    const RunTrace tr = run(make_bundle(cfg, cfg.xi, sch), sch, opt);
    const int rho = cfg.scheme.rho;
    json j = {{"config", config_to_json(cfg)}, {"before", record_json(tr.records.front(), rho)}};
    if (tr.excision) {
        j["excision"] = excision_json(*tr.excision, tr.excised_at, rho);
    } else {
        j["after"] = record_json(tr.records.back(), rho);
        write_text(out / "p_next.series", to_text(*tr.records.back().p));
    }
    write_json(out / "step.json", j);
    return j;
}

json cmd_run(const RunConfig& cfg, const std::filesystem::path& out) {
    prepare(out);
    const Schedule sch = schedule_for(cfg, cfg.nu_max);
    const RunOptions opt = run_options(cfg, cfg.nu_max);
    const int rho = cfg.scheme.rho;
    std::ostringstream trace;
    json samples = json::array();
    const auto pts = sample_points(cfg);
    for (std::size_t s = 0; s < pts.size(); ++s) {
        const RunTrace tr = run(make_bundle(cfg, pts[s], sch), sch, opt);
        for (const auto& rec : tr.records) {
            json line = record_json(rec, rho);
            line["sample"] = s;
            trace << line.dump() << '\n';
        }
        json row = {{"sample", s},
                    {"xi", vec_json(pts[s])},
                    {"stop_reason", tr.stop_reason},
                    {"completed_steps", tr.completed_steps()},
                    {"dropped_samples", tr.dropped_samples},
                    {"final_xp", tr.records.back().xp}};
        if (tr.excision) {
            json ex = excision_json(*tr.excision, tr.excised_at, rho);
            ex["sample"] = s;
            trace << ex.dump() << '\n';
            row["excision"] = ex;
        }
        std::size_t nonzero = 0;
        for (const auto& rec : tr.records) nonzero += rec.xp > 0.0 ? 1 : 0;
        row["convergence"] = nonzero >= 3 ? convergence_json(convergence_report(tr, cfg.scheme)) : json(nullptr);
        samples.push_back(row);
    }
    write_text(out / "trace.jsonl", trace.str());
    json summary = {{"config", config_to_json(cfg)}, {"samples", samples}};
    write_json(out / "summary.json", summary);
    return summary;
}

json cmd_measure(const RunConfig& cfg, const std::filesystem::path& out) {
    if (cfg.gammas.empty()) throw ConfigError("measure needs at least one gamma (--gamma or grid.gammas)");
    if (cfg.box_lower.empty()) throw ConfigError("measure needs a box");
    prepare(out);
    FrequencyMap fm;
    SpectrumModel sm;
    if (cfg.model) {
        fm = cfg.model->frequency_map();
        sm = cfg.model->sm;
    } else {
        const BuiltHamiltonian bh = build_hamiltonian(cfg.pde, cfg.xi);
        fm = bh.fm;
        sm = bh.sm;
    }
    const ExcisionBands bands = cfg.bands ? *cfg.bands : bands_from_schedule(schedule_for(cfg, cfg.levels), cfg.levels);
    const GridSpec spec{cfg.box_lower, cfg.box_upper, cfg.resolution};
    ExcisionOptions opt;
    opt.workers = cfg.workers;
    opt.max_site = cfg.max_site;
    const SweepResult res = measure_sweep(spec, cfg.gammas, fm, sm, cfg.scheme.diophantine(), bands, opt);
    write_text(out / "measure.csv", sweep_csv(res));
    json summary = {{"config", config_to_json(cfg)},
                    {"bands", {{"K", bands.K}, {"I", bands.I}}},
                    {"rows", res.rows.size()},
                    {"slope", finite_or_null(res.slope)},
                    {"slope_defined", res.slope_defined},
                    {"spans_decade", res.spans_decade}};
    write_json(out / "measure_summary.json", summary);
    return summary;
}

json cmd_check(const RunConfig& cfg, const std::filesystem::path& out) {
    prepare(out);
    const Schedule sch = schedule_for(cfg, 1);
    RunOptions opt = run_options(cfg, 1);
    opt.norm_floor = 0.0;
    const RunTrace tr = run(make_bundle(cfg, cfg.xi, sch), sch, opt);
    const int rho = cfg.scheme.rho;
    json j = {{"config", config_to_json(cfg)}};
    const auto& first = tr.records.front();
    if (first.report) {
        j["report"] = report_json(*first.report);
        json failed = json::array();
        for (std::size_t i = 0; i < first.report->H.size(); ++i)
            if (!first.report->H[i].pass) failed.push_back("H" + std::to_string(i + 1));
        j["failed"] = failed;
        j["all_pass"] = first.report->all_pass();
    } else {
        j["all_pass"] = false;
    }
    if (tr.excision) j["excision"] = excision_json(*tr.excision, tr.excised_at, rho);
    write_json(out / "check.json", j);
    return j;
}

}  // namespace kam
