#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "kam/app.hpp"

using namespace kam;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / "kam_cli_tests" / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

json nls_config(int cutoff) {
    return {{"mode", "TheoremA"},
            {"seed", 7},
            {"problem",
             {{"kind", "nls"},
              {"m", 3},
              {"tangential", {1, 3}},
              {"mode_cutoff", cutoff},
              {"f", {1.0}},
              {"series_truncation", 4},
              {"amplitudes", {1e-3, 1e-3}}}},
            {"xi", {0.0, 0.0}},
            {"scheme", {{"mu0", 1e-4}, {"s0", 1e-8}, {"a0", 0.02}, {"gamma0", 0.5}, {"nu_max", 2}, {"special_form", true}}},
            {"run", {{"norm_floor", 0.0}}}};
}

// n = 2 model with omega(xi) = (1, 1) + xi and a single resonant harmonic k = (1, -1).
json resonant_series_config(const fs::path& dir) {
    std::ofstream(dir / "p.series") << "# n=2 rho=1 tag=P\n"
                                       "k=[1,-1] m=[0,0] q={} qbar={} re=1e-9 im=0\n"
                                       "k=[-1,1] m=[0,0] q={} qbar={} re=1e-9 im=0\n";
    return {{"problem", {{"kind", "series"}, {"series_file", "p.series"}}},
            {"model", {{"omega0", {1.0, 1.0}}, {"spectrum", {{"d", 2.0}}}}},
            {"xi", {0.0, 0.0}},
            {"scheme", {{"nu_max", 2}}},
            {"run", {{"norm_floor", 0.0}}}};
}

json measure_config() {
    return {{"problem", {{"kind", "series"}, {"series_file", "unused.series"}}},
            {"model", {{"omega0", {0.3, 0.05}}, {"spectrum", {{"d", 2.0 / 3.0}}}}},
            {"box", {{"lower", {0.0, 0.0}}, {"upper", {0.45, 0.45}}}},
            {"grid", {{"resolution", 60}, {"K", {0, 2, 4}}, {"I", {0, 6, 10}}}}};
}

RunConfig with_gammas(RunConfig cfg, std::vector<double> g) {
    cfg.gammas = std::move(g);
    return cfg;
}

}  // namespace

TEST_CASE("configuration parsing") {
    SUBCASE("defaults are filled and tau defaults to its minimum") {
        const RunConfig cfg = parse_config(nls_config(5));
        CHECK(cfg.n() == 2);
        CHECK(cfg.scheme.n == 2);
        CHECK(cfg.scheme.d == doctest::Approx(2.0 / 3.0));
        CHECK(cfg.scheme.tau == doctest::Approx(2.0 + 4.5 * 1.5 + 4.0));
        CHECK(cfg.scheme.theorem_a);
        CHECK(cfg.pde.kind == PdeKind::NLS);
        CHECK(cfg.nu_max == 2);
    }
    SUBCASE("tau below the minimum is rejected at load") {
        json j = nls_config(5);
        j["scheme"]["tau"] = 5.0;
        CHECK_THROWS_AS(parse_config(j), ConfigError);
    }
    SUBCASE("malformed values map to ConfigError") {
        json j = nls_config(5);
        j["mode"] = 3;
        CHECK_THROWS_AS(parse_config(j), ConfigError);
        j = nls_config(5);
        j["scheme"]["mu0"] = -1.0;
        CHECK_THROWS_AS(parse_config(j), ConfigError);
        j = nls_config(5);
        j["problem"]["kind"] = "wave";
        CHECK_THROWS_AS(parse_config(j), ConfigError);
        j = nls_config(5);
        j["xi"] = {0.0};
        CHECK_THROWS_AS(parse_config(j), ConfigError);
        j = nls_config(5);
        j["problem"]["series_truncation"] = 3;
        CHECK_THROWS_AS(parse_config(j), ConfigError);
        CHECK_THROWS_AS(parse_config(json::array()), ConfigError);
    }
    SUBCASE("unreadable or unparsable files are config errors") {
        const fs::path dir = scratch("badfile");
        std::ofstream(dir / "bad.json") << "{ \"mode\": ";
        CHECK_THROWS_AS(load_config(dir / "bad.json"), ConfigError);
        CHECK_THROWS_AS(load_config(dir / "missing.json"), ConfigError);
    }
    SUBCASE("TheoremAPrime switches to the special-form regime") {
        json j = nls_config(5);
        j["mode"] = "TheoremAPrime";
        j["scheme"].erase("special_form");
        j["scheme"]["c_rho"] = 3.0;
        const RunConfig cfg = parse_config(j);
        CHECK_FALSE(cfg.scheme.theorem_a);
        CHECK(cfg.scheme.special_form);
        CHECK(cfg.scheme.c_rho == 3.0);
    }
    SUBCASE("resolved configuration reparses to itself") {
        const json once = config_to_json(parse_config(nls_config(5)));
        const json twice = config_to_json(parse_config(once));
        CHECK(once == twice);
    }
    SUBCASE("random samples need a box") {
        json j = nls_config(5);
        j["samples"] = {{"random", 2}};
        CHECK_THROWS_AS(parse_config(j), ConfigError);
    }
}

TEST_CASE("cmd_build") {
    SUBCASE("NLS cutoff 5 writes quadratic plus momentum-conserving quartic terms") {
        const fs::path out = scratch("build5");
        const json header = cmd_build(parse_config(nls_config(5)), out);
        std::size_t quartic = 0;
        for (int a = 1; a <= 5; ++a)
            for (int b = a; b <= 5; ++b)
                for (int c = 1; c <= 5; ++c)
                    for (int d = c; d <= 5; ++d) quartic += a + b == c + d;
        const Series h = from_text(slurp(out / "hamiltonian.series"));
        CHECK(h.size() == quartic + 5);
        CHECK(header["hamiltonian_terms"].get<std::size_t>() == quartic + 5);
        std::size_t quad = 0, four = 0;
        for (const auto& [key, c] : h.terms()) (key.degree() == 2 ? quad : four) += 1;
        CHECK(quad == 5);
        CHECK(four == quartic);
        CHECK(fs::exists(out / "header.json"));
    }
    SUBCASE("zero nonlinearity gives a quadratic-only file") {
        json j = nls_config(5);
        j["problem"]["f"] = {0.0};
        const fs::path out = scratch("build_zero");
        cmd_build(parse_config(j), out);
        const Series h = from_text(slurp(out / "hamiltonian.series"));
        CHECK(h.size() == 5);
        for (const auto& [key, c] : h.terms()) CHECK(key.degree() == 2);
        CHECK(from_text(slurp(out / "perturbation.series")).empty());
    }
    SUBCASE("written series reload to equal series") {
        const RunConfig cfg = parse_config(nls_config(6));
        const fs::path out = scratch("roundtrip");
        cmd_build(cfg, out);
        const ProblemInstance inst = make_instance(cfg, cfg.xi, build_schedule(cfg.scheme, 1).state(0).weights());
        CHECK(from_text(slurp(out / "hamiltonian.series")) == inst.h);
        CHECK(from_text(slurp(out / "perturbation.series")) == inst.p);
    }
}

TEST_CASE("cmd_run") {
    SUBCASE("nu_max = 0 leaves only the initial record") {
        json j = nls_config(5);
        j["scheme"]["nu_max"] = 0;
        const fs::path out = scratch("run0");
        const json summary = cmd_run(parse_config(j), out);
        std::istringstream lines(slurp(out / "trace.jsonl"));
        std::string line;
        int count = 0;
        while (std::getline(lines, line)) {
            const json rec = json::parse(line);
            CHECK(rec["nu"] == 0);
            CHECK_FALSE(rec.contains("report"));
            ++count;
        }
        CHECK(count == 1);
        CHECK(summary["samples"][0]["completed_steps"] == 0);
        CHECK(summary["samples"][0]["convergence"].is_null());
    }
    SUBCASE("an excised parameter yields an excision marker") {
        const fs::path out = scratch("run_excised");
        const json summary = cmd_run(load_config([&] {
                                         std::ofstream(out / "cfg.json") << resonant_series_config(out).dump();
                                         return out / "cfg.json";
                                     }()),
                                     out);
        CHECK(summary["samples"][0]["stop_reason"] == "excised");
        const std::string trace = slurp(out / "trace.jsonl");
        CHECK(trace.find("\"event\":\"excised\"") != std::string::npos);
        const json k = summary["samples"][0]["excision"]["k"];
        CHECK((k == json({1, -1}) || k == json({-1, 1})));
    }
    SUBCASE("random samples come from the seeded box") {
        json j = nls_config(5);
        j["samples"] = {{"random", 3}};
        j["box"] = {{"lower", {-0.1, 0.0}}, {"upper", {0.1, 0.2}}};
        const RunConfig cfg = parse_config(j);
        const auto a = sample_points(cfg);
        const auto b = sample_points(cfg);
        REQUIRE(a.size() == 4);
        for (std::size_t s = 1; s < a.size(); ++s) {
            CHECK(a[s] == b[s]);
            CHECK(a[s][0] >= -0.1);
            CHECK(a[s][0] <= 0.1);
            CHECK(a[s][1] >= 0.0);
            CHECK(a[s][1] <= 0.2);
        }
    }
    SUBCASE("output is byte-identical across worker counts") {
        RunConfig cfg = parse_config(nls_config(6));
        const fs::path a = scratch("det_a"), b = scratch("det_b");
        cfg.workers = 1;
        cmd_run(cfg, a);
        cfg.workers = 3;
        cmd_run(cfg, b);
        CHECK(slurp(a / "trace.jsonl") == slurp(b / "trace.jsonl"));
        CHECK_FALSE(slurp(a / "trace.jsonl").empty());
    }
}

TEST_CASE("cmd_step") {
    const fs::path out = scratch("step");
    const json j = cmd_step(parse_config(nls_config(6)), out);
    REQUIRE(j.contains("after"));
    CHECK(j["after"]["xp"].get<double>() < j["before"]["xp"].get<double>());
    CHECK(from_text(slurp(out / "p_next.series")).size() == j["after"]["terms"].get<std::size_t>());
}

TEST_CASE("cmd_measure") {
    const RunConfig base = parse_config(measure_config());
    SUBCASE("single gamma gives one row and no slope") {
        const fs::path out = scratch("measure1");
        const json s = cmd_measure(with_gammas(base, {0.1}), out);
        CHECK(s["rows"] == 1);
        CHECK(s["slope"].is_null());
        std::istringstream csv(slurp(out / "measure.csv"));
        std::string line;
        int rows = 0;
        while (std::getline(csv, line)) ++rows;
        CHECK(rows == 2);
    }
    SUBCASE("three gammas report a slope") {
        const json s = cmd_measure(with_gammas(base, {0.2, 0.1, 0.05}), scratch("measure3"));
        CHECK(s["rows"] == 3);
        REQUIRE(s["slope"].is_number());
        CHECK(s["slope"].get<double>() > 0.5);
        CHECK(s["slope"].get<double>() < 1.5);
    }
    SUBCASE("empty gamma list is a usage error") {
        CHECK_THROWS_AS(cmd_measure(base, scratch("measure0")), ConfigError);
    }
    SUBCASE("CSV is identical across worker counts") {
        RunConfig cfg = with_gammas(base, {0.2, 0.05});
        const fs::path a = scratch("mdet_a"), b = scratch("mdet_b");
        cfg.workers = 1;
        cmd_measure(cfg, a);
        cfg.workers = 4;
        cmd_measure(cfg, b);
        CHECK(slurp(a / "measure.csv") == slurp(b / "measure.csv"));
    }
}

TEST_CASE("cmd_check") {
    SUBCASE("report is JSON with nine named H entries") {
        const fs::path out = scratch("check_schema");
        cmd_check(parse_config(nls_config(6)), out);
        const json j = json::parse(slurp(out / "check.json"));
        REQUIRE(j["report"]["H"].is_array());
        REQUIRE(j["report"]["H"].size() == 9);
        for (int i = 0; i < 9; ++i) {
            const json& h = j["report"]["H"][static_cast<std::size_t>(i)];
            CHECK(h["name"] == "H" + std::to_string(i + 1));
            CHECK(h["lhs"].is_number());
            CHECK(h["rhs"].is_number());
            CHECK(h["pass"].is_boolean());
        }
    }
    SUBCASE("tiny mu0 passes everything") {
        json c = nls_config(6);
        c["scheme"]["mu0"] = 1e-8;
        const json j = cmd_check(parse_config(c), scratch("check_tiny"));
        CHECK(j["all_pass"] == true);
        CHECK(j["failed"].empty());
    }
    SUBCASE("mu0 = 0.5 lists H3 among the failures") {
        json c = nls_config(6);
        c["scheme"]["mu0"] = 0.5;
        const json j = cmd_check(parse_config(c), scratch("check_big"));
        CHECK(j["all_pass"] == false);
        bool h3 = false;
        for (const auto& f : j["failed"]) h3 = h3 || f == "H3";
        CHECK(h3);
    }
}
