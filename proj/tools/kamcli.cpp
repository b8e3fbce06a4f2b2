#include <cstdio>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "kam/app.hpp"

namespace {

std::vector<double> parse_gamma_list(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(item, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != item.size() || !(v > 0.0)) throw kam::ConfigError("--gamma expects positive numbers, got '" + item + "'");
        out.push_back(v);
    }
    if (out.empty()) throw kam::ConfigError("--gamma list is empty");
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"KAM iteration toolkit: build, step, run, measure, check"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    std::optional<int> workers;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> gamma;

    app.add_option("--config", config_path, "run configuration (JSON)")->required();
    app.add_option("--out", out_dir, "output directory; overrides the configured one");
    app.add_option("--workers", workers, "worker threads")->check(CLI::PositiveNumber);
    app.add_option("--seed", seed, "random seed");
    app.add_option("--gamma", gamma, "comma-separated gamma values for measure");

    auto* build = app.add_subcommand("build", "write the built Hamiltonian and perturbation");
    auto* step = app.add_subcommand("step", "execute one KAM step");
    auto* run = app.add_subcommand("run", "iterate at every sampled parameter");
    auto* measure = app.add_subcommand("measure", "excised measure against gamma");
    auto* check = app.add_subcommand("check", "audit the first step's hypotheses");
    app.fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kam::kExitOk : kam::kExitConfig;
    }

    try {
        kam::RunConfig cfg = kam::load_config(config_path);
        if (workers) cfg.workers = *workers;
        if (seed) cfg.seed = *seed;
        if (gamma) cfg.gammas = parse_gamma_list(*gamma);
        const std::filesystem::path out = out_dir.empty() ? cfg.output : std::filesystem::path(out_dir);

        nlohmann::json summary;
        if (build->parsed()) {
            summary = kam::cmd_build(cfg, out);
            std::cout << "built " << summary["hamiltonian_terms"] << " Hamiltonian terms, "
                      << summary["perturbation_terms"] << " perturbation terms, |X_P| = " << summary["xp"] << "\n";
        } else if (step->parsed()) {
            summary = kam::cmd_step(cfg, out);
            if (summary.contains("excision"))
                std::cout << "excised at nu = 0\n";
            else
                std::cout << "|X_P| " << summary["before"]["xp"] << " -> " << summary["after"]["xp"] << "\n";
        } else if (run->parsed()) {
            summary = kam::cmd_run(cfg, out);
            for (const auto& s : summary["samples"]) {
                std::cout << "sample " << s["sample"] << ": " << s["completed_steps"] << " steps, stop "
                          << s["stop_reason"].get<std::string>();
                if (!s["convergence"].is_null()) std::cout << ", beta " << s["convergence"]["beta"];
                std::cout << "\n";
            }
        } else if (measure->parsed()) {
            summary = kam::cmd_measure(cfg, out);
            std::cout << summary["rows"] << " rows, slope " << summary["slope"] << "\n";
        } else if (check->parsed()) {
            summary = kam::cmd_check(cfg, out);
            if (summary.contains("report")) {
                for (const auto& h : summary["report"]["H"])
                    std::cout << h["name"].get<std::string>() << (h["pass"].get<bool>() ? " pass " : " FAIL ")
                              << h["lhs"] << " vs " << h["rhs"] << "\n";
            } else {
                std::cout << "excised before the audit\n";
            }
        }
        return kam::kExitOk;
    } catch (const kam::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kam::kExitConfig;
    } catch (const kam::DivergenceError& e) {
        std::cerr << "divergence: " << e.what() << "\n";
        return kam::kExitDivergence;
    } catch (const kam::Error& e) {
        std::cerr << "invalid setup: " << e.what() << "\n";
        return kam::kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kam::kExitFailure;
    }
}
