// ewsim: run a named scenario (or the standalone visibility estimator),
// write CSV/JSON tables plus a manifest, and exit 0 only if every scenario
// assertion passed.

#include <cstdio>
#include <exception>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "ewsim/experiments.hpp"
#include "ewsim/runner.hpp"

namespace {

std::vector<double> parse_probs(const std::string& csv) {
    std::vector<double> out;
    std::size_t pos = 0;
    while (pos <= csv.size()) {
        const std::size_t comma = csv.find(',', pos);
        const std::string tok =
            csv.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
        out.push_back(ewsim::runner::parse_double(tok, "probs"));
        if (comma == std::string::npos) break;
        pos = comma + 1;
    }
    return out;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"truncated-Fock-space quantum memory simulator"};
    std::string scenario;
    std::string config_path;
    std::string out_dir = "out";
    std::string betas_spec = "0:6.2831853:9";
    std::string format = "csv";
    std::string delay_mode;
    std::string probs_csv;
    std::string trials_str;
    std::uint64_t seed = 0;
    bool seed_set = false;
    unsigned jobs = std::thread::hardware_concurrency();
    std::string energies_csv = "220,400";
    std::string times_csv = "0,100,200,300,420";

    app.add_option("--scenario", scenario,
                   "one of: anticorrelation, g2-storage, enhancement, interference, "
                   "ve-estimate")
        ->required();
    app.add_option("--config", config_path, "key=value config file");
    app.add_option("--seed", seed, "master seed override")->each([&](const std::string&) {
        seed_set = true;
    });
    app.add_option("--trials", trials_str, "trial count override (accepts 1e6 style)");
    app.add_option("--out", out_dir, "output directory");
    app.add_option("--delay-mode", delay_mode, "2m or 50m");
    app.add_option("--betas", betas_spec, "phase scan start:stop:count (interference)");
    app.add_option("--format", format, "csv or json")
        ->check(CLI::IsMember({"csv", "json"}));
    app.add_option("--jobs", jobs, "worker threads");
    app.add_option("--energies", energies_csv, "comma list of write energies in pJ "
                                               "(anticorrelation)");
    app.add_option("--times", times_csv, "comma list of storage times in ns (g2-storage)");
    app.add_option("--probs", probs_csv,
                   "six comma-separated probabilities for ve-estimate: "
                   "P_S1,P_S3,P_S3|S1,P_AS2|S1,P_AS4|S1,P_AS4|S3");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) ? 2 : 0;
    }

    ewsim::runner::RunManifest manifest;
    manifest.scenario = scenario;
    manifest.config_path = config_path;
    manifest.out_dir = out_dir;
    int exit_code = 0;
    try {
        if (scenario == "ve-estimate") {
            if (probs_csv.empty())
                throw ewsim::ConfigError("ve-estimate requires --probs with six values");
            const std::vector<double> p = parse_probs(probs_csv);
            if (p.size() != 6)
                throw ewsim::ConfigError("--probs expects exactly six values");
            ewsim::mzi::MeasuredProbs mp{p[0], p[1], p[2], p[3], p[4], p[5]};
            const double ve = ewsim::mzi::estimate_visibility_VE(mp);
            std::printf("V_E = %.3f\n", ve);
            manifest.status = "ok";
            std::error_code ec;
            std::filesystem::create_directories(out_dir, ec);
            manifest.write((std::filesystem::path(out_dir) / "manifest.json").string());
            return 0;
        }

        ewsim::protocol::ProtocolConfig cfg;
        if (!config_path.empty()) cfg = ewsim::runner::load_config(config_path);
        if (seed_set) cfg.master_seed = seed;
        if (!trials_str.empty())
            cfg.trials = static_cast<std::uint64_t>(
                ewsim::runner::parse_double(trials_str, "trials"));
        if (!delay_mode.empty()) {
            if (delay_mode == "2m") cfg.delay_mode = ewsim::protocol::DelayMode::Fiber2m;
            else if (delay_mode == "50m") cfg.delay_mode = ewsim::protocol::DelayMode::Fiber50m;
            else throw ewsim::ConfigError("--delay-mode must be 2m or 50m");
        }
        cfg.validate();
        manifest.master_seed = cfg.master_seed;
        manifest.trials = cfg.trials;
        if (jobs < 1) jobs = 1;

        ewsim::experiments::ScenarioResult res;
        if (scenario == "anticorrelation") {
            std::vector<double> energies = parse_probs(energies_csv);
            res = ewsim::experiments::scenario_anticorrelation(cfg, energies, jobs);
        } else if (scenario == "g2-storage") {
            std::vector<double> times = parse_probs(times_csv);
            res = ewsim::experiments::scenario_g2_storage(cfg, times, jobs);
        } else if (scenario == "enhancement") {
            res = ewsim::experiments::scenario_enhancement(cfg, jobs);
        } else if (scenario == "interference") {
            res = ewsim::experiments::scenario_interference(
                cfg, ewsim::runner::parse_betas(betas_spec), jobs);
        } else {
            std::fprintf(stderr,
                         "unknown scenario: %s\nusage: ewsim --scenario "
                         "{anticorrelation|g2-storage|enhancement|interference|ve-estimate} "
                         "[options]\n",
                         scenario.c_str());
            manifest.status = "config-error";
            std::error_code ec;
            std::filesystem::create_directories(out_dir, ec);
            manifest.write((std::filesystem::path(out_dir) / "manifest.json").string());
            return 2;
        }

        const std::filesystem::path dir(out_dir);
        if (format == "json") {
            ewsim::runner::write_file(dir, res.name + ".json",
                                      ewsim::runner::result_to_json(res).dump(2) + "\n",
                                      manifest);
        } else {
            ewsim::runner::write_file(dir, res.name + ".csv",
                                      ewsim::runner::result_to_csv(res), manifest);
            ewsim::runner::write_file(dir, res.name + "_verdicts.json",
                                      ewsim::runner::result_to_json(res)["verdicts"].dump(2) +
                                          "\n",
                                      manifest);
        }

        for (const auto& a : res.verdicts)
            std::printf("[%s] %s (margin %.3g): %s\n",
                        ewsim::experiments::status_name(a.status), a.name.c_str(), a.margin,
                        a.detail.c_str());
        exit_code = res.passed() ? 0 : 1;
        manifest.status = res.passed() ? "ok" : "assertion-failure";
    } catch (const ewsim::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        manifest.status = "config-error";
        exit_code = 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        manifest.status = "error";
        exit_code = 1;
    }
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    manifest.write((std::filesystem::path(out_dir) / "manifest.json").string());
    return exit_code;
}
