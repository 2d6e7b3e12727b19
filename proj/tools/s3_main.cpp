// Command-line front end.  The CLI stays thin: it loads one config, runs one
// driver entry point, writes files under --out, and maps error classes to
// exit codes (0 ok, 1 solver failure, 2 config problem, 3 validation failed).

#include <chrono>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "s3/config.hpp"
#include "s3/driver.hpp"
#include "s3/errors.hpp"
#include "s3/io.hpp"
#include "s3/quadrature.hpp"

namespace fs = std::filesystem;

namespace {

std::string now_utc() {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char buf[32];
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

struct Invocation {
    std::string config_path;
    std::string out_dir;
    std::int64_t seed_override = -1;
    unsigned threads = 1;
};

s3::S3Config load(const Invocation& inv) {
    s3::S3Config cfg = s3::load_config(inv.config_path);
    if (inv.seed_override >= 0) cfg.seed = static_cast<std::uint64_t>(inv.seed_override);
    return cfg;
}

void finish(const Invocation& inv, const std::string& subcommand,
            std::vector<std::string> outputs) {
    outputs.push_back("manifest.json");
    s3::write_json_file((fs::path(inv.out_dir) / "manifest.json").string(),
                        s3::manifest_json(subcommand, inv.config_path, outputs, now_utc(),
                                          inv.threads));
}

int cmd_run(const Invocation& inv) {
    const s3::S3Config cfg = load(inv);
    const s3::SensitivityReport rep = s3::run_s3(cfg, inv.threads);
    const fs::path out(inv.out_dir);
    s3::write_json_file((out / "report.json").string(), s3::report_json(rep));
    s3::write_series_csv((out / "unstable_terms.csv").string(), rep.terms);
    s3::write_window_csvs((out / "frame.csv").string(), (out / "density.csv").string(), cfg);
    finish(inv, "run", {"report.json", "unstable_terms.csv", "frame.csv", "density.csv"});
    std::cout << "psi_total " << rep.psi_total << " +- " << rep.total_std_error << "\n";
    for (const std::string& w : rep.warnings) std::cerr << "warning: " << w << "\n";
    return 0;
}

int cmd_oracle(const Invocation& inv) {
    const s3::S3Config cfg = load(inv);
    const s3::FDOracleResult res = s3::fd_oracle(cfg, inv.threads);
    s3::write_json_file((fs::path(inv.out_dir) / "oracle.json").string(),
                        s3::oracle_json(res, cfg));
    finish(inv, "oracle", {"oracle.json"});
    std::cout << "fd estimate " << res.estimate << " +- " << res.std_error << "\n";
    return 0;
}

int cmd_validate(const Invocation& inv) {
    const s3::S3Config cfg = load(inv);
    const s3::ValidationReport rep = s3::validate(cfg, inv.threads);
    s3::write_json_file((fs::path(inv.out_dir) / "validate.json").string(),
                        s3::validation_json(rep, cfg));
    finish(inv, "validate", {"validate.json"});
    for (const s3::CheckResult& c : rep.checks)
        std::cout << (c.pass ? "pass " : "FAIL ") << c.name << ": " << c.detail << "\n";
    return rep.all_pass ? 0 : 3;
}

int cmd_decay(const Invocation& inv) {
    const s3::S3Config cfg = load(inv);
    const s3::SensitivityReport rep = s3::run_s3(cfg, inv.threads);
    const s3::SeriesDecayFit fit = s3::fit_series_decay(rep.terms);
    const fs::path out(inv.out_dir);
    s3::write_series_csv((out / "decay.csv").string(), rep.terms);
    nlohmann::json j;
    j["slope"] = fit.slope;
    j["slope_se"] = fit.slope_se;
    j["t_stat"] = fit.t_stat;
    j["p_value"] = fit.p_value;
    j["n_used"] = fit.n_used;
    j["provenance"] = {{"tool", "s3"}, {"version", "0.1.0"}, {"config", s3::echo_config(cfg)}};
    s3::write_json_file((out / "decay.json").string(), j);
    finish(inv, "decay", {"decay.csv", "decay.json"});
    std::cout << "decay slope " << fit.slope << " (p " << fit.p_value << ", " << fit.n_used
              << " terms)\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"space-split sensitivity for area-preserving torus maps"};
    app.require_subcommand(1);

    Invocation inv;
    app.add_option("--config", inv.config_path, "path to the JSON run configuration")
        ->required();
    app.add_option("--out", inv.out_dir, "directory all outputs are written to")->required();
    app.add_option("--seed", inv.seed_override, "override the config seed");
    app.add_option("--threads", inv.threads, "worker threads for parallel stages");

    CLI::App* run = app.add_subcommand("run", "compute the sensitivity and write a report");
    CLI::App* oracle =
        app.add_subcommand("oracle", "finite-difference reference across the map family");
    CLI::App* val = app.add_subcommand("validate", "run the self-check battery");
    CLI::App* decay = app.add_subcommand("decay", "unstable series terms and their decay fit");
    for (CLI::App* sub : {run, oracle, val, decay}) sub->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        app.exit(e);
        return 2;
    }

    try {
        fs::create_directories(inv.out_dir);
        if (run->parsed()) return cmd_run(inv);
        if (oracle->parsed()) return cmd_oracle(inv);
        if (val->parsed()) return cmd_validate(inv);
        if (decay->parsed()) return cmd_decay(inv);
        std::cerr << "s3: no subcommand\n";
        return 2;
    } catch (const s3::ConfigError& e) {
        std::cerr << "s3: " << e.what() << "\n";
        return 2;
    } catch (const s3::SolverError& e) {
        std::cerr << "s3: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "s3: " << e.what() << "\n";
        return 1;
    }
}
