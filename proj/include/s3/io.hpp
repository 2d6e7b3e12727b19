#pragma once

// Serialization of driver outputs.  JSON documents are emitted with sorted
// keys and shortest round-trip doubles, so identical runs produce identical
// bytes.  CSV files open with a versioned schema comment; columns never
// change silently within a version.

#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "s3/config.hpp"
#include "s3/driver.hpp"
#include "s3/errors.hpp"
#include "s3/stream.hpp"
#include "s3/unstable.hpp"

namespace s3 {

inline nlohmann::json checkpoint_json(const CheckpointDiagnostics& d) {
    return {{"at_step", d.at_step},
            {"power_ratio", d.power_ratio},
            {"power_gap", d.power_gap},
            {"curvature_residual", d.curvature_residual},
            {"curvature_contraction", d.curvature_contraction},
            {"parallel_residual", d.parallel_residual},
            {"reconstruction_residual", d.reconstruction_residual},
            {"split_contraction", d.split_contraction},
            {"rho0_residual", d.rho0_residual},
            {"h_contraction", d.h_contraction},
            {"stream_vs_window", d.stream_vs_window}};
}

inline nlohmann::json estimate_json(const MonteCarloEstimate& e) {
    return {{"value", e.mean}, {"std_error", e.std_error}, {"n", e.n}};
}

inline nlohmann::json report_json(const SensitivityReport& r) {
    nlohmann::json j;
    j["psi_total"] = r.psi_total;
    j["coboundary"] = estimate_json(r.coboundary);
    nlohmann::json terms = nlohmann::json::array();
    for (std::size_t k = 0; k < r.terms.size(); ++k) {
        nlohmann::json t = estimate_json(r.terms[k]);
        t["k"] = k;
        terms.push_back(t);
    }
    j["unstable_terms"] = terms;
    j["error_bars"] = {{"series", r.series_std_error},
                       {"total", r.total_std_error},
                       {"coboundary", r.coboundary.std_error}};
    j["mean_rho"] = estimate_json(r.mean_rho);
    j["method"] = r.method;
    j["samples"] = r.samples;

    nlohmann::json diag;
    diag["power_ratio"] = r.power_ratio;
    diag["power_gap"] = r.power_gap;
    diag["h_geometric_mean"] = r.h_geometric_mean;
    diag["lift_contraction"] = r.lift_contraction;
    nlohmann::json cps = nlohmann::json::array();
    for (const CheckpointDiagnostics& d : r.checkpoints) cps.push_back(checkpoint_json(d));
    diag["checkpoints"] = cps;
    diag["warnings"] = r.warnings;
    if (r.method == "deterministic") {
        diag["kappa_hat"] = r.kappa_hat;
        diag["eta_hat"] = r.eta_hat;
        diag["n_push"] = r.n_push;
    }
    j["diagnostics"] = diag;
    j["provenance"] = {{"tool", "s3"}, {"version", "0.1.0"}, {"config", echo_config(r.config)}};
    return j;
}

inline nlohmann::json oracle_json(const FDOracleResult& r, const S3Config& cfg) {
    nlohmann::json j;
    j["estimate"] = r.estimate;
    j["std_error"] = r.std_error;
    j["t_step"] = r.t_step;
    j["orbit_length"] = r.orbit_length;
    j["per_seed"] = r.per_seed;
    j["seeds"] = r.seeds;
    j["provenance"] = {{"tool", "s3"}, {"version", "0.1.0"}, {"config", echo_config(cfg)}};
    return j;
}

inline nlohmann::json validation_json(const ValidationReport& r, const S3Config& cfg) {
    nlohmann::json j;
    nlohmann::json checks = nlohmann::json::array();
    for (const CheckResult& c : r.checks)
        checks.push_back({{"name", c.name},
                          {"pass", c.pass},
                          {"value", c.value},
                          {"threshold", c.threshold},
                          {"detail", c.detail}});
    j["checks"] = checks;
    j["all_pass"] = r.all_pass;
    j["provenance"] = {{"tool", "s3"}, {"version", "0.1.0"}, {"config", echo_config(cfg)}};
    return j;
}

// ---------------------------------------------------------------------------
// CSV writers

inline void write_series_csv(const std::string& path,
                             const std::vector<MonteCarloEstimate>& terms) {
    std::ofstream out(path);
    if (!out) throw ConfigError("io: cannot write \"" + path + "\"");
    out.precision(17);
    out << "# s3 csv v1: unstable series terms\n";
    out << "k,term,stderr\n";
    for (std::size_t k = 0; k < terms.size(); ++k)
        out << k << ',' << terms[k].mean << ',' << terms[k].std_error << '\n';
}

inline void write_frame_csv(const std::string& path, const std::vector<TorusPoint>& pts,
                            const UnstableFrame& frame) {
    std::ofstream out(path);
    if (!out) throw ConfigError("io: cannot write \"" + path + "\"");
    out.precision(17);
    out << "# s3 csv v1: unstable frame window\n";
    out << "k,x,y,Xu_x,Xu_y,h,curv_x,curv_y,Xu_h\n";
    for (std::size_t k = frame.full_valid_from; k < frame.pts.size(); ++k) {
        const FramePoint& f = frame.pts[k];
        out << k << ',' << pts[k].x << ',' << pts[k].y << ',' << f.xu.x << ',' << f.xu.y << ','
            << f.h << ',' << f.curv.x << ',' << f.curv.y << ',' << f.xu_h << '\n';
    }
}

inline void write_density_csv(const std::string& path, const std::vector<TorusPoint>& pts,
                              const DensityField& dens) {
    std::ofstream out(path);
    if (!out) throw ConfigError("io: cannot write \"" + path + "\"");
    out.precision(17);
    out << "# s3 csv v1: unstable density window\n";
    out << "x,y,rho0,rho\n";
    for (std::size_t k = dens.first_valid; k < dens.rho.size(); ++k)
        out << pts[k].x << ',' << pts[k].y << ',' << dens.rho0[k] << ',' << dens.rho[k] << '\n';
}

/// Window dump backing the frame and density CSVs of a run.
inline void write_window_csvs(const std::string& frame_path, const std::string& density_path,
                              const S3Config& cfg) {
    const MapModel m = build_map(cfg);
    const VectorField X = build_field(m, cfg.field);
    const std::size_t n =
        2 * cfg.windows.n_o1 + std::max(cfg.windows.n_o2, cfg.windows.n_o3) + 8;
    TorusPoint x = seed_point(cfg.seed);
    for (std::size_t i = 0; i < cfg.quadrature.burn_in; ++i) x = m.forward(x);
    const OrbitSegment seg = evolve_orbit(m, x, n - 1);
    FrameOptions fo;
    fo.curvature_N = cfg.windows.n_o1;
    const UnstableFrame frame = build_frame(m, seg.pts, fo);
    const SplitFields split = jet_decompose(m, seg.pts, frame, X, cfg.windows.n_o2, cfg.policy);
    const Rho0Result r0 = solve_rho0(frame, cfg.windows.n_o3);
    const DensityField dens = assemble_rho(split, r0);
    write_frame_csv(frame_path, seg.pts, frame);
    write_density_csv(density_path, seg.pts, dens);
}

// ---------------------------------------------------------------------------

inline void write_json_file(const std::string& path, const nlohmann::json& j) {
    std::ofstream out(path);
    if (!out) throw ConfigError("io: cannot write \"" + path + "\"");
    out << j.dump(2) << '\n';
}

/// Manifest of one CLI invocation: what ran, from which config, what it wrote.
inline nlohmann::json manifest_json(const std::string& subcommand, const std::string& config_path,
                                    const std::vector<std::string>& outputs,
                                    const std::string& timestamp, unsigned threads) {
    nlohmann::json j;
    j["tool"] = "s3";
    j["version"] = "0.1.0";
    j["subcommand"] = subcommand;
    j["config"] = config_path;
    j["outputs"] = outputs;
    j["timestamp"] = timestamp;
    j["threads"] = threads;
    return j;
}

}  // namespace s3
