#pragma once

// Orchestration: a configured end-to-end sensitivity run, the
// finite-difference oracle it is checked against, and the self-validation
// battery.  The probabilistic path is a single sequential stream so results
// do not depend on the worker count; threads are spent only where per-item
// results are independent and merged in a fixed order (oracle side orbits,
// deterministic quadrature nodes).

#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "s3/config.hpp"
#include "s3/density.hpp"
#include "s3/errors.hpp"
#include "s3/evaluate.hpp"
#include "s3/maps.hpp"
#include "s3/model.hpp"
#include "s3/orbit.hpp"
#include "s3/quadrature.hpp"
#include "s3/splitting.hpp"
#include "s3/stream.hpp"
#include "s3/unstable.hpp"

namespace s3 {

struct SensitivityReport {
    double psi_total = 0.0;  // coboundary.mean plus the term means, in index order
    MonteCarloEstimate coboundary;            // contribution of V f
    std::vector<MonteCarloEstimate> terms;    // contributions of rho * f o T^k
    double series_std_error = 0.0;            // rms of the term bars
    double total_std_error = 0.0;             // bar of the composite per-sample series
    MonteCarloEstimate mean_rho;              // should vanish: rho integrates to zero
    std::string method;
    std::size_t samples = 0;

    double power_ratio = 0.0, power_gap = 0.0;
    double h_geometric_mean = 0.0, lift_contraction = 0.0;
    std::vector<CheckpointDiagnostics> checkpoints;
    std::vector<std::string> warnings;

    // deterministic-quadrature extras
    double kappa_hat = 1.0, eta_hat = 1.0;
    std::size_t n_push = 0;

    S3Config config;  // what actually ran, defaults included
};

struct FDOracleResult {
    double estimate = 0.0;
    double std_error = 0.0;  // spread of the per-seed differences
    double t_step = 0.0;
    std::vector<double> per_seed;
    std::vector<std::uint64_t> seeds;
    std::size_t orbit_length = 0;
};

struct CheckResult {
    std::string name;
    bool pass = false;
    double value = 0.0;      // measured quantity
    double threshold = 0.0;  // what it was held against
    std::string detail;
};

struct ValidationReport {
    std::vector<CheckResult> checks;
    bool all_pass = false;
};

namespace detail {

template <class F>
inline void parallel_for(std::size_t n, unsigned threads, F&& body) {
    if (threads <= 1 || n < 2) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    const std::size_t k = std::min<std::size_t>(threads, n);
    for (std::size_t w = 0; w < k; ++w)
        pool.emplace_back([&] {
            for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) body(i);
        });
    for (auto& th : pool) th.join();
}

inline void warn_window(std::vector<std::string>& out, const char* name, std::size_t have,
                        double eta, std::size_t n_samples) {
    if (eta <= 0.0 || eta >= 1.0) return;  // unmeasured or non-contracting; handled elsewhere
    const double needed =
        3.0 * std::log10(static_cast<double>(n_samples)) / std::abs(std::log10(eta));
    if (static_cast<double>(have) < needed) {
        std::ostringstream os;
        os << "window " << name << " = " << have << " is below the recommended "
           << std::ceil(needed) << " for " << n_samples << " samples (contraction " << eta << ")";
        out.push_back(os.str());
    }
}

inline TorusPoint burned_start(const MapModel& m, std::uint64_t seed, std::size_t burn_in) {
    TorusPoint x = seed_point(seed);
    for (std::size_t i = 0; i < burn_in; ++i) x = m.forward(x);
    return x;
}

}  // namespace detail

inline SensitivityReport run_s3(const S3Config& cfg, unsigned threads = 1) {
    const MapModel m = build_map(cfg);
    const VectorField X = build_field(m, cfg.field);
    const Observable f = build_observable(cfg.observable);
    const StreamOptions sopt{cfg.windows.n_o1, cfg.windows.n_o2, cfg.windows.n_o3, cfg.policy};
    const std::size_t L = cfg.series_length;

    SensitivityReport rep;
    rep.method = cfg.quadrature.method;
    rep.config = cfg;

    // warm-up stream: hyperbolicity diagnostics gate every method
    S3Stream stream(m, X, detail::burned_start(m, cfg.seed, cfg.quadrature.burn_in), sopt);
    while (!stream.ready() || !stream.history_full()) stream.advance();
    rep.power_ratio = stream.power_ratio();
    rep.power_gap = stream.power_gap();
    if (stream.lift_contraction() >= 1.0 || stream.h_geometric_mean() >= 1.0) {
        std::ostringstream os;
        os << "run: warm-up orbit shows no contraction (lift " << stream.lift_contraction()
           << ", h " << stream.h_geometric_mean() << ")";
        throw ContractionViolation(os.str());
    }
    rep.checkpoints.push_back(stream.checkpoint());

    if (cfg.quadrature.method == "probabilistic") {
        const std::size_t N = cfg.quadrature.samples;
        rep.samples = N;

        StreamingBatchStats cob(N), rho_stats(N), total(N);
        std::vector<StreamingBatchStats> term;
        term.reserve(L);
        for (std::size_t k = 0; k < L; ++k) term.emplace_back(N);

        struct Pending {
            double rho = 0.0, vf = 0.0, partial = 0.0;
        };
        std::vector<Pending> ring(L);

        for (std::size_t u = 0; u < N + L - 1; ++u) {
            const StreamSample& s = stream.current();
            const double fu = f.value(s.p);
            if (u < N) {
                Pending& slot = ring[u % L];
                slot.rho = s.rho;
                slot.vf = dot(f.gradient(s.p), s.V);
                slot.partial = 0.0;
                rho_stats.add(slot.rho);
                cob.add(slot.vf);
            }
            const std::size_t k_max = std::min(u, L - 1);
            for (std::size_t k = 0; k <= k_max; ++k) {
                const std::size_t i = u - k;
                if (i >= N) continue;
                Pending& slot = ring[i % L];
                const double prod = slot.rho * fu;
                term[k].add(prod);
                slot.partial += prod;
                // sample i completes its lag window here; its composite value
                // feeds the cross-correlation-aware total error bar
                if (k == L - 1) total.add(slot.vf + slot.partial);
            }
            if (u + 1 < N + L - 1) stream.advance();
        }

        rep.coboundary = cob.finish();
        rep.coboundary.seed = cfg.seed;
        rep.mean_rho = rho_stats.finish();
        rep.mean_rho.seed = cfg.seed;
        rep.terms.resize(L);
        double series_var = 0.0;
        rep.psi_total = rep.coboundary.mean;
        for (std::size_t k = 0; k < L; ++k) {
            rep.terms[k] = term[k].finish();
            rep.terms[k].seed = cfg.seed;
            rep.psi_total += rep.terms[k].mean;
            series_var += rep.terms[k].std_error * rep.terms[k].std_error;
        }
        rep.series_std_error = std::sqrt(series_var);
        rep.total_std_error = total.finish().std_error;

        rep.checkpoints.push_back(stream.checkpoint());
    } else {
        CurveQuadratureSpec spec;
        spec.base = cfg.quadrature.base;
        spec.direction = cfg.quadrature.direction;
        spec.length = cfg.quadrature.curve_length;
        spec.n_nodes = cfg.quadrature.nodes;
        spec.alpha = cfg.quadrature.alpha;
        if (cfg.quadrature.n_push >= 0) {
            spec.n_push = static_cast<std::size_t>(cfg.quadrature.n_push);
        } else {
            // probe push to measure stretch and mixing, then balance the model
            CurveQuadratureSpec probe = spec;
            probe.n_push = 6;
            probe.enforce_budget = false;
            spec.n_push = curve_summary(push_curve(m, probe)).suggested_push;
        }
        const PushedCurve curve = push_curve(m, spec);
        const CurveEstimate summary = curve_summary(curve);
        rep.samples = curve.nodes.size();
        rep.kappa_hat = summary.kappa_hat;
        rep.eta_hat = summary.eta_hat;
        rep.n_push = curve.n_push;

        const PointEvaluator pe(m, X,
                                {cfg.windows.n_o1, cfg.windows.n_o2, cfg.windows.n_o3,
                                 cfg.policy});
        const std::size_t n = curve.nodes.size();
        std::vector<double> rho(n, 0.0), vf(n, 0.0);
        std::vector<std::vector<double>> fk(L, std::vector<double>(n, 0.0));
        detail::parallel_for(n, threads, [&](std::size_t i) {
            if (curve.weight[i] == 0.0) return;  // padded ends carry no mass
            const PointData d = pe.at(curve.nodes[i]);
            rho[i] = d.rho;
            vf[i] = dot(f.gradient(d.p), d.V);
            TorusPoint q = d.p;
            for (std::size_t k = 0; k < L; ++k) {
                fk[k][i] = f.value(q);
                q = m.forward(q);
            }
        });

        // same weighted-mean arithmetic as curve_mean, indexed by node
        auto mean_of = [&](const std::vector<double>& vals) {
            double Q = 0.0, mean = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                if (curve.weight[i] == 0.0) continue;
                Q += curve.weight[i];
                mean += (vals[i] - mean) * (curve.weight[i] / Q);
            }
            return mean;
        };
        const double bar = summary.riemann_term + summary.mixing_term;  // per-integrand model
        rep.coboundary = {mean_of(vf), bar, n, cfg.seed};
        rep.mean_rho = {mean_of(rho), bar, n, cfg.seed};
        rep.terms.resize(L);
        rep.psi_total = rep.coboundary.mean;
        std::vector<double> prod(n);
        double series_var = 0.0;
        for (std::size_t k = 0; k < L; ++k) {
            for (std::size_t i = 0; i < n; ++i) prod[i] = rho[i] * fk[k][i];
            rep.terms[k] = {mean_of(prod), bar, n, cfg.seed};
            rep.psi_total += rep.terms[k].mean;
            series_var += bar * bar;
        }
        rep.series_std_error = std::sqrt(series_var);
        rep.total_std_error = bar * static_cast<double>(L + 1);
    }

    rep.h_geometric_mean = stream.h_geometric_mean();
    rep.lift_contraction = stream.lift_contraction();
    detail::warn_window(rep.warnings, "n_o1", cfg.windows.n_o1, rep.power_ratio, rep.samples);
    detail::warn_window(rep.warnings, "n_o2", cfg.windows.n_o2, rep.lift_contraction,
                        rep.samples);
    detail::warn_window(rep.warnings, "n_o3", cfg.windows.n_o3, rep.h_geometric_mean,
                        rep.samples);
    return rep;
}

/**
 * Central difference of the SRB average of f across the one-parameter family
 * through the configured map: for the plain cat map the family direction is
 * the configured field, for the perturbed family it is the family's own
 * direction evaluated at t +- t_step.  Each seed runs both signs from the
 * same start; the quoted error is the spread of the per-seed differences.
 */
inline FDOracleResult fd_oracle(const S3Config& cfg, unsigned threads = 1) {
    const MapModel base = cat_map();
    const VectorField dir = (cfg.map.family == "cat") ? build_field(base, cfg.field)
                                                      : build_field(base, cfg.map.direction);
    const double t0 = (cfg.map.family == "cat") ? 0.0 : cfg.map.t;
    const double dt = cfg.oracle.t_step;
    const Observable f = build_observable(cfg.observable);

    FDOracleResult res;
    res.t_step = dt;
    res.orbit_length = cfg.oracle.orbit_length;
    res.seeds.resize(cfg.oracle.n_seeds);
    for (std::size_t i = 0; i < cfg.oracle.n_seeds; ++i) res.seeds[i] = cfg.seed + 1 + i;

    // one job per (seed, sign): independent orbits merged in fixed order
    std::vector<double> side_mean(2 * cfg.oracle.n_seeds, 0.0);
    detail::parallel_for(side_mean.size(), threads, [&](std::size_t job) {
        const std::size_t si = job / 2;
        const double t = (job % 2 == 0) ? t0 + dt : t0 - dt;
        const MapModel mt = perturbed_cat_map(t, dir, cfg.policy);
        TorusPoint x = seed_point(res.seeds[si]);
        for (std::size_t u = 0; u < cfg.oracle.burn_in; ++u) x = mt.forward(x);
        double mean = 0.0;
        for (std::size_t u = 0; u < cfg.oracle.orbit_length; ++u) {
            mean += (f.value(x) - mean) / static_cast<double>(u + 1);
            x = mt.forward(x);
        }
        side_mean[job] = mean;
    });

    res.per_seed.resize(cfg.oracle.n_seeds);
    double mean = 0.0, ssq = 0.0;
    for (std::size_t i = 0; i < cfg.oracle.n_seeds; ++i) {
        res.per_seed[i] = (side_mean[2 * i] - side_mean[2 * i + 1]) / (2.0 * dt);
        const double d = res.per_seed[i] - mean;
        mean += d / static_cast<double>(i + 1);
        ssq += d * (res.per_seed[i] - mean);
    }
    res.estimate = mean;
    const double n = static_cast<double>(cfg.oracle.n_seeds);
    res.std_error = std::sqrt(ssq / (n - 1.0) / n);
    return res;
}

/**
 * Self-validation battery.  Every check is a measured number against a
 * threshold; nothing is clamped, so shortening a window or tightening
 * validation.residual_tol makes the corresponding check fail honestly.
 */
inline ValidationReport validate(const S3Config& cfg, unsigned threads = 1) {
    const MapModel m = build_map(cfg);
    const VectorField X = build_field(m, cfg.field);
    const Observable f = build_observable(cfg.observable);
    const std::size_t Nv = cfg.validation.orbit_length;

    ValidationReport out;
    auto push = [&out](CheckResult c) { out.checks.push_back(std::move(c)); };

    // 1. window re-solve residuals at a checkpoint
    {
        const StreamOptions sopt{cfg.windows.n_o1, cfg.windows.n_o2, cfg.windows.n_o3,
                                 cfg.policy};
        S3Stream stream(m, X, detail::burned_start(m, cfg.seed, cfg.quadrature.burn_in), sopt);
        while (!stream.ready() || !stream.history_full()) stream.advance();
        const CheckpointDiagnostics d = stream.checkpoint();

        CheckResult c;
        c.name = "decomposition_residual";
        c.value = std::max({d.curvature_residual, d.parallel_residual,
                            d.reconstruction_residual, d.rho0_residual, d.stream_vs_window});
        c.threshold = cfg.validation.residual_tol;
        c.pass = c.value <= c.threshold;
        {
            std::ostringstream os;
            os << "curvature " << d.curvature_residual << ", parallel " << d.parallel_residual
               << ", reconstruction " << d.reconstruction_residual << ", rho0 "
               << d.rho0_residual << ", stream vs window " << d.stream_vs_window;
            c.detail = os.str();
        }
        push(c);

        CheckResult h;
        h.name = "hyperbolicity";
        h.value = std::max(stream.lift_contraction(), stream.h_geometric_mean());
        h.threshold = 1.0;
        h.pass = h.value < h.threshold;
        {
            std::ostringstream os;
            os << "lift contraction " << stream.lift_contraction() << ", h geometric mean "
               << stream.h_geometric_mean() << ", power ratio " << stream.power_ratio();
            h.detail = os.str();
        }
        push(h);
    }

    // 2. a reduced run: mean of rho and the decay of its series
    {
        S3Config small = cfg;
        small.quadrature.method = "probabilistic";
        small.quadrature.samples = std::max<std::size_t>(Nv, 1000);
        const SensitivityReport rep = run_s3(small, threads);

        CheckResult c;
        c.name = "mean_zero_rho";
        c.value = std::abs(rep.mean_rho.mean);
        c.threshold = 3.0 * rep.mean_rho.std_error;
        c.pass = c.value <= c.threshold;
        {
            std::ostringstream os;
            os << "mean rho " << rep.mean_rho.mean << " +- " << rep.mean_rho.std_error;
            c.detail = os.str();
        }
        push(c);

        const SeriesDecayFit fit = fit_series_decay(rep.terms);
        CheckResult d;
        d.name = "correlation_decay";
        if (fit.n_used < 3) {
            d.pass = true;
            d.value = 0.0;
            d.threshold = 0.0;
            std::ostringstream os;
            os << "only " << fit.n_used
               << " terms above their noise floor; series indistinguishable from zero";
            d.detail = os.str();
        } else {
            d.value = fit.slope;
            d.threshold = 0.0;
            d.pass = fit.slope < 0.0;
            std::ostringstream os;
            os << "log-slope " << fit.slope << " +- " << fit.slope_se << " over " << fit.n_used
               << " terms, one-sided p " << fit.p_value;
            d.detail = os.str();
        }
        push(d);
    }

    // 3. response of an exact coboundary: psi must telescope to mu(V0 f)
    {
        FieldSpec v0_spec;
        v0_spec.type = "sinusoid";
        v0_spec.amplitude = 0.1;
        v0_spec.wave_x = 0;
        v0_spec.wave_y = 1;
        v0_spec.direction = {1.0, 0.0};
        const VectorField V0 = build_field(m, v0_spec);

        S3Config cb = cfg;
        cb.field = FieldSpec{};
        cb.field.type = "coboundary";
        cb.field.of = std::make_shared<FieldSpec>(v0_spec);
        cb.quadrature.method = "probabilistic";
        cb.quadrature.samples = std::max<std::size_t>(Nv, 1000);
        const SensitivityReport rep = run_s3(cb, threads);

        const MonteCarloEstimate target = mc_integrate(
            m, [&](const TorusPoint& p) { return dot(f.gradient(p), V0.value(p)); },
            std::max<std::size_t>(Nv, 1000), cfg.seed + 7, cfg.quadrature.burn_in);

        CheckResult c;
        c.name = "coboundary_response";
        c.value = std::abs(rep.psi_total - target.mean);
        c.threshold = 3.0 * std::sqrt(rep.total_std_error * rep.total_std_error +
                                      target.std_error * target.std_error);
        c.pass = c.value <= c.threshold;
        {
            std::ostringstream os;
            os << "psi " << rep.psi_total << " vs mu(V0 f) " << target.mean;
            c.detail = os.str();
        }
        push(c);

        // raw partial sums of the response series for the same coboundary:
        // sum over n of the derivative of f o T^n along X', which telescopes.
        // The per-sample variance of term n grows like the squared n-step
        // stretch, so only the first few terms carry statistical power here;
        // the exact-oracle version of this check lives in the acceptance run.
        const VectorField Xcb = build_field(m, cb.field);
        const std::size_t n_terms = 4;
        std::vector<StreamingBatchStats> terms(n_terms, StreamingBatchStats(Nv));
        TorusPoint x = detail::burned_start(m, cfg.seed + 13, cfg.quadrature.burn_in);
        std::vector<Vec2> inflight(n_terms);  // pushed X'(x_i), i = u - n
        for (std::size_t u = 0; u < Nv + n_terms - 1; ++u) {
            const Mat2 J = m.jacobian(x);
            const TorusPoint x_next = m.forward(x);
            const Vec2 grad = f.gradient(x);
            const std::size_t n_max = std::min(u, n_terms - 1);
            for (std::size_t n = 0; n <= n_max; ++n) {
                const std::size_t i = u - n;
                if (i >= Nv) continue;
                if (n == 0) inflight[u % n_terms] = Xcb.value(x);
                terms[n].add(dot(grad, inflight[i % n_terms]));
                inflight[i % n_terms] = J * inflight[i % n_terms];
            }
            x = x_next;
        }
        double partial = 0.0, var = 0.0;
        for (std::size_t n = 0; n < n_terms; ++n) {
            const MonteCarloEstimate e = terms[n].finish();
            partial += e.mean;
            var += e.std_error * e.std_error;
        }
        CheckResult t;
        t.name = "telescoping_partial_sums";
        t.value = std::abs(partial - target.mean);
        t.threshold = 3.0 * std::sqrt(var + target.std_error * target.std_error);
        t.pass = t.value <= t.threshold;
        {
            std::ostringstream os;
            os << "partial sum through n = " << n_terms - 1 << " is " << partial
               << " vs mu(V0 f) " << target.mean;
            t.detail = os.str();
        }
        push(t);
    }

    // 4. adjoint identity on a windowed orbit
    {
        const std::size_t n_orbit = std::min<std::size_t>(Nv, 30000);
        const TorusPoint x0 = detail::burned_start(m, cfg.seed + 23, cfg.quadrature.burn_in);
        const OrbitSegment seg = evolve_orbit(m, x0, n_orbit);
        FrameOptions fo;
        fo.curvature_N = cfg.windows.n_o1;
        const UnstableFrame frame = build_frame(m, seg.pts, fo);
        const SplitFields split =
            jet_decompose(m, seg.pts, frame, X, cfg.windows.n_o2, cfg.policy);
        const Rho0Result r0 = solve_rho0(frame, cfg.windows.n_o3);
        const DensityField dens = assemble_rho(split, r0);
        const Observable g = observables::harmonic(1.0, 0, 1);
        const AdjointCheck ac = adjoint_identity_check(seg.pts, split, dens, f, g);

        CheckResult c;
        c.name = "adjoint_identity";
        c.value = std::abs(ac.difference.mean);
        c.threshold = 3.0 * ac.difference.std_error;
        c.pass = ac.pass;
        {
            std::ostringstream os;
            os << "lhs " << ac.lhs.mean << ", rhs " << ac.rhs.mean << ", difference "
               << ac.difference.mean << " +- " << ac.difference.std_error;
            c.detail = os.str();
        }
        push(c);
    }

    out.all_pass = true;
    for (const CheckResult& c : out.checks) out.all_pass = out.all_pass && c.pass;
    return out;
}

}  // namespace s3
