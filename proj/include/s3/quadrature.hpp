#pragma once

// Step 4 integration against the SRB measure, two ways: orbit averages with
// batch-means error bars, and Riemann sums over a pushed near-unstable curve.
// Means use Welford updates throughout, so constants integrate exactly.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <sstream>
#include <vector>

#include "s3/errors.hpp"
#include "s3/model.hpp"
#include "s3/orbit.hpp"

namespace s3 {

struct MonteCarloEstimate {
    double mean = 0.0;
    double std_error = 0.0;  // batch-means standard error
    std::size_t n = 0;
    std::uint64_t seed = 0;
};

/// Mean and batch-means standard error of a sample series, ceil(sqrt(n))
/// batches.  The last batch absorbs the remainder.
inline MonteCarloEstimate batch_estimate(const std::vector<double>& xs) {
    MonteCarloEstimate e;
    e.n = xs.size();
    if (xs.empty()) return e;
    for (std::size_t i = 0; i < xs.size(); ++i)
        e.mean += (xs[i] - e.mean) / static_cast<double>(i + 1);

    const std::size_t B =
        static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(xs.size()))));
    if (B < 2) return e;
    const std::size_t m = xs.size() / B;
    if (m == 0) return e;
    double mean_b = 0.0, ssq = 0.0;
    for (std::size_t b = 0; b < B; ++b) {
        const std::size_t lo = b * m;
        const std::size_t hi = (b + 1 == B) ? xs.size() : lo + m;
        double mb = 0.0;
        for (std::size_t i = lo; i < hi; ++i) mb += (xs[i] - mb) / static_cast<double>(i - lo + 1);
        const double d = mb - mean_b;
        mean_b += d / static_cast<double>(b + 1);
        ssq += d * (mb - mean_b);
    }
    e.std_error = std::sqrt(ssq / static_cast<double>(B - 1) / static_cast<double>(B));
    return e;
}

/// Orbit average of g over N points after burn_in, batch-means error bar.
/// burn_in must cover whatever backward history g needs.
inline MonteCarloEstimate mc_integrate(const MapModel& m,
                                       const std::function<double(const TorusPoint&)>& g,
                                       std::size_t N, std::uint64_t seed, std::size_t burn_in) {
    if (N < 1000) {
        std::ostringstream os;
        os << "mc_integrate: N = " << N << " is below the supported minimum of 1000";
        throw ConfigError(os.str());
    }
    TorusPoint x = seed_point(seed);
    for (std::size_t i = 0; i < burn_in; ++i) x = m.forward(x);
    std::vector<double> xs(N);
    for (std::size_t i = 0; i < N; ++i) {
        xs[i] = g(x);
        x = m.forward(x);
    }
    MonteCarloEstimate e = batch_estimate(xs);
    e.seed = seed;
    return e;
}

// ---------------------------------------------------------------------------
// Deterministic quadrature over a pushed curve

struct CurveQuadratureSpec {
    TorusPoint base;
    Vec2 direction;             // tangent of the base segment, normalized internally
    double length = 0.05;       // arclength of the base segment
    std::size_t n_push = 0;     // forward images applied to the curve
    std::size_t n_nodes = 0;    // equispaced arclength nodes, endpoints included
    double alpha = 1.0;         // Hoelder exponent used in the error model
    bool enforce_budget = true; // refuse pushes the node budget cannot resolve
};

/// C-infinity bump, support (-1, 1), not normalized.
inline double bump_profile(double u) {
    const double s = 1.0 - u * u;
    return s > 0.0 ? std::exp(-1.0 / s) : 0.0;
}

/// Density at arclength s from the segment midpoint: the bump squeezed onto
/// the middle 80% of the segment so it vanishes near both endpoints.
inline double curve_density_raw(const CurveQuadratureSpec& spec, double s) {
    const double support = 0.4 * spec.length;  // 10% padding from each end
    return bump_profile(s / support);
}

/// Mass of the node-normalized density re-integrated by the trapezoid rule on
/// a refined grid; 1 up to the (superalgebraic) quadrature error of the bump.
inline double curve_density_mass(const CurveQuadratureSpec& spec, std::size_t refine = 4) {
    if (spec.n_nodes < 2) throw ConfigError("curve_density_mass: need at least two nodes");
    const double half = 0.5 * spec.length;
    const double ds = spec.length / static_cast<double>(spec.n_nodes - 1);
    double Z = 0.0;
    for (std::size_t i = 0; i < spec.n_nodes; ++i)
        Z += curve_density_raw(spec, -half + ds * static_cast<double>(i)) * ds;

    const std::size_t nf = refine * (spec.n_nodes - 1) + 1;
    const double dsf = spec.length / static_cast<double>(nf - 1);
    double mass = 0.0;
    for (std::size_t i = 0; i < nf; ++i) {
        const double w = (i == 0 || i + 1 == nf) ? 0.5 : 1.0;
        mass += w * curve_density_raw(spec, -half + dsf * static_cast<double>(i)) * dsf;
    }
    return mass / Z;
}

struct PushedCurve {
    std::vector<TorusPoint> nodes;  // node positions after n_push forward steps
    std::vector<double> weight;     // density * node spacing, relative mass only
    std::size_t n_push = 0;
    std::size_t n_nodes = 0;
    double alpha = 1.0;
    double kappa_hat = 1.0;  // max per-step tangent stretch seen while pushing
    double eta_hat = 1.0;    // geometric-mean per-step minimal singular value
};

struct CurveEstimate {
    double value = 0.0;
    double kappa_hat = 1.0;
    double eta_hat = 1.0;
    double riemann_term = 0.0;      // n_nodes^-alpha * kappa^(alpha n)
    double mixing_term = 0.0;       // eta^n
    double pushed_spacing = 0.0;    // node spacing after expansion, torus units
    std::size_t suggested_push = 0; // argmin of the two-term error model
};

namespace detail {

/// Integer argmin of n -> N^-a k^(an) + eta^n.
inline std::size_t balance_push(double n_nodes, double alpha, double kappa, double eta) {
    if (kappa <= 1.0 || eta >= 1.0 || eta <= 0.0) return 0;
    std::size_t best = 0;
    double best_err = 0.0;
    for (std::size_t n = 0; n <= 300; ++n) {
        const double err = std::pow(n_nodes, -alpha) * std::pow(kappa, alpha * static_cast<double>(n)) +
                           std::pow(eta, static_cast<double>(n));
        if (n == 0 || err < best_err) {
            best = n;
            best_err = err;
        }
    }
    return best;
}

}  // namespace detail

/// Lay out the base segment and push it n_push times, tracking the expansion
/// kappa_hat and contraction eta_hat along the way.  Nodes and weights are
/// retained so several observables can share one pushed curve.
inline PushedCurve push_curve(const MapModel& m, const CurveQuadratureSpec& spec) {
    if (spec.n_nodes < 8) throw ConfigError("push_curve: need at least 8 nodes");
    const double dn = norm(spec.direction);
    if (dn == 0.0) throw ConfigError("push_curve: direction must be nonzero");
    const Vec2 dir = spec.direction * (1.0 / dn);

    PushedCurve c;
    c.n_push = spec.n_push;
    c.n_nodes = spec.n_nodes;
    c.alpha = spec.alpha;
    const double half = 0.5 * spec.length;
    const double ds = spec.length / static_cast<double>(spec.n_nodes - 1);
    c.nodes.resize(spec.n_nodes);
    c.weight.resize(spec.n_nodes);
    for (std::size_t i = 0; i < spec.n_nodes; ++i) {
        const double s = -half + ds * static_cast<double>(i);
        c.nodes[i] = translate(spec.base, dir * s);
        c.weight[i] = curve_density_raw(spec, s) * ds;
    }

    // probe tangents at a sparse subset of nodes
    const std::size_t stride = spec.n_nodes / 64 ? spec.n_nodes / 64 : 1;
    std::vector<Vec2> tangent(1 + (spec.n_nodes - 1) / stride, dir);
    double eta_log = 0.0;
    for (std::size_t step = 0; step < spec.n_push; ++step) {
        double eta_step = -1.0;
        std::size_t ti = 0;
        for (std::size_t i = 0; i < spec.n_nodes; i += stride, ++ti) {
            const Mat2 J = m.jacobian(c.nodes[i]);
            Vec2& t = tangent[ti];
            t = J * t;
            const double stretch = norm(t);
            if (stretch > c.kappa_hat || (step == 0 && ti == 0)) c.kappa_hat = stretch;
            t = t * (1.0 / stretch);
            const double sv = J.op_norm_min();
            if (eta_step < 0.0 || sv < eta_step) eta_step = sv;
        }
        eta_log += std::log(eta_step);
        for (auto& p : c.nodes) p = m.forward(p);
    }
    if (spec.n_push > 0) c.eta_hat = std::exp(eta_log / static_cast<double>(spec.n_push));

    if (spec.enforce_budget) {
        const double spacing = ds * std::pow(c.kappa_hat, static_cast<double>(spec.n_push));
        if (spacing >= 1.0) {
            std::ostringstream os;
            os << "push_curve: node spacing grows to " << spacing
               << " torus units after " << spec.n_push << " pushes at " << spec.n_nodes
               << " nodes; the error model balances at n = "
               << detail::balance_push(static_cast<double>(spec.n_nodes), spec.alpha,
                                       c.kappa_hat, c.eta_hat);
            throw NodeBudgetExceeded(os.str());
        }
    }
    return c;
}

/// Weighted mean of g over the pushed nodes (the Riemann sum; weights carry
/// the unit-mass density, so g = const integrates exactly).
inline double curve_mean(const PushedCurve& c, const std::function<double(const TorusPoint&)>& g) {
    double Q = 0.0, mean = 0.0;
    for (std::size_t i = 0; i < c.nodes.size(); ++i) {
        if (c.weight[i] == 0.0) continue;
        Q += c.weight[i];
        mean += (g(c.nodes[i]) - mean) * (c.weight[i] / Q);
    }
    return mean;
}

inline CurveEstimate curve_summary(const PushedCurve& c) {
    CurveEstimate e;
    e.kappa_hat = c.kappa_hat;
    e.eta_hat = c.eta_hat;
    const double nn = static_cast<double>(c.n_nodes);
    const double n = static_cast<double>(c.n_push);
    e.riemann_term = std::pow(nn, -c.alpha) * std::pow(c.kappa_hat, c.alpha * n);
    e.mixing_term = std::pow(c.eta_hat, n);
    e.pushed_spacing =
        std::pow(c.kappa_hat, n) / (nn - 1.0);  // per unit base length; scaled by caller
    e.suggested_push = detail::balance_push(nn, c.alpha, c.kappa_hat, c.eta_hat);
    return e;
}

inline CurveEstimate curve_integrate(const MapModel& m,
                                     const std::function<double(const TorusPoint&)>& g,
                                     const CurveQuadratureSpec& spec) {
    const PushedCurve c = push_curve(m, spec);
    CurveEstimate e = curve_summary(c);
    e.pushed_spacing *= spec.length;
    e.value = curve_mean(c, g);
    return e;
}

// ---------------------------------------------------------------------------

/**
 * term[k] = orbit average of w(x_j) f(x_{j+k}), k = 0..L-1, over one shared
 * orbit of N samples (after burn_in): the observable index shifts, nothing is
 * re-simulated.  w and f are invoked once per orbit point in order, so
 * stateful streaming evaluators are fine.
 */
inline std::vector<MonteCarloEstimate> correlation_series(
    const MapModel& m, const std::function<double(const TorusPoint&)>& w,
    const std::function<double(const TorusPoint&)>& f, std::size_t L, std::size_t N,
    std::uint64_t seed, std::size_t burn_in) {
    if (L < 1) throw ConfigError("correlation_series: L must be at least 1");
    if (N < 1000) throw ConfigError("correlation_series: N must be at least 1000");
    TorusPoint x = seed_point(seed);
    for (std::size_t i = 0; i < burn_in; ++i) x = m.forward(x);
    std::vector<double> ws(N), fs(N + L - 1);
    for (std::size_t j = 0; j < N + L - 1; ++j) {
        if (j < N) ws[j] = w(x);
        fs[j] = f(x);
        x = m.forward(x);
    }
    std::vector<MonteCarloEstimate> terms(L);
    std::vector<double> prod(N);
    for (std::size_t k = 0; k < L; ++k) {
        for (std::size_t j = 0; j < N; ++j) prod[j] = ws[j] * fs[j + k];
        terms[k] = batch_estimate(prod);
        terms[k].seed = seed;
    }
    return terms;
}

/**
 * batch_estimate without the buffer: the sample count is declared up front so
 * the batch layout is fixed, and every accumulation runs in the same order
 * with the same arithmetic.  finish() after exactly n samples reproduces
 * batch_estimate(xs) bit for bit.
 */
class StreamingBatchStats {
  public:
    explicit StreamingBatchStats(std::size_t n) : n_(n) {
        B_ = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(n))));
        m_ = (B_ >= 2) ? n / B_ : 0;
    }

    void add(double x) {
        mean_ += (x - mean_) / static_cast<double>(i_ + 1);
        ++i_;
        if (m_ == 0) return;
        mb_ += (x - mb_) / static_cast<double>(bi_ + 1);
        ++bi_;
        const std::size_t batch_len = (b_ + 1 == B_) ? n_ - (B_ - 1) * m_ : m_;
        if (bi_ == batch_len) {
            const double d = mb_ - mean_b_;
            mean_b_ += d / static_cast<double>(b_ + 1);
            ssq_ += d * (mb_ - mean_b_);
            ++b_;
            bi_ = 0;
            mb_ = 0.0;
        }
    }

    std::size_t count() const { return i_; }

    MonteCarloEstimate finish() const {
        MonteCarloEstimate e;
        e.n = i_;
        e.mean = mean_;
        if (m_ > 0 && b_ == B_)
            e.std_error = std::sqrt(ssq_ / static_cast<double>(B_ - 1) / static_cast<double>(B_));
        return e;
    }

  private:
    std::size_t n_, B_ = 0, m_ = 0;
    std::size_t i_ = 0, bi_ = 0, b_ = 0;
    double mean_ = 0.0, mb_ = 0.0, mean_b_ = 0.0, ssq_ = 0.0;
};

// ---------------------------------------------------------------------------
// Decay-slope fit for correlation series

struct SeriesDecayFit {
    double slope = 0.0;      // least-squares slope of log |term_k| vs k
    double slope_se = 0.0;   // its standard error from the fit residuals
    double t_stat = 0.0;     // slope / slope_se
    double p_value = 1.0;    // one-sided P(slope >= 0 | data)
    std::size_t n_used = 0;  // terms clearly above their noise floor
};

namespace detail {

// regularized incomplete beta via the standard continued fraction
inline double betacf(double a, double b, double x) {
    const double eps = 3e-12, fpmin = 1e-300;
    const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0, d = 1.0 - qab * x / qap;
    if (std::abs(d) < fpmin) d = fpmin;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= 300; ++m) {
        const double m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < fpmin) d = fpmin;
        c = 1.0 + aa / c;
        if (std::abs(c) < fpmin) c = fpmin;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < fpmin) d = fpmin;
        c = 1.0 + aa / c;
        if (std::abs(c) < fpmin) c = fpmin;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < eps) break;
    }
    return h;
}

inline double inc_beta(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                            a * std::log(x) + b * std::log(1.0 - x);
    const double front = std::exp(ln_front);
    if (x < (a + 1.0) / (a + b + 2.0)) return front * betacf(a, b, x) / a;
    return 1.0 - front * betacf(b, a, 1.0 - x) / b;
}

/// One-sided P(T_nu <= t) for Student's t.
inline double student_cdf(double t, double nu) {
    const double ib = inc_beta(nu / 2.0, 0.5, nu / (nu + t * t));
    return (t <= 0.0) ? ib / 2.0 : 1.0 - ib / 2.0;
}

}  // namespace detail

/**
 * Ordinary least squares of log |term_k| on k, restricted to terms lying
 * clearly above their own error bar (|term| > 3 stderr); the rest carry no
 * decay information.  p_value is the one-sided probability of seeing a slope
 * this negative under the flat null, Student t with n_used - 2 dof.
 */
inline SeriesDecayFit fit_series_decay(const std::vector<MonteCarloEstimate>& terms) {
    SeriesDecayFit fit;
    std::vector<double> ks, ys;
    for (std::size_t k = 0; k < terms.size(); ++k) {
        const double mag = std::abs(terms[k].mean);
        if (mag > 3.0 * terms[k].std_error && mag > 0.0) {
            ks.push_back(static_cast<double>(k));
            ys.push_back(std::log(mag));
        }
    }
    fit.n_used = ks.size();
    if (ks.size() < 3) return fit;  // nothing to regress on
    const std::size_t n = ks.size();
    double km = 0.0, ym = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        km += (ks[i] - km) / static_cast<double>(i + 1);
        ym += (ys[i] - ym) / static_cast<double>(i + 1);
    }
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (ks[i] - km) * (ks[i] - km);
        sxy += (ks[i] - km) * (ys[i] - ym);
    }
    if (sxx == 0.0) return fit;
    fit.slope = sxy / sxx;
    const double intercept = ym - fit.slope * km;
    double rss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = ys[i] - (intercept + fit.slope * ks[i]);
        rss += r * r;
    }
    const double dof = static_cast<double>(n - 2);
    if (dof <= 0.0 || rss <= 0.0) {
        fit.slope_se = 0.0;
        fit.t_stat = (fit.slope < 0.0) ? -1e300 : 0.0;
        fit.p_value = (fit.slope < 0.0) ? 0.0 : 1.0;
        return fit;
    }
    fit.slope_se = std::sqrt(rss / dof / sxx);
    fit.t_stat = fit.slope / fit.slope_se;
    fit.p_value = detail::student_cdf(fit.t_stat, dof);
    return fit;
}

}  // namespace s3
