#pragma once

// Step 1 of the split: the unstable direction Xu along an orbit via power
// iteration of the pushforward, the expansion reciprocal h with
// h <T_* Xu, Xu> = 1, the curvature field nabla_Xu Xu from its lifted
// transfer equation, and the unstable log-derivative Xu h.  All of it is
// phrased over forward-ordered windows (earliest point first), so a backward
// orbit of x enters as the forward history of x.

#include <cmath>
#include <cstddef>
#include <optional>
#include <sstream>
#include <vector>

#include "s3/errors.hpp"
#include "s3/model.hpp"
#include "s3/neumann.hpp"
#include "s3/orbit.hpp"

namespace s3 {

struct FramePoint {
    TorusPoint p;
    Vec2 xu;        // unit unstable direction
    double h = 0.0; // 1 / <T_* Xu, Xu>
    Vec2 curv;      // nabla_Xu Xu
    double xu_h = 0.0;
};

struct UnstableFrame {
    std::vector<FramePoint> pts;       // aligned with the window
    std::size_t xu_valid_from = 0;     // first index with converged Xu
    std::size_t full_valid_from = 0;   // first index where curv and xu_h are windowed-in
    double power_ratio = 0.0;          // measured per-step contraction of the probe angle
    double power_gap = 0.0;            // final two-probe disagreement angle
    double curvature_residual = 0.0;
    double curvature_contraction = 0.0;
};

namespace detail {

/// Sustained-stagnation detector for power iteration.
class StagnationGuard {
  public:
    void observe(double angle, double prev_angle) {
        if (angle < 1e-13) { run_ = 0; return; }  // converged; ratios are rounding noise
        if (prev_angle > 0.0 && angle / prev_angle > 0.95)
            ++run_;
        else
            run_ = 0;
    }
    bool tripped() const { return run_ >= 20; }

  private:
    int run_ = 0;
};

}  // namespace detail

/**
 * Power iteration u_k = normalize(dT u_{k-1}) along a window.  Returns the
 * iterate sequence with the canonical sign (first component >= 0, ties broken
 * by the second).  A second probe started perpendicular to X0 measures the
 * actual contraction; if the two probes' angle fails to shrink for 20
 * consecutive steps the start is declared degenerate.
 */
inline std::vector<Vec2> power_iterate_unstable(const MapModel& m,
                                                const std::vector<TorusPoint>& pts, Vec2 X0) {
    if (pts.empty()) throw WindowTooShort("power_iterate_unstable: empty window");
    if (norm(X0) == 0.0) throw DegenerateStart("power_iterate_unstable: zero start vector");

    std::vector<Vec2> out;
    out.reserve(pts.size());
    Vec2 u = normalized(X0);
    Vec2 w = normalized(Vec2{-X0.y, X0.x});
    out.push_back(u);

    detail::StagnationGuard guard;
    double prev_angle = -1.0;
    for (std::size_t k = 1; k < pts.size(); ++k) {
        const Mat2 J = m.jacobian(pts[k - 1]);
        u = normalized(J * u);
        w = normalized(J * w);
        out.push_back(u);
        const double angle = line_angle(u, w);
        guard.observe(angle, prev_angle);
        prev_angle = angle;
        if (guard.tripped()) {
            std::ostringstream os;
            os << "power_iterate_unstable: probe angle stalled at " << angle << " by step " << k
               << " (no unstable contraction from this start)";
            throw DegenerateStart(os.str());
        }
    }
    for (auto& v : out)
        if (v.x < 0.0 || (v.x == 0.0 && v.y < 0.0)) v = -v;
    return out;
}

/**
 * h along the window from converged Xu: h_k = 1 / <dT xu_{k-1}, xu_k>.
 * Index 0 has no predecessor and is left at 0.  The pairing must exceed 1
 * (genuine expansion) at every converged sample.
 */
inline std::vector<double> compute_h(const MapModel& m, const std::vector<TorusPoint>& pts,
                                     const std::vector<Vec2>& xu, std::size_t from = 1) {
    std::vector<double> h(pts.size(), 0.0);
    for (std::size_t k = (from > 0 ? from : 1); k < pts.size(); ++k) {
        const double pairing = dot(m.jacobian(pts[k - 1]) * xu[k - 1], xu[k]);
        if (pairing <= 1.0) {
            std::ostringstream os;
            os << "compute_h: <T_* Xu, Xu> = " << pairing << " at window index " << k << ", point "
               << describe(pts[k]) << "; no unstable expansion there";
            throw NonHyperbolicSample(os.str());
        }
        h[k] = 1.0 / pairing;
    }
    return h;
}

/**
 * Curvature solve: (I - L) curv = source with the weighted lift
 * step(k): v -> h_k^2 P_k dT v and source h_k^2 P_k d2T(xu, xu)|_{prev}.
 * Returns values aligned to the window, valid from index `from + N`.
 */
struct CurvatureResult {
    std::vector<Vec2> curv;
    std::size_t first_valid = 0;
    double residual = 0.0;
    double contraction = 0.0;
};

inline CurvatureResult solve_curvature(const MapModel& m, const std::vector<TorusPoint>& pts,
                                       const std::vector<Vec2>& xu, const std::vector<double>& h,
                                       std::size_t N, std::size_t from = 1) {
    if (from < 1) from = 1;  // needs a predecessor
    if (pts.size() < from + N + 1) {
        std::ostringstream os;
        os << "solve_curvature: window of " << pts.size() << " points leaves "
           << (pts.size() > from ? pts.size() - from : 0) << " usable, need N + 1 = " << N + 1;
        throw WindowTooShort(os.str());
    }
    const std::size_t n_loc = pts.size() - from;  // local index i <-> window index from + i
    auto step = [&](std::size_t i, const Vec2& v) {
        const std::size_t k = from + i;
        const Vec2 push = m.jacobian(pts[k - 1]) * v;
        return (push - xu[k] * dot(xu[k], push)) * (h[k] * h[k]);
    };
    auto src = [&](std::size_t i) {
        const std::size_t k = from + i;
        const Vec2 s = m.hessian_action(pts[k - 1], xu[k - 1], xu[k - 1]);
        return (s - xu[k] * dot(xu[k], s)) * (h[k] * h[k]);
    };
    const auto sol = neumann_solve<Vec2>(n_loc, N, step, src,
                                         [](const Vec2& v) { return norm(v); }, Vec2{1.0, 0.0});
    CurvatureResult out;
    out.curv.assign(pts.size(), Vec2{});
    for (std::size_t i = sol.first_valid; i < n_loc; ++i) out.curv[from + i] = sol.v[i];
    out.first_valid = from + sol.first_valid;
    out.residual = sol.max_residual;
    out.contraction = sol.contraction;
    return out;
}

/**
 * Unstable derivative of h:
 *   Xu h = -h^2 [ <nabla_Xu(T_* Xu), Xu> + <T_* Xu, nabla_Xu Xu> ],
 *   nabla_Xu(T_* Xu)(x) = h(x) [ d2T(xu, xu) + dT curv ]|_{T^{-1} x}.
 * Valid where curv is valid at both the point and its predecessor.
 */
inline std::vector<double> compute_Xu_h(const MapModel& m, const std::vector<TorusPoint>& pts,
                                        const std::vector<Vec2>& xu, const std::vector<double>& h,
                                        const std::vector<Vec2>& curv, std::size_t from) {
    std::vector<double> out(pts.size(), 0.0);
    for (std::size_t k = from; k < pts.size(); ++k) {
        const Mat2 J = m.jacobian(pts[k - 1]);
        const Vec2 grad_push =
            (m.hessian_action(pts[k - 1], xu[k - 1], xu[k - 1]) + J * curv[k - 1]) * h[k];
        const Vec2 push = J * xu[k - 1];
        out[k] = -h[k] * h[k] * (dot(grad_push, xu[k]) + dot(push, curv[k]));
    }
    return out;
}

struct FrameOptions {
    std::size_t curvature_N = 40;
    double convergence_tol = 1e-13;
};

/**
 * Assemble the full frame (Xu, h, curv, Xu h) over a window.  Power iteration
 * runs from the window start; h and the curvature window begin once the two
 * probes agree to convergence_tol.
 */
inline UnstableFrame build_frame(const MapModel& m, const std::vector<TorusPoint>& pts,
                                 const FrameOptions& opt = {}) {
    UnstableFrame f;
    const std::vector<Vec2> xu = power_iterate_unstable(m, pts, {1.0, 0.0});
    const std::vector<Vec2> xu2 = power_iterate_unstable(m, pts, {0.0, 1.0});

    // convergence index and measured angle-contraction ratio
    std::size_t conv = pts.size();
    double ratio_log = 0.0;
    std::size_t ratio_n = 0;
    double prev_angle = -1.0;
    for (std::size_t k = 0; k < pts.size(); ++k) {
        const double angle = line_angle(xu[k], xu2[k]);
        // fit the ratio only in the asymptotic regime, away from the initial
        // transient and from rounding noise
        if (prev_angle > 1e-12 && prev_angle < 0.1 && angle > 1e-15) {
            ratio_log += std::log(angle / prev_angle);
            ++ratio_n;
        }
        prev_angle = angle;
        if (angle < opt.convergence_tol && conv == pts.size()) conv = k;
    }
    if (conv == pts.size()) {
        std::ostringstream os;
        os << "build_frame: power iteration did not reach " << opt.convergence_tol << " within "
           << pts.size() << " points (final gap " << prev_angle << ")";
        throw WindowTooShort(os.str());
    }
    f.power_ratio = ratio_n ? std::exp(ratio_log / ratio_n) : 0.0;
    f.power_gap = line_angle(xu.back(), xu2.back());
    f.xu_valid_from = conv;

    const std::size_t from = conv + 1;
    const std::vector<double> h = compute_h(m, pts, xu, from);
    const CurvatureResult cr = solve_curvature(m, pts, xu, h, opt.curvature_N, from);
    f.curvature_residual = cr.residual;
    f.curvature_contraction = cr.contraction;
    const std::size_t xu_h_from = cr.first_valid + 1;
    const std::vector<double> xu_h = compute_Xu_h(m, pts, xu, h, cr.curv, xu_h_from);
    f.full_valid_from = xu_h_from;

    f.pts.resize(pts.size());
    for (std::size_t k = 0; k < pts.size(); ++k)
        f.pts[k] = {pts[k], xu[k], (k >= from ? h[k] : 0.0), cr.curv[k],
                    (k >= xu_h_from ? xu_h[k] : 0.0)};
    return f;
}

}  // namespace s3
