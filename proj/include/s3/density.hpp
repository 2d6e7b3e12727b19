#pragma once

// Step 3 of the split: the integration-by-parts densities rho0 and
// rho = a rho0 - Xu a, which satisfy mu(Y g) = mu(g rho).  rho0 solves the
// scalar fixed point rho0 = -Xu h / h + h * rho0(prev) along the window.

#include <cmath>
#include <cstddef>
#include <sstream>
#include <vector>

#include "s3/errors.hpp"
#include "s3/model.hpp"
#include "s3/neumann.hpp"
#include "s3/quadrature.hpp"
#include "s3/splitting.hpp"
#include "s3/unstable.hpp"

namespace s3 {

struct Rho0Result {
    std::vector<double> rho0;     // aligned with the window; invalid entries 0
    std::size_t first_valid = 0;
    double residual = 0.0;        // a-posteriori residual of the fixed point
    double h_contraction = 0.0;   // geometric mean of h along the window
};

inline Rho0Result solve_rho0(const UnstableFrame& frame, std::size_t N) {
    const std::size_t from = frame.full_valid_from;
    if (N == 0) throw WindowTooShort("solve_rho0: truncation order N must be positive");
    if (frame.pts.size() < from + N + 1) {
        std::ostringstream os;
        os << "solve_rho0: window of " << frame.pts.size() << " points leaves "
           << (frame.pts.size() > from ? frame.pts.size() - from : 0)
           << " usable after frame burn-in, need N + 1 = " << N + 1;
        throw WindowTooShort(os.str());
    }
    const auto& fp = frame.pts;
    const auto r = neumann_solve<double>(
        fp.size() - from, N, [&](std::size_t k, double s) { return fp[from + k].h * s; },
        [&](std::size_t k) { return -fp[from + k].xu_h / fp[from + k].h; },
        [](double s) { return std::fabs(s); }, 1.0);

    Rho0Result out;
    out.rho0.assign(fp.size(), 0.0);
    for (std::size_t k = r.first_valid; k < r.v.size(); ++k) out.rho0[from + k] = r.v[k];
    out.first_valid = from + r.first_valid;
    out.residual = r.max_residual;
    out.h_contraction = r.contraction;
    return out;
}

struct DensityField {
    std::vector<double> rho0, rho;
    std::size_t first_valid = 0;
    double residual = 0.0;
    double h_contraction = 0.0;
};

/// rho = a rho0 - Xu a pointwise; needs the jet decomposition for Xu a.
inline DensityField assemble_rho(const SplitFields& split, const Rho0Result& r0) {
    if (!split.has_derivatives)
        throw DerivativeUnavailable("assemble_rho: Xu a requires the jet decomposition");
    DensityField d;
    d.rho0 = r0.rho0;
    d.rho.assign(split.pts.size(), 0.0);
    d.first_valid = split.first_valid > r0.first_valid ? split.first_valid : r0.first_valid;
    d.residual = r0.residual;
    d.h_contraction = r0.h_contraction;
    for (std::size_t k = d.first_valid; k < split.pts.size(); ++k)
        d.rho[k] = split.pts[k].a * r0.rho0[k] - split.pts[k].xu_a;
    return d;
}

struct AdjointCheck {
    MonteCarloEstimate lhs;         // mean of (Yf) g
    MonteCarloEstimate rhs;         // mean of f (-Yg + rho g)
    MonteCarloEstimate difference;  // batch stats of the pointwise difference
    bool pass = false;
};

/**
 * Checks mu((Yf) g) = mu(f (-Yg + rho g)) over the valid part of the window,
 * where Y acts as the first-order operator Yu = <grad u, Y>.  The pass/fail
 * verdict uses the batch error bar of the pointwise difference at 3 sigma.
 */
inline AdjointCheck adjoint_identity_check(const std::vector<TorusPoint>& pts,
                                           const SplitFields& split, const DensityField& dens,
                                           const Observable& f, const Observable& g) {
    const std::size_t from = dens.first_valid;
    if (pts.size() <= from + 1)
        throw WindowTooShort("adjoint_identity_check: no valid points past the burn-in");
    std::vector<double> ls, rs, ds;
    ls.reserve(pts.size() - from);
    for (std::size_t k = from; k < pts.size(); ++k) {
        const Vec2 Y = split.pts[k].Y;
        const double lhs = dot(f.gradient(pts[k]), Y) * g.value(pts[k]);
        const double rhs =
            f.value(pts[k]) * (-dot(g.gradient(pts[k]), Y) + dens.rho[k] * g.value(pts[k]));
        ls.push_back(lhs);
        rs.push_back(rhs);
        ds.push_back(lhs - rhs);
    }
    AdjointCheck c;
    c.lhs = batch_estimate(ls);
    c.rhs = batch_estimate(rs);
    c.difference = batch_estimate(ds);
    c.pass = std::fabs(c.difference.mean) <= 3.0 * c.difference.std_error;
    return c;
}

}  // namespace s3
