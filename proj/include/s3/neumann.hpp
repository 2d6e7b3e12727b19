#pragma once

// Truncated Neumann solves of v = w + L v along a backward orbit, where
// (L v)(x) = A(x) v(T^{-1} x) and the per-step lift A contracts.  The window
// is passed earliest-point-first, so "one step back in time" means "one index
// down".  v_N(x) sums N terms of the series, accumulated oldest-first:
//
//   v_N(x_k) = src(x_k) + A_k ( src(x_{k-1}) + A_{k-1} ( ... ) )
//
// which is exactly sum_{n<N} (cocycle over n steps) src(T^{-n} x_k).

#include <cmath>
#include <cstddef>
#include <sstream>
#include <vector>

#include "s3/errors.hpp"

namespace s3 {

template <class Fiber>
struct NeumannResult {
    std::vector<Fiber> v;        // indexed like the window; entries < first_valid are default
    std::size_t first_valid = 0; // first index with a full N-term value
    double max_residual = 0.0;   // max |v_N - L v_N - w| over checkable indices
    double contraction = 0.0;    // geometric-mean per-step probe factor (lift strength)
};

/**
 * Windowed Neumann solve.
 *
 * step(k, f): apply the lift across the step from index k-1 to index k.
 * src(k): the source at index k.  norm(f): fiber norm.  probe: a nonzero
 * fiber used to measure the lift's contraction along the window.
 *
 * Throws WindowTooShort when n_pts < N + 1 and ContractionViolation when the
 * probe fails to contract on (geometric) average, unless enforce_contraction
 * is cleared by a caller that only wants the measurement.
 */
template <class Fiber, class Step, class Source, class Norm>
NeumannResult<Fiber> neumann_solve(std::size_t n_pts, std::size_t N, Step step, Source src,
                                   Norm norm_of, Fiber probe, bool enforce_contraction = true) {
    if (N == 0) throw WindowTooShort("neumann_solve: truncation order N must be positive");
    if (n_pts < N + 1) {
        std::ostringstream os;
        os << "neumann_solve: window has " << n_pts << " points, need at least N + 1 = " << N + 1;
        throw WindowTooShort(os.str());
    }

    NeumannResult<Fiber> out;
    out.v.resize(n_pts);
    out.first_valid = N - 1;

    for (std::size_t k = N - 1; k < n_pts; ++k) {
        Fiber acc = src(k - N + 1);
        for (std::size_t j = k - N + 2; j <= k; ++j) acc = src(j) + step(j, acc);
        out.v[k] = acc;
    }

    for (std::size_t k = N; k < n_pts; ++k) {
        const Fiber r = out.v[k] - (src(k) + step(k, out.v[k - 1]));
        const double rn = norm_of(r);
        if (rn > out.max_residual) out.max_residual = rn;
    }

    // contraction probe: push a unit fiber through the lift, renormalizing
    Fiber g = probe;
    double gn = norm_of(g);
    double log_sum = 0.0;
    std::size_t counted = 0;
    for (std::size_t k = 1; k < n_pts; ++k) {
        if (gn == 0.0) { g = probe; gn = norm_of(g); continue; }
        g = step(k, g * (1.0 / gn));
        gn = norm_of(g);
        if (k == 1) continue;  // skip the transient into the lift's range
        if (gn > 0.0) {
            log_sum += std::log(gn);
            ++counted;
        }
    }
    out.contraction = counted ? std::exp(log_sum / counted) : 0.0;
    if (enforce_contraction && out.contraction >= 1.0) {
        std::ostringstream os;
        os << "neumann_solve: lift fails to contract over the window (measured factor "
           << out.contraction << ")";
        throw ContractionViolation(os.str());
    }
    return out;
}

}  // namespace s3
