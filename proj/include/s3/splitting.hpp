#pragma once

// Step 2 of the split: X = Y + V - T_* V with V = (I - L)^{-1} X for the lift
// v -> P dT v (P projects out the unstable direction), so that Y lands on the
// unstable line.  The jet variant transports the unstable directional
// derivative alongside the value through the block-triangular lifted solve;
// its value slots run through the identical arithmetic as the plain solve.

#include <cmath>
#include <cstddef>
#include <sstream>
#include <vector>

#include "s3/errors.hpp"
#include "s3/model.hpp"
#include "s3/unstable.hpp"

namespace s3 {

struct SplitPoint {
    Vec2 V, dV;      // (I - L)^{-1} X and its unstable derivative
    Vec2 TV, dTV;    // T_* V evaluated from the stored V one point back
    Vec2 Y, dY;      // X - V + T_* V
    double a = 0.0;  // <Xu, Y>
    double xu_a = 0.0;
};

struct SplitFields {
    std::vector<SplitPoint> pts;
    std::size_t first_valid = 0;
    double parallel_residual = 0.0;        // max |Y - a Xu|
    double reconstruction_residual = 0.0;  // max |X - a Xu - V + T_* V|
    double contraction = 0.0;              // measured strength of the P dT lift
    bool has_derivatives = false;
};

namespace detail {

inline SplitFields split_impl(const MapModel& m, const std::vector<TorusPoint>& pts,
                              const UnstableFrame& frame, const VectorField& X, std::size_t N,
                              bool with_jet, const DerivativePolicy& policy) {
    const std::size_t from = frame.full_valid_from;
    if (N == 0) throw WindowTooShort("decompose: truncation order N must be positive");
    if (pts.size() < from + N + 1) {
        std::ostringstream os;
        os << "decompose: window of " << pts.size() << " points leaves "
           << (pts.size() > from ? pts.size() - from : 0)
           << " usable after frame burn-in, need N + 1 = " << N + 1;
        throw WindowTooShort(os.str());
    }
    const auto& fp = frame.pts;

    auto project = [&](std::size_t k, const Vec2& w) {  // P at index k
        return w - fp[k].xu * dot(fp[k].xu, w);
    };
    auto apply_B = [&](std::size_t k, const Vec2& v) {  // P dT across step k-1 -> k
        return project(k, m.jacobian(pts[k - 1]) * v);
    };
    // derivative of the lift along Xu, applied to the value slot:
    //   dB v = dP (dT v) + h P d2T(v, xu_prev)
    auto apply_dB = [&](std::size_t k, const Vec2& v) {
        const Vec2 push = m.jacobian(pts[k - 1]) * v;
        const Vec2 dP_push =
            (fp[k].curv * dot(fp[k].xu, push) + fp[k].xu * dot(fp[k].curv, push)) * -1.0;
        return dP_push + project(k, m.hessian_action(pts[k - 1], v, fp[k - 1].xu)) * fp[k].h;
    };
    auto src_v = [&](std::size_t k) { return X.value(pts[k]); };
    auto src_dv = [&](std::size_t k) { return field_derivative(X, pts[k], fp[k].xu, policy); };

    SplitFields out;
    out.pts.resize(pts.size());
    out.first_valid = from + N;
    out.has_derivatives = with_jet;

    for (std::size_t k = from + N - 1; k < pts.size(); ++k) {
        Vec2 acc = src_v(k - N + 1);
        Vec2 acc_d = with_jet ? src_dv(k - N + 1) : Vec2{};
        for (std::size_t j = k - N + 2; j <= k; ++j) {
            if (with_jet) acc_d = src_dv(j) + apply_dB(j, acc) + apply_B(j, acc_d) * fp[j].h;
            acc = src_v(j) + apply_B(j, acc);
        }
        out.pts[k].V = acc;
        out.pts[k].dV = acc_d;
    }

    for (std::size_t k = out.first_valid; k < pts.size(); ++k) {
        SplitPoint& s = out.pts[k];
        const Mat2 J = m.jacobian(pts[k - 1]);
        s.TV = J * out.pts[k - 1].V;
        s.Y = src_v(k) - s.V + s.TV;
        s.a = dot(fp[k].xu, s.Y);
        if (with_jet) {
            s.dTV = (m.hessian_action(pts[k - 1], out.pts[k - 1].V, fp[k - 1].xu) +
                     J * out.pts[k - 1].dV) *
                    fp[k].h;
            s.dY = src_dv(k) - s.dV + s.dTV;
            s.xu_a = dot(fp[k].curv, s.Y) + dot(fp[k].xu, s.dY);
        }

        const double par = norm(s.Y - fp[k].xu * s.a);
        const double rec = norm(src_v(k) - fp[k].xu * s.a - s.V + s.TV);
        if (par > out.parallel_residual) out.parallel_residual = par;
        if (rec > out.reconstruction_residual) out.reconstruction_residual = rec;
    }

    // contraction probe through the plain lift, started (and on degenerate
    // pushes restarted) in the complement fiber the lift acts on
    {
        Vec2 g{-fp[from].xu.y, fp[from].xu.x};
        double gn = 1.0, log_sum = 0.0;
        std::size_t counted = 0;
        for (std::size_t k = from + 1; k < pts.size(); ++k) {
            g = apply_B(k, g * (1.0 / gn));
            gn = norm(g);
            if (gn == 0.0) { g = {-fp[k].xu.y, fp[k].xu.x}; gn = 1.0; continue; }
            log_sum += std::log(gn);
            ++counted;
        }
        out.contraction = counted ? std::exp(log_sum / counted) : 0.0;
        if (out.contraction >= 1.0) {
            std::ostringstream os;
            os << "decompose: P dT lift fails to contract (measured factor " << out.contraction
               << ")";
            throw ContractionViolation(os.str());
        }
    }
    return out;
}

}  // namespace detail

/// Values-only decomposition: V, T_* V, Y, a over the window.
inline SplitFields decompose_field(const MapModel& m, const std::vector<TorusPoint>& pts,
                                   const UnstableFrame& frame, const VectorField& X,
                                   std::size_t N, const DerivativePolicy& policy = {}) {
    return detail::split_impl(m, pts, frame, X, N, false, policy);
}

/// Value + unstable-derivative decomposition; adds dV, dY, and Xu a.
inline SplitFields jet_decompose(const MapModel& m, const std::vector<TorusPoint>& pts,
                                 const UnstableFrame& frame, const VectorField& X, std::size_t N,
                                 const DerivativePolicy& policy = {}) {
    return detail::split_impl(m, pts, frame, X, N, true, policy);
}

}  // namespace s3
