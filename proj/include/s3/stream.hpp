#pragma once

// Streaming evaluator for the full frame / split / density pipeline.  The
// window solves in unstable.hpp, splitting.hpp and density.hpp truncate
// contracting recursions after N steps; here the same recursions simply never
// stop, so each tracked quantity forgets its initialization geometrically and
// agrees with its windowed counterpart up to the truncation tail.  Cost is
// O(1) per orbit step, which is what makes million-sample runs cheap.
//
// Staging: the first burn-in window settles the unstable direction (a second
// probe measures the contraction ratio, the canonical sign is fixed once at
// the end and propagated from there), the second settles V and its jet, the
// third settles rho0.  Samples are meaningful once all three have passed.

#include <cmath>
#include <cstddef>
#include <deque>
#include <sstream>
#include <vector>

#include "s3/density.hpp"
#include "s3/errors.hpp"
#include "s3/model.hpp"
#include "s3/orbit.hpp"
#include "s3/splitting.hpp"
#include "s3/unstable.hpp"

namespace s3 {

struct StreamOptions {
    std::size_t n_O1 = 40;  // frame burn-in: power iteration, curvature, Xu h
    std::size_t n_O2 = 40;  // decomposition burn-in: V and its jet
    std::size_t n_O3 = 40;  // density burn-in: rho0
    DerivativePolicy policy{};
};

/// Everything the pipeline knows at one orbit point.  Fields belonging to a
/// stage that has not started yet are zero.
struct StreamSample {
    TorusPoint p{};
    Vec2 xu{};
    double h = 0.0;
    Vec2 curv{};
    double xu_h = 0.0;
    Vec2 V{}, dV{};
    Vec2 TV{}, dTV{};
    Vec2 Y{}, dY{};
    double a = 0.0, xu_a = 0.0;
    double rho0 = 0.0, rho = 0.0;
};

/// Fixed-window re-solve at the stream's current position: runs the whole
/// windowed pipeline over the retained history and reports its residuals next
/// to the disagreement with the streamed values.  This is the diagnostic the
/// streaming recursions themselves cannot provide.
struct CheckpointDiagnostics {
    std::size_t at_step = 0;
    double power_ratio = 0.0, power_gap = 0.0;
    double curvature_residual = 0.0, curvature_contraction = 0.0;
    double parallel_residual = 0.0, reconstruction_residual = 0.0;
    double split_contraction = 0.0;
    double rho0_residual = 0.0, h_contraction = 0.0;
    double stream_vs_window = 0.0;  // max componentwise gap, sign-aligned
};

class S3Stream {
  public:
    S3Stream(MapModel m, VectorField X, const TorusPoint& x0, StreamOptions opt = {})
        : m_(std::move(m)), X_(std::move(X)), opt_(opt) {
        if (opt_.n_O1 == 0 || opt_.n_O2 == 0 || opt_.n_O3 == 0)
            throw WindowTooShort("stream: all three burn-in windows must be positive");
        cur_.p = wrap(x0);
        cur_.xu = {1.0, 0.0};
        probe_ = {0.0, 1.0};
        history_capacity_ = 2 * opt_.n_O1 + std::max(opt_.n_O2, opt_.n_O3) + 8;
        history_.push_back(cur_.p);
    }

    std::size_t steps() const { return step_; }
    std::size_t ready_at() const { return opt_.n_O1 + opt_.n_O2 + opt_.n_O3; }
    bool ready() const { return step_ >= ready_at(); }
    bool history_full() const { return history_.size() >= history_capacity_; }
    const StreamSample& current() const { return cur_; }
    const StreamOptions& options() const { return opt_; }
    const MapModel& map() const { return m_; }
    const VectorField& field() const { return X_; }

    // diagnostics, populated as the corresponding stages run
    double power_ratio() const { return ratio_n_ ? std::exp(ratio_log_ / ratio_n_) : 0.0; }
    double power_gap() const { return power_gap_; }
    double h_geometric_mean() const { return h_n_ ? std::exp(h_log_ / h_n_) : 0.0; }
    double lift_contraction() const { return g_n_ ? std::exp(g_log_ / g_n_) : 0.0; }

    const StreamSample& advance() {
        const StreamSample prev = cur_;
        const TorusPoint p_prev = prev.p;
        const Mat2 J = m_.jacobian(p_prev);
        cur_.p = m_.forward(p_prev);
        ++step_;

        Vec2 xu_prev = prev.xu;
        Vec2 push = J * xu_prev;
        const double r = norm(push);
        if (r == 0.0) {
            std::ostringstream os;
            os << "stream: jacobian annihilates the unstable iterate at step " << step_;
            throw NonHyperbolicSample(os.str());
        }
        cur_.xu = push * (1.0 / r);
        cur_.h = 1.0 / r;
        if (step_ > opt_.n_O1 && r <= 1.0) {
            std::ostringstream os;
            os << "stream: unstable pairing " << r << " <= 1 at step " << step_
               << " (map not expanding along the tracked direction)";
            throw NonHyperbolicSample(os.str());
        }

        if (!sign_fixed_) {
            probe_ = normalized(J * probe_);
            const double angle = line_angle(cur_.xu, probe_);
            if (prev_angle_ > 1e-12 && prev_angle_ < 0.1 && angle > 1e-15) {
                ratio_log_ += std::log(angle / prev_angle_);
                ++ratio_n_;
            }
            guard_.observe(angle, prev_angle_);
            prev_angle_ = angle;
            if (guard_.tripped()) {
                std::ostringstream os;
                os << "stream: probe angle stalled at " << angle << " by step " << step_
                   << " (no unstable contraction from this start)";
                throw DegenerateStart(os.str());
            }
            if (step_ == opt_.n_O1) {
                power_gap_ = angle;
                if (angle > 1e-10) {
                    std::ostringstream os;
                    os << "stream: power iteration gap " << angle << " after burn-in window of "
                       << opt_.n_O1 << " steps (needs < 1e-10)";
                    throw WindowTooShort(os.str());
                }
                if (cur_.xu.x < 0.0 || (cur_.xu.x == 0.0 && cur_.xu.y < 0.0)) {
                    // canonical sign, applied to the whole section at once:
                    // the quantities already in flight are even under it
                    cur_.xu = -cur_.xu;
                    xu_prev = -xu_prev;
                    push = -push;
                }
                sign_fixed_ = true;
                lift_probe_ = {-cur_.xu.y, cur_.xu.x};
            }
        }

        auto proj = [&](const Vec2& w) { return w - cur_.xu * dot(cur_.xu, w); };

        // curvature and Xu h, same per-step arithmetic as the window solves
        const Vec2 hess_uu = m_.hessian_action(p_prev, xu_prev, xu_prev);
        const double h2 = cur_.h * cur_.h;
        cur_.curv = proj(hess_uu) * h2 + proj(J * prev.curv) * h2;
        const Vec2 grad_push = (hess_uu + J * prev.curv) * cur_.h;
        cur_.xu_h = -h2 * (dot(grad_push, cur_.xu) + dot(push, cur_.curv));

        if (step_ >= opt_.n_O1) {
            const Vec2 x_here = X_.value(cur_.p);
            const Vec2 dx_here = field_derivative(X_, cur_.p, cur_.xu, opt_.policy);
            if (step_ == opt_.n_O1) {
                cur_.V = x_here;
                cur_.dV = dx_here;
                cur_.TV = cur_.dTV = cur_.Y = cur_.dY = {};
                cur_.a = cur_.xu_a = 0.0;
            } else {
                const Vec2 push_V = J * prev.V;
                const Vec2 dP_push =
                    (cur_.curv * dot(cur_.xu, push_V) + cur_.xu * dot(cur_.curv, push_V)) * -1.0;
                const Vec2 hess_Vu = m_.hessian_action(p_prev, prev.V, xu_prev);
                cur_.dV = dx_here + (dP_push + proj(hess_Vu) * cur_.h) + proj(J * prev.dV) * cur_.h;
                cur_.V = x_here + proj(push_V);
                cur_.TV = push_V;
                cur_.Y = x_here - cur_.V + cur_.TV;
                cur_.a = dot(cur_.xu, cur_.Y);
                cur_.dTV = (hess_Vu + J * prev.dV) * cur_.h;
                cur_.dY = dx_here - cur_.dV + cur_.dTV;
                cur_.xu_a = dot(cur_.curv, cur_.Y) + dot(cur_.xu, cur_.dY);
            }
        }

        if (step_ >= opt_.n_O1 + opt_.n_O2) {
            const double src = -cur_.xu_h / cur_.h;
            cur_.rho0 = (step_ == opt_.n_O1 + opt_.n_O2) ? src : src + cur_.h * prev.rho0;
            cur_.rho = cur_.a * cur_.rho0 - cur_.xu_a;
        }

        if (step_ > opt_.n_O1) {
            h_log_ += std::log(cur_.h);
            ++h_n_;
            lift_probe_ = proj(J * (lift_probe_ * (1.0 / lift_norm_)));
            lift_norm_ = norm(lift_probe_);
            if (lift_norm_ == 0.0) {
                lift_probe_ = {-cur_.xu.y, cur_.xu.x};
                lift_norm_ = 1.0;
            } else {
                g_log_ += std::log(lift_norm_);
                ++g_n_;
            }
        }

        history_.push_back(cur_.p);
        if (history_.size() > history_capacity_) history_.pop_front();
        return cur_;
    }

    /// Re-solves the retained window with the fixed-N machinery and compares.
    /// Call after the stream is ready; propagates the window solvers' errors.
    CheckpointDiagnostics checkpoint() const {
        if (history_.size() < history_capacity_)
            throw WindowTooShort("stream checkpoint: history not yet filled");
        const std::vector<TorusPoint> pts(history_.begin(), history_.end());

        FrameOptions fo;
        fo.curvature_N = opt_.n_O1;
        const UnstableFrame frame = build_frame(m_, pts, fo);
        const SplitFields split = jet_decompose(m_, pts, frame, X_, opt_.n_O2, opt_.policy);
        const Rho0Result r0 = solve_rho0(frame, opt_.n_O3);
        const DensityField dens = assemble_rho(split, r0);

        CheckpointDiagnostics d;
        d.at_step = step_;
        d.power_ratio = frame.power_ratio;
        d.power_gap = frame.power_gap;
        d.curvature_residual = frame.curvature_residual;
        d.curvature_contraction = frame.curvature_contraction;
        d.parallel_residual = split.parallel_residual;
        d.reconstruction_residual = split.reconstruction_residual;
        d.split_contraction = split.contraction;
        d.rho0_residual = r0.residual;
        d.h_contraction = r0.h_contraction;

        const std::size_t k = pts.size() - 1;
        const FramePoint& fp = frame.pts[k];
        const SplitPoint& sp = split.pts[k];
        const double s = (dot(cur_.xu, fp.xu) >= 0.0) ? 1.0 : -1.0;  // odd quantities flip
        double gap = 0.0;
        auto acc = [&gap](double v) {
            if (v > gap) gap = v;
        };
        acc(norm(cur_.xu - fp.xu * s));
        acc(std::abs(cur_.h - fp.h));
        acc(norm(cur_.curv - fp.curv));
        acc(std::abs(cur_.xu_h - fp.xu_h * s));
        acc(norm(cur_.V - sp.V));
        acc(norm(cur_.dV - sp.dV * s));
        acc(norm(cur_.Y - sp.Y));
        acc(std::abs(cur_.a - sp.a * s));
        acc(std::abs(cur_.xu_a - sp.xu_a));
        acc(std::abs(cur_.rho0 - dens.rho0[k] * s));
        acc(std::abs(cur_.rho - dens.rho[k]));
        d.stream_vs_window = gap;
        return d;
    }

  private:
    MapModel m_;
    VectorField X_;
    StreamOptions opt_;
    StreamSample cur_{};
    std::size_t step_ = 0;

    Vec2 probe_{};  // second power-iteration probe, live until the sign fix
    detail::StagnationGuard guard_;
    double prev_angle_ = -1.0;
    double ratio_log_ = 0.0;
    std::size_t ratio_n_ = 0;
    double power_gap_ = 0.0;
    bool sign_fixed_ = false;

    double h_log_ = 0.0;
    std::size_t h_n_ = 0;
    Vec2 lift_probe_{};
    double lift_norm_ = 1.0;
    double g_log_ = 0.0;
    std::size_t g_n_ = 0;

    std::deque<TorusPoint> history_;
    std::size_t history_capacity_ = 0;
};

}  // namespace s3
