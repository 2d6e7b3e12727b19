#pragma once

// Windowed evaluation at an arbitrary point.  Walks the inverse map far
// enough back that every fixed-N solve in the pipeline converges by the time
// it returns to the requested point, then reads the final window index.  One
// call is O(window length); independent calls share nothing, so they can be
// fanned out across threads with bit-identical results.

#include <cstddef>
#include <vector>

#include "s3/density.hpp"
#include "s3/model.hpp"
#include "s3/orbit.hpp"
#include "s3/splitting.hpp"
#include "s3/unstable.hpp"

namespace s3 {

struct EvalOptions {
    std::size_t n_O1 = 40;  // power-iteration budget and curvature truncation
    std::size_t n_O2 = 40;  // decomposition truncation
    std::size_t n_O3 = 40;  // density truncation
    DerivativePolicy policy{};
};

struct PointData {
    TorusPoint p{};
    Vec2 xu{};
    double h = 0.0;
    Vec2 curv{};
    double xu_h = 0.0;
    Vec2 V{}, dV{}, TV{}, dTV{}, Y{}, dY{};
    double a = 0.0, xu_a = 0.0;
    double rho0 = 0.0, rho = 0.0;
    double parallel_residual = 0.0;  // window diagnostics for this evaluation
    double rho0_residual = 0.0;
};

class PointEvaluator {
  public:
    PointEvaluator(MapModel m, VectorField X, EvalOptions opt = {})
        : m_(std::move(m)), X_(std::move(X)), opt_(opt) {
        window_ = 2 * opt_.n_O1 + std::max(opt_.n_O2, opt_.n_O3) + 8;
    }

    std::size_t window_length() const { return window_; }

    PointData at(const TorusPoint& p) const {
        const OrbitSegment back = evolve_orbit(m_, p, window_ - 1, Direction::backward);
        const std::vector<TorusPoint>& pts = as_forward_history(back).pts;

        FrameOptions fo;
        fo.curvature_N = opt_.n_O1;
        const UnstableFrame frame = build_frame(m_, pts, fo);
        const SplitFields split = jet_decompose(m_, pts, frame, X_, opt_.n_O2, opt_.policy);
        const Rho0Result r0 = solve_rho0(frame, opt_.n_O3);
        const DensityField dens = assemble_rho(split, r0);

        const std::size_t k = pts.size() - 1;
        PointData d;
        d.p = pts[k];
        d.xu = frame.pts[k].xu;
        d.h = frame.pts[k].h;
        d.curv = frame.pts[k].curv;
        d.xu_h = frame.pts[k].xu_h;
        d.V = split.pts[k].V;
        d.dV = split.pts[k].dV;
        d.TV = split.pts[k].TV;
        d.dTV = split.pts[k].dTV;
        d.Y = split.pts[k].Y;
        d.dY = split.pts[k].dY;
        d.a = split.pts[k].a;
        d.xu_a = split.pts[k].xu_a;
        d.rho0 = dens.rho0[k];
        d.rho = dens.rho[k];
        d.parallel_residual = split.parallel_residual;
        d.rho0_residual = r0.residual;
        return d;
    }

  private:
    MapModel m_;
    VectorField X_;
    EvalOptions opt_;
    std::size_t window_ = 0;
};

}  // namespace s3
