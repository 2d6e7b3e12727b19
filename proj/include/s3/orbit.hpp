#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "s3/model.hpp"

namespace s3 {

enum class Direction { forward, backward };

/** n+1 consecutive points of an orbit, earliest-computed first. */
struct OrbitSegment {
    std::vector<TorusPoint> pts;
    Direction dir = Direction::forward;
};

/// Uniform point on the torus from a 64-bit seed (fixed generator, so the
/// draw is reproducible across platforms).
inline TorusPoint seed_point(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    auto unit = [&rng]() { return (rng() >> 11) * 0x1.0p-53; };
    const double x = unit();
    const double y = unit();
    return {x, y};
}

inline OrbitSegment evolve_orbit(const MapModel& m, const TorusPoint& x0, std::size_t n,
                                 Direction dir = Direction::forward) {
    OrbitSegment seg;
    seg.dir = dir;
    seg.pts.reserve(n + 1);
    seg.pts.push_back(wrap(x0));
    const auto& step = (dir == Direction::forward) ? m.forward : m.inverse;
    for (std::size_t k = 0; k < n; ++k) seg.pts.push_back(step(seg.pts.back()));
    return seg;
}

/// Max gap |T(x_k) - x_{k+1}| over the segment (0 for freshly generated
/// orbits; nonzero after lossy round-trips through text formats).
inline double max_step_error(const MapModel& m, const OrbitSegment& seg) {
    const auto& step = (seg.dir == Direction::forward) ? m.forward : m.inverse;
    double worst = 0.0;
    for (std::size_t k = 0; k + 1 < seg.pts.size(); ++k) {
        const double e = torus_distance(step(seg.pts[k]), seg.pts[k + 1]);
        if (e > worst) worst = e;
    }
    return worst;
}

/// View a backward segment as the forward-ordered history of its start point:
/// pts[0] = T^{-n} x, ..., pts[n] = x.
inline OrbitSegment as_forward_history(const OrbitSegment& seg) {
    OrbitSegment out;
    out.dir = Direction::forward;
    out.pts.assign(seg.pts.rbegin(), seg.pts.rend());
    return out;
}

}  // namespace s3
