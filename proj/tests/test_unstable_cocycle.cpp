#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "s3/maps.hpp"
#include "s3/orbit.hpp"
#include "s3/unstable.hpp"
#include "support/oracles.hpp"

using namespace s3;

namespace {

// Frame quantities at an arbitrary point via a fresh backward window; used as
// the finite-difference oracle for the derivative fields (it re-runs power
// iteration at shifted base points, independent of the solves under test).
struct PointFrame {
    Vec2 xu;
    double h;
};

PointFrame frame_at(const MapModel& m, const TorusPoint& p, std::size_t W = 70) {
    const OrbitSegment hist = as_forward_history(evolve_orbit(m, p, W, Direction::backward));
    const auto xu = power_iterate_unstable(m, hist.pts, {1.0, 0.0});
    const auto h = compute_h(m, hist.pts, xu, W);
    return {xu.back(), h.back()};
}

MapModel synthetic_linear(const Mat2& J) {
    MapModel m;
    m.name = "synthetic";
    m.forward = [](const TorusPoint& p) { return p; };
    m.inverse = [](const TorusPoint& p) { return p; };
    m.jacobian = [J](const TorusPoint&) { return J; };
    m.hessian_action = [](const TorusPoint&, const Vec2&, const Vec2&) { return Vec2{}; };
    return m;
}

const double lam_u = oracle::eig2(2, 1, 1, 1).lambda_max;
const double lam_s = oracle::eig2(2, 1, 1, 1).lambda_min;

}  // namespace

TEST_CASE("power iteration converges to the cat unstable eigendirection") {
    const MapModel m = cat_map();
    const auto s = oracle::eig2(2, 1, 1, 1);
    const OrbitSegment orb = evolve_orbit(m, seed_point(3), 60);

    const auto xu = power_iterate_unstable(m, orb.pts, {1.0, 0.0});
    REQUIRE(xu.size() == orb.pts.size());
    for (std::size_t k = 45; k < xu.size(); ++k) {
        CHECK(std::fabs(xu[k].x - s.evec_max_x) <= 1e-12);
        CHECK(std::fabs(xu[k].y - s.evec_max_y) <= 1e-12);
    }
    CHECK_THAT(xu.back().x, Catch::Matchers::WithinAbs(0.8506508, 5e-8));
    CHECK_THAT(xu.back().y, Catch::Matchers::WithinAbs(0.5257311, 5e-8));

    // starting exactly on the eigendirection is a fixed point of the iteration
    const auto fixed = power_iterate_unstable(m, orb.pts, {s.evec_max_x, s.evec_max_y});
    for (const auto& v : fixed) {
        CHECK(std::fabs(v.x - s.evec_max_x) <= 1e-14);
        CHECK(std::fabs(v.y - s.evec_max_y) <= 1e-14);
    }
}

TEST_CASE("measured power-iteration contraction matches the eigenvalue ratio") {
    const MapModel m = cat_map();
    const OrbitSegment orb = evolve_orbit(m, seed_point(5), 120);
    const UnstableFrame f = build_frame(m, orb.pts);
    const double want = lam_s / lam_u;
    CHECK(std::fabs(f.power_ratio - want) <= 0.1 * want);
    CHECK(f.power_gap <= 1e-13);
}

TEST_CASE("a rotation cocycle is flagged as a degenerate start") {
    const double c = std::cos(0.7), s = std::sin(0.7);
    const MapModel m = synthetic_linear({c, -s, s, c});
    std::vector<TorusPoint> pts(40, {0.3, 0.4});
    CHECK_THROWS_AS(power_iterate_unstable(m, pts, {1.0, 0.0}), DegenerateStart);
}

TEST_CASE("h on the cat map is the constant reciprocal eigenvalue") {
    const MapModel m = cat_map();
    const OrbitSegment orb = evolve_orbit(m, seed_point(7), 80);
    const auto xu = power_iterate_unstable(m, orb.pts, {1.0, 0.0});
    const auto h = compute_h(m, orb.pts, xu, 50);
    for (std::size_t k = 50; k < h.size(); ++k) {
        CHECK(std::fabs(h[k] - 1.0 / lam_u) <= 1e-10);
        CHECK(std::fabs(h[k] - lam_s) <= 1e-10);  // for the cat map these coincide
    }
}

TEST_CASE("a contracting sample trips the hyperbolicity check") {
    const MapModel m = synthetic_linear({0.5, 0.0, 0.0, 0.5});
    std::vector<TorusPoint> pts(5, {0.1, 0.1});
    std::vector<Vec2> xu(5, {1.0, 0.0});
    CHECK_THROWS_AS(compute_h(m, pts, xu), NonHyperbolicSample);
}

TEST_CASE("h stays near the cat value on the perturbed family and decays on average") {
    const MapModel m = perturbed_cat_map(1e-2, fields::sinusoid(1.0, 1, 0, {0.0, 1.0}));
    const OrbitSegment orb = evolve_orbit(m, seed_point(11), 2080);
    const auto xu = power_iterate_unstable(m, orb.pts, {1.0, 0.0});
    const auto h = compute_h(m, orb.pts, xu, 60);

    double sup = 0.0;
    for (std::size_t k = 60; k < h.size(); ++k) sup = std::max(sup, std::fabs(h[k] - 1.0 / lam_u));
    CHECK(sup <= 0.05);  // measured bound for this t, frozen

    // running geometric mean of h: below 1 from 50 samples on
    double log_sum = 0.0;
    std::size_t n = 0;
    for (std::size_t k = 60; k < h.size(); ++k) {
        log_sum += std::log(h[k]);
        ++n;
        if (n >= 50) CHECK(std::exp(log_sum / n) < 1.0);
    }
}

TEST_CASE("curvature vanishes identically for the linear map") {
    const MapModel m = cat_map();
    const OrbitSegment orb = evolve_orbit(m, seed_point(13), 140);
    const UnstableFrame f = build_frame(m, orb.pts);
    for (std::size_t k = f.full_valid_from; k < f.pts.size(); ++k) {
        CHECK(norm(f.pts[k].curv) <= 1e-10);
        CHECK(std::fabs(f.pts[k].xu_h) <= 1e-10);
    }
    CHECK(f.curvature_residual <= 1e-12);
    // lift strength h^2 |P dT| restricted to the complement: lambda_s^3 exactly
    CHECK_THAT(f.curvature_contraction, Catch::Matchers::WithinAbs(lam_s * lam_s * lam_s, 1e-9));
}

TEST_CASE("curvature is orthogonal to the unstable direction") {
    const MapModel m = perturbed_cat_map(1e-2, fields::sinusoid(1.0, 1, 0, {0.0, 1.0}));
    const OrbitSegment orb = evolve_orbit(m, seed_point(17), 160);
    const UnstableFrame f = build_frame(m, orb.pts);
    REQUIRE(f.full_valid_from < f.pts.size());
    for (std::size_t k = f.full_valid_from; k < f.pts.size(); ++k)
        CHECK(std::fabs(dot(f.pts[k].curv, f.pts[k].xu)) <= 1e-10);
    CHECK(f.curvature_residual <= 1e-8);
}

TEST_CASE("curvature matches a finite-difference derivative of Xu along itself") {
    const MapModel m = perturbed_cat_map(1e-2, fields::sinusoid(1.0, 1, 0, {0.0, 1.0}));
    const OrbitSegment orb = evolve_orbit(m, seed_point(19), 130);
    const UnstableFrame f = build_frame(m, orb.pts);

    const double eps = 1e-4;
    for (std::size_t k = f.pts.size() - 4; k < f.pts.size(); ++k) {
        const TorusPoint p = f.pts[k].p;
        const Vec2 u = f.pts[k].xu;
        const Vec2 plus = frame_at(m, translate(p, u * eps)).xu;
        const Vec2 minus = frame_at(m, translate(p, u * -eps)).xu;
        const Vec2 fd = (plus - minus) * (0.5 / eps);
        const double scale = std::max(norm(f.pts[k].curv), 1e-3);
        CHECK(norm(fd - f.pts[k].curv) <= 1e-3 * scale + 1e-6);
    }
}

TEST_CASE("Xu h matches a finite-difference derivative of h along Xu") {
    const MapModel m = perturbed_cat_map(1e-2, fields::sinusoid(1.0, 1, 0, {0.0, 1.0}));
    const OrbitSegment orb = evolve_orbit(m, seed_point(23), 130);
    const UnstableFrame f = build_frame(m, orb.pts);

    const double eps = 1e-4;
    for (std::size_t k = f.pts.size() - 4; k < f.pts.size(); ++k) {
        const TorusPoint p = f.pts[k].p;
        const Vec2 u = f.pts[k].xu;
        const double plus = frame_at(m, translate(p, u * eps)).h;
        const double minus = frame_at(m, translate(p, u * -eps)).h;
        const double fd = (plus - minus) * (0.5 / eps);
        const double scale = std::max(std::fabs(f.pts[k].xu_h), 1e-3);
        CHECK(std::fabs(fd - f.pts[k].xu_h) <= 1e-3 * scale + 1e-6);
    }
}

TEST_CASE("short windows are rejected with the window error") {
    const MapModel m = perturbed_cat_map(1e-2, fields::sinusoid(1.0, 1, 0, {0.0, 1.0}));
    const OrbitSegment orb = evolve_orbit(m, seed_point(29), 30);
    const auto xu = power_iterate_unstable(m, orb.pts, {1.0, 0.0});
    const auto h = compute_h(m, orb.pts, xu, 1);
    CHECK_THROWS_AS(solve_curvature(m, orb.pts, xu, h, 40, 1), WindowTooShort);
}
