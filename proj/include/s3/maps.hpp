#pragma once

#include <cmath>
#include <memory>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "s3/model.hpp"

namespace s3 {

inline constexpr double two_pi = 2.0 * std::numbers::pi;

namespace fields {

inline VectorField zero() {
    VectorField X;
    X.name = "zero";
    X.value = [](const TorusPoint&) { return Vec2{0.0, 0.0}; };
    X.jacobian = [](const TorusPoint&) { return Mat2{}; };
    X.hessian_action = [](const TorusPoint&, const Vec2&, const Vec2&) { return Vec2{0.0, 0.0}; };
    return X;
}

inline VectorField constant(double cx, double cy) {
    VectorField X;
    std::ostringstream os;
    os << "constant(" << cx << ", " << cy << ")";
    X.name = os.str();
    X.value = [=](const TorusPoint&) { return Vec2{cx, cy}; };
    X.jacobian = [](const TorusPoint&) { return Mat2{}; };
    X.hessian_action = [](const TorusPoint&, const Vec2&, const Vec2&) { return Vec2{0.0, 0.0}; };
    return X;
}

/// X(p) = amp * sin(2 pi (kx x + ky y) + phase) * dir, with integer frequencies.
inline VectorField sinusoid(double amp, int kx, int ky, Vec2 dir, double phase = 0.0) {
    VectorField X;
    std::ostringstream os;
    os << "sinusoid(amp=" << amp << ", k=(" << kx << "," << ky << "), dir=(" << dir.x << ","
       << dir.y << "), phase=" << phase << ")";
    X.name = os.str();
    const Vec2 k{static_cast<double>(kx), static_cast<double>(ky)};
    X.value = [=](const TorusPoint& p) {
        const double arg = two_pi * (k.x * p.x + k.y * p.y) + phase;
        return dir * (amp * std::sin(arg));
    };
    X.jacobian = [=](const TorusPoint& p) {
        const double arg = two_pi * (k.x * p.x + k.y * p.y) + phase;
        return outer(dir, k) * (two_pi * amp * std::cos(arg));
    };
    X.hessian_action = [=](const TorusPoint& p, const Vec2& u, const Vec2& v) {
        const double arg = two_pi * (k.x * p.x + k.y * p.y) + phase;
        return dir * (-two_pi * two_pi * amp * std::sin(arg) * dot(k, u) * dot(k, v));
    };
    return X;
}

/// Pointwise sum of fields.  Derivative callbacks are kept only if every
/// summand provides them.
inline VectorField sum(std::vector<VectorField> terms) {
    VectorField X;
    X.name = "sum";
    for (const VectorField& t : terms) X.name += ":" + t.name;
    auto shared = std::make_shared<std::vector<VectorField>>(std::move(terms));
    X.value = [shared](const TorusPoint& p) {
        Vec2 v{0.0, 0.0};
        for (const VectorField& t : *shared) v = v + t.value(p);
        return v;
    };
    bool all_jac = true, all_hess = true;
    for (const VectorField& t : *shared) {
        all_jac = all_jac && static_cast<bool>(t.jacobian);
        all_hess = all_hess && static_cast<bool>(t.hessian_action);
    }
    if (all_jac)
        X.jacobian = [shared](const TorusPoint& p) {
            Mat2 J{};
            for (const VectorField& t : *shared) J = J + t.jacobian(p);
            return J;
        };
    if (all_hess)
        X.hessian_action = [shared](const TorusPoint& p, const Vec2& u, const Vec2& v) {
            Vec2 w{0.0, 0.0};
            for (const VectorField& t : *shared) w = w + t.hessian_action(p, u, v);
            return w;
        };
    return X;
}

/// X = V0 - T_* V0: the exact coboundary of V0 under the given map.  Its
/// response vanishes for any observable, which makes it a useful test input.
inline VectorField coboundary(const MapModel& m, const VectorField& V0) {
    VectorField X;
    X.name = "coboundary(" + V0.name + ") under " + m.name;
    X.value = [m, V0](const TorusPoint& p) {
        const TorusPoint q = m.inverse(p);
        return V0.value(p) - m.jacobian(q) * V0.value(q);
    };
    if (V0.jacobian) {
        X.jacobian = [m, V0](const TorusPoint& p) {
            const TorusPoint q = m.inverse(p);
            const Mat2 J = m.jacobian(q);
            const Mat2 Jinv = J.inverse();
            const Vec2 v0 = V0.value(q);
            // columns of d(T_* V0) at p: d2T|_q(V0, Jinv e) + J dV0|_q Jinv e
            const Mat2 dV0 = V0.jacobian(q);
            auto col = [&](const Vec2& e) {
                const Vec2 w = Jinv * e;
                return m.hessian_action(q, v0, w) + J * (dV0 * w);
            };
            const Vec2 c1 = col({1.0, 0.0});
            const Vec2 c2 = col({0.0, 1.0});
            const Mat2 d_push{c1.x, c2.x, c1.y, c2.y};
            return V0.jacobian(p) - d_push;
        };
    }
    return X;
}

}  // namespace fields

namespace observables {

inline Observable constant(double c) {
    Observable f;
    std::ostringstream os;
    os << "constant(" << c << ")";
    f.name = os.str();
    f.value = [=](const TorusPoint&) { return c; };
    f.gradient = [](const TorusPoint&) { return Vec2{0.0, 0.0}; };
    return f;
}

/// f(p) = amp * cos(2 pi (kx x + ky y) + phase).
inline Observable harmonic(double amp, int kx, int ky, double phase = 0.0) {
    Observable f;
    std::ostringstream os;
    os << "harmonic(amp=" << amp << ", k=(" << kx << "," << ky << "), phase=" << phase << ")";
    f.name = os.str();
    const Vec2 k{static_cast<double>(kx), static_cast<double>(ky)};
    f.value = [=](const TorusPoint& p) {
        return amp * std::cos(two_pi * (k.x * p.x + k.y * p.y) + phase);
    };
    f.gradient = [=](const TorusPoint& p) {
        return k * (-two_pi * amp * std::sin(two_pi * (k.x * p.x + k.y * p.y) + phase));
    };
    return f;
}

}  // namespace observables

/** The hyperbolic toral automorphism (2x+y, x+y) mod 1. */
inline MapModel cat_map() {
    MapModel m;
    m.name = "cat";
    m.forward = [](const TorusPoint& p) { return wrap({2.0 * p.x + p.y, p.x + p.y}); };
    m.inverse = [](const TorusPoint& p) { return wrap({p.x - p.y, -p.x + 2.0 * p.y}); };
    m.jacobian = [](const TorusPoint&) { return Mat2{2.0, 1.0, 1.0, 1.0}; };
    m.hessian_action = [](const TorusPoint&, const Vec2&, const Vec2&) { return Vec2{0.0, 0.0}; };
    return m;
}

/**
 * One-parameter family T_t p = A p + t X(A p), A the cat map.  The preimage is
 * found by Newton iteration seeded with the cat-map inverse.  Construction
 * checks on a sample grid that the Jacobian determinant stays away from zero,
 * i.e. that T_t is still a diffeomorphism at this t.
 */
inline MapModel perturbed_cat_map(double t, const VectorField& X,
                                  const DerivativePolicy& policy = {}) {
    MapModel cat = cat_map();
    MapModel m;
    {
        std::ostringstream os;
        os << "perturbed_cat(t=" << t << ", X=" << X.name << ")";
        m.name = os.str();
    }

    auto dX = [X, policy](const TorusPoint& q) -> Mat2 {
        if (X.jacobian) return X.jacobian(q);
        if (!policy.allow_fd)
            throw DerivativeUnavailable("perturbed_cat_map: field '" + X.name +
                                        "' has no jacobian callback and finite differencing is disabled");
        Mat2 J;
        const double e = policy.fd_step;
        const Vec2 cx = (X.value(translate(q, {e, 0.0})) - X.value(translate(q, {-e, 0.0}))) * (0.5 / e);
        const Vec2 cy = (X.value(translate(q, {0.0, e})) - X.value(translate(q, {0.0, -e}))) * (0.5 / e);
        J = {cx.x, cy.x, cx.y, cy.y};
        return J;
    };

    m.forward = [cat, X, t](const TorusPoint& p) {
        const TorusPoint q = cat.forward(p);
        return translate(q, X.value(q) * t);
    };
    const Mat2 A{2.0, 1.0, 1.0, 1.0};
    m.jacobian = [dX, t, A](const TorusPoint& p) {
        const TorusPoint q = wrap({2.0 * p.x + p.y, p.x + p.y});
        return (Mat2::identity() + dX(q) * t) * A;
    };
    if (X.hessian_action) {
        m.hessian_action = [X, t, A](const TorusPoint& p, const Vec2& u, const Vec2& v) {
            const TorusPoint q = wrap({2.0 * p.x + p.y, p.x + p.y});
            return X.hessian_action(q, A * u, A * v) * t;
        };
    } else {
        // differentiate the jacobian field numerically
        auto jac = m.jacobian;
        m.hessian_action = [jac, policy](const TorusPoint& p, const Vec2& u, const Vec2& v) {
            if (!policy.allow_fd)
                throw DerivativeUnavailable(
                    "perturbed_cat_map: no hessian callback and finite differencing is disabled");
            return fd_jacobian_derivative(jac, p, v, policy.fd_step) * u;
        };
    }
    m.inverse = [m_forward = m.forward, m_jac = m.jacobian, cat](const TorusPoint& y) {
        return newton_invert(m_forward, m_jac, y, cat.inverse(y));
    };

    // diffeomorphism check on a sample grid
    constexpr int grid = 48;
    double min_det = 1e300;
    TorusPoint worst;
    for (int i = 0; i < grid; ++i) {
        for (int j = 0; j < grid; ++j) {
            const TorusPoint p{(i + 0.5) / grid, (j + 0.5) / grid};
            const double d = m.jacobian(p).det();
            if (d < min_det) {
                min_det = d;
                worst = p;
            }
        }
    }
    if (min_det < 1e-3) {
        std::ostringstream os;
        os << m.name << ": Jacobian determinant reaches " << min_det << " at "
           << describe(worst) << "; the family leaves the diffeomorphism regime at this t";
        throw InversionFailure(os.str());
    }
    return m;
}

// Cat-map spectral constants, for reference and tests.
inline constexpr double cat_lambda_u = 2.618033988749895;   // (3 + sqrt 5) / 2
inline constexpr double cat_lambda_s = 0.38196601125010515; // (3 - sqrt 5) / 2

}  // namespace s3
