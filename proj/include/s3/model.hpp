#pragma once

#include <functional>
#include <sstream>
#include <string>
#include <utility>

#include "s3/errors.hpp"
#include "s3/torus.hpp"

namespace s3 {

/**
 * Smooth torus diffeomorphism given by callbacks.
 *
 * jacobian(p) is dT at p (a linear map from the tangent space at p to the
 * tangent space at T p; the flat chart identifies both with R^2).
 * hessian_action(p, u, v) is the second derivative d2T|_p(u, v), symmetric
 * in (u, v).
 */
struct MapModel {
    std::string name;
    std::function<TorusPoint(const TorusPoint&)> forward;
    std::function<TorusPoint(const TorusPoint&)> inverse;
    std::function<Mat2(const TorusPoint&)> jacobian;
    std::function<Vec2(const TorusPoint&, const Vec2&, const Vec2&)> hessian_action;
};

/** Perturbation / coboundary vector field X on the torus. */
struct VectorField {
    std::string name;
    std::function<Vec2(const TorusPoint&)> value;
    // dX at p; optional (empty means: differentiate numerically or fail,
    // depending on the caller's derivative policy).
    std::function<Mat2(const TorusPoint&)> jacobian;
    // d2X|_p(u, v); optional, needed only when the field enters a map family.
    std::function<Vec2(const TorusPoint&, const Vec2&, const Vec2&)> hessian_action;
};

/** Scalar observable with gradient. */
struct Observable {
    std::string name;
    std::function<double(const TorusPoint&)> value;
    std::function<Vec2(const TorusPoint&)> gradient;
};

/** How to obtain field derivatives that enter the derivative-augmented solves. */
struct DerivativePolicy {
    bool allow_fd = true;      // fall back to central differences when a
                               // jacobian callback is missing
    double fd_step = 1e-5;     // step along the unstable line
};

inline std::string describe(const TorusPoint& p) {
    std::ostringstream os;
    os.precision(17);
    os << "(" << p.x << ", " << p.y << ")";
    return os.str();
}

/// dX|_p v, using the analytic callback when present, else central FD along v.
inline Vec2 field_derivative(const VectorField& X, const TorusPoint& p, const Vec2& v,
                             const DerivativePolicy& policy = {}) {
    if (X.jacobian) return X.jacobian(p) * v;
    if (!policy.allow_fd)
        throw DerivativeUnavailable("field '" + X.name +
                                    "' has no jacobian callback and finite differencing is disabled");
    const double e = policy.fd_step;
    const Vec2 step = v * e;
    const Vec2 plus = X.value(translate(p, step));
    const Vec2 minus = X.value(translate(p, -step));
    return (plus - minus) * (0.5 / e);
}

/// Central-difference jacobian of a point map (used to cross-check analytic ones).
inline Mat2 fd_jacobian(const std::function<TorusPoint(const TorusPoint&)>& f,
                        const TorusPoint& p, double e = 1e-6) {
    auto col = [&](const Vec2& dir) {
        const TorusPoint plus = f(translate(p, dir * e));
        const TorusPoint minus = f(translate(p, dir * -e));
        return torus_delta(plus, minus) * (0.5 / e);
    };
    const Vec2 cx = col({1.0, 0.0});
    const Vec2 cy = col({0.0, 1.0});
    return {cx.x, cy.x, cx.y, cy.y};
}

/// Central-difference directional derivative of a jacobian field: d(dT)|_p(., v).
inline Mat2 fd_jacobian_derivative(const std::function<Mat2(const TorusPoint&)>& jac,
                                   const TorusPoint& p, const Vec2& v, double e = 1e-6) {
    const Mat2 plus = jac(translate(p, v * e));
    const Mat2 minus = jac(translate(p, v * -e));
    return (plus - minus) * (0.5 / e);
}

/**
 * Torus-aware Newton preimage: solve forward(p) = target starting from seed.
 * Residuals are taken through the shortest displacement on the torus, so the
 * iteration is insensitive to wrap-around.
 */
inline TorusPoint newton_invert(const std::function<TorusPoint(const TorusPoint&)>& forward,
                                const std::function<Mat2(const TorusPoint&)>& jacobian,
                                const TorusPoint& target, const TorusPoint& seed,
                                int max_iter = 50, double tol = 1e-13) {
    TorusPoint p = seed;
    for (int it = 0; it < max_iter; ++it) {
        const Vec2 r = torus_delta(forward(p), target);
        if (norm(r) < tol) return p;
        const Vec2 step = jacobian(p).inverse() * r;
        p = translate(p, -step);
    }
    const Vec2 r = torus_delta(forward(p), target);
    if (norm(r) < tol) return p;
    std::ostringstream os;
    os << "newton_invert: no convergence to " << tol << " in " << max_iter
       << " iterations at target " << describe(target) << " (|r| = " << norm(r) << ")";
    throw InversionFailure(os.str());
}

}  // namespace s3
