#pragma once

#include <cmath>
#include <cstdint>

namespace s3 {

/** Tangent vector (and generic 2-vector) on the flat 2-torus chart. */
struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    Vec2() = default;
    Vec2(double x_, double y_) : x(x_), y(y_) {}

    Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
    Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
    Vec2 operator-() const { return {-x, -y}; }
    Vec2 operator*(double s) const { return {x * s, y * s}; }
    Vec2& operator+=(const Vec2& o) { x += o.x; y += o.y; return *this; }
    Vec2& operator-=(const Vec2& o) { x -= o.x; y -= o.y; return *this; }
};

using TangentVector = Vec2;

inline Vec2 operator*(double s, const Vec2& v) { return v * s; }
inline double dot(const Vec2& a, const Vec2& b) { return a.x * b.x + a.y * b.y; }
inline double norm(const Vec2& v) { return std::sqrt(dot(v, v)); }
inline Vec2 normalized(const Vec2& v) { const double n = norm(v); return {v.x / n, v.y / n}; }

/// Unsigned angle between the lines spanned by a and b, in [0, pi/2].
inline double line_angle(const Vec2& a, const Vec2& b) {
    const double c = std::fabs(dot(a, b)) / (norm(a) * norm(b));
    return std::acos(c > 1.0 ? 1.0 : c);
}

/** 2x2 matrix, row-major. */
struct Mat2 {
    double a11 = 0.0, a12 = 0.0;
    double a21 = 0.0, a22 = 0.0;

    static Mat2 identity() { return {1.0, 0.0, 0.0, 1.0}; }

    Vec2 operator*(const Vec2& v) const {
        return {a11 * v.x + a12 * v.y, a21 * v.x + a22 * v.y};
    }
    Mat2 operator*(const Mat2& m) const {
        return {a11 * m.a11 + a12 * m.a21, a11 * m.a12 + a12 * m.a22,
                a21 * m.a11 + a22 * m.a21, a21 * m.a12 + a22 * m.a22};
    }
    Mat2 operator+(const Mat2& m) const {
        return {a11 + m.a11, a12 + m.a12, a21 + m.a21, a22 + m.a22};
    }
    Mat2 operator-(const Mat2& m) const {
        return {a11 - m.a11, a12 - m.a12, a21 - m.a21, a22 - m.a22};
    }
    Mat2 operator*(double s) const { return {a11 * s, a12 * s, a21 * s, a22 * s}; }

    double det() const { return a11 * a22 - a12 * a21; }
    double trace() const { return a11 + a22; }
    Mat2 transpose() const { return {a11, a21, a12, a22}; }

    Mat2 inverse() const {
        const double d = det();
        return {a22 / d, -a12 / d, -a21 / d, a11 / d};
    }

    /// Spectral (operator 2-) norm via the closed-form largest singular value.
    double op_norm() const {
        const double q = a11 * a11 + a12 * a12 + a21 * a21 + a22 * a22;
        const double d = det();
        // sigma_max^2 = (q + sqrt(q^2 - 4 det^2)) / 2
        const double disc = q * q - 4.0 * d * d;
        return std::sqrt(0.5 * (q + std::sqrt(disc > 0.0 ? disc : 0.0)));
    }
    /// Smallest singular value.
    double op_norm_min() const {
        const double q = a11 * a11 + a12 * a12 + a21 * a21 + a22 * a22;
        const double d = det();
        const double disc = q * q - 4.0 * d * d;
        return std::sqrt(0.5 * (q - std::sqrt(disc > 0.0 ? disc : 0.0)));
    }
};

/// Rank-one product u v^T.
inline Mat2 outer(const Vec2& u, const Vec2& v) {
    return {u.x * v.x, u.x * v.y, u.y * v.x, u.y * v.y};
}

/// Orthogonal projection onto the orthogonal complement of the unit vector u.
inline Mat2 complement_projector(const Vec2& u) {
    return Mat2::identity() - outer(u, u);
}

/** Point on the 2-torus, coordinates in [0,1). */
struct TorusPoint {
    double x = 0.0;
    double y = 0.0;

    TorusPoint() = default;
    TorusPoint(double x_, double y_) : x(x_), y(y_) {}
};

inline double wrap01(double t) {
    double r = t - std::floor(t);
    if (r >= 1.0) r -= 1.0;  // guard against floor rounding at the seam
    return r;
}

inline TorusPoint wrap(const TorusPoint& p) { return {wrap01(p.x), wrap01(p.y)}; }

inline TorusPoint translate(const TorusPoint& p, const Vec2& v) {
    return wrap({p.x + v.x, p.y + v.y});
}

/// Shortest displacement from q to p, componentwise in [-1/2, 1/2).
inline Vec2 torus_delta(const TorusPoint& p, const TorusPoint& q) {
    auto comp = [](double a, double b) {
        double d = a - b;
        d -= std::round(d);
        return d;
    };
    return {comp(p.x, q.x), comp(p.y, q.y)};
}

inline double torus_distance(const TorusPoint& p, const TorusPoint& q) {
    return norm(torus_delta(p, q));
}

}  // namespace s3
