#pragma once

#include <cmath>

namespace caustiq {

/// Plane vector used for positions, momenta and deviation fields.
struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    Vec2() = default;
    Vec2(double x_, double y_) : x(x_), y(y_) {}

    Vec2& operator+=(const Vec2& o) { x += o.x; y += o.y; return *this; }
    Vec2& operator-=(const Vec2& o) { x -= o.x; y -= o.y; return *this; }
    Vec2& operator*=(double c) { x *= c; y *= c; return *this; }
};

inline Vec2 operator+(Vec2 a, const Vec2& b) { return a += b; }
inline Vec2 operator-(Vec2 a, const Vec2& b) { return a -= b; }
inline Vec2 operator*(double c, Vec2 a) { return a *= c; }
inline Vec2 operator*(Vec2 a, double c) { return a *= c; }

inline double dot(const Vec2& a, const Vec2& b) { return a.x * b.x + a.y * b.y; }

/// z-component of the exterior product of two plane vectors.
inline double cross(const Vec2& a, const Vec2& b) { return a.x * b.y - a.y * b.x; }

inline double norm(const Vec2& a) { return std::hypot(a.x, a.y); }

/// Symmetric 2x2 matrix; enough for Hessians.
struct SymMat2 {
    double xx = 0.0, xy = 0.0, yy = 0.0;

    Vec2 apply(const Vec2& v) const {
        return {xx * v.x + xy * v.y, xy * v.x + yy * v.y};
    }
};

}  // namespace caustiq
