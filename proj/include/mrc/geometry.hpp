#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace mrc {

/// Normalize an angle to (-pi, pi].
inline double normalize_angle(double a) {
    const double two_pi = 2.0 * std::numbers::pi;
    a = std::fmod(a, two_pi);
    if (a <= -std::numbers::pi) a += two_pi;
    if (a > std::numbers::pi) a -= two_pi;
    return a;
}

struct Pose2D {
    double x = 0.0;
    double y = 0.0;
    double heading = 0.0;  // radians in (-pi, pi]

    Pose2D() = default;
    Pose2D(double x_, double y_, double heading_ = 0.0)
        : x(x_), y(y_), heading(normalize_angle(heading_)) {
        if (!std::isfinite(x) || !std::isfinite(y)) {
            throw std::invalid_argument("Pose2D: non-finite coordinates");
        }
    }

    bool operator==(const Pose2D& o) const {
        return x == o.x && y == o.y && heading == o.heading;
    }
};

inline double distance(const Pose2D& a, const Pose2D& b) {
    return std::hypot(a.x - b.x, a.y - b.y);
}

struct Vec2 {
    double x = 0.0;
    double y = 0.0;
};

inline Vec2 operator-(const Pose2D& a, const Pose2D& b) { return {a.x - b.x, a.y - b.y}; }
inline double norm(const Vec2& v) { return std::hypot(v.x, v.y); }

/// Axis-aligned rectangle given by center and half extents.
struct Rect {
    double cx = 0.0;
    double cy = 0.0;
    double hx = 0.0;
    double hy = 0.0;

    bool contains(double x, double y) const {
        return std::abs(x - cx) <= hx && std::abs(y - cy) <= hy;
    }
};

/// Rectangular bounds of the workspace.
struct Bounds {
    double xmin, xmax, ymin, ymax;

    bool contains(double x, double y) const {
        return x >= xmin && x <= xmax && y >= ymin && y <= ymax;
    }
    double clamp_x(double x) const { return std::clamp(x, xmin, xmax); }
    double clamp_y(double y) const { return std::clamp(y, ymin, ymax); }
};

/// Linear interpolation between two poses; heading follows the segment direction.
inline Pose2D lerp_along(const Pose2D& a, const Pose2D& b, double t) {
    const double x = a.x + (b.x - a.x) * t;
    const double y = a.y + (b.y - a.y) * t;
    const double h = std::atan2(b.y - a.y, b.x - a.x);
    return Pose2D(x, y, (a.x == b.x && a.y == b.y) ? a.heading : h);
}

}  // namespace mrc
