#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <span>
#include <vector>

namespace stitchsim {

inline constexpr double kPi = std::numbers::pi;

inline constexpr double deg_to_rad(double deg) { return deg * kPi / 180.0; }
inline constexpr double rad_to_deg(double rad) { return rad * 180.0 / kPi; }

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    constexpr Vec2& operator+=(Vec2 o) { x += o.x; y += o.y; return *this; }
    constexpr Vec2& operator-=(Vec2 o) { x -= o.x; y -= o.y; return *this; }
    constexpr Vec2& operator*=(double s) { x *= s; y *= s; return *this; }

    friend constexpr Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
    friend constexpr Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
    friend constexpr Vec2 operator-(Vec2 a) { return {-a.x, -a.y}; }
    friend constexpr Vec2 operator*(Vec2 a, double s) { return {a.x * s, a.y * s}; }
    friend constexpr Vec2 operator*(double s, Vec2 a) { return {a.x * s, a.y * s}; }
    friend constexpr Vec2 operator/(Vec2 a, double s) { return {a.x / s, a.y / s}; }
    friend constexpr bool operator==(Vec2 a, Vec2 b) = default;
};

using Polyline = std::vector<Vec2>;

inline constexpr double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline constexpr double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Vec2 a) { return std::hypot(a.x, a.y); }
inline double distance(Vec2 a, Vec2 b) { return norm(a - b); }
inline Vec2 normalized(Vec2 a) { return a / norm(a); }
inline constexpr Vec2 perp_left(Vec2 a) { return {-a.y, a.x}; }
inline Vec2 rotate(Vec2 a, double angle) {
    const double c = std::cos(angle), s = std::sin(angle);
    return {c * a.x - s * a.y, s * a.x + c * a.y};
}

// Maps any angle into (-pi, pi].
inline double wrap_angle(double a) {
    a = std::remainder(a, 2.0 * kPi);
    if (a <= -kPi) a += 2.0 * kPi;
    return a;
}

// Rigid planar transform. apply() maps a point from the local (garment)
// frame into the world frame.
struct Pose2 {
    double x = 0.0;
    double y = 0.0;
    double theta = 0.0;

    Vec2 translation() const { return {x, y}; }
    Vec2 apply(Vec2 p) const { return rotate(p, theta) + translation(); }
    Vec2 apply_inverse(Vec2 w) const { return rotate(w - translation(), -theta); }
    Vec2 rotate_vector(Vec2 v) const { return rotate(v, theta); }
};

inline Polyline transform(const Polyline& pts, const Pose2& pose) {
    Polyline out;
    out.reserve(pts.size());
    for (Vec2 p : pts) out.push_back(pose.apply(p));
    return out;
}

inline double polyline_length(std::span<const Vec2> pts) {
    double len = 0.0;
    for (std::size_t i = 1; i < pts.size(); ++i) len += distance(pts[i - 1], pts[i]);
    return len;
}

// Running arc length at every vertex; front() == 0.
inline std::vector<double> cumulative_lengths(std::span<const Vec2> pts) {
    std::vector<double> s(pts.size(), 0.0);
    for (std::size_t i = 1; i < pts.size(); ++i) s[i] = s[i - 1] + distance(pts[i - 1], pts[i]);
    return s;
}

inline bool is_closed(std::span<const Vec2> pts, double tol = 1e-6) {
    return pts.size() >= 4 && distance(pts.front(), pts.back()) <= tol;
}

inline Vec2 closest_point_on_segment(Vec2 a, Vec2 b, Vec2 p) {
    const Vec2 ab = b - a;
    const double len_sq = dot(ab, ab);
    if (len_sq == 0.0) return a;
    const double t = std::clamp(dot(p - a, ab) / len_sq, 0.0, 1.0);
    return a + ab * t;
}

struct ClosestPoint {
    Vec2 point;
    double distance = std::numeric_limits<double>::infinity();
    std::size_t segment = 0;
};

inline ClosestPoint closest_point_on_polyline(std::span<const Vec2> pts, Vec2 p) {
    ClosestPoint best;
    if (pts.size() == 1) return {pts[0], distance(pts[0], p), 0};
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
        const Vec2 q = closest_point_on_segment(pts[i], pts[i + 1], p);
        const double d = distance(q, p);
        if (d < best.distance) best = {q, d, i};
    }
    return best;
}

// Even-odd crossing test on a closed ring (last vertex may or may not repeat the first).
inline bool point_in_polygon(std::span<const Vec2> ring, Vec2 p) {
    bool inside = false;
    const std::size_t n = ring.size();
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        const Vec2 a = ring[i], b = ring[j];
        if ((a.y > p.y) != (b.y > p.y)) {
            const double x_cross = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if (p.x < x_cross) inside = !inside;
        }
    }
    return inside;
}

struct SignedDistance {
    double value = 0.0;  // positive inside the ring
    Vec2 nearest;
};

inline SignedDistance signed_distance_to_ring(std::span<const Vec2> ring, Vec2 p) {
    ClosestPoint c = closest_point_on_polyline(ring, p);
    if (!is_closed(ring)) {
        const Vec2 q = closest_point_on_segment(ring.back(), ring.front(), p);
        if (distance(q, p) < c.distance) c = {q, distance(q, p), ring.size() - 1};
    }
    if (c.distance == 0.0) return {0.0, c.point};
    return {point_in_polygon(ring, p) ? c.distance : -c.distance, c.point};
}

// Shoelace area, positive for counter-clockwise rings.
inline double signed_area(std::span<const Vec2> ring) {
    double a = 0.0;
    const std::size_t n = ring.size();
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) a += cross(ring[j], ring[i]);
    return 0.5 * a;
}

inline Vec2 area_centroid(std::span<const Vec2> ring) {
    double a = 0.0;
    Vec2 c;
    const std::size_t n = ring.size();
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        const double w = cross(ring[j], ring[i]);
        a += w;
        c += (ring[j] + ring[i]) * w;
    }
    return c / (3.0 * a);
}

inline bool segments_intersect(Vec2 a, Vec2 b, Vec2 c, Vec2 d) {
    auto orient = [](Vec2 p, Vec2 q, Vec2 r) {
        const double v = cross(q - p, r - p);
        return (v > 0.0) - (v < 0.0);
    };
    auto on_segment = [](Vec2 p, Vec2 q, Vec2 r) {
        return std::min(p.x, q.x) <= r.x && r.x <= std::max(p.x, q.x) &&
               std::min(p.y, q.y) <= r.y && r.y <= std::max(p.y, q.y);
    };
    const int o1 = orient(a, b, c), o2 = orient(a, b, d);
    const int o3 = orient(c, d, a), o4 = orient(c, d, b);
    if (o1 != o2 && o3 != o4) return true;
    if (o1 == 0 && on_segment(a, b, c)) return true;
    if (o2 == 0 && on_segment(a, b, d)) return true;
    if (o3 == 0 && on_segment(c, d, a)) return true;
    if (o4 == 0 && on_segment(c, d, b)) return true;
    return false;
}

// True when no two non-adjacent edges of the closed ring touch.
inline bool is_simple_ring(std::span<const Vec2> ring) {
    std::size_t n = ring.size();
    if (n >= 2 && ring.front() == ring.back()) --n;
    if (n < 3) return false;
    for (std::size_t i = 0; i < n; ++i) {
        const Vec2 a = ring[i], b = ring[(i + 1) % n];
        for (std::size_t j = i + 1; j < n; ++j) {
            if (j == i + 1 || (i == 0 && j == n - 1)) continue;
            if (segments_intersect(a, b, ring[j], ring[(j + 1) % n])) return false;
        }
    }
    return true;
}

// Point at arc length s along the polyline, clamped to its ends.
inline Vec2 point_at_arc_length(std::span<const Vec2> pts, std::span<const double> cum, double s) {
    if (s <= 0.0) return pts.front();
    if (s >= cum.back()) return pts.back();
    const auto it = std::upper_bound(cum.begin(), cum.end(), s);
    const std::size_t i = static_cast<std::size_t>(it - cum.begin()) - 1;
    const double seg = cum[i + 1] - cum[i];
    if (seg <= 0.0) return pts[i];
    return pts[i] + (pts[i + 1] - pts[i]) * ((s - cum[i]) / seg);
}

}  // namespace stitchsim
