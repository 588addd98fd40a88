#pragma once

// Seam polyline -> equidistant waypoints with edge normals -> trapezoidal
// timing along arc length, synchronized to the sewing machine feed.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "stitchsim/error.hpp"
#include "stitchsim/geometry.hpp"

namespace stitchsim {

struct Waypoint {
    double x = 0.0;      // mm
    double y = 0.0;      // mm
    double theta = 0.0;  // direction of the edge-side normal, (-pi, pi]

    Vec2 position() const { return {x, y}; }
};

struct MotionLimits {
    double v_max = 250.0;   // mm/s
    double a_max = 1000.0;  // mm/s^2

    void validate() const {
        if (!(v_max > 0.0) || !(a_max > 0.0)) throw ValidationError("motion limits must be positive");
    }
};

struct SyncParams {
    double stitch_length = 3.0;     // mm
    double stitch_rate = 10.0;      // stitches/s
    double needle_rate_max = 25.0;  // stitches/s
};

struct Trajectory {
    std::vector<Waypoint> waypoints;
    std::vector<double> timestamps;  // s, strictly increasing
    std::vector<double> stations;    // arc length at each waypoint, mm
    double v_target = 0.0;
    double v_peak = 0.0;  // v_target, or less for a triangular profile
    MotionLimits limits;
    double ramp_up_end = 0.0;     // s; cruise runs between these two
    double ramp_down_start = 0.0;  // s

    bool empty() const { return waypoints.empty(); }
    double duration() const { return timestamps.empty() ? 0.0 : timestamps.back(); }
    double length() const { return stations.empty() ? 0.0 : stations.back(); }

    // Index i of the interval [t_i, t_{i+1}) containing t, clamped.
    std::size_t segment_at(double t) const {
        if (timestamps.size() < 2 || t <= timestamps.front()) return 0;
        if (t >= timestamps.back()) return timestamps.size() - 2;
        const auto it = std::upper_bound(timestamps.begin(), timestamps.end(), t);
        return static_cast<std::size_t>(it - timestamps.begin()) - 1;
    }

    // Linear interpolation between waypoints in time.
    Vec2 position_at(double t) const {
        if (waypoints.size() == 1 || t <= timestamps.front()) return waypoints.front().position();
        if (t >= timestamps.back()) return waypoints.back().position();
        const std::size_t i = segment_at(t);
        const double f = (t - timestamps[i]) / (timestamps[i + 1] - timestamps[i]);
        const Vec2 a = waypoints[i].position(), b = waypoints[i + 1].position();
        return a + (b - a) * f;
    }
};

// Arc-length stations 0, spacing, 2*spacing, ... plus the final endpoint
// when the remainder is not a whole spacing.
inline std::vector<double> resample_stations(double length, double spacing) {
    if (!(spacing > 0.0)) throw ValidationError("spacing must be > 0");
    if (length < spacing) throw ValidationError("polyline shorter than waypoint spacing");
    const double eps = 1e-9 * length;
    const auto whole = static_cast<std::size_t>(std::floor(length / spacing + 1e-9));
    std::vector<double> s;
    s.reserve(whole + 2);
    for (std::size_t k = 0; k <= whole; ++k) s.push_back(std::min(length, static_cast<double>(k) * spacing));
    if (length - s.back() > eps) s.push_back(length);
    else s.back() = length;
    return s;
}

inline std::vector<Vec2> resample_equidistant(std::span<const Vec2> polyline, double spacing) {
    if (polyline.size() < 2) throw ValidationError("polyline needs at least 2 points");
    const std::vector<double> cum = cumulative_lengths(polyline);
    const std::vector<double> stations = resample_stations(cum.back(), spacing);
    std::vector<Vec2> out;
    out.reserve(stations.size());
    for (double s : stations) out.push_back(point_at_arc_length(polyline, cum, s));
    out.front() = polyline.front();
    out.back() = polyline.back();
    return out;
}

namespace detail {

inline void require_distinct(std::span<const Vec2> points) {
    if (points.size() < 2) throw ValidationError("need at least 2 points for normals");
    for (std::size_t i = 0; i + 1 < points.size(); ++i)
        if (points[i] == points[i + 1])
            throw ValidationError("duplicate consecutive points at index " + std::to_string(i));
}

// Normal of segment a->b whose half-plane contains ref; on a tie the side
// holding tie_break wins, then the left normal.
inline double side_normal(Vec2 a, Vec2 b, Vec2 ref, std::optional<Vec2> tie_break) {
    const Vec2 left = perp_left(normalized(b - a));
    const Vec2 mid = (a + b) * 0.5;
    double side = dot(left, ref - mid);
    if (side == 0.0 && tie_break) side = dot(left, *tie_break - mid);
    const Vec2 n = side < 0.0 ? -left : left;
    return wrap_angle(std::atan2(n.y, n.x));
}

}  // namespace detail

// theta per waypoint: the segment normal pointing to the side of needle_ref.
// The last waypoint repeats the previous theta.
inline std::vector<Waypoint> compute_normals(std::span<const Vec2> points, Vec2 needle_ref,
                                             std::optional<Vec2> tie_break = std::nullopt) {
    detail::require_distinct(points);
    std::vector<Waypoint> out;
    out.reserve(points.size());
    for (std::size_t i = 0; i + 1 < points.size(); ++i)
        out.push_back({points[i].x, points[i].y, detail::side_normal(points[i], points[i + 1], needle_ref, tie_break)});
    out.push_back({points.back().x, points.back().y, out.back().theta});
    return out;
}

// Per-segment variant used by the planner: each segment's reference is the
// nearest point of the garment edge, so theta points at the edge everywhere
// along curved seams. Ties fall back to the contour centroid.
inline std::vector<Waypoint> compute_edge_normals(std::span<const Vec2> points, std::span<const Vec2> contour) {
    detail::require_distinct(points);
    const Vec2 centroid = area_centroid(contour);
    std::vector<Waypoint> out;
    out.reserve(points.size());
    for (std::size_t i = 0; i + 1 < points.size(); ++i) {
        const Vec2 mid = (points[i] + points[i + 1]) * 0.5;
        Vec2 edge = closest_point_on_polyline(contour, mid).point;
        out.push_back({points[i].x, points[i].y, detail::side_normal(points[i], points[i + 1], edge, centroid)});
    }
    out.push_back({points.back().x, points.back().y, out.back().theta});
    return out;
}

// Feed velocity that lays one stitch every stitch_length.
inline double sync_feed_velocity(const SyncParams& sync) {
    if (!(sync.stitch_length > 0.0)) throw ValidationError("stitch_length must be > 0");
    if (!(sync.stitch_rate > 0.0)) throw ValidationError("stitch_rate must be > 0");
    if (sync.stitch_rate > sync.needle_rate_max)
        throw ValidationError("needle speed exceeded: stitch_rate " + std::to_string(sync.stitch_rate) + " > " +
                              std::to_string(sync.needle_rate_max));
    return sync.stitch_length * sync.stitch_rate;
}

// Trapezoidal speed along arc length through the waypoints: accelerate at
// a_max to v_target, cruise, decelerate to rest. Short paths get a
// triangular profile peaking at sqrt(a_max * L).
inline Trajectory time_parameterize(std::vector<Waypoint> waypoints, double v_target, const MotionLimits& limits) {
    limits.validate();
    if (waypoints.empty()) throw ValidationError("empty waypoint list");
    if (!(v_target > 0.0)) throw ValidationError("v_target must be > 0");
    if (v_target > limits.v_max) throw ValidationError("v_target exceeds v_max");

    Trajectory traj;
    traj.v_target = v_target;
    traj.limits = limits;
    traj.stations.assign(waypoints.size(), 0.0);
    for (std::size_t i = 1; i < waypoints.size(); ++i) {
        const double ds = distance(waypoints[i - 1].position(), waypoints[i].position());
        if (ds == 0.0) throw ValidationError("duplicate consecutive waypoints at index " + std::to_string(i - 1));
        traj.stations[i] = traj.stations[i - 1] + ds;
    }
    const double length = traj.stations.back();
    const double a = limits.a_max;

    double v = v_target;
    double ramp = v * v / (2.0 * a);
    if (2.0 * ramp > length) {
        v = std::sqrt(a * length);
        ramp = 0.5 * length;
    }
    const double t_ramp = v / a;
    const double t_cruise = (length - 2.0 * ramp) / v;
    traj.v_peak = v;
    traj.ramp_up_end = t_ramp;
    traj.ramp_down_start = t_ramp + t_cruise;
    const double total = 2.0 * t_ramp + t_cruise;

    auto time_at = [&](double s) {
        if (s <= ramp) return std::sqrt(2.0 * s / a);
        if (s <= length - ramp) return t_ramp + (s - ramp) / v;
        const double rem = std::max(0.0, length - s);
        return total - std::sqrt(2.0 * rem / a);
    };
    traj.timestamps.reserve(waypoints.size());
    for (double s : traj.stations) traj.timestamps.push_back(time_at(s));
    if (waypoints.size() > 1) traj.timestamps.back() = total;
    traj.waypoints = std::move(waypoints);
    return traj;
}

struct WorkspaceBounds {
    double min_x = -1e9, min_y = -1e9, max_x = 1e9, max_y = 1e9;
};

// Indices of waypoints outside the closed rectangle. Empty means clear.
inline std::vector<std::size_t> check_workspace(std::span<const Waypoint> waypoints, const WorkspaceBounds& b) {
    if (!(b.max_x > b.min_x) || !(b.max_y > b.min_y)) throw ValidationError("degenerate workspace bounds");
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < waypoints.size(); ++i) {
        const Waypoint& w = waypoints[i];
        if (w.x < b.min_x || w.x > b.max_x || w.y < b.min_y || w.y > b.max_y) out.push_back(i);
    }
    return out;
}

// Full planning pass for a seam: equidistant waypoints at stitch pitch,
// edge normals against the contour, trapezoidal timing at the synced feed.
inline Trajectory plan_seam(std::span<const Vec2> seam, std::span<const Vec2> contour, const SyncParams& sync,
                            const MotionLimits& limits, std::optional<double> spacing = std::nullopt) {
    const double v = sync_feed_velocity(sync);
    const std::vector<Vec2> pts = resample_equidistant(seam, spacing.value_or(sync.stitch_length));
    return time_parameterize(compute_edge_normals(pts, contour), v, limits);
}

}  // namespace stitchsim
