#include <gtest/gtest.h>

#include <cmath>

#include "stitchsim/trajectory.hpp"
#include "support/gen.hpp"
#include "support/oracles.hpp"

using namespace stitchsim;

namespace {

std::vector<Waypoint> straight_waypoints(double length, double spacing) {
    const Polyline line{{0, 0}, {length, 0}};
    return compute_normals(resample_equidistant(line, spacing), {length / 2, -10});
}

// Per-interval speeds and accelerations by finite differences.
struct Derivatives {
    std::vector<double> speed, accel;
};

Derivatives differentiate(const Trajectory& t) {
    Derivatives d;
    for (std::size_t i = 0; i + 1 < t.waypoints.size(); ++i) {
        const double dt = t.timestamps[i + 1] - t.timestamps[i];
        d.speed.push_back(distance(t.waypoints[i].position(), t.waypoints[i + 1].position()) / dt);
    }
    // speeds live at interval mid-times
    for (std::size_t i = 0; i + 1 < d.speed.size(); ++i) {
        const double mid0 = 0.5 * (t.timestamps[i] + t.timestamps[i + 1]);
        const double mid1 = 0.5 * (t.timestamps[i + 1] + t.timestamps[i + 2]);
        d.accel.push_back((d.speed[i + 1] - d.speed[i]) / (mid1 - mid0));
    }
    if (!d.speed.empty()) {
        // from rest at the start and back to rest at the end
        d.accel.push_back(d.speed.front() / (0.5 * (t.timestamps[1] - t.timestamps[0])));
        d.accel.push_back(-d.speed.back() / (0.5 * (t.timestamps.back() - t.timestamps[t.timestamps.size() - 2])));
    }
    return d;
}

}  // namespace

TEST(Resample, UniformSegment) {
    const auto pts = resample_equidistant(Polyline{{0, 0}, {10, 0}}, 2.5);
    ASSERT_EQ(pts.size(), 5u);
    for (int i = 0; i < 5; ++i) {
        EXPECT_DOUBLE_EQ(pts[i].x, 2.5 * i);
        EXPECT_DOUBLE_EQ(pts[i].y, 0.0);
    }
}

TEST(Resample, LShapeArcLengthWalk) {
    const auto pts = resample_equidistant(Polyline{{0, 0}, {5, 0}, {5, 5}}, 2);
    ASSERT_EQ(pts.size(), 6u);
    EXPECT_NEAR(pts[3].x, 5.0, 1e-12);
    EXPECT_NEAR(pts[3].y, 1.0, 1e-12);
    EXPECT_EQ(pts.back(), (Vec2{5, 5}));
}

TEST(Resample, ClosedSquareDivisible) {
    const Polyline sq{{0, 0}, {10, 0}, {10, 10}, {0, 10}, {0, 0}};
    const auto pts = resample_equidistant(sq, 4);
    ASSERT_EQ(pts.size(), 11u);
    // spacing is along the path, so chords cutting a corner come out shorter
    EXPECT_NEAR(distance(pts[3], {10, 2}), 0.0, 1e-12);
    EXPECT_NEAR(distance(pts[5], {10, 10}), 0.0, 1e-12);
    EXPECT_NEAR(distance(pts[3], pts[2]), std::sqrt(8.0), 1e-12);
    EXPECT_NEAR(distance(pts[4], pts[3]), 4.0, 1e-12);
}

TEST(Resample, ShorterThanSpacingRejected) {
    EXPECT_THROW(resample_equidistant(Polyline{{0, 0}, {1, 0}}, 2), ValidationError);
    EXPECT_THROW(resample_equidistant(Polyline{{0, 0}, {1, 0}}, 0), ValidationError);
}

TEST(Resample, ArcLengthProperties) {
    gen::Rng r(37);
    for (int trial = 0; trial < 200; ++trial) {
        const auto path = gen::wandering_path(r, gen::uniform_int(r, 1, 30), 0.5, 20, 1.0);
        const double L = polyline_length(path);
        const double spacing = gen::uniform(r, 0.2, std::min(10.0, L));
        const auto pts = resample_equidistant(path, spacing);
        EXPECT_EQ(pts.front(), path.front());
        EXPECT_EQ(pts.back(), path.back());
        // each point k sits at arc length k*spacing, found by walking the path
        auto walk = [&](double target) {
            for (std::size_t i = 0; i + 1 < path.size(); ++i) {
                const double seg = std::sqrt((path[i + 1].x - path[i].x) * (path[i + 1].x - path[i].x) +
                                             (path[i + 1].y - path[i].y) * (path[i + 1].y - path[i].y));
                if (target <= seg) return path[i] + (path[i + 1] - path[i]) * (target / seg);
                target -= seg;
            }
            return path.back();
        };
        ASSERT_GE(pts.size(), 2u);
        for (std::size_t k = 0; k + 1 < pts.size(); ++k)
            ASSERT_LT(distance(pts[k], walk(k * spacing)), 1e-9 * std::max(1.0, L)) << "trial " << trial << " k " << k;
        // final gap never exceeds the spacing
        EXPECT_LE(L - (pts.size() - 2) * spacing, spacing * (1 + 1e-9));
        EXPECT_GE(L - (pts.size() - 2) * spacing, -1e-9);
        const auto st = resample_stations(L, spacing);
        double gap_sum = 0.0;
        for (std::size_t i = 1; i < st.size(); ++i) gap_sum += st[i] - st[i - 1];
        EXPECT_NEAR(gap_sum, L, 1e-9 * L);
        for (std::size_t k = 0; k + 1 < pts.size(); ++k) EXPECT_LE(distance(pts[k], pts[k + 1]), spacing * (1 + 1e-9));
    }
}

TEST(Normals, AxisAlignedCases) {
    const auto h = compute_normals(std::vector<Vec2>{{0, 0}, {5, 0}, {10, 0}}, {5, -30});
    for (const Waypoint& w : h) EXPECT_DOUBLE_EQ(w.theta, -kPi / 2);
    const auto v = compute_normals(std::vector<Vec2>{{0, 0}, {0, 5}, {0, 10}}, {30, 5});
    for (const Waypoint& w : v) EXPECT_DOUBLE_EQ(w.theta, 0.0);
}

TEST(Normals, QuarterCircleOutwardAtMidpoint) {
    // 90 deg of a circle of radius 100, sampled symmetrically about 45 deg,
    // with the edge just outside.
    std::vector<Vec2> pts;
    for (int i = 0; i <= 90; ++i) pts.push_back(Vec2{std::cos(deg_to_rad(i)), std::sin(deg_to_rad(i))} * 100.0);
    std::vector<Vec2> contour;
    for (int i = 0; i <= 360; ++i) contour.push_back(Vec2{std::cos(deg_to_rad(i)), std::sin(deg_to_rad(i))} * 120.0);
    const auto w = compute_edge_normals(pts, contour);
    // the segment from 44.5 to 45.5 deg would be centered; segments here
    // start at whole degrees, so the 45 deg normal is the bisector of the
    // two segments meeting there
    const double mid = 0.5 * (w[44].theta + w[45].theta);
    EXPECT_NEAR(mid, kPi / 4, 1e-6);
    const auto w2 = compute_normals(pts, {200, 200});
    EXPECT_NEAR(0.5 * (w2[44].theta + w2[45].theta), kPi / 4, 1e-6);
}

TEST(Normals, DuplicatePointsRejected) {
    EXPECT_THROW(compute_normals(std::vector<Vec2>{{0, 0}, {0, 0}, {1, 0}}, {0, 1}), ValidationError);
    EXPECT_THROW(compute_normals(std::vector<Vec2>{{0, 0}}, {0, 1}), ValidationError);
}

TEST(Normals, TieBreakTowardCentroidSide) {
    // needle_ref collinear with the seam: the tie-break point decides
    const std::vector<Vec2> pts{{0, 0}, {10, 0}};
    EXPECT_DOUBLE_EQ(compute_normals(pts, {20, 0}, Vec2{5, 7})[0].theta, kPi / 2);
    EXPECT_DOUBLE_EQ(compute_normals(pts, {20, 0}, Vec2{5, -7})[0].theta, -kPi / 2);
}

TEST(Normals, TranslationInvariant) {
    gen::Rng r(41);
    for (int trial = 0; trial < 100; ++trial) {
        const auto path = gen::wandering_path(r, 10, 1, 5, 0.5);
        const Vec2 ref{gen::uniform(r, -100, 100), gen::uniform(r, -100, 100)};
        const Vec2 shift{gen::uniform(r, -1e3, 1e3), gen::uniform(r, -1e3, 1e3)};
        std::vector<Vec2> moved;
        for (const Vec2& p : path) moved.push_back(p + shift);
        const auto a = compute_normals(path, ref), b = compute_normals(moved, ref + shift);
        for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(std::cos(a[i].theta - b[i].theta), 1.0, 1e-9);
    }
}

TEST(Sync, FeedVelocity) {
    EXPECT_DOUBLE_EQ(sync_feed_velocity({3, 10, 25}), 30.0);
    EXPECT_DOUBLE_EQ(sync_feed_velocity({2, 25, 25}), 50.0);
    try {
        sync_feed_velocity({3, 30, 25});
        FAIL();
    } catch (const ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find("needle speed exceeded"), std::string::npos);
    }
}

TEST(TimeParameterize, StraightTrapezoidClosedForm) {
    const Trajectory t = time_parameterize(straight_waypoints(200, 3), 30, {250, 300});
    const double closed_form = 2 * 0.1 + 197.0 / 30.0;
    EXPECT_NEAR(t.duration(), closed_form, 1e-12);
    EXPECT_NEAR(t.duration(), oracle::trapezoid_time_numeric(200, 30, 300), 1e-3);
    EXPECT_NEAR(t.duration(), 6.7667, 1e-3);
    EXPECT_DOUBLE_EQ(t.v_peak, 30.0);
    EXPECT_NEAR(t.ramp_up_end, 0.1, 1e-12);
}

TEST(TimeParameterize, ShortPathIsTriangular) {
    const Trajectory t = time_parameterize(compute_normals(std::vector<Vec2>{{0, 0}, {0.5, 0}, {1, 0}}, {0, -1}), 30,
                                           {250, 300});
    EXPECT_NEAR(t.v_peak, std::sqrt(300.0), 1e-12);
    EXPECT_NEAR(t.v_peak, 17.32, 5e-3);
    EXPECT_NEAR(t.duration(), 2 * std::sqrt(1.0 / 300.0), 1e-12);
    EXPECT_NEAR(t.duration(), oracle::trapezoid_time_numeric(1, 30, 300), 1e-5);
}

TEST(TimeParameterize, RejectsDegenerateInput) {
    EXPECT_THROW(time_parameterize({}, 30, {}), ValidationError);
    EXPECT_THROW(time_parameterize(straight_waypoints(10, 1), 0, {}), ValidationError);
    EXPECT_THROW(time_parameterize(straight_waypoints(10, 1), 300, {250, 1000}), ValidationError);
}

TEST(TimeParameterize, RandomPathsRespectLimits) {
    gen::Rng r(43);
    for (int trial = 0; trial < 1000; ++trial) {
        const auto path = gen::wandering_path(r, gen::uniform_int(r, 1, 12), 1, 40, 1.2);
        const double spacing = gen::uniform(r, 0.5, std::min(6.0, polyline_length(path)));
        const MotionLimits lim{gen::uniform(r, 20, 300), gen::uniform(r, 50, 2000)};
        const double v = gen::uniform(r, 1, lim.v_max);
        const auto pts = resample_equidistant(path, spacing);
        const Trajectory t = time_parameterize(compute_normals(pts, pts.front() + Vec2{0, -1000}), v, lim);
        for (std::size_t i = 1; i < t.timestamps.size(); ++i) ASSERT_GT(t.timestamps[i], t.timestamps[i - 1]);
        const Derivatives d = differentiate(t);
        for (double s : d.speed) ASSERT_LE(s, lim.v_max + 1e-6) << "trial " << trial;
        for (double a : d.accel) ASSERT_LE(std::fabs(a), lim.a_max + 1e-6) << "trial " << trial;
        for (std::size_t i = 0; i < d.speed.size(); ++i) {
            if (t.timestamps[i] >= t.ramp_up_end && t.timestamps[i + 1] <= t.ramp_down_start)
                ASSERT_NEAR(d.speed[i], v, 0.02 * v);
        }
    }
}

TEST(TimeParameterize, PositionAtInterpolatesInTime) {
    const Trajectory t = time_parameterize(straight_waypoints(30, 3), 30, {250, 300});
    EXPECT_EQ(t.position_at(-1), (Vec2{0, 0}));
    EXPECT_EQ(t.position_at(t.duration() + 1), (Vec2{30, 0}));
    const double tm = 0.5 * (t.timestamps[4] + t.timestamps[5]);
    EXPECT_NEAR(t.position_at(tm).x, 13.5, 1e-12);
}

TEST(Workspace, BoundsChecks) {
    const auto w = straight_waypoints(10, 1);
    EXPECT_TRUE(check_workspace(w, {0, -1, 10, 1}).empty());  // boundary points accepted
    auto out = w;
    out[4].x = 11;
    const auto bad = check_workspace(out, {0, -1, 10, 1});
    ASSERT_EQ(bad.size(), 1u);
    EXPECT_EQ(bad[0], 4u);
    EXPECT_THROW(check_workspace(w, {0, 0, 0, 1}), ValidationError);
}

TEST(PlanSeam, SpacingEqualsStitchLength) {
    const Polyline seam{{30, 20}, {230, 20}};
    const Polyline contour{{0, 0}, {260, 0}, {260, 120}, {0, 120}, {0, 0}};
    const Trajectory t = plan_seam(seam, contour, {3, 10, 25}, {250, 300});
    EXPECT_EQ(t.waypoints.size(), 68u);  // 66 full gaps plus a 2 mm tail
    for (const Waypoint& w : t.waypoints) EXPECT_DOUBLE_EQ(w.theta, -kPi / 2);
    EXPECT_DOUBLE_EQ(t.v_target, 30.0);
}
