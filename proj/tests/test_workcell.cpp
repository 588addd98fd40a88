#include <gtest/gtest.h>

#include <cmath>

#include "stitchsim/config.hpp"
#include "stitchsim/workcell.hpp"
#include "support/gen.hpp"

using namespace stitchsim;

namespace {

DigitalThread fixture(const char* name) {
    RunConfig cfg = load_run_config(fixture_dir() / "cfg.json");
    return load_thread(fixture_dir() / name, cfg);
}

const MotionLimits kLimits{250, 300};
const SyncParams kSync{3, 10, 25};

Trajectory plan(const DigitalThread& t) { return plan_seam(t.seam, t.contour, kSync, kLimits); }

double edge_dist(const DigitalThread& t, Vec2 garment_point) {
    return signed_distance_to_ring(t.contour, garment_point).value;
}

}  // namespace

TEST(Step, RigidGripMovesBothEqually) {
    WorkcellState s;
    s.garment_pose = {5, 5, 0.2};
    s.grip_offset = {3, 4};
    s.ee_pose = s.garment_pose.apply(s.grip_offset);
    const WorkcellState n = step(s, {10, 0}, 0.1, {}, 250);
    EXPECT_DOUBLE_EQ(n.ee_pose.x - s.ee_pose.x, 1.0);
    EXPECT_DOUBLE_EQ(n.garment_pose.x - s.garment_pose.x, 1.0);
    EXPECT_DOUBLE_EQ(n.garment_pose.y, s.garment_pose.y);
    const Vec2 rel = n.garment_pose.apply(n.grip_offset) - n.ee_pose;
    EXPECT_NEAR(norm(rel), 0.0, 1e-12);
    EXPECT_DOUBLE_EQ(n.t, 0.1);
}

TEST(Step, ProportionalLag) {
    SlipModel lag;
    lag.mode = SlipMode::ProportionalLag;
    lag.lag_factor = 0.2;
    const WorkcellState n = step(WorkcellState{}, {10, 0}, 0.1, lag, 250);
    EXPECT_NEAR(n.garment_pose.x, 0.8, 1e-12);
    EXPECT_NEAR(n.ee_pose.x, 1.0, 1e-12);
}

TEST(Step, ConstantDrift) {
    SlipModel drift;
    drift.mode = SlipMode::ConstantDrift;
    drift.drift_velocity = {0, -2};
    const WorkcellState n = step(WorkcellState{}, {10, 0}, 0.1, drift, 250);
    EXPECT_NEAR(n.garment_pose.x, 1.0, 1e-12);
    EXPECT_NEAR(n.garment_pose.y, 0.2, 1e-12);
    EXPECT_NEAR(n.ee_pose.y, 0.0, 1e-12);
}

TEST(Step, StitchCountFromPhaseAccumulator) {
    WorkcellState s;
    s.machine.running = true;
    s.machine.presser_foot = PresserFoot::Down;
    for (int i = 0; i < 55; ++i) s = step(std::move(s), {0, 0}, 0.01, {}, 250);
    EXPECT_EQ(s.stitches.size(), 5u);
    for (std::size_t i = 1; i < s.stitches.size(); ++i) EXPECT_GT(s.stitches[i].t, s.stitches[i - 1].t);
    EXPECT_NEAR(s.stitches[0].t, 0.1, 1e-9);
}

TEST(Step, NoStitchesWithFootUpOrMachineStopped) {
    WorkcellState s;
    s.machine.running = true;
    for (int i = 0; i < 30; ++i) s = step(std::move(s), {0, 0}, 0.01, {}, 250);
    EXPECT_TRUE(s.stitches.empty());
    WorkcellState t;
    t.machine.presser_foot = PresserFoot::Down;
    for (int i = 0; i < 30; ++i) t = step(std::move(t), {0, 0}, 0.01, {}, 250);
    EXPECT_TRUE(t.stitches.empty());
}

TEST(Step, GuardsInput) {
    EXPECT_THROW(step(WorkcellState{}, {300, 0}, 0.01, {}, 250), ValidationError);
    EXPECT_THROW(step(WorkcellState{}, {1, 0}, 0.0, {}, 250), ValidationError);
    SlipModel bad;
    bad.lag_factor = 1.0;
    EXPECT_THROW(bad.validate(), ValidationError);
}

TEST(Step, GarmentSpeedBound) {
    gen::Rng r(61);
    SlipModel slip{SlipMode::ConstantDrift, {1.5, -2.5}, 0.0, 0.4, 0};
    WorkcellState s;
    s.rng.seed(9);
    for (int i = 0; i < 5000; ++i) {
        const Vec2 cmd{gen::uniform(r, -100, 100), gen::uniform(r, -100, 100)};
        const WorkcellState n = step(s, cmd, 0.01, slip, 250);
        const double g = distance(n.garment_pose.translation(), s.garment_pose.translation()) / 0.01;
        const double bound = norm(cmd) + norm(slip.drift_velocity) + 5 * slip.noise_sd * std::sqrt(0.01) * std::sqrt(2.0) / 0.01;
        ASSERT_LE(g, bound);
        s = n;
    }
}

TEST(PlaceGarment, ZeroErrorPutsSeamStartUnderNeedle) {
    for (const char* name : {"straight_panel.dxf", "arc_panel.dxf"}) {
        const DigitalThread t = fixture(name);
        const WorkcellState s = place_garment(t, {});
        EXPECT_NEAR(distance(s.garment_pose.apply(t.seam.front()), kNeedleWorld), 0.0, 1e-12);
        EXPECT_NEAR(edge_dist(t, s.needle_in_garment()), 20.0, 0.011) << name;
        EXPECT_NEAR(distance(s.garment_pose.apply(s.grip_offset), s.ee_pose), 0.0, 1e-12);
    }
}

TEST(PlaceGarment, OffsetAlongEdgeNormal) {
    // Vertical seam 20 mm left of the right edge: that edge's normal is +x.
    DigitalThread t;
    t.contour = {{0, 0}, {100, 0}, {100, 200}, {0, 200}, {0, 0}};
    t.seam = {{80, 30}, {80, 170}};
    const WorkcellState s = place_garment(t, {2, 0, 0});
    EXPECT_NEAR(edge_dist(t, s.needle_in_garment()), 22.0, 1e-12);
}

TEST(PlaceGarment, RotationErrorGrowsAlongSeam) {
    const DigitalThread t = fixture("straight_panel.dxf");
    const WorkcellState s = place_garment(t, {0, 0, deg_to_rad(5)}, kSync);
    EXPECT_NEAR(edge_dist(t, s.needle_in_garment()), 20.0, 1e-9);
    const RunResult run = run_open_loop(plan(t), s, {});
    const double lever = 200.0 * std::sin(deg_to_rad(5));
    EXPECT_NEAR(std::fabs(edge_dist(t, run.final_state.needle_in_garment()) - 20.0), lever, 0.05);
}

TEST(OpenLoop, NoSlipStitchesOnAllowance) {
    for (const char* name : {"straight_panel.dxf", "arc_panel.dxf", "spline_panel.dxf"}) {
        const DigitalThread t = fixture(name);
        const RunResult run = run_open_loop(plan(t), place_garment(t, {}, kSync), {});
        ASSERT_FALSE(run.stitches.empty());
        double worst = 0.0;
        for (const Stitch& st : run.stitches) worst = std::max(worst, std::fabs(edge_dist(t, st.position) - 20.0));
        EXPECT_LE(worst, 0.3) << name;
        EXPECT_EQ(run.final_state.machine.presser_foot, PresserFoot::Up);
        EXPECT_FALSE(run.final_state.machine.running);
    }
}

TEST(OpenLoop, RigidGripConservedWithoutSlip) {
    const DigitalThread t = fixture("arc_panel.dxf");
    const WorkcellState s = place_garment(t, {0.4, -0.3, 0.01}, kSync);
    const RunResult run = run_open_loop(plan(t), s, {});
    const WorkcellState& f = run.final_state;
    EXPECT_NEAR(distance(f.garment_pose.apply(f.grip_offset), f.ee_pose), 0.0, 1e-9);
    EXPECT_DOUBLE_EQ(f.garment_pose.theta, s.garment_pose.theta);
}

TEST(OpenLoop, DriftAccumulates) {
    const DigitalThread t = fixture("straight_panel.dxf");
    SlipModel drift{SlipMode::ConstantDrift, {0, -2}, 0, 0, 0};
    const Trajectory p = plan(t);
    const RunResult run = run_open_loop(p, place_garment(t, {}, kSync), drift);
    const Stitch& last = run.stitches.back();
    // The garment creeps +y under the gripper, so the needle closes on the bottom edge.
    EXPECT_NEAR(edge_dist(t, last.position) - 20.0, -2.0 * last.t, 1e-6);
    EXPECT_NEAR(20.0 - edge_dist(t, last.position), 13.5, 0.2);
}

TEST(OpenLoop, StitchCountAndTimes) {
    const DigitalThread t = fixture("arc_panel.dxf");
    const Trajectory p = plan(t);
    const RunResult run = run_open_loop(p, place_garment(t, {}, kSync), {});
    const double expected = std::floor(p.duration() * kSync.stitch_rate);
    EXPECT_NEAR(double(run.stitches.size()), expected, 1.0);
    for (std::size_t i = 1; i < run.stitches.size(); ++i) EXPECT_GT(run.stitches[i].t, run.stitches[i - 1].t);
}

TEST(OpenLoop, DeterministicForSeed) {
    const DigitalThread t = fixture("straight_panel.dxf");
    SlipModel slip{SlipMode::ConstantDrift, {0, -3}, 0, 0.5, 42};
    const Trajectory p = plan(t);
    const RunResult a = run_open_loop(p, place_garment(t, {}, kSync), slip);
    const RunResult b = run_open_loop(p, place_garment(t, {}, kSync), slip);
    ASSERT_EQ(a.stitches.size(), b.stitches.size());
    for (std::size_t i = 0; i < a.stitches.size(); ++i) {
        EXPECT_EQ(a.stitches[i].position, b.stitches[i].position);
        EXPECT_EQ(a.stitches[i].t, b.stitches[i].t);
    }
    slip.seed = 43;
    const RunResult c = run_open_loop(p, place_garment(t, {}, kSync), slip);
    EXPECT_NE(a.stitches.back().position, c.stitches.back().position);
}

TEST(OpenLoop, Errors) {
    const DigitalThread t = fixture("straight_panel.dxf");
    EXPECT_THROW(run_open_loop(Trajectory{}, place_garment(t, {}), {}), ValidationError);
    // trajectory that does not start at the needle under the nominal placement
    Trajectory p = plan(t);
    for (Waypoint& w : p.waypoints) w.x += 5;
    EXPECT_THROW(run_open_loop(p, place_garment(t, {}), {}), ValidationError);
}
