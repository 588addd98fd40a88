#pragma once

// Fixed-step planar workcell: the needle sits at the world origin, the robot
// drags the gripped garment under it, and the sewing machine strikes at a
// constant rate. Slip between gripper and garment is the disturbance.

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "stitchsim/digital_thread.hpp"
#include "stitchsim/error.hpp"
#include "stitchsim/geometry.hpp"
#include "stitchsim/trajectory.hpp"

namespace stitchsim {

inline constexpr double kDefaultDt = 0.01;  // s, 100 Hz control cycle
inline constexpr Vec2 kNeedleWorld{0.0, 0.0};

enum class PresserFoot { Up, Down };

struct SewingMachineState {
    PresserFoot presser_foot = PresserFoot::Up;
    bool running = false;
    double stitch_rate = 10.0;   // stitches/s
    double stitch_length = 3.0;  // mm
    double phase = 0.0;          // [0, 1) of the current stitch cycle
};

struct Stitch {
    Vec2 position;  // garment frame, mm
    double t = 0.0;
};

using StitchRecord = std::vector<Stitch>;

enum class SlipMode { None, ConstantDrift, ProportionalLag };

struct SlipModel {
    SlipMode mode = SlipMode::None;
    Vec2 drift_velocity;     // mm/s, subtracted from the garment motion
    double lag_factor = 0.0;  // fraction of commanded translation lost
    double noise_sd = 0.0;    // mm/sqrt(s) random wander
    std::uint64_t seed = 0;

    void validate() const {
        if (!(lag_factor >= 0.0 && lag_factor < 1.0)) throw ValidationError("lag_factor must be in [0, 1)");
        if (!(noise_sd >= 0.0)) throw ValidationError("slip noise_sd must be >= 0");
    }
};

struct WorkcellState {
    Pose2 garment_pose;  // garment frame in world
    Pose2 nominal_pose;  // where the robot believes the garment was placed
    Vec2 ee_pose;        // grip point in world
    Vec2 grip_offset;    // grip point in garment frame
    SewingMachineState machine;
    StitchRecord stitches;
    double t = 0.0;
    std::mt19937_64 rng{0};

    // Needle position expressed in the garment frame.
    Vec2 needle_in_garment() const { return garment_pose.apply_inverse(kNeedleWorld); }
};

// Advances one control cycle. The end effector moves by cmd*dt; the garment
// follows minus slip. Stitches are laid at the exact phase-wrap instants,
// with the garment pose interpolated inside the step.
inline WorkcellState step(WorkcellState s, Vec2 ee_velocity_cmd, double dt, const SlipModel& slip, double v_max) {
    if (!(dt > 0.0)) throw ValidationError("dt must be > 0");
    if (norm(ee_velocity_cmd) > v_max + 1e-9)
        throw ValidationError("velocity command " + std::to_string(norm(ee_velocity_cmd)) + " mm/s exceeds v_max");

    const Vec2 ee_delta = ee_velocity_cmd * dt;
    Vec2 garment_delta = ee_delta;
    switch (slip.mode) {
        case SlipMode::None: break;
        case SlipMode::ConstantDrift: garment_delta -= slip.drift_velocity * dt; break;
        case SlipMode::ProportionalLag: garment_delta *= (1.0 - slip.lag_factor); break;
    }
    if (slip.mode != SlipMode::None && slip.noise_sd > 0.0) {
        std::normal_distribution<double> wander(0.0, slip.noise_sd * std::sqrt(dt));
        garment_delta.x += wander(s.rng);
        garment_delta.y += wander(s.rng);
    }

    const Pose2 start = s.garment_pose;
    s.ee_pose += ee_delta;
    s.garment_pose.x += garment_delta.x;
    s.garment_pose.y += garment_delta.y;

    SewingMachineState& m = s.machine;
    if (m.running) {
        const double advance = m.stitch_rate * dt;
        const double total = m.phase + advance;
        const double wraps = std::floor(total);
        for (double k = 1.0; k <= wraps; k += 1.0) {
            const double f = (k - m.phase) / advance;
            if (m.presser_foot == PresserFoot::Down) {
                const Pose2 at{start.x + garment_delta.x * f, start.y + garment_delta.y * f, start.theta};
                s.stitches.push_back({at.apply_inverse(kNeedleWorld), s.t + f * dt});
            }
        }
        m.phase = total - wraps;
    }
    s.t += dt;
    return s;
}

struct PoseError {
    double dx = 0.0;  // mm, world
    double dy = 0.0;  // mm, world
    double dtheta = 0.0;  // rad, about the needle
};

// Puts the first seam point under the needle (garment axes aligned with the
// world), then perturbs the actual pose by pose_error. The robot grips the
// garment at its centroid.
inline WorkcellState place_garment(const DigitalThread& thread, const PoseError& pose_error, const SyncParams& sync = {}) {
    if (thread.seam.empty()) throw ValidationError("thread has no seam");
    WorkcellState s;
    s.nominal_pose = {-thread.seam.front().x, -thread.seam.front().y, 0.0};
    const Vec2 t = rotate(s.nominal_pose.translation(), pose_error.dtheta) + Vec2{pose_error.dx, pose_error.dy};
    s.garment_pose = {t.x, t.y, s.nominal_pose.theta + pose_error.dtheta};
    s.grip_offset = thread.centroid();
    s.ee_pose = s.garment_pose.apply(s.grip_offset);
    s.machine.stitch_rate = sync.stitch_rate;
    s.machine.stitch_length = sync.stitch_length;
    return s;
}

struct ControlEvent {
    enum class Kind { Correction, Dropout };
    Kind kind = Kind::Correction;
    double t = 0.0;
    double d = 0.0;
    double theta = 0.0;
    double x_correction = 0.0;
    double y_correction = 0.0;
    Vec2 needle_garment;  // where the needle was on the garment when it fired
};

struct CycleTrace {
    double t = 0.0;
    double edge_dist = 0.0;
    bool valid = false;
};

struct RunResult {
    WorkcellState final_state;
    StitchRecord stitches;
    std::vector<ControlEvent> events;
    std::vector<CycleTrace> trace;  // per-cycle measurements, closed loop only
};

namespace detail {

// Shared executor for both loop types. `decide` runs at the start of every
// cycle and returns the plan-frame origin offset to hold at the end of it.
template <typename Decide>
RunResult execute(const Trajectory& traj, WorkcellState state, const SlipModel& slip, double dt, Decide&& decide) {
    if (traj.empty()) throw ValidationError("empty trajectory");
    if (!(dt > 0.0)) throw ValidationError("dt must be > 0");
    slip.validate();
    if (distance(state.nominal_pose.apply(traj.waypoints.front().position()), kNeedleWorld) > 1e-6)
        throw ValidationError("trajectory does not start at the needle under the nominal placement");

    state.rng.seed(slip.seed);
    state.machine.presser_foot = PresserFoot::Down;
    state.machine.running = true;
    state.machine.phase = 0.0;

    RunResult result;
    const double t_start = state.t;
    const double total = traj.duration();
    const double v_max = traj.limits.v_max;
    Vec2 origin;
    for (std::size_t k = 0;; ++k) {
        const double tau0 = static_cast<double>(k) * dt;
        if (tau0 >= total) break;
        const double tau1 = std::min(static_cast<double>(k + 1) * dt, total);
        const double h = tau1 - tau0;
        const Vec2 origin_before = origin;
        origin = decide(state, tau0, origin, result);
        const Vec2 target0 = traj.position_at(tau0) + origin_before;
        const Vec2 target1 = traj.position_at(tau1) + origin;
        // Garment moves opposite to the needle's planned motion over it.
        Vec2 vel = -state.nominal_pose.rotate_vector(target1 - target0) / h;
        if (norm(vel) > v_max) vel = vel * (v_max / norm(vel));
        state = step(std::move(state), vel, h, slip, v_max);
        state.t = t_start + tau1;
    }
    state.machine.running = false;
    state.machine.presser_foot = PresserFoot::Up;
    result.stitches = state.stitches;
    result.final_state = std::move(state);
    return result;
}

}  // namespace detail

// Plays the trajectory back with no feedback at all.
inline RunResult run_open_loop(const Trajectory& traj, const WorkcellState& initial, const SlipModel& slip,
                               double dt = kDefaultDt) {
    return detail::execute(traj, initial, slip, dt,
                           [](const WorkcellState&, double, Vec2 origin, RunResult&) { return origin; });
}

}  // namespace stitchsim
