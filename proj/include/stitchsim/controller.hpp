#pragma once

// Closed-loop visual servoing: every control cycle the needle camera reports
// the edge distance; when it leaves the tolerance band around the seam
// allowance, the deviation is resolved along the waypoint normal and folded
// into the plan origin.

#include <cmath>
#include <cstdint>
#include <deque>
#include <memory>
#include <optional>
#include <vector>

#include "stitchsim/digital_thread.hpp"
#include "stitchsim/error.hpp"
#include "stitchsim/perception.hpp"
#include "stitchsim/trajectory.hpp"
#include "stitchsim/workcell.hpp"

namespace stitchsim {

inline constexpr double kDefaultTolerance = 1.0;  // mm
inline constexpr double kDropoutLimit = 1.0;      // s without a valid frame

// Anything that can report the needle-to-edge distance for a workcell state.
class EdgeSensor {
public:
    virtual ~EdgeSensor() = default;
    virtual EdgeMeasurement measure(const WorkcellState& state) = 0;
};

// Exact geometry, no camera.
class OracleSensor final : public EdgeSensor {
public:
    explicit OracleSensor(const DigitalThread& thread) : thread_(thread) {}

    EdgeMeasurement measure(const WorkcellState& state) override {
        EdgeMeasurement m = oracle_edge_distance(thread_, state.garment_pose, kNeedleWorld);
        m.timestamp = state.t;
        return m;
    }

private:
    const DigitalThread& thread_;
};

struct RasterSensorParams {
    CameraModel camera = CameraModel::needle_camera();
    RenderParams render{190.0, 50.0, 2.0, 0};
    int roi_half_extent = kDefaultRoiHalfExtent;
    double window = 1.0;  // s of frames feeding the thresholds
};

// Renders the needle-camera frame, runs Canny with thresholds refreshed once
// per window from all frames seen in it, and measures the nearest edge.
class RasterSensor final : public EdgeSensor {
public:
    RasterSensor(const DigitalThread& thread, RasterSensorParams params)
        : thread_(thread), params_(std::move(params)) {
        params_.camera.validate();
        if (distance(params_.camera.needle_world(), kNeedleWorld) > 1e-9)
            throw ValidationError("needle camera must map the needle pixel to the world origin");
    }

    EdgeMeasurement measure(const WorkcellState& state) override {
        RenderParams rp = params_.render;
        rp.seed = params_.render.seed + frame_count_++;
        GrayImage frame = render_garment(thread_, state.garment_pose, params_.camera, rp);

        window_.push_back({state.t, frame});
        while (!window_.empty() && window_.front().t < state.t - params_.window) window_.pop_front();
        if (!thresholds_ || state.t - last_update_ >= params_.window) {
            std::vector<GrayImage> frames;
            frames.reserve(window_.size());
            for (const auto& f : window_) frames.push_back(f.image);
            thresholds_ = dynamic_thresholds(frames);
            last_update_ = state.t;
        }

        const std::vector<Pixel> edges = detect_edges(frame, thresholds_->low, thresholds_->high);
        // Interior hint from what the robot knows: its grip and the nominal orientation.
        const Vec2 hint = state.ee_pose + state.nominal_pose.rotate_vector(thread_.centroid() - state.grip_offset);
        EdgeMeasurement m = needle_edge_distance(edges, params_.camera, params_.roi_half_extent, hint);
        m.timestamp = state.t;
        return m;
    }

    std::optional<CannyThresholds> thresholds() const { return thresholds_; }

private:
    struct TimedFrame {
        double t;
        GrayImage image;
    };
    const DigitalThread& thread_;
    RasterSensorParams params_;
    std::deque<TimedFrame> window_;
    std::optional<CannyThresholds> thresholds_;
    double last_update_ = 0.0;
    std::uint64_t frame_count_ = 0;
};

struct ControlConfig {
    double tol = kDefaultTolerance;  // mm half-width of the seam band
    double allowance = 20.0;         // mm desired edge distance

    void validate() const {
        if (!(tol > 0.0)) throw ValidationError("tol must be > 0");
        if (!(allowance > 0.0)) throw ValidationError("allowance must be > 0");
    }
};

struct ControlState {
    Vec2 origin;  // accumulated corrections, plan frame
    std::size_t waypoint_index = 0;
    bool corr = false;
    double tol = kDefaultTolerance;
    double desired_allowance = 20.0;
    Trajectory plan;  // remaining waypoints re-anchored on origin
};

struct CorrectionCommand {
    double x_correction = 0.0;
    double y_correction = 0.0;
    double d = 0.0;
};

// Deviation from the allowance, resolved along theta when outside the band.
// Invalid frames produce no command and a dropout event.
inline std::optional<CorrectionCommand> compute_correction(const EdgeMeasurement& measurement, const ControlState& ctrl,
                                                           double theta, std::vector<ControlEvent>* log = nullptr) {
    if (!measurement.valid) {
        if (log) log->push_back({ControlEvent::Kind::Dropout, measurement.timestamp, 0.0, theta, 0.0, 0.0, {}});
        return std::nullopt;
    }
    const double deviation = measurement.edge_dist - ctrl.desired_allowance;
    if (std::fabs(deviation) <= ctrl.tol) return std::nullopt;
    return CorrectionCommand{deviation * std::cos(theta), deviation * std::sin(theta), deviation};
}

// Shifts the origin by the command and re-anchors the waypoints still ahead,
// keeping their timestamps (the correction rides on top of one cycle).
inline ControlState apply_correction_and_replan(ControlState ctrl, const CorrectionCommand& cmd) {
    ctrl.corr = true;
    ctrl.origin += Vec2{cmd.x_correction, cmd.y_correction};
    for (std::size_t i = ctrl.waypoint_index; i < ctrl.plan.waypoints.size(); ++i) {
        ctrl.plan.waypoints[i].x += cmd.x_correction;
        ctrl.plan.waypoints[i].y += cmd.y_correction;
    }
    ctrl.corr = false;
    return ctrl;
}

// Sense -> decide -> act once per cycle. The correction found in cycle k is
// executed as extra displacement during cycle k. With no corrections this
// issues exactly the same commands as run_open_loop.
inline RunResult run_closed_loop([[maybe_unused]] const DigitalThread& thread, const Trajectory& traj, const WorkcellState& initial,
                                 const SlipModel& slip, EdgeSensor& sensor, const ControlConfig& cfg,
                                 double dt = kDefaultDt, ControlState* final_ctrl = nullptr) {
    cfg.validate();
    ControlState ctrl;
    ctrl.tol = cfg.tol;
    ctrl.desired_allowance = cfg.allowance;
    ctrl.plan = traj;
    double last_valid = initial.t;

    auto decide = [&](const WorkcellState& state, double tau, Vec2 origin, RunResult& out) {
        EdgeMeasurement m = sensor.measure(state);
        out.trace.push_back({state.t, m.edge_dist, m.valid});
        if (m.valid) {
            last_valid = state.t;
        } else if (state.t - last_valid > kDropoutLimit) {
            throw RuntimeFailure("tracking lost: no valid edge measurement for more than 1 s");
        }
        const std::size_t seg = traj.segment_at(tau);
        ctrl.waypoint_index = std::min(seg + 1, traj.waypoints.size());
        const double theta = traj.waypoints[seg].theta;
        const auto cmd = compute_correction(m, ctrl, theta, &out.events);
        if (!cmd) return origin;
        out.events.push_back({ControlEvent::Kind::Correction, state.t, cmd->d, theta, cmd->x_correction,
                              cmd->y_correction, state.needle_in_garment()});
        ctrl = apply_correction_and_replan(std::move(ctrl), *cmd);
        return ctrl.origin;
    };
    RunResult result = detail::execute(traj, initial, slip, dt, decide);
    if (final_ctrl) *final_ctrl = ctrl;
    return result;
}

}  // namespace stitchsim
