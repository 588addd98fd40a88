#pragma once

// JSON configuration files and run-output documents.
//
// Sidecar / run config:
//   { "seam_color_index": 1, "seam_allowance_mm": 20.0, "stitch_length_mm": 3.0,
//     "machine": { "stitch_rate": 10, "needle_rate_max": 25, "thread_tension": ... },
//     "limits": { "v_max": 250, "a_max": 300 },
//     "controller": { "tol": 1.0, "sensor": "oracle" },
//     "dt": 0.01, "chord_error_mm": 0.01 }
// Every key is optional. Unknown keys are rejected so typos do not go unnoticed.

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include <json.hpp>

#include "stitchsim/controller.hpp"
#include "stitchsim/digital_thread.hpp"
#include "stitchsim/dxf.hpp"
#include "stitchsim/error.hpp"
#include "stitchsim/eval.hpp"
#include "stitchsim/trajectory.hpp"
#include "stitchsim/workcell.hpp"

namespace stitchsim {

using json = nlohmann::json;

namespace fs = std::filesystem;

inline std::string read_text_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// STITCHSIM_FIXTURES wins over the directory baked in at build time.
inline fs::path fixture_dir() {
    if (const char* env = std::getenv("STITCHSIM_FIXTURES"); env && *env) return env;
#ifdef STITCHSIM_DEFAULT_FIXTURES
    return STITCHSIM_DEFAULT_FIXTURES;
#else
    return "fixtures";
#endif
}

// Relative paths are tried against `base` (usually the referring config's
// directory), then the working directory, then the fixture directory.
inline fs::path resolve_path(const std::string& p, const fs::path& base = {}) {
    const fs::path path(p);
    if (path.is_absolute()) return path;
    if (!base.empty() && fs::exists(base / path)) return base / path;
    if (fs::exists(path)) return path;
    if (fs::exists(fixture_dir() / path)) return fixture_dir() / path;
    return path;
}

namespace detail {

inline json parse_json(const std::string& text, const std::string& what) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw ValidationError(what + ": " + e.what());
    }
}

inline void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
    if (!j.is_object()) throw ValidationError(where + " must be a JSON object");
    const std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [key, _] : j.items())
        if (!ok.count(key)) throw ValidationError(where + ": unknown key \"" + key + "\"");
}

template <typename T>
void read_number(const json& j, const char* key, T& out, const std::string& where) {
    if (!j.contains(key)) return;
    const json& v = j.at(key);
    if (!v.is_number()) throw ValidationError(where + "." + key + " must be a number");
    if constexpr (std::is_unsigned_v<T>) {
        if (!v.is_number_unsigned()) throw ValidationError(where + "." + key + " must be a non-negative integer");
    }
    out = v.get<T>();
}

inline Vec2 read_vec2(const json& v, const std::string& where) {
    if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
        throw ValidationError(where + " must be a [x, y] pair");
    return {v[0].get<double>(), v[1].get<double>()};
}

}  // namespace detail

struct RunConfig {
    SeamSpec spec;
    bool allowance_set = false;
    bool stitch_length_set = false;
    bool color_set = false;
    SyncParams sync;
    MotionLimits limits{250.0, 300.0};
    ControlConfig control;
    SensorKind sensor = SensorKind::Oracle;
    double dt = kDefaultDt;
    double chord_error = kDefaultChordError;
    json thread_tension;  // carried through to run.json, not simulated

    void validate() const {
        spec.validate();
        limits.validate();
        control.validate();
        if (!(sync.stitch_rate > 0.0)) throw ValidationError("machine.stitch_rate must be > 0");
        if (!(sync.needle_rate_max > 0.0)) throw ValidationError("machine.needle_rate_max must be > 0");
        if (!(dt > 0.0)) throw ValidationError("dt must be > 0");
        if (!(chord_error > 0.0)) throw ValidationError("chord_error_mm must be > 0");
    }

    // DXF header variables fill in whatever the config left unset.
    SeamSpec merged_spec(const dxf::HeaderVars& header) const {
        SeamSpec s = spec;
        if (!allowance_set && header.seam_allowance) s.seam_allowance = *header.seam_allowance;
        if (!stitch_length_set && header.stitch_length) s.stitch_length = *header.stitch_length;
        if (!color_set && header.seam_color_index) s.seam_color_index = *header.seam_color_index;
        return s;
    }
};

inline SensorKind parse_sensor(const std::string& s) {
    if (s == "oracle") return SensorKind::Oracle;
    if (s == "raster") return SensorKind::Raster;
    throw ValidationError("sensor must be oracle or raster, got \"" + s + "\"");
}

inline RunConfig run_config_from_json(const json& j) {
    const std::string w = "config";
    detail::check_keys(j, {"seam_color_index", "seam_allowance_mm", "stitch_length_mm", "machine", "limits",
                           "controller", "dt", "chord_error_mm"},
                       w);
    RunConfig c;
    if (j.contains("seam_color_index")) {
        if (!j["seam_color_index"].is_number_integer()) throw ValidationError("config.seam_color_index must be an integer");
        c.spec.seam_color_index = j["seam_color_index"].get<int>();
        c.color_set = true;
    }
    c.allowance_set = j.contains("seam_allowance_mm");
    c.stitch_length_set = j.contains("stitch_length_mm");
    detail::read_number(j, "seam_allowance_mm", c.spec.seam_allowance, w);
    detail::read_number(j, "stitch_length_mm", c.spec.stitch_length, w);
    if (j.contains("machine")) {
        const json& m = j["machine"];
        detail::check_keys(m, {"stitch_rate", "needle_rate_max", "thread_tension"}, "config.machine");
        detail::read_number(m, "stitch_rate", c.sync.stitch_rate, "config.machine");
        detail::read_number(m, "needle_rate_max", c.sync.needle_rate_max, "config.machine");
        if (m.contains("thread_tension")) c.thread_tension = m["thread_tension"];
    }
    if (j.contains("limits")) {
        detail::check_keys(j["limits"], {"v_max", "a_max"}, "config.limits");
        detail::read_number(j["limits"], "v_max", c.limits.v_max, "config.limits");
        detail::read_number(j["limits"], "a_max", c.limits.a_max, "config.limits");
    }
    if (j.contains("controller")) {
        const json& k = j["controller"];
        detail::check_keys(k, {"tol", "sensor"}, "config.controller");
        detail::read_number(k, "tol", c.control.tol, "config.controller");
        if (k.contains("sensor")) {
            if (!k["sensor"].is_string()) throw ValidationError("config.controller.sensor must be a string");
            c.sensor = parse_sensor(k["sensor"].get<std::string>());
        }
    }
    detail::read_number(j, "dt", c.dt, w);
    detail::read_number(j, "chord_error_mm", c.chord_error, w);
    c.sync.stitch_length = c.spec.stitch_length;
    c.control.allowance = c.spec.seam_allowance;
    c.validate();
    return c;
}

inline RunConfig load_run_config(const fs::path& path) {
    return run_config_from_json(detail::parse_json(read_text_file(path), path.string()));
}

inline SlipMode parse_slip_mode(const std::string& s) {
    if (s == "none") return SlipMode::None;
    if (s == "constant_drift") return SlipMode::ConstantDrift;
    if (s == "proportional_lag") return SlipMode::ProportionalLag;
    throw ValidationError("slip mode must be none, constant_drift or proportional_lag, got \"" + s + "\"");
}

inline const char* to_string(SlipMode m) {
    switch (m) {
        case SlipMode::None: return "none";
        case SlipMode::ConstantDrift: return "constant_drift";
        case SlipMode::ProportionalLag: return "proportional_lag";
    }
    return "none";
}

// { "mode": "constant_drift", "drift_velocity_mm_s": [0, -3], "lag_factor": 0,
//   "noise_sd": 0.3, "seed": 0 }
inline SlipModel slip_from_json(const json& j) {
    const std::string w = "slip";
    detail::check_keys(j, {"mode", "drift_velocity_mm_s", "lag_factor", "noise_sd", "seed"}, w);
    SlipModel s;
    if (j.contains("mode")) {
        if (!j["mode"].is_string()) throw ValidationError("slip.mode must be a string");
        s.mode = parse_slip_mode(j["mode"].get<std::string>());
    }
    if (j.contains("drift_velocity_mm_s")) s.drift_velocity = detail::read_vec2(j["drift_velocity_mm_s"], "slip.drift_velocity_mm_s");
    detail::read_number(j, "lag_factor", s.lag_factor, w);
    detail::read_number(j, "noise_sd", s.noise_sd, w);
    if (j.contains("seed")) {
        if (!j["seed"].is_number_unsigned()) throw ValidationError("slip.seed must be a non-negative integer");
        s.seed = j["seed"].get<std::uint64_t>();
    }
    s.validate();
    return s;
}

inline SlipModel load_slip(const fs::path& path) {
    return slip_from_json(detail::parse_json(read_text_file(path), path.string()));
}

inline json slip_to_json(const SlipModel& s) {
    return {{"mode", to_string(s.mode)},
            {"drift_velocity_mm_s", {s.drift_velocity.x, s.drift_velocity.y}},
            {"lag_factor", s.lag_factor},
            {"noise_sd", s.noise_sd},
            {"seed", s.seed}};
}

// Parses a DXF file and extracts its thread with the config's seam spec
// (header variables fill gaps the config leaves). The stitch length and
// allowance actually used are written back into cfg.
inline DigitalThread load_thread(const fs::path& dxf_path, RunConfig& cfg) {
    if (!fs::exists(dxf_path)) throw ValidationError("cannot open " + dxf_path.string() + ": no such file");
    const dxf::Document doc = dxf::parse(read_text_file(dxf_path));
    const SeamSpec spec = cfg.merged_spec(doc.header);
    spec.validate();
    cfg.spec = spec;
    cfg.sync.stitch_length = spec.stitch_length;
    cfg.control.allowance = spec.seam_allowance;
    return extract_thread(doc.entities, spec, cfg.chord_error);
}

// bench.json:
// { "fixtures": ["straight_panel.dxf", "arc_panel.dxf"], "config": "cfg.json",
//   "slip": "slip_calibrated.json", "runs": 10, "seed_base": 1 | "seeds": [...],
//   "sensor": "oracle", "pose_error": { "sd_xy_mm": 0.3, "sd_theta_deg": 0.2 }, "jobs": 4 }
// "dxf" is accepted in place of a one-element "fixtures".
struct BenchFile {
    std::vector<fs::path> fixtures;
    RunConfig run;
    BenchmarkConfig bench;
};

inline BenchFile load_bench_config(const fs::path& path) {
    const json j = detail::parse_json(read_text_file(path), path.string());
    detail::check_keys(j, {"fixtures", "dxf", "config", "slip", "runs", "seeds", "seed_base", "sensor", "pose_error", "jobs"},
                       "bench");
    const fs::path base = path.parent_path();
    BenchFile b;
    if (j.contains("fixtures")) {
        if (!j["fixtures"].is_array() || j["fixtures"].empty())
            throw ValidationError("bench.fixtures must be a non-empty array of paths");
        for (const json& f : j["fixtures"]) b.fixtures.push_back(resolve_path(f.get<std::string>(), base));
    }
    if (j.contains("dxf")) b.fixtures.push_back(resolve_path(j["dxf"].get<std::string>(), base));
    if (b.fixtures.empty()) throw ValidationError("bench config names no fixtures");
    for (const fs::path& f : b.fixtures)
        if (!fs::exists(f)) throw ValidationError("fixture not found: " + f.string());

    if (j.contains("config")) {
        const json& c = j["config"];
        b.run = c.is_string() ? load_run_config(resolve_path(c.get<std::string>(), base)) : run_config_from_json(c);
    } else {
        b.run = run_config_from_json(json::object());
    }
    if (j.contains("slip")) {
        const json& s = j["slip"];
        b.bench.disturbance = s.is_string() ? load_slip(resolve_path(s.get<std::string>(), base)) : slip_from_json(s);
    }
    if (b.bench.disturbance.mode == SlipMode::None)
        throw ValidationError("bench.slip must describe an active disturbance");

    std::size_t runs = 10;
    detail::read_number(j, "runs", runs, "bench");
    if (runs == 0) throw ValidationError("bench.runs must be >= 1");
    if (j.contains("seeds")) {
        for (const json& s : j["seeds"]) {
            if (!s.is_number_unsigned()) throw ValidationError("bench.seeds must be non-negative integers");
            b.bench.seeds.push_back(s.get<std::uint64_t>());
        }
        if (b.bench.seeds.empty()) throw ValidationError("bench.seeds is empty");
    } else {
        std::uint64_t base_seed = 1;
        detail::read_number(j, "seed_base", base_seed, "bench");
        for (std::size_t i = 0; i < runs; ++i) b.bench.seeds.push_back(base_seed + i);
    }

    b.bench.sensor = b.run.sensor;
    if (j.contains("sensor")) b.bench.sensor = parse_sensor(j["sensor"].get<std::string>());
    if (j.contains("pose_error")) {
        const json& p = j["pose_error"];
        detail::check_keys(p, {"sd_xy_mm", "sd_theta_deg"}, "bench.pose_error");
        double sd_theta_deg = 0.0;
        detail::read_number(p, "sd_xy_mm", b.bench.pose_error.sd_xy, "bench.pose_error");
        detail::read_number(p, "sd_theta_deg", sd_theta_deg, "bench.pose_error");
        if (b.bench.pose_error.sd_xy < 0.0 || sd_theta_deg < 0.0)
            throw ValidationError("bench.pose_error deviations must be >= 0");
        b.bench.pose_error.sd_theta = deg_to_rad(sd_theta_deg);
    }
    unsigned jobs = 1;
    detail::read_number(j, "jobs", jobs, "bench");
    b.bench.jobs = std::max(1u, jobs);

    b.bench.sync = b.run.sync;
    b.bench.limits = b.run.limits;
    b.bench.control = b.run.control;
    b.bench.dt = b.run.dt;
    return b;
}

inline json point_json(Vec2 p) { return json::array({p.x, p.y}); }

inline json polyline_json(const Polyline& pts) {
    json a = json::array();
    for (const Vec2& p : pts) a.push_back(point_json(p));
    return a;
}

inline json thread_to_json(const DigitalThread& t) {
    return {{"contour", polyline_json(t.contour)},
            {"seam", polyline_json(t.seam)},
            {"spec",
             {{"seam_color_index", t.spec.seam_color_index},
              {"seam_allowance_mm", t.spec.seam_allowance},
              {"stitch_length_mm", t.spec.stitch_length}}},
            {"contour_length_mm", t.contour_length()},
            {"seam_length_mm", t.seam_length()}};
}

inline json pose_json(const Pose2& p) { return {{"x", p.x}, {"y", p.y}, {"theta", p.theta}}; }

inline json event_json(const ControlEvent& e) {
    json j = {{"kind", e.kind == ControlEvent::Kind::Correction ? "correction" : "dropout"}, {"t", e.t}};
    if (e.kind == ControlEvent::Kind::Correction) {
        j["d"] = e.d;
        j["theta"] = e.theta;
        j["x_correction"] = e.x_correction;
        j["y_correction"] = e.y_correction;
        j["needle_garment"] = point_json(e.needle_garment);
    }
    return j;
}

// run.json: stitch record with per-stitch oracle edge distances, seam error
// and the final workcell state.
inline json run_to_json(const RunResult& run, const DigitalThread& thread, const RunConfig& cfg, LoopType loop,
                        const SlipModel& slip) {
    json stitches = json::array();
    for (const Stitch& s : run.stitches)
        stitches.push_back({{"t", s.t},
                            {"x", s.position.x},
                            {"y", s.position.y},
                            {"edge_dist", signed_distance_to_ring(thread.contour, s.position).value}});
    const WorkcellState& f = run.final_state;
    json out = {{"mode", to_string(loop)},
                {"slip", slip_to_json(slip)},
                {"seam_allowance_mm", cfg.control.allowance},
                {"stitch_count", run.stitches.size()},
                {"stitches", stitches},
                {"final_state",
                 {{"t", f.t},
                  {"garment_pose", pose_json(f.garment_pose)},
                  {"ee_pose", point_json(f.ee_pose)},
                  {"grip_offset", point_json(f.grip_offset)},
                  {"presser_foot", f.machine.presser_foot == PresserFoot::Down ? "down" : "up"},
                  {"running", f.machine.running},
                  {"phase", f.machine.phase}}}};
    if (!run.stitches.empty() && thread.seam_length() >= kSegmentLength - 1e-3 * kSegmentLength) {
        const SeamErrorReport r = seam_error(run.stitches, thread, cfg.control.allowance);
        out["seam_error"] = {{"E_mm", r.E}, {"n", r.n}};
    }
    if (loop == LoopType::Closed) {
        json events = json::array();
        for (const ControlEvent& e : run.events) events.push_back(event_json(e));
        out["events"] = events;
    }
    if (!cfg.thread_tension.is_null()) out["thread_tension"] = cfg.thread_tension;
    return out;
}

}  // namespace stitchsim
