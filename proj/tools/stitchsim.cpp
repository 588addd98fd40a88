// stitchsim command line: parse, plan, perceive, simulate, bench, render.
// Exit codes: 0 ok, 1 invalid input or usage, 2 runtime failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "stitchsim/stitchsim.hpp"

namespace fs = std::filesystem;
using namespace stitchsim;

namespace {

// Output goes to a sibling temp file first so a failure never leaves a
// half-written artifact behind.
void write_atomic(const fs::path& path, const std::string& content) {
    if (path.has_parent_path() && !fs::exists(path.parent_path()))
        throw ValidationError("output directory does not exist: " + path.parent_path().string());
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw ValidationError("cannot write " + path.string());
        out << content;
        if (!out.flush()) throw RuntimeFailure("write failed: " + tmp.string());
    }
    fs::rename(tmp, path);
}

void emit(const std::string& out_path, const std::string& content) {
    if (out_path.empty() || out_path == "-")
        std::cout << content;
    else
        write_atomic(out_path, content);
}

RunConfig config_or_default(const std::string& path) {
    return path.empty() ? run_config_from_json(json::object()) : load_run_config(resolve_path(path));
}

fs::path existing_dxf(const std::string& p) {
    const fs::path path = resolve_path(p);
    if (!fs::exists(path)) throw ValidationError("cannot open " + p + ": no such file");
    return path;
}

Pose2 parse_pose(const std::string& s) {
    std::vector<double> v;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            v.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw ValidationError("--pose expects x,y,deg; bad value \"" + item + "\"");
        }
    }
    if (v.size() != 3) throw ValidationError("--pose expects x,y,deg");
    return {v[0], v[1], deg_to_rad(v[2])};
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

// ---- parse ---------------------------------------------------------------

struct ParseArgs {
    std::string dxf, config, out;
    bool emit_json = false;
};

int cmd_parse(const ParseArgs& a) {
    RunConfig cfg = config_or_default(a.config);
    const fs::path path = existing_dxf(a.dxf);
    const dxf::Document doc = dxf::parse(read_text_file(path));
    const SeamSpec spec = cfg.merged_spec(doc.header);
    spec.validate();
    const DigitalThread thread = extract_thread(doc.entities, spec, cfg.chord_error);
    if (doc.skipped > 0) {
        std::cerr << "skipped " << doc.skipped << " unsupported entities:";
        for (const auto& [kind, n] : doc.skipped_kinds) std::cerr << ' ' << kind << " x" << n;
        std::cerr << '\n';
    }
    if (a.emit_json) {
        json j = thread_to_json(thread);
        j["skipped_entities"] = doc.skipped;
        emit(a.out, dump(j));
    } else {
        char buf[256];
        std::snprintf(buf, sizeof buf,
                      "contour: %zu vertices, %.3f mm\nseam: %zu vertices, %.3f mm\nallowance %.3f mm, stitch %.3f mm, "
                      "seam color %d\n",
                      thread.contour.size(), thread.contour_length(), thread.seam.size(), thread.seam_length(),
                      spec.seam_allowance, spec.stitch_length, spec.seam_color_index);
        emit(a.out, buf);
    }
    return 0;
}

// ---- plan ----------------------------------------------------------------

struct PlanArgs {
    std::string dxf, config, out;
    bool emit_csv = false;
};

int cmd_plan(const PlanArgs& a) {
    RunConfig cfg = config_or_default(a.config);
    const DigitalThread thread = load_thread(existing_dxf(a.dxf), cfg);
    const Trajectory traj = plan_seam(thread.seam, thread.contour, cfg.sync, cfg.limits);
    if (a.emit_csv) {
        std::string csv = "t,x,y,theta\n";
        char buf[160];
        for (std::size_t i = 0; i < traj.waypoints.size(); ++i) {
            const Waypoint& w = traj.waypoints[i];
            std::snprintf(buf, sizeof buf, "%.6f,%.6f,%.6f,%.9f\n", traj.timestamps[i], w.x, w.y, w.theta);
            csv += buf;
        }
        emit(a.out, csv);
    } else {
        const json j = {{"waypoints", traj.waypoints.size()},
                        {"length_mm", traj.length()},
                        {"duration_s", traj.duration()},
                        {"v_target_mm_s", traj.v_target},
                        {"v_peak_mm_s", traj.v_peak},
                        {"ramp_up_end_s", traj.ramp_up_end},
                        {"ramp_down_start_s", traj.ramp_down_start}};
        emit(a.out, dump(j));
    }
    return 0;
}

// ---- perceive ------------------------------------------------------------

struct PerceiveArgs {
    std::string dxf, config, pose, render;
    bool measure = false;
    bool estimate = false;
    double noise = 0.0;
    std::uint64_t seed = 0;
};

int cmd_perceive(const PerceiveArgs& a) {
    RunConfig cfg = config_or_default(a.config);
    const Pose2 pose = parse_pose(a.pose);
    if (!(a.noise >= 0.0)) throw ValidationError("--noise must be >= 0");
    if (a.render.empty() && !a.measure && !a.estimate)
        throw ValidationError("perceive needs at least one of --render, --measure, --estimate");
    const DigitalThread thread = load_thread(existing_dxf(a.dxf), cfg);

    const CameraModel camera = CameraModel::needle_camera();
    RenderParams rp;
    rp.noise_sd = a.noise;
    rp.seed = a.seed;
    const GrayImage frame = render_garment(thread, pose, camera, rp);
    if (!a.render.empty()) {
        std::ostringstream pgm;
        write_pgm(pgm, frame);
        write_atomic(a.render, pgm.str());
    }
    json out = json::object();
    if (a.measure) {
        const CannyThresholds th = dynamic_thresholds(std::span<const GrayImage>(&frame, 1));
        const std::vector<Pixel> edges = detect_edges(frame, th.low, th.high);
        const EdgeMeasurement m = needle_edge_distance(edges, camera, kDefaultRoiHalfExtent, pose.apply(thread.centroid()));
        const EdgeMeasurement truth = oracle_edge_distance(thread, pose, kNeedleWorld);
        out["measurement"] = {{"edge_dist", m.edge_dist},
                              {"nearest_edge_point", point_json(m.nearest_edge_point)},
                              {"valid", m.valid},
                              {"thresholds", {th.low, th.high}},
                              {"oracle_edge_dist", truth.edge_dist}};
    }
    if (a.estimate) {
        // Overhead view of the whole piece, 0.5 mm per pixel with a 40 mm border.
        Vec2 lo{1e300, 1e300}, hi{-1e300, -1e300};
        for (const Vec2& p : transform(thread.contour, pose)) {
            lo = {std::min(lo.x, p.x), std::min(lo.y, p.y)};
            hi = {std::max(hi.x, p.x), std::max(hi.y, p.y)};
        }
        const double s = 0.5;
        const CameraModel overhead = CameraModel::overhead(lo - Vec2{40, 40}, int((hi.x - lo.x + 80) / s) + 1,
                                                           int((hi.y - lo.y + 80) / s) + 1, s);
        const GrayImage img = render_garment(thread, pose, overhead, rp);
        const GrayImage bg(overhead.width, overhead.height, static_cast<std::uint8_t>(rp.background));
        const PoseEstimate e = estimate_pose(img, bg, thread, overhead);
        out["estimate"] = {{"x", e.x},
                           {"y", e.y},
                           {"theta_deg", rad_to_deg(e.theta)},
                           {"grasp_point", point_json(e.grasp_point)},
                           {"score", e.score}};
    }
    if (!out.empty()) std::cout << dump(out);
    return 0;
}

// ---- simulate ------------------------------------------------------------

struct SimulateArgs {
    std::string mode = "open", dxf = "straight_panel.dxf", config, slip, out, events, svg, sensor, pose_error;
    std::optional<double> tol;
    std::uint64_t seed = 0;
};

int cmd_simulate(const SimulateArgs& a) {
    RunConfig cfg = config_or_default(a.config);
    if (a.mode != "open" && a.mode != "closed") throw ValidationError("--mode must be open or closed");
    const LoopType loop = a.mode == "open" ? LoopType::Open : LoopType::Closed;
    if (!a.sensor.empty()) cfg.sensor = parse_sensor(a.sensor);
    if (a.tol) cfg.control.tol = *a.tol;
    cfg.validate();
    SlipModel slip = a.slip.empty() ? SlipModel{} : load_slip(resolve_path(a.slip));
    slip.seed = a.seed;
    PoseError pe;
    if (!a.pose_error.empty()) {
        const Pose2 p = parse_pose(a.pose_error);
        pe = {p.x, p.y, p.theta};
    }
    const DigitalThread thread = load_thread(existing_dxf(a.dxf), cfg);

    BenchmarkConfig bc;
    bc.sync = cfg.sync;
    bc.limits = cfg.limits;
    bc.control = cfg.control;
    bc.sensor = cfg.sensor;
    bc.dt = cfg.dt;
    const Trajectory plan = plan_seam(thread.seam, thread.contour, cfg.sync, cfg.limits);
    const WorkcellState initial = place_garment(thread, pe, cfg.sync);
    RunResult run;
    if (loop == LoopType::Open) {
        run = run_open_loop(plan, initial, slip, cfg.dt);
    } else if (cfg.sensor == SensorKind::Raster) {
        RasterSensorParams rp;
        rp.render.seed = a.seed * 1000003ULL;
        RasterSensor sensor(thread, rp);
        run = run_closed_loop(thread, plan, initial, slip, sensor, cfg.control, cfg.dt);
    } else {
        OracleSensor sensor(thread);
        run = run_closed_loop(thread, plan, initial, slip, sensor, cfg.control, cfg.dt);
    }

    json j = run_to_json(run, thread, cfg, loop, slip);
    j["seed"] = a.seed;
    j["sensor"] = cfg.sensor == SensorKind::Raster ? "raster" : "oracle";
    j["tol_mm"] = cfg.control.tol;
    emit(a.out, dump(j));
    if (!a.events.empty()) {
        std::string lines;
        for (const ControlEvent& e : run.events) lines += event_json(e).dump() + "\n";
        write_atomic(a.events, lines);
    }
    if (!a.svg.empty()) write_atomic(a.svg, render_run(run, thread));
    if (j.contains("seam_error")) std::cerr << "seam error E = " << j["seam_error"]["E_mm"].get<double>() << " mm\n";
    return 0;
}

// ---- bench ---------------------------------------------------------------

struct BenchArgs {
    std::string config, out, plots;
    unsigned jobs = 0;
};

int cmd_bench(const BenchArgs& a) {
    if (a.config.empty()) throw ValidationError("bench needs --config bench.json");
    BenchFile b = load_bench_config(resolve_path(a.config));
    if (a.jobs > 0) b.bench.jobs = a.jobs;
    if (!a.plots.empty() && fs::exists(a.plots) && !fs::is_directory(a.plots))
        throw ValidationError("--plots is not a directory: " + a.plots);

    std::vector<Fixture> fixtures;
    for (const fs::path& f : b.fixtures) {
        RunConfig cfg = b.run;
        fixtures.push_back({f.stem().string(), load_thread(f, cfg)});
    }
    // Allowance and stitch length may come from a fixture header; all
    // fixtures in one bench share them.
    {
        RunConfig cfg = b.run;
        load_thread(b.fixtures.front(), cfg);
        b.bench.sync = cfg.sync;
        b.bench.control = cfg.control;
    }
    const std::vector<BenchmarkResult> results = run_benchmark(fixtures, b.bench);
    emit(a.out, benchmark_csv(results));

    for (const BenchmarkResult& r : results) {
        std::fprintf(stderr, "%-16s %-6s disturbance %-3s  runs %zu  mean E %.3f mm\n", r.fixture.c_str(),
                     to_string(r.loop), r.disturbance ? "on" : "off", r.runs.size(), r.mean_E);
    }
    if (!a.plots.empty()) {
        fs::create_directories(a.plots);
        for (std::size_t f = 0; f < fixtures.size(); ++f) {
            const Trajectory plan =
                plan_seam(fixtures[f].thread.seam, fixtures[f].thread.contour, b.bench.sync, b.bench.limits);
            for (LoopType loop : {LoopType::Open, LoopType::Closed})
                for (bool dist : {false, true}) {
                    const RunResult run =
                        simulate_run(fixtures[f].thread, plan, b.bench, {loop, dist, b.bench.seeds.front()});
                    const std::string name = fixtures[f].name + "_" + to_string(loop) + (dist ? "_disturbed" : "_clean") + ".svg";
                    write_atomic(fs::path(a.plots) / name, render_run(run, fixtures[f].thread));
                }
        }
    }
    return 0;
}

// ---- render --------------------------------------------------------------

struct RenderArgs {
    std::string run, dxf, config, out;
};

int cmd_render(const RenderArgs& a) {
    RunConfig cfg = config_or_default(a.config);
    const json j = detail::parse_json(read_text_file(resolve_path(a.run)), a.run);
    if (!j.contains("stitches") || !j["stitches"].is_array()) throw ValidationError(a.run + ": no stitches array");
    const DigitalThread thread = load_thread(existing_dxf(a.dxf), cfg);
    RunResult run;
    for (const json& s : j["stitches"]) run.stitches.push_back({{s.at("x").get<double>(), s.at("y").get<double>()}, s.at("t").get<double>()});
    if (j.contains("events"))
        for (const json& e : j["events"]) {
            if (e.at("kind") != "correction") continue;
            ControlEvent ev;
            ev.t = e.at("t").get<double>();
            ev.d = e.at("d").get<double>();
            ev.needle_garment = detail::read_vec2(e.at("needle_garment"), "event.needle_garment");
            run.events.push_back(ev);
        }
    emit(a.out, render_run(run, thread));
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Simulated robotic sewing: DXF digital thread to stitched seam."};
    app.set_version_flag("--version", std::string("stitchsim ") + STITCHSIM_VERSION);
    app.require_subcommand(1);

    ParseArgs pa;
    auto* parse = app.add_subcommand("parse", "Parse a DXF and extract contour and seam");
    parse->add_option("dxf", pa.dxf, "DXF file")->required();
    parse->add_option("--config", pa.config, "Sidecar JSON config");
    parse->add_flag("--emit-json", pa.emit_json, "Print the digital thread as JSON");
    parse->add_option("--out", pa.out, "Write to a file instead of standard output");

    PlanArgs pl;
    auto* plan = app.add_subcommand("plan", "Plan the seam trajectory");
    plan->add_option("dxf", pl.dxf, "DXF file")->required();
    plan->add_option("--config", pl.config, "Sidecar JSON config");
    plan->add_flag("--emit-csv", pl.emit_csv, "Print waypoints as t,x,y,theta CSV");
    plan->add_option("--out", pl.out, "Write to a file instead of standard output");

    PerceiveArgs pe;
    auto* perceive = app.add_subcommand("perceive", "Render a synthetic frame and measure the edge distance");
    perceive->add_option("dxf", pe.dxf, "DXF file")->required();
    perceive->add_option("--config", pe.config, "Sidecar JSON config");
    perceive->add_option("--pose", pe.pose, "Garment pose in the needle frame: x,y,deg")->required();
    perceive->add_option("--render", pe.render, "Write the needle-camera frame as PGM");
    perceive->add_flag("--measure", pe.measure, "Print the edge measurement as JSON");
    perceive->add_flag("--estimate", pe.estimate, "Render an overhead view and estimate the pose");
    perceive->add_option("--noise", pe.noise, "Pixel noise standard deviation");
    perceive->add_option("--seed", pe.seed, "Noise seed");

    SimulateArgs sa;
    auto* simulate = app.add_subcommand("simulate", "Run one seam in the simulated workcell");
    simulate->add_option("--mode", sa.mode, "open or closed")->check(CLI::IsMember({"open", "closed"}));
    simulate->add_option("--dxf", sa.dxf, "DXF file")->capture_default_str();
    simulate->add_option("--config", sa.config, "Sidecar JSON config");
    simulate->add_option("--slip", sa.slip, "Slip model JSON");
    simulate->add_option("--seed", sa.seed, "Run seed");
    simulate->add_option("--sensor", sa.sensor, "oracle or raster (closed loop)")->check(CLI::IsMember({"oracle", "raster"}));
    simulate->add_option("--tol", sa.tol, "Dead band half-width, mm");
    simulate->add_option("--pose-error", sa.pose_error, "Placement error dx,dy,deg");
    simulate->add_option("--out", sa.out, "run.json path (standard output if omitted)");
    simulate->add_option("--events", sa.events, "Write control events as JSON lines");
    simulate->add_option("--svg", sa.svg, "Write a plot of the run");

    BenchArgs ba;
    auto* bench = app.add_subcommand("bench", "Open/closed x disturbance benchmark");
    bench->add_option("--config", ba.config, "bench.json")->required();
    bench->add_option("--out", ba.out, "results.csv path (standard output if omitted)");
    bench->add_option("--plots", ba.plots, "Directory for one SVG per condition");
    bench->add_option("--jobs", ba.jobs, "Worker threads");

    RenderArgs ra;
    auto* render = app.add_subcommand("render", "Plot a run.json as SVG");
    render->add_option("--run", ra.run, "run.json from simulate")->required();
    render->add_option("--dxf", ra.dxf, "DXF file the run used")->required();
    render->add_option("--config", ra.config, "Sidecar JSON config");
    render->add_option("--out", ra.out, "SVG path (standard output if omitted)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        if (e.get_exit_code() != 0) std::cerr << app.help();
        return 1;
    }

    try {
        if (*parse) return cmd_parse(pa);
        if (*plan) return cmd_plan(pl);
        if (*perceive) return cmd_perceive(pe);
        if (*simulate) return cmd_simulate(sa);
        if (*bench) return cmd_bench(ba);
        if (*render) return cmd_render(ra);
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 1;
}
