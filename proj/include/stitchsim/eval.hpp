#pragma once

// Seam error over fixed-length segments, the four-condition open/closed x
// disturbance benchmark, and the SVG plot of a run.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <limits>
#include <mutex>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "stitchsim/controller.hpp"
#include "stitchsim/digital_thread.hpp"
#include "stitchsim/error.hpp"
#include "stitchsim/trajectory.hpp"
#include "stitchsim/workcell.hpp"

namespace stitchsim {

inline constexpr double kSegmentLength = 10.0;  // mm

struct SegmentDistance {
    std::size_t index = 0;
    double actual = 0.0;   // A_i, mm
    double desired = 0.0;  // D_i, mm
};

struct SeamErrorReport {
    std::vector<SegmentDistance> segments;
    std::size_t n = 0;
    double E = 0.0;  // mm
};

// Number of whole segments in a length. Lengths within 1e-3 of a segment
// short of a whole count (chord sampling of curved seams) still count.
inline std::size_t segment_count(double length, double segment_length) {
    return static_cast<std::size_t>(std::max(1.0, std::floor(length / segment_length + 1e-3)));
}

// E = (1/n) sum |A_i - D_i|. The stitched path (garment frame) is split into
// n equal arc-length parts, n = floor(seam length / segment length); A_i is
// the mean signed distance (positive inside) of that part's stitches to the
// contour. A part without stitches borrows the stitch nearest its middle.
inline SeamErrorReport seam_error(const StitchRecord& stitches, const DigitalThread& thread, double desired_allowance,
                                  double segment_length = kSegmentLength) {
    if (stitches.empty()) throw ValidationError("no stitches to evaluate");
    if (!(segment_length > 0.0)) throw ValidationError("segment_length must be > 0");
    const double seam_len = thread.seam_length();
    if (seam_len / segment_length + 1e-3 < 1.0) throw ValidationError("seam shorter than one segment");

    SeamErrorReport report;
    report.n = segment_count(seam_len, segment_length);

    std::vector<double> arc(stitches.size(), 0.0);
    for (std::size_t j = 1; j < stitches.size(); ++j)
        arc[j] = arc[j - 1] + distance(stitches[j - 1].position, stitches[j].position);
    const double total = arc.back();
    const double n = static_cast<double>(report.n);

    std::vector<double> dist(stitches.size());
    for (std::size_t j = 0; j < stitches.size(); ++j)
        dist[j] = signed_distance_to_ring(thread.contour, stitches[j].position).value;

    std::vector<double> sum(report.n, 0.0);
    std::vector<std::size_t> count(report.n, 0);
    for (std::size_t j = 0; j < stitches.size(); ++j) {
        const std::size_t seg =
            total > 0.0 ? std::min(report.n - 1, static_cast<std::size_t>(std::floor(arc[j] / total * n))) : 0;
        sum[seg] += dist[j];
        ++count[seg];
    }

    double abs_sum = 0.0;
    for (std::size_t i = 0; i < report.n; ++i) {
        double a = 0.0;
        if (count[i] > 0) {
            a = sum[i] / static_cast<double>(count[i]);
        } else {
            const double mid = total * (static_cast<double>(i) + 0.5) / n;
            std::size_t best = 0;
            for (std::size_t j = 1; j < arc.size(); ++j)
                if (std::fabs(arc[j] - mid) < std::fabs(arc[best] - mid)) best = j;
            a = dist[best];
        }
        report.segments.push_back({i, a, desired_allowance});
        abs_sum += std::fabs(a - desired_allowance);
    }
    report.E = abs_sum / n;
    return report;
}

enum class LoopType { Open, Closed };
enum class SensorKind { Oracle, Raster };

inline const char* to_string(LoopType l) { return l == LoopType::Open ? "open" : "closed"; }

struct Fixture {
    std::string name;
    DigitalThread thread;
};

struct PoseErrorModel {
    double sd_xy = 0.0;     // mm
    double sd_theta = 0.0;  // rad
};

struct BenchmarkConfig {
    SyncParams sync;
    MotionLimits limits;
    ControlConfig control;
    SlipModel disturbance;  // used for the "on" conditions; seeds are overwritten per run
    PoseErrorModel pose_error;
    SensorKind sensor = SensorKind::Oracle;
    RasterSensorParams raster;
    std::vector<std::uint64_t> seeds;  // one run per seed, shared by all four conditions
    double dt = kDefaultDt;
    unsigned jobs = 1;
};

struct RunScore {
    std::size_t run = 0;
    std::uint64_t seed = 0;
    double E = 0.0;
};

struct BenchmarkResult {
    std::string fixture;
    LoopType loop = LoopType::Open;
    bool disturbance = false;
    std::vector<RunScore> runs;
    double mean_E = 0.0;
};

// Pose error drawn for a seed; identical for every condition sharing it.
inline PoseError draw_pose_error(const PoseErrorModel& model, std::uint64_t seed) {
    std::mt19937_64 rng(seed ^ 0x5eedf00dULL);
    std::normal_distribution<double> unit(0.0, 1.0);
    PoseError e;
    e.dx = model.sd_xy * unit(rng);
    e.dy = model.sd_xy * unit(rng);
    e.dtheta = model.sd_theta * unit(rng);
    return e;
}

struct SingleRunSpec {
    LoopType loop = LoopType::Open;
    bool disturbance = false;
    std::uint64_t seed = 0;
};

inline RunResult simulate_run(const DigitalThread& thread, const Trajectory& plan, const BenchmarkConfig& cfg,
                              const SingleRunSpec& spec) {
    const WorkcellState initial = place_garment(thread, draw_pose_error(cfg.pose_error, spec.seed), cfg.sync);
    SlipModel slip = spec.disturbance ? cfg.disturbance : SlipModel{};
    slip.seed = spec.seed;
    if (spec.loop == LoopType::Open) return run_open_loop(plan, initial, slip, cfg.dt);
    if (cfg.sensor == SensorKind::Raster) {
        RasterSensorParams rp = cfg.raster;
        rp.render.seed = spec.seed * 1000003ULL;
        RasterSensor sensor(thread, rp);
        return run_closed_loop(thread, plan, initial, slip, sensor, cfg.control, cfg.dt);
    }
    OracleSensor sensor(thread);
    return run_closed_loop(thread, plan, initial, slip, sensor, cfg.control, cfg.dt);
}

// Open/closed x disturbance off/on, one run per seed in each. Rows come back
// in the order open-off, open-on, closed-off, closed-on per fixture.
inline std::vector<BenchmarkResult> run_benchmark(const std::vector<Fixture>& fixtures, const BenchmarkConfig& cfg) {
    if (cfg.seeds.empty()) throw ValidationError("benchmark needs at least one seed");
    cfg.control.validate();
    cfg.disturbance.validate();

    struct Job {
        std::size_t result;
        std::size_t run;
    };
    std::vector<BenchmarkResult> results;
    std::vector<Trajectory> plans;
    std::vector<Job> jobs;
    const std::pair<LoopType, bool> conditions[] = {
        {LoopType::Open, false}, {LoopType::Open, true}, {LoopType::Closed, false}, {LoopType::Closed, true}};
    for (std::size_t f = 0; f < fixtures.size(); ++f) {
        plans.push_back(plan_seam(fixtures[f].thread.seam, fixtures[f].thread.contour, cfg.sync, cfg.limits));
        for (const auto& [loop, dist] : conditions) {
            BenchmarkResult r;
            r.fixture = fixtures[f].name;
            r.loop = loop;
            r.disturbance = dist;
            r.runs.resize(cfg.seeds.size());
            for (std::size_t k = 0; k < cfg.seeds.size(); ++k) jobs.push_back({results.size(), k});
            results.push_back(std::move(r));
        }
    }

    auto run_job = [&](const Job& job) {
        BenchmarkResult& r = results[job.result];
        const std::size_t f = job.result / 4;
        const std::uint64_t seed = cfg.seeds[job.run];
        const RunResult run = simulate_run(fixtures[f].thread, plans[f], cfg, {r.loop, r.disturbance, seed});
        r.runs[job.run] = {job.run, seed, seam_error(run.stitches, fixtures[f].thread, cfg.control.allowance).E};
    };

    const unsigned workers = std::max(1u, std::min<unsigned>(cfg.jobs, static_cast<unsigned>(jobs.size())));
    if (workers == 1) {
        for (const Job& j : jobs) run_job(j);
    } else {
        std::atomic<std::size_t> next{0};
        std::exception_ptr failure;
        std::mutex failure_mutex;
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < workers; ++w)
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < jobs.size(); i = next++) {
                    try {
                        run_job(jobs[i]);
                    } catch (...) {
                        std::lock_guard lock(failure_mutex);
                        if (!failure) failure = std::current_exception();
                    }
                }
            });
        for (std::thread& t : pool) t.join();
        if (failure) std::rethrow_exception(failure);
    }

    for (BenchmarkResult& r : results) {
        double sum = 0.0;
        for (const RunScore& s : r.runs) sum += s.E;
        r.mean_E = sum / static_cast<double>(r.runs.size());
    }
    return results;
}

// Per-run rows, then a summary block shaped like a loop-type table.
// A fixture column is prepended only when more than one fixture is present.
inline std::string benchmark_csv(const std::vector<BenchmarkResult>& results) {
    bool multi = false;
    for (const BenchmarkResult& r : results) multi = multi || r.fixture != results.front().fixture;
    auto disturbance = [](bool on) { return on ? "on" : "off"; };
    char buf[256];
    std::string out = multi ? "fixture," : "";
    out += "loop_type,disturbance,run,seed,E_mm\n";
    for (const BenchmarkResult& r : results)
        for (const RunScore& s : r.runs) {
            std::snprintf(buf, sizeof buf, "%s,%s,%zu,%llu,%.6f\n", to_string(r.loop), disturbance(r.disturbance),
                          s.run, static_cast<unsigned long long>(s.seed), s.E);
            if (multi) out += r.fixture + ",";
            out += buf;
        }
    out += "\n# summary\n";
    out += multi ? "fixture," : "";
    out += "loop_type,condition,runs,seam_error_mm\n";
    for (const BenchmarkResult& r : results) {
        std::snprintf(buf, sizeof buf, "%s,%s,%zu,%.3f\n", to_string(r.loop),
                      r.disturbance ? "with_disturbance" : "without_disturbance", r.runs.size(), r.mean_E);
        if (multi) out += r.fixture + ",";
        out += buf;
    }
    return out;
}

namespace detail {

struct SvgFrame {
    double min_x, min_y, max_x, max_y, scale, margin;

    double sx(double x) const { return margin + (x - min_x) * scale; }
    double sy(double y) const { return margin + (max_y - y) * scale; }
};

inline std::string svg_num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", v);
    return buf;
}

inline std::string svg_polyline(const SvgFrame& f, std::span<const Vec2> pts, const char* style) {
    std::string s = "<polyline fill=\"none\" " + std::string(style) + " points=\"";
    for (std::size_t i = 0; i < pts.size(); ++i) {
        if (i) s += ' ';
        s += svg_num(f.sx(pts[i].x)) + "," + svg_num(f.sy(pts[i].y));
    }
    return s + "\"/>\n";
}

}  // namespace detail

// Plot in garment-frame mm: contour, desired seam, stitches, corrections.
// A run without stitches gives the axes only.
inline std::string render_run(const RunResult& run, const DigitalThread& thread) {
    const bool empty = run.stitches.empty();
    double min_x = 0, min_y = 0, max_x = 100, max_y = 100;
    if (!empty) {
        min_x = min_y = std::numeric_limits<double>::infinity();
        max_x = max_y = -std::numeric_limits<double>::infinity();
        auto grow = [&](Vec2 p) {
            min_x = std::min(min_x, p.x); max_x = std::max(max_x, p.x);
            min_y = std::min(min_y, p.y); max_y = std::max(max_y, p.y);
        };
        for (const Vec2& p : thread.contour) grow(p);
        for (const Stitch& s : run.stitches) grow(s.position);
    }
    const double width_px = 800.0;
    const double scale = width_px / std::max(max_x - min_x, 1e-9);
    const detail::SvgFrame f{min_x, min_y, max_x, max_y, scale, 50.0};
    const double w = width_px + 2 * f.margin;
    const double h = (max_y - min_y) * scale + 2 * f.margin;

    std::string svg = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + detail::svg_num(w) + "\" height=\"" +
           detail::svg_num(h) + "\" viewBox=\"0 0 " + detail::svg_num(w) + " " + detail::svg_num(h) + "\">\n";
    svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

    // axes with 10 mm ticks (labels every 50 mm)
    svg += "<g id=\"axes\" stroke=\"#444\" stroke-width=\"1\" font-family=\"sans-serif\" font-size=\"10\">\n";
    svg += "<line x1=\"" + detail::svg_num(f.sx(min_x)) + "\" y1=\"" + detail::svg_num(f.sy(min_y)) + "\" x2=\"" +
           detail::svg_num(f.sx(max_x)) + "\" y2=\"" + detail::svg_num(f.sy(min_y)) + "\"/>\n";
    svg += "<line x1=\"" + detail::svg_num(f.sx(min_x)) + "\" y1=\"" + detail::svg_num(f.sy(min_y)) + "\" x2=\"" +
           detail::svg_num(f.sx(min_x)) + "\" y2=\"" + detail::svg_num(f.sy(max_y)) + "\"/>\n";
    for (double x = std::ceil(min_x / 10.0) * 10.0; x <= max_x; x += 10.0) {
        const bool major = std::fmod(std::fabs(x), 50.0) < 1e-9;
        svg += "<line x1=\"" + detail::svg_num(f.sx(x)) + "\" y1=\"" + detail::svg_num(f.sy(min_y)) + "\" x2=\"" +
               detail::svg_num(f.sx(x)) + "\" y2=\"" + detail::svg_num(f.sy(min_y) + (major ? 6 : 3)) + "\"/>\n";
        if (major)
            svg += "<text x=\"" + detail::svg_num(f.sx(x)) + "\" y=\"" + detail::svg_num(f.sy(min_y) + 18) +
                   "\" text-anchor=\"middle\" stroke=\"none\">" + detail::svg_num(x) + "</text>\n";
    }
    for (double y = std::ceil(min_y / 10.0) * 10.0; y <= max_y; y += 10.0) {
        const bool major = std::fmod(std::fabs(y), 50.0) < 1e-9;
        svg += "<line x1=\"" + detail::svg_num(f.sx(min_x)) + "\" y1=\"" + detail::svg_num(f.sy(y)) + "\" x2=\"" +
               detail::svg_num(f.sx(min_x) - (major ? 6 : 3)) + "\" y2=\"" + detail::svg_num(f.sy(y)) + "\"/>\n";
        if (major)
            svg += "<text x=\"" + detail::svg_num(f.sx(min_x) - 8) + "\" y=\"" + detail::svg_num(f.sy(y) + 3) +
                   "\" text-anchor=\"end\" stroke=\"none\">" + detail::svg_num(y) + "</text>\n";
    }
    svg += "<text x=\"" + detail::svg_num(w / 2) + "\" y=\"" + detail::svg_num(h - 8) +
           "\" text-anchor=\"middle\" stroke=\"none\">x (mm)</text>\n";
    svg += "<text x=\"12\" y=\"" + detail::svg_num(h / 2) + "\" stroke=\"none\">y (mm)</text>\n";
    svg += "</g>\n";

    if (!empty) {
        svg += "<g id=\"contour\">" + detail::svg_polyline(f, thread.contour, "stroke=\"black\" stroke-width=\"1.5\"") +
               "</g>\n";
        svg += "<g id=\"seam\">" +
               detail::svg_polyline(f, thread.seam, "stroke=\"red\" stroke-width=\"1\" stroke-dasharray=\"4 3\"") +
               "</g>\n";
        Polyline stitched;
        for (const Stitch& s : run.stitches) stitched.push_back(s.position);
        svg += "<g id=\"stitches\">" + detail::svg_polyline(f, stitched, "stroke=\"blue\" stroke-width=\"1\"");
        for (const Vec2& p : stitched)
            svg += "<circle cx=\"" + detail::svg_num(f.sx(p.x)) + "\" cy=\"" + detail::svg_num(f.sy(p.y)) +
                   "\" r=\"1.5\" fill=\"blue\"/>\n";
        svg += "</g>\n<g id=\"corrections\">\n";
        for (const ControlEvent& e : run.events) {
            if (e.kind != ControlEvent::Kind::Correction) continue;
            svg += "<circle cx=\"" + detail::svg_num(f.sx(e.needle_garment.x)) + "\" cy=\"" +
                   detail::svg_num(f.sy(e.needle_garment.y)) + "\" r=\"3\" fill=\"none\" stroke=\"orange\"/>\n";
        }
        svg += "</g>\n";
    }
    svg += "</svg>\n";
    return svg;
}

}  // namespace stitchsim
