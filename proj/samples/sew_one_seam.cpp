// Sews the straight fixture twice under the same drift, once blind and once
// with the edge-tracking loop, and prints the seam error of each.
//
//   ./sew_one_seam [fixture.dxf]

#include <cstdio>
#include <exception>

#include "stitchsim/stitchsim.hpp"

using namespace stitchsim;

int main(int argc, char** argv) {
    try {
        RunConfig cfg = load_run_config(fixture_dir() / "cfg.json");
        const DigitalThread thread = load_thread(resolve_path(argc > 1 ? argv[1] : "straight_panel.dxf"), cfg);
        std::printf("seam %.1f mm, contour %.1f mm\n", thread.seam_length(), thread.contour_length());

        const Trajectory plan = plan_seam(thread.seam, thread.contour, cfg.sync, cfg.limits);
        std::printf("plan: %zu waypoints, %.3f s at %.1f mm/s\n", plan.waypoints.size(), plan.duration(), plan.v_peak);

        const WorkcellState start = place_garment(thread, {}, cfg.sync);
        SlipModel drift = load_slip(fixture_dir() / "slip_calibrated.json");
        drift.seed = 7;

        const RunResult open = run_open_loop(plan, start, drift);
        OracleSensor sensor(thread);
        const RunResult closed = run_closed_loop(thread, plan, start, drift, sensor, cfg.control);

        std::printf("open loop:   %zu stitches, E = %.3f mm\n", open.stitches.size(),
                    seam_error(open.stitches, thread, cfg.control.allowance).E);
        std::printf("closed loop: %zu stitches, E = %.3f mm, %zu corrections\n", closed.stitches.size(),
                    seam_error(closed.stitches, thread, cfg.control.allowance).E, closed.events.size());
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
