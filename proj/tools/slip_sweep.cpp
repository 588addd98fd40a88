// Calibration aid: sweeps constant-drift magnitude and wander and prints the
// mean seam error per condition, so a slip config can be picked that lands
// the undefended (open-loop) disturbed error in a target band.
//
//   slip_sweep --dxf straight_panel.dxf --config cfg.json --runs 10
//              --drift 1,2,3,4 --noise 0,0.3 --pose-xy 0.3 --pose-deg 0.2

#include <cstdio>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "stitchsim/stitchsim.hpp"

using namespace stitchsim;

namespace {

std::vector<double> parse_list(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(std::stod(item));
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Sweep slip parameters and report seam error per condition"};
    std::string dxf_path, config, drift = "1,2,3,4", noise = "0,0.3";
    std::size_t runs = 10;
    double pose_xy = 0.3, pose_deg = 0.2;
    std::uint64_t seed_base = 1;
    unsigned jobs = 4;
    app.add_option("--dxf", dxf_path, "Fixture DXF")->required();
    app.add_option("--config", config, "Sidecar JSON config");
    app.add_option("--runs", runs, "Runs per condition");
    app.add_option("--seed-base", seed_base, "First seed");
    app.add_option("--drift", drift, "Comma list of drift speeds (mm/s, applied along -y)");
    app.add_option("--noise", noise, "Comma list of wander sd (mm/sqrt(s))");
    app.add_option("--pose-xy", pose_xy, "Placement error sd, mm");
    app.add_option("--pose-deg", pose_deg, "Placement error sd, deg");
    app.add_option("--jobs", jobs, "Worker threads");
    CLI11_PARSE(app, argc, argv);

    try {
        RunConfig cfg = config.empty() ? run_config_from_json(json::object()) : load_run_config(resolve_path(config));
        const DigitalThread thread = load_thread(resolve_path(dxf_path), cfg);
        BenchmarkConfig bc;
        bc.sync = cfg.sync;
        bc.limits = cfg.limits;
        bc.control = cfg.control;
        bc.dt = cfg.dt;
        bc.jobs = jobs;
        bc.pose_error = {pose_xy, deg_to_rad(pose_deg)};
        for (std::size_t i = 0; i < runs; ++i) bc.seeds.push_back(seed_base + i);

        std::printf("drift,noise,open_off,open_on,closed_off,closed_on,pairs_closed_better\n");
        for (double d : parse_list(drift))
            for (double n : parse_list(noise)) {
                bc.disturbance = {SlipMode::ConstantDrift, {0.0, -d}, 0.0, n, 0};
                const auto r = run_benchmark({{"fixture", thread}}, bc);
                std::size_t better = 0;
                for (std::size_t k = 0; k < runs; ++k) better += r[3].runs[k].E < r[1].runs[k].E;
                std::printf("%.3f,%.3f,%.3f,%.3f,%.3f,%.3f,%zu/%zu\n", d, n, r[0].mean_E, r[1].mean_E, r[2].mean_E,
                            r[3].mean_E, better, runs);
            }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
