// Inference service binary: hosts the emulated models for one scenario.
#include <atomic>
#include <csignal>
#include <cstdio>

#include <CLI11.hpp>

#include "ccsim/harness/metrics.hpp"
#include "ccsim/infer/service.hpp"

namespace {
std::atomic<bool> g_stop{false};
void on_signal(int) { g_stop = true; }
} // namespace

int main(int argc, char** argv) {
    CLI::App app{"ccsim inference service"};
    std::string listen = "127.0.0.1:7103";
    std::string scenario_path;
    std::string models_path;
    std::string cpu_burn = "off";
    std::string metrics_out;
    std::uint64_t seed = 0;

    app.add_option("--listen", listen, "listen endpoint (port 0 = ephemeral)");
    app.add_option("--scenario", scenario_path, "scenario file (road, camera, noise, seed)")
        ->required();
    app.add_option("--models", models_path, "model spec file (default: built-in detector+steering)");
    app.add_option("--seed", seed, "override scenario seed");
    app.add_option("--cpu-burn", cpu_burn, "burn CPU for service latency on|off")
        ->check(CLI::IsMember({"on", "off"}));
    app.add_option("--metrics-out", metrics_out, "write metrics JSON here on exit");
    CLI11_PARSE(app, argc, argv);

    ccsim::InferenceServiceConfig cfg;
    try {
        const auto scenario = ccsim::load_scenario_file(scenario_path);
        cfg.context.road = scenario.road;
        cfg.context.camera = scenario.camera;
        cfg.context.seed = seed != 0 ? seed : scenario.seed;
        cfg.context.cpu_burn = cpu_burn == "on";
        cfg.models = models_path.empty()
                         ? ccsim::default_model_specs(scenario.noise)
                         : ccsim::load_model_specs_file(models_path, scenario.noise);
        cfg.listen = ccsim::parse_endpoint(listen);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "ccsim-infer: %s\n", e.what());
        return 1;
    }

    std::signal(SIGTERM, on_signal);
    std::signal(SIGINT, on_signal);

    ccsim::InferenceService service(std::move(cfg));
    ccsim::Endpoint bound;
    try {
        bound = service.start();
    } catch (const std::exception& e) {
        std::fprintf(stderr, "ccsim-infer: %s\n", e.what());
        return 1;
    }
    std::printf("READY infer listen=%s\n", bound.str().c_str());
    std::fflush(stdout);

    while (!g_stop) ccsim::sleep_for_us(50000);
    const auto stats = service.engine().stats();
    service.stop();
    if (!metrics_out.empty()) ccsim::write_json_file(metrics_out, ccsim::infer_stats_json(stats));
    return 0;
}
