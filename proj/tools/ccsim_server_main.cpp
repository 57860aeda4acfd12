// Simulation server binary. Prints "READY server clients=HOST:PORT" once
// listening, runs the scenario to completion, and writes --metrics-out.
#include <atomic>
#include <csignal>
#include <cstdio>

#include <CLI11.hpp>

#include "ccsim/harness/metrics.hpp"
#include "ccsim/server/server.hpp"

namespace {
std::atomic<bool> g_stop{false};
void on_signal(int) { g_stop = true; }
} // namespace

int main(int argc, char** argv) {
    CLI::App app{"ccsim simulation server"};
    std::string scenario_path;
    std::string listen_clients = "127.0.0.1:7100";
    std::string detector_addr;
    std::string padding = "off";
    std::string render_burn = "off";
    std::string metrics_out;
    ccsim::ServerConfig cfg;
    std::uint64_t seed = 0;
    double duration = 0.0;
    std::uint32_t tick_rate = 0;
    std::uint32_t fps = 0;

    app.add_option("--scenario", scenario_path, "scenario file")->required();
    app.add_option("--listen-clients", listen_clients, "client listen endpoint (port 0 = ephemeral)");
    app.add_option("--detector", detector_addr, "corner case detector ground-truth endpoint");
    app.add_option("--tick-rate", tick_rate, "override scenario tick rate (Hz)");
    app.add_option("--fps", fps, "default per-client sensor fps");
    app.add_option("--padding", padding, "frame-size padding on|off")->check(CLI::IsMember({"on", "off"}));
    app.add_option("--seed", seed, "override scenario seed");
    app.add_option("--duration", duration, "override scenario duration (simulated seconds)");
    app.add_option("--time-scale", cfg.time_scale, "simulated seconds per wall second");
    app.add_option("--render-cost-ms", cfg.render_cost_ms, "synthetic serialized render cost");
    app.add_option("--render-burn", render_burn, "burn CPU for the render cost on|off")
        ->check(CLI::IsMember({"on", "off"}));
    app.add_option("--warmup", cfg.warmup_s, "seconds excluded from windowed metrics");
    app.add_option("--metrics-out", metrics_out, "write metrics JSON here on exit");
    CLI11_PARSE(app, argc, argv);

    ccsim::Scenario scenario;
    try {
        scenario = ccsim::load_scenario_file(scenario_path);
        if (tick_rate != 0) {
            scenario.tick_rate_hz = tick_rate;
            if (scenario.tick_rate_hz < 2 * scenario.sensor_fps)
                throw std::runtime_error("tick-rate override violates tick_rate_hz >= 2 x sensor_fps");
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "ccsim-server: %s\n", e.what());
        return 1;
    }

    cfg.listen_clients = ccsim::parse_endpoint(listen_clients);
    cfg.detector_addr = detector_addr;
    cfg.padding = padding == "on";
    cfg.render_burn = render_burn == "on";
    if (fps != 0) cfg.default_fps = fps;
    else cfg.default_fps = 0; // scenario sensor_fps
    if (seed != 0) cfg.seed_override = seed;
    if (duration > 0.0) cfg.duration_override_s = duration;

    std::signal(SIGTERM, on_signal);
    std::signal(SIGINT, on_signal);

    ccsim::SimServer server(std::move(cfg), std::move(scenario));
    ccsim::Endpoint bound;
    try {
        bound = server.start_listening();
    } catch (const std::exception& e) {
        std::fprintf(stderr, "ccsim-server: %s\n", e.what());
        return 1;
    }
    std::printf("READY server clients=%s\n", bound.str().c_str());
    std::fflush(stdout);

    const int rc = server.run(g_stop);
    if (!metrics_out.empty())
        ccsim::write_json_file(metrics_out, ccsim::server_stats_json(server.stats()));
    return rc;
}
