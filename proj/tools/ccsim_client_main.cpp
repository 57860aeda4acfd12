// AI client binary: runs --count independent client instances in-process.
#include <atomic>
#include <csignal>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <CLI11.hpp>

#include "ccsim/client/client.hpp"
#include "ccsim/harness/metrics.hpp"

namespace {
std::atomic<bool> g_stop{false};
void on_signal(int) { g_stop = true; }
} // namespace

int main(int argc, char** argv) {
    CLI::App app{"ccsim AI client"};
    ccsim::ClientConfig base;
    std::string params_path;
    std::string metrics_out;
    int count = 1;

    app.add_option("--server", base.server_addr, "simulation server endpoint")->required();
    app.add_option("--inference", base.inference_addr, "inference service endpoint")->required();
    app.add_option("--detector", base.detector_addr, "detector estimate endpoint");
    app.add_option("--params", params_path, "driving parameter file");
    app.add_option("--id", base.client_id, "base client id (instance i gets id+i)");
    app.add_option("--count", count, "number of client instances in this process")
        ->check(CLI::PositiveNumber);
    app.add_option("--fps", base.fps_request, "requested sensor fps (0 = server default)");
    app.add_option("--warmup", base.warmup_s, "seconds excluded from windowed metrics");
    app.add_option("--metrics-out", metrics_out, "write metrics JSON here on exit");
    CLI11_PARSE(app, argc, argv);

    if (!params_path.empty()) {
        std::ifstream f(params_path);
        if (!f) {
            std::fprintf(stderr, "ccsim-client: cannot open params '%s'\n", params_path.c_str());
            return 1;
        }
        std::ostringstream ss;
        ss << f.rdbuf();
        try {
            base.params = ccsim::parse_driving_params(ss.str());
        } catch (const std::exception& e) {
            std::fprintf(stderr, "ccsim-client: %s\n", e.what());
            return 1;
        }
    }

    std::signal(SIGTERM, on_signal);
    std::signal(SIGINT, on_signal);

    std::printf("READY client count=%d\n", count);
    std::fflush(stdout);

    auto result = ccsim::run_clients(base, count, g_stop);
    if (!metrics_out.empty())
        ccsim::write_json_file(metrics_out, ccsim::client_stats_json(result.stats));
    return result.worst_rc;
}
