// Corner case detector binary: listens for the ground-truth stream and
// client estimate reports, persists mismatch records under --out.
#include <atomic>
#include <csignal>
#include <cstdio>

#include <CLI11.hpp>

#include "ccsim/detector/detector.hpp"
#include "ccsim/harness/metrics.hpp"

namespace {
std::atomic<bool> g_stop{false};
void on_signal(int) { g_stop = true; }
} // namespace

int main(int argc, char** argv) {
    CLI::App app{"ccsim corner case detector"};
    std::string listen_gt = "127.0.0.1:7101";
    std::string listen_est = "127.0.0.1:7102";
    std::string criteria_path;
    std::string out_dir = ".";
    std::string shared_clock = "on";
    std::string metrics_out;
    double window_s = 10.0;
    double warmup_s = 0.0;

    app.add_option("--listen-gt", listen_gt, "ground-truth stream listen endpoint");
    app.add_option("--listen-est", listen_est, "estimate stream listen endpoint");
    app.add_option("--criteria", criteria_path, "matching criteria file");
    app.add_option("--window", window_s, "state history window (seconds)");
    app.add_option("--out", out_dir, "directory for mismatches.bin / mismatches.index");
    app.add_option("--shared-clock", shared_clock,
                   "timestamps share one clock domain on|off (off skips the timing criterion)")
        ->check(CLI::IsMember({"on", "off"}));
    app.add_option("--warmup", warmup_s, "seconds excluded from pipeline-age metrics");
    app.add_option("--metrics-out", metrics_out, "write metrics JSON here on exit");
    CLI11_PARSE(app, argc, argv);

    ccsim::DetectorConfig cfg;
    try {
        if (!criteria_path.empty()) cfg.criteria = ccsim::load_criteria_file(criteria_path);
        cfg.criteria.assume_shared_clock = shared_clock == "on";
        cfg.listen_gt = ccsim::parse_endpoint(listen_gt);
        cfg.listen_est = ccsim::parse_endpoint(listen_est);
        cfg.window_s = window_s;
        cfg.out_dir = out_dir;
        cfg.warmup_s = warmup_s;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "ccsim-detector: %s\n", e.what());
        return 1;
    }

    std::signal(SIGTERM, on_signal);
    std::signal(SIGINT, on_signal);

    ccsim::Detector detector(std::move(cfg));
    try {
        detector.start();
    } catch (const std::exception& e) {
        std::fprintf(stderr, "ccsim-detector: %s\n", e.what());
        return 1;
    }
    std::printf("READY detector gt=%s est=%s\n", detector.gt_endpoint().str().c_str(),
                detector.est_endpoint().str().c_str());
    std::fflush(stdout);

    while (!g_stop) ccsim::sleep_for_us(50000);
    detector.stop();
    if (!metrics_out.empty())
        ccsim::write_json_file(metrics_out, ccsim::detector_stats_json(detector.stats()));
    return 0;
}
