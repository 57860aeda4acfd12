// The simulation driver and experiment rig: run one experiment, sweep
// client counts, replay persisted mismatch records, or drive a configured
// component set. Exit codes: 0 success, 1 config error, 2 component
// failure, 3 acceptance-threshold violation.
#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <string>

#include <CLI11.hpp>

#include "ccsim/harness/drive.hpp"
#include "ccsim/harness/experiment.hpp"
#include "ccsim/harness/replay.hpp"

namespace {

std::string self_bin_dir() {
    char buf[4096];
    const ssize_t n = readlink("/proc/self/exe", buf, sizeof(buf) - 1);
    if (n <= 0) return ".";
    buf[n] = '\0';
    return std::filesystem::path(buf).parent_path().string();
}

void print_summary(const ccsim::MetricsReport& r) {
    std::printf("clients=%d total_fps=%.2f per_client_fps=%.2f/%.2f (mean/min)\n", r.client_count,
                r.total_fps, r.per_client_fps_mean, r.per_client_fps_min);
    std::printf("detect latency ms: mean=%.2f jitter=%.2f p99=%.2f (n=%llu)\n", r.detect_rtt_ms.mean,
                r.detect_rtt_ms.stddev, r.detect_rtt_ms.p99,
                static_cast<unsigned long long>(r.detect_rtt_ms.count));
    std::printf("steer  latency ms: mean=%.2f jitter=%.2f p99=%.2f\n", r.steer_rtt_ms.mean,
                r.steer_rtt_ms.stddev, r.steer_rtt_ms.p99);
    std::printf("pipeline age ms: mean=%.2f p99=%.2f  control rtt ms: mean=%.2f\n",
                r.pipeline_age_ms.mean, r.pipeline_age_ms.p99, r.control_rtt_ms.mean);
    std::printf("records: derived=%llu position=%llu staleness=%llu  shed=%llu overloads=%llu\n",
                static_cast<unsigned long long>(r.records_derived),
                static_cast<unsigned long long>(r.records_position),
                static_cast<unsigned long long>(r.records_staleness),
                static_cast<unsigned long long>(r.frames_shed),
                static_cast<unsigned long long>(r.infer_overloads));
    if (r.failed) std::printf("FAILED: %s\n", r.failure.c_str());
}

void add_experiment_flags(CLI::App* cmd, ccsim::ExperimentConfig& cfg, std::string& padding) {
    cmd->add_option("--scenario", cfg.scenario_path, "scenario file");
    cmd->add_option("--out", cfg.out_dir, "output directory");
    cmd->add_option("--duration", cfg.duration_s, "simulated seconds (0 = scenario duration)");
    cmd->add_option("--warmup", cfg.warmup_s, "warm-up seconds excluded from metrics");
    cmd->add_option("--time-scale", cfg.time_scale, "simulated seconds per wall second");
    cmd->add_option("--seed", cfg.seed, "seed override");
    cmd->add_option("--padding", padding, "sensor frame padding on|off")
        ->check(CLI::IsMember({"on", "off"}));
    cmd->add_option("--render-cost-ms", cfg.render_cost_ms, "synthetic serialized render cost");
    cmd->add_flag("--render-burn", cfg.render_burn, "burn CPU for the render cost");
    cmd->add_option("--fps", cfg.fps, "per-client fps (0 = scenario sensor_fps)");
    cmd->add_option("--models", cfg.models_path, "model spec file");
    cmd->add_option("--criteria", cfg.criteria_path, "detector criteria file");
    cmd->add_option("--bin-dir", cfg.bin_dir, "directory with the ccsim-* binaries");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"ccsim experiment harness"};
    app.require_subcommand(1);

    // --- run -------------------------------------------------------------
    ccsim::ExperimentConfig run_cfg;
    run_cfg.out_dir = "ccsim-run";
    std::string run_padding = "off";
    int run_clients = 1;
    auto* run_cmd = app.add_subcommand("run", "run one experiment");
    add_experiment_flags(run_cmd, run_cfg, run_padding);
    run_cmd->add_option("--clients", run_clients, "number of AI clients");

    // --- sweep -----------------------------------------------------------
    ccsim::ExperimentConfig sweep_base;
    sweep_base.out_dir = "ccsim-sweep";
    std::string sweep_padding = "off";
    int sweep_from = 1, sweep_to = 8, sweep_step = 1;
    double assert_total_fps = 0.0, assert_tol = 0.10;
    auto* sweep_cmd = app.add_subcommand("sweep", "sweep the client count");
    add_experiment_flags(sweep_cmd, sweep_base, sweep_padding);
    sweep_cmd->add_option("--from", sweep_from, "first client count");
    sweep_cmd->add_option("--to", sweep_to, "last client count");
    sweep_cmd->add_option("--step", sweep_step, "client count step")->check(CLI::PositiveNumber);
    sweep_cmd->add_option("--assert-total-fps", assert_total_fps,
                          "exit 3 unless max total fps is within tolerance of this");
    sweep_cmd->add_option("--assert-tol", assert_tol, "relative tolerance for assertions");

    // --- replay ----------------------------------------------------------
    std::string replay_path, replay_criteria, replay_out;
    std::uint64_t replay_id = 0;
    auto* replay_cmd = app.add_subcommand("replay", "replay a persisted mismatch record");
    replay_cmd->add_option("log", replay_path, "mismatches.bin path")->required();
    replay_cmd->add_option("--record", replay_id, "record id (default: every record)");
    replay_cmd->add_option("--criteria", replay_criteria, "criteria file (must match the run)");
    replay_cmd->add_option("--out", replay_out, "write the timeline here instead of stdout");

    // --- drive -----------------------------------------------------------
    std::string drive_config_path, drive_bin_dir;
    bool drive_plan_only = false;
    auto* drive_cmd = app.add_subcommand("drive", "launch a configured component set");
    drive_cmd->add_option("--config", drive_config_path, "drive configuration file")->required();
    drive_cmd->add_flag("--plan", drive_plan_only, "print the launch plan without launching");
    drive_cmd->add_option("--bin-dir", drive_bin_dir, "directory with the ccsim-* binaries");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        if (*run_cmd) {
            if (run_cfg.scenario_path.empty()) {
                std::fprintf(stderr, "ccsim run: --scenario is required\n");
                return 1;
            }
            run_cfg.clients = run_clients;
            run_cfg.padding = run_padding == "on";
            if (run_cfg.bin_dir.empty()) run_cfg.bin_dir = self_bin_dir();
            const auto report = ccsim::run_experiment(run_cfg);
            print_summary(report);
            return report.failed ? 2 : 0;
        }

        if (*sweep_cmd) {
            sweep_base.padding = sweep_padding == "on";
            if (sweep_base.bin_dir.empty()) sweep_base.bin_dir = self_bin_dir();
            ccsim::SweepConfig cfg;
            cfg.base = sweep_base;
            if (sweep_from < 1 || sweep_to < sweep_from) {
                std::fprintf(stderr, "ccsim sweep: bad --from/--to range\n");
                return 1;
            }
            for (int n = sweep_from; n <= sweep_to; n += sweep_step) cfg.client_counts.push_back(n);
            const auto result = ccsim::sweep_clients(cfg);
            std::printf("%s\n", ccsim::kSweepCsvHeader);
            for (const auto& row : result.rows) std::printf("%s\n", ccsim::sweep_csv_row(row).c_str());
            std::printf("csv: %s\n", result.csv_path.c_str());
            if (assert_total_fps > 0.0) {
                double max_fps = 0.0;
                for (const auto& row : result.rows)
                    if (!row.failed) max_fps = std::max(max_fps, row.total_fps);
                if (max_fps < assert_total_fps * (1.0 - assert_tol) ||
                    max_fps > assert_total_fps * (1.0 + assert_tol)) {
                    std::fprintf(stderr, "sweep: max total fps %.2f outside %.2f +/- %.0f%%\n",
                                 max_fps, assert_total_fps, assert_tol * 100.0);
                    return 3;
                }
            }
            return 0;
        }

        if (*replay_cmd) {
            const auto log = ccsim::read_mismatch_log(replay_path);
            if (log.records.empty()) {
                std::fprintf(stderr, "ccsim replay: no records in '%s'\n", replay_path.c_str());
                return 1;
            }
            ccsim::MatchCriteria criteria;
            if (!replay_criteria.empty()) criteria = ccsim::load_criteria_file(replay_criteria);
            std::string out_text;
            bool all_reproduced = true;
            int replayed = 0;
            for (const auto& rec : log.records) {
                if (replay_id != 0 && rec.record_id != replay_id) continue;
                const auto result = ccsim::replay_record(rec, criteria);
                out_text += result.timeline;
                all_reproduced = all_reproduced && result.reproduced;
                ++replayed;
            }
            if (replayed == 0) {
                std::fprintf(stderr, "ccsim replay: record %llu not found\n",
                             static_cast<unsigned long long>(replay_id));
                return 1;
            }
            if (log.truncated)
                std::fprintf(stderr, "warning: log was truncated; replayed the intact records\n");
            if (replay_out.empty()) {
                std::fputs(out_text.c_str(), stdout);
            } else {
                std::ofstream f(replay_out);
                f << out_text;
                std::printf("timeline: %s\n", replay_out.c_str());
            }
            std::printf("replayed %d record(s): %s\n", replayed,
                        all_reproduced ? "all reproduced" : "NOT all reproduced");
            return all_reproduced ? 0 : 3;
        }

        if (*drive_cmd) {
            const auto cfg = ccsim::load_drive_config(drive_config_path);
            const bool remote = cfg.hosts.size() >= 2;
            if (drive_plan_only || remote) {
                std::printf("%s", ccsim::drive_plan(cfg).c_str());
                return 0;
            }
            const auto report =
                ccsim::drive_local(cfg, drive_bin_dir.empty() ? self_bin_dir() : drive_bin_dir);
            print_summary(report);
            return report.failed ? 2 : 0;
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "ccsim: %s\n", e.what());
        return 1;
    }
    return 1;
}
