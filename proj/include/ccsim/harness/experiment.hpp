/**
 * The experiment rig: launches detector, inference service, simulation
 * server, and N clients as child processes, waits out the run, collects
 * the per-component metric files, and aggregates one MetricsReport.
 * sweep_clients() repeats over a range of client counts and emits the
 * CSV table plus per-curve plot series.
 */
#pragma once

#include <filesystem>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ccsim/harness/metrics.hpp"
#include "ccsim/harness/subprocess.hpp"
#include "ccsim/world/scenario.hpp"

namespace ccsim {

struct ExperimentConfig {
    std::string bin_dir;       // where the ccsim-* binaries live
    std::string scenario_path;
    std::string out_dir = "ccsim-run";
    int clients = 1;
    double duration_s = 0.0;   // 0 = scenario duration (simulated seconds)
    double warmup_s = 2.0;     // excluded from metrics
    double time_scale = 1.0;
    std::uint64_t seed = 0;    // 0 = scenario seed
    bool padding = false;
    double render_cost_ms = 0.0;
    bool render_burn = false;
    std::uint32_t fps = 0;     // 0 = scenario sensor_fps
    std::string models_path;   // optional model spec file
    std::string criteria_path; // optional detector criteria
    bool with_detector = true;
    int extra_wait_s = 20;     // spawn/teardown grace on top of the run
};

namespace detail {

// READY lines look like: "READY server clients=127.0.0.1:40001 ..."
inline std::optional<std::string> ready_field(const std::string& line, const std::string& key) {
    const auto pos = line.find(key + "=");
    if (pos == std::string::npos) return std::nullopt;
    const auto start = pos + key.size() + 1;
    const auto end = line.find(' ', start);
    return line.substr(start, end == std::string::npos ? std::string::npos : end - start);
}

inline std::optional<std::string> await_ready(Subprocess& p, const char* role, int timeout_ms) {
    const std::uint64_t deadline = mono_now_us() + static_cast<std::uint64_t>(timeout_ms) * 1000;
    while (mono_now_us() < deadline) {
        auto line = p.read_line(200);
        if (!line) {
            if (!p.running()) return std::nullopt;
            continue;
        }
        if (line->rfind("READY " + std::string(role), 0) == 0) return line;
    }
    return std::nullopt;
}

} // namespace detail

inline MetricsReport run_experiment(const ExperimentConfig& cfg) {
    namespace fs = std::filesystem;
    MetricsReport report;
    report.client_count = cfg.clients;
    fs::create_directories(cfg.out_dir);

    auto fail = [&](const std::string& why) {
        report.failed = true;
        report.failure = why;
        return report;
    };

    Scenario scenario;
    try {
        scenario = load_scenario_file(cfg.scenario_path);
    } catch (const std::exception& e) {
        return fail(std::string("scenario: ") + e.what());
    }
    int controllable = 0;
    for (const auto& e : scenario.entities)
        controllable += e.script.type == ScriptType::ClientControlled ? 1 : 0;
    if (controllable < cfg.clients)
        return fail("scenario has " + std::to_string(controllable) +
                    " client-controlled entities, need " + std::to_string(cfg.clients));

    const std::string bin = cfg.bin_dir.empty() ? "." : cfg.bin_dir;
    const std::string det_metrics = cfg.out_dir + "/detector.json";
    const std::string infer_metrics = cfg.out_dir + "/infer.json";
    const std::string server_metrics = cfg.out_dir + "/server.json";
    const std::string client_metrics = cfg.out_dir + "/clients.json";
    const double sim_duration = cfg.duration_s > 0.0 ? cfg.duration_s : scenario.duration_s;
    const double wall_duration = sim_duration / cfg.time_scale;

    // --- detector ---
    Subprocess detector;
    std::string gt_ep, est_ep;
    if (cfg.with_detector) {
        std::vector<std::string> argv = {bin + "/ccsim-detector",
                                         "--listen-gt", "127.0.0.1:0",
                                         "--listen-est", "127.0.0.1:0",
                                         "--out", cfg.out_dir,
                                         "--warmup", std::to_string(cfg.warmup_s),
                                         "--metrics-out", det_metrics};
        if (!cfg.criteria_path.empty()) {
            argv.push_back("--criteria");
            argv.push_back(cfg.criteria_path);
        }
        auto p = Subprocess::spawn(argv);
        if (!p) return fail("spawn detector");
        detector = std::move(*p);
        auto ready = detail::await_ready(detector, "detector", 10000);
        if (!ready) return fail("detector did not come up");
        gt_ep = detail::ready_field(*ready, "gt").value_or("");
        est_ep = detail::ready_field(*ready, "est").value_or("");
        if (gt_ep.empty() || est_ep.empty()) return fail("detector READY line malformed");
    }

    // --- inference service ---
    std::vector<std::string> infer_argv = {bin + "/ccsim-infer",
                                           "--listen", "127.0.0.1:0",
                                           "--scenario", cfg.scenario_path,
                                           "--metrics-out", infer_metrics};
    if (!cfg.models_path.empty()) {
        infer_argv.push_back("--models");
        infer_argv.push_back(cfg.models_path);
    }
    if (cfg.seed != 0) {
        infer_argv.push_back("--seed");
        infer_argv.push_back(std::to_string(cfg.seed));
    }
    auto infer_p = Subprocess::spawn(infer_argv);
    if (!infer_p) return fail("spawn infer");
    Subprocess infer = std::move(*infer_p);
    auto infer_ready = detail::await_ready(infer, "infer", 10000);
    if (!infer_ready) return fail("inference service did not come up");
    const std::string infer_ep = detail::ready_field(*infer_ready, "listen").value_or("");
    if (infer_ep.empty()) return fail("infer READY line malformed");

    // --- server ---
    std::vector<std::string> server_argv = {bin + "/ccsim-server",
                                            "--scenario", cfg.scenario_path,
                                            "--listen-clients", "127.0.0.1:0",
                                            "--duration", std::to_string(sim_duration),
                                            "--time-scale", std::to_string(cfg.time_scale),
                                            "--warmup", std::to_string(cfg.warmup_s),
                                            "--render-cost-ms", std::to_string(cfg.render_cost_ms),
                                            "--metrics-out", server_metrics};
    if (!gt_ep.empty()) {
        server_argv.push_back("--detector");
        server_argv.push_back(gt_ep);
    }
    if (cfg.fps != 0) {
        server_argv.push_back("--fps");
        server_argv.push_back(std::to_string(cfg.fps));
    }
    if (cfg.seed != 0) {
        server_argv.push_back("--seed");
        server_argv.push_back(std::to_string(cfg.seed));
    }
    if (cfg.padding) server_argv.push_back("--padding");
    if (cfg.render_burn) server_argv.push_back("--render-burn");
    auto server_p = Subprocess::spawn(server_argv);
    if (!server_p) return fail("spawn server");
    Subprocess server = std::move(*server_p);
    auto server_ready = detail::await_ready(server, "server", 10000);
    if (!server_ready) return fail("server did not come up");
    const std::string client_ep = detail::ready_field(*server_ready, "clients").value_or("");
    if (client_ep.empty()) return fail("server READY line malformed");

    // --- clients ---
    std::vector<std::string> client_argv = {bin + "/ccsim-client",
                                            "--server", client_ep,
                                            "--inference", infer_ep,
                                            "--count", std::to_string(cfg.clients),
                                            "--id", "1",
                                            "--warmup", std::to_string(cfg.warmup_s),
                                            "--metrics-out", client_metrics};
    if (!est_ep.empty()) {
        client_argv.push_back("--detector");
        client_argv.push_back(est_ep);
    }
    auto clients_p = Subprocess::spawn(client_argv);
    if (!clients_p) return fail("spawn clients");
    Subprocess clients = std::move(*clients_p);

    // --- run to completion ---
    const int budget_ms = static_cast<int>((wall_duration + cfg.extra_wait_s) * 1000.0);
    const auto server_exit = server.wait(budget_ms);
    bool component_failure = false;
    std::string failure_detail;
    if (!server_exit) {
        component_failure = true;
        failure_detail = "server timeout";
        server.terminate();
    } else if (*server_exit != 0) {
        component_failure = true;
        failure_detail = "server exit " + std::to_string(*server_exit);
    }
    const auto clients_exit = clients.wait(10000);
    if (!clients_exit) {
        component_failure = true;
        failure_detail += std::string(failure_detail.empty() ? "" : "; ") + "clients timeout";
        clients.terminate();
    } else if (*clients_exit != 0) {
        component_failure = true;
        failure_detail += std::string(failure_detail.empty() ? "" : "; ") + "clients exit " +
                          std::to_string(*clients_exit);
    }
    if (cfg.with_detector) {
        const int det_exit = detector.terminate(5000);
        if (det_exit != 0) {
            component_failure = true;
            failure_detail += std::string(failure_detail.empty() ? "" : "; ") + "detector exit " +
                              std::to_string(det_exit);
        }
    }
    const int infer_exit = infer.terminate(5000);
    if (infer_exit != 0) {
        component_failure = true;
        failure_detail +=
            std::string(failure_detail.empty() ? "" : "; ") + "infer exit " + std::to_string(infer_exit);
    }

    // --- aggregate (partial metrics even on failure) ---
    report = aggregate_metrics(read_json_file(server_metrics), read_json_file(client_metrics),
                               cfg.with_detector ? read_json_file(det_metrics) : json(),
                               read_json_file(infer_metrics));
    report.client_count = cfg.clients;
    report.failed = component_failure;
    report.failure = failure_detail;
    write_json_file(cfg.out_dir + "/report.json", metrics_report_json(report));
    return report;
}

// A straight multi-lane-free platoon: n client vehicles spaced down one
// long road. Used by sweeps, which need one controllable entity per client.
inline Scenario make_platoon_scenario(int n_clients, double duration_s, std::uint32_t tick_rate_hz,
                                      std::uint32_t sensor_fps) {
    Scenario sc;
    sc.name = "platoon-" + std::to_string(n_clients);
    sc.seed = 1;
    sc.tick_rate_hz = tick_rate_hz;
    sc.sensor_fps = sensor_fps;
    sc.duration_s = duration_s;
    sc.road = {{-800, 0, 0}, {1500, 0, 0}};
    for (int i = 0; i < n_clients; ++i) {
        ScenarioEntity e;
        e.kind = {EntityClass::Vehicle, 2.0f, 0.9f, 1.5f};
        e.initial.entity_id = static_cast<std::uint32_t>(i + 1);
        e.initial.position = {static_cast<float>(-17.0 * i), 0, 0};
        e.initial.direction = {1, 0, 0};
        e.script.type = ScriptType::ClientControlled;
        sc.entities.push_back(e);
    }
    return sc;
}

struct SweepConfig {
    ExperimentConfig base;        // out_dir is used as the sweep root
    std::vector<int> client_counts;
};

struct SweepResult {
    std::vector<MetricsReport> rows;
    std::string csv_path;
};

inline SweepResult sweep_clients(const SweepConfig& cfg) {
    namespace fs = std::filesystem;
    SweepResult result;
    fs::create_directories(cfg.base.out_dir);
    const std::string csv_path = cfg.base.out_dir + "/sweep.csv";
    std::ofstream csv(csv_path);
    csv << kSweepCsvHeader << "\n";

    for (const int n : cfg.client_counts) {
        ExperimentConfig run_cfg = cfg.base;
        run_cfg.clients = n;
        run_cfg.out_dir = cfg.base.out_dir + "/n" + std::to_string(n);
        fs::create_directories(run_cfg.out_dir);

        if (run_cfg.scenario_path.empty()) {
            // synthesize a platoon large enough for this point
            const auto sc = make_platoon_scenario(
                n, run_cfg.duration_s > 0 ? run_cfg.duration_s : 10.0, 100,
                run_cfg.fps != 0 ? run_cfg.fps : 20);
            const std::string path = run_cfg.out_dir + "/scenario.scn";
            std::ofstream f(path);
            f << scenario_to_text(sc);
            f.close();
            run_cfg.scenario_path = path;
        }
        MetricsReport row = run_experiment(run_cfg);
        row.client_count = n;
        csv << sweep_csv_row(row) << "\n";
        csv.flush();
        result.rows.push_back(std::move(row));
    }
    const std::string curves = cfg.base.out_dir + "/curves";
    fs::create_directories(curves);
    write_curve_files(curves, result.rows);
    result.csv_path = csv_path;
    return result;
}

} // namespace ccsim
