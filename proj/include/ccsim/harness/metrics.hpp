/**
 * Experiment metrics: JSON serialization of per-component stats (what the
 * component binaries write via --metrics-out), the aggregated per-run
 * MetricsReport, the sweep CSV schema, and per-curve plot series files.
 * Units are declared in the schema: frame rates in fps, latencies in ms;
 * "jitter" is the sample standard deviation of per-request inference
 * latency over the measurement window. docs/metrics.md documents the
 * column set.
 */
#pragma once

#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ccsim/client/client.hpp"
#include "ccsim/core/stats.hpp"
#include "ccsim/detector/detector.hpp"
#include "ccsim/infer/engine.hpp"
#include "ccsim/server/server.hpp"

namespace ccsim {

using nlohmann::json;

inline json stats_json(const SampleStats& s) {
    return {{"count", s.count}, {"mean", s.mean},     {"stddev", s.stddev},
            {"min", s.min},     {"max", s.max},       {"p99", s.p99}};
}

inline SampleStats stats_from_json(const json& j) {
    SampleStats s;
    s.count = j.value("count", 0ull);
    s.mean = j.value("mean", 0.0);
    s.stddev = j.value("stddev", 0.0);
    s.min = j.value("min", 0.0);
    s.max = j.value("max", 0.0);
    s.p99 = j.value("p99", 0.0);
    return s;
}

inline json server_stats_json(const ServerStats& s) {
    json sessions = json::array();
    for (const auto& ss : s.sessions)
        sessions.push_back({{"client_id", ss.client_id},
                            {"entity_id", ss.entity_id},
                            {"fps", ss.fps},
                            {"frames_sent", ss.frames_sent},
                            {"frames_in_window", ss.frames_in_window},
                            {"frames_shed", ss.frames_shed},
                            {"cmds_accepted", ss.cmds_accepted},
                            {"cmds_rejected", ss.cmds_rejected},
                            {"cmds_overwritten", ss.cmds_overwritten}});
    return {{"role", "server"},
            {"ticks", s.ticks},
            {"sim_duration_s", s.sim_duration_s},
            {"wall_duration_s", s.wall_duration_s},
            {"window_s", s.window_s},
            {"frames_total", s.frames_total},
            {"frames_in_window", s.frames_in_window},
            {"frames_shed", s.frames_shed},
            {"gt_batches", s.gt_batches},
            {"gt_dropped", s.gt_dropped},
            {"tick_period_ms", stats_json(s.tick_period_ms)},
            {"sessions", sessions}};
}

inline json client_stats_json(const std::vector<ClientStats>& all) {
    json arr = json::array();
    for (const auto& c : all) {
        arr.push_back({{"client_id", c.client_id},
                       {"entity_id", c.entity_id},
                       {"fps", c.fps},
                       {"frames_received", c.frames_received},
                       {"frames_in_window", c.frames_in_window},
                       {"frames_coalesced", c.frames_coalesced},
                       {"reports_sent", c.reports_sent},
                       {"reports_dropped", c.reports_dropped},
                       {"infer_overload", c.infer_overload},
                       {"infer_timeout", c.infer_timeout},
                       {"stale_frames", c.stale_frames},
                       {"failsafe_stops", c.failsafe_stops},
                       {"window_s", c.window_s},
                       {"detect_rtt_ms", stats_json(c.detect_rtt_ms)},
                       {"steer_rtt_ms", stats_json(c.steer_rtt_ms)},
                       {"control_rtt_ms", stats_json(c.control_rtt_ms)},
                       {"pipeline_age_ms", stats_json(c.pipeline_age_ms)},
                       {"detect_rtt_samples", c.detect_rtt_samples},
                       {"steer_rtt_samples", c.steer_rtt_samples},
                       {"control_rtt_samples", c.control_rtt_samples},
                       {"age_samples", c.age_samples}});
    }
    return {{"role", "client"}, {"clients", arr}};
}

inline json detector_stats_json(const DetectorStats& s) {
    return {{"role", "detector"},
            {"gt_batches", s.gt_batches},
            {"gt_records", s.gt_records},
            {"gt_rejected", s.gt_rejected},
            {"gt_decode_failures", s.gt_decode_failures},
            {"reports", s.reports},
            {"align_skipped", s.align_skipped},
            {"findings_total", s.findings_total},
            {"findings_debounced", s.findings_debounced},
            {"queue_dropped", s.queue_dropped},
            {"records_derived_state", s.records_by_criterion[0]},
            {"records_position", s.records_by_criterion[1]},
            {"records_staleness", s.records_by_criterion[2]},
            {"pipeline_age_ms", stats_json(s.pipeline_age_ms)}};
}

inline json infer_stats_json(const std::unordered_map<std::string, ModelStats>& stats) {
    json models = json::object();
    for (const auto& [name, m] : stats)
        models[name] = {{"served", m.served}, {"overloaded", m.overloaded}};
    return {{"role", "infer"}, {"models", models}};
}

inline void write_json_file(const std::string& path, const json& j) {
    std::ofstream f(path);
    f << j.dump(2) << "\n";
}

inline json read_json_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) return json();
    json j;
    try {
        f >> j;
    } catch (const json::exception&) {
        return json();
    }
    return j;
}

// --- per-run aggregate ----------------------------------------------------

struct MetricsReport {
    int client_count = 0;
    double duration_s = 0.0;
    double window_s = 0.0;
    double total_fps = 0.0;
    double per_client_fps_mean = 0.0;
    double per_client_fps_min = 0.0;
    SampleStats detect_rtt_ms; // stddev is the "jitter" column
    SampleStats steer_rtt_ms;
    SampleStats control_rtt_ms;
    SampleStats pipeline_age_ms;
    std::uint64_t frames_shed = 0;
    std::uint64_t gt_dropped = 0;
    std::uint64_t infer_overloads = 0;
    std::uint64_t reports = 0;
    std::uint64_t records_derived = 0;
    std::uint64_t records_position = 0;
    std::uint64_t records_staleness = 0;
    SampleStats tick_period_ms;
    bool failed = false;
    std::string failure;
};

// Builds the aggregate from the four component metric files.
inline MetricsReport aggregate_metrics(const json& server, const json& clients,
                                       const json& detector, const json& infer) {
    MetricsReport r;
    if (server.contains("window_s")) {
        r.window_s = server.value("window_s", 0.0);
        r.duration_s = server.value("wall_duration_s", 0.0);
        r.frames_shed = server.value("frames_shed", 0ull);
        r.gt_dropped = server.value("gt_dropped", 0ull);
        r.tick_period_ms = stats_from_json(server.value("tick_period_ms", json::object()));
        if (r.window_s > 0.0)
            r.total_fps = static_cast<double>(server.value("frames_in_window", 0ull)) / r.window_s;
    }
    std::vector<double> detect_pool, steer_pool, control_pool, age_pool;
    if (clients.contains("clients")) {
        std::vector<double> fps_per_client;
        for (const auto& c : clients["clients"]) {
            r.client_count += 1;
            const double win = c.value("window_s", 0.0);
            if (win > 0.0)
                fps_per_client.push_back(static_cast<double>(c.value("frames_in_window", 0ull)) /
                                         win);
            for (const auto& v : c.value("detect_rtt_samples", std::vector<double>{}))
                detect_pool.push_back(v);
            for (const auto& v : c.value("steer_rtt_samples", std::vector<double>{}))
                steer_pool.push_back(v);
            for (const auto& v : c.value("control_rtt_samples", std::vector<double>{}))
                control_pool.push_back(v);
            for (const auto& v : c.value("age_samples", std::vector<double>{}))
                age_pool.push_back(v);
        }
        if (!fps_per_client.empty()) {
            const auto fps_stats = compute_stats(fps_per_client);
            r.per_client_fps_mean = fps_stats.mean;
            r.per_client_fps_min = fps_stats.min;
        }
    }
    r.detect_rtt_ms = compute_stats(detect_pool);
    r.steer_rtt_ms = compute_stats(steer_pool);
    r.control_rtt_ms = compute_stats(control_pool);
    if (detector.contains("pipeline_age_ms")) {
        r.pipeline_age_ms = stats_from_json(detector["pipeline_age_ms"]);
        r.reports = detector.value("reports", 0ull);
        r.records_derived = detector.value("records_derived_state", 0ull);
        r.records_position = detector.value("records_position", 0ull);
        r.records_staleness = detector.value("records_staleness", 0ull);
    } else {
        r.pipeline_age_ms = compute_stats(age_pool);
    }
    if (infer.contains("models"))
        for (const auto& [name, m] : infer["models"].items())
            r.infer_overloads += m.value("overloaded", 0ull);
    return r;
}

inline json metrics_report_json(const MetricsReport& r) {
    return {{"client_count", r.client_count},
            {"duration_s", r.duration_s},
            {"window_s", r.window_s},
            {"total_fps", r.total_fps},
            {"per_client_fps_mean", r.per_client_fps_mean},
            {"per_client_fps_min", r.per_client_fps_min},
            {"detect_rtt_ms", stats_json(r.detect_rtt_ms)},
            {"steer_rtt_ms", stats_json(r.steer_rtt_ms)},
            {"control_rtt_ms", stats_json(r.control_rtt_ms)},
            {"pipeline_age_ms", stats_json(r.pipeline_age_ms)},
            {"tick_period_ms", stats_json(r.tick_period_ms)},
            {"frames_shed", r.frames_shed},
            {"gt_dropped", r.gt_dropped},
            {"infer_overloads", r.infer_overloads},
            {"reports", r.reports},
            {"records_derived", r.records_derived},
            {"records_position", r.records_position},
            {"records_staleness", r.records_staleness},
            {"failed", r.failed},
            {"failure", r.failure}};
}

// --- sweep CSV + plot series -----------------------------------------------

inline const char* kSweepCsvHeader =
    "n_clients,failed,duration_s,window_s,total_fps,per_client_fps_mean,per_client_fps_min,"
    "detect_latency_mean_ms,detect_jitter_ms,detect_p99_ms,"
    "steer_latency_mean_ms,steer_jitter_ms,steer_p99_ms,"
    "control_rtt_mean_ms,pipeline_age_mean_ms,"
    "frames_shed,gt_dropped,infer_overloads,"
    "records_derived,records_position,records_staleness";

inline std::string sweep_csv_row(const MetricsReport& r) {
    std::ostringstream o;
    o << std::fixed << std::setprecision(3);
    o << r.client_count << ',' << (r.failed ? 1 : 0) << ',' << r.duration_s << ',' << r.window_s
      << ',' << r.total_fps << ',' << r.per_client_fps_mean << ',' << r.per_client_fps_min << ','
      << r.detect_rtt_ms.mean << ',' << r.detect_rtt_ms.stddev << ',' << r.detect_rtt_ms.p99 << ','
      << r.steer_rtt_ms.mean << ',' << r.steer_rtt_ms.stddev << ',' << r.steer_rtt_ms.p99 << ','
      << r.control_rtt_ms.mean << ',' << r.pipeline_age_ms.mean << ',' << r.frames_shed << ','
      << r.gt_dropped << ',' << r.infer_overloads << ',' << r.records_derived << ','
      << r.records_position << ',' << r.records_staleness;
    return o.str();
}

// One two-column file per curve, mirroring the latency-left/throughput-right
// presentation: x = client count, y = the curve's quantity.
inline void write_curve_files(const std::string& dir, const std::vector<MetricsReport>& rows) {
    auto write_curve = [&](const std::string& name, auto getter) {
        std::ofstream f(dir + "/" + name + ".dat");
        f << std::fixed << std::setprecision(4);
        for (const auto& r : rows)
            if (!r.failed) f << r.client_count << " " << getter(r) << "\n";
    };
    write_curve("total_fps", [](const MetricsReport& r) { return r.total_fps; });
    write_curve("per_client_fps_mean", [](const MetricsReport& r) { return r.per_client_fps_mean; });
    write_curve("per_client_fps_min", [](const MetricsReport& r) { return r.per_client_fps_min; });
    write_curve("detect_latency_mean_ms", [](const MetricsReport& r) { return r.detect_rtt_ms.mean; });
    write_curve("detect_jitter_ms", [](const MetricsReport& r) { return r.detect_rtt_ms.stddev; });
    write_curve("steer_latency_mean_ms", [](const MetricsReport& r) { return r.steer_rtt_ms.mean; });
    write_curve("steer_jitter_ms", [](const MetricsReport& r) { return r.steer_rtt_ms.stddev; });
    write_curve("pipeline_age_mean_ms", [](const MetricsReport& r) { return r.pipeline_age_ms.mean; });
}

} // namespace ccsim
