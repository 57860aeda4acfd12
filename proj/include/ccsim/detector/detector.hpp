/**
 * The corner case detector service. Two listeners feed one evaluation
 * thread through an ordered queue: the ground-truth channel (server
 * pushes Hello + StateUpdateBatch deltas) and the estimate channel (one
 * connection per client pushing EstimateReports). Findings are debounced
 * per (criterion, client) and persisted with both state-history windows.
 */
#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdio>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <thread>
#include <variant>
#include <vector>

#include "ccsim/core/stats.hpp"
#include "ccsim/core/time.hpp"
#include "ccsim/detector/buffers.hpp"
#include "ccsim/detector/criteria.hpp"
#include "ccsim/detector/evaluate.hpp"
#include "ccsim/detector/storage.hpp"
#include "ccsim/net/channel.hpp"

namespace ccsim {

struct DetectorConfig {
    Endpoint listen_gt{"127.0.0.1", 0};
    Endpoint listen_est{"127.0.0.1", 0};
    MatchCriteria criteria;
    double window_s = 10.0;
    std::string out_dir = ".";
    double warmup_s = 0.0; // pipeline-age samples before this are excluded
};

struct DetectorStats {
    std::uint64_t gt_batches = 0;
    std::uint64_t gt_records = 0;
    std::uint64_t gt_rejected = 0; // out-of-order records
    std::uint64_t gt_decode_failures = 0;
    std::uint64_t reports = 0;
    std::uint64_t align_skipped = 0;
    std::uint64_t findings_total = 0;
    std::uint64_t findings_debounced = 0;
    std::uint64_t queue_dropped = 0;
    std::uint64_t records_by_criterion[3] = {0, 0, 0};
    SampleStats pipeline_age_ms;
};

class Detector {
public:
    explicit Detector(DetectorConfig cfg)
        : cfg_(std::move(cfg)),
          window_us_(static_cast<std::uint64_t>(cfg_.window_s * 1e6)),
          buffers_(window_us_),
          writer_(cfg_.out_dir) {}

    ~Detector() { stop(); }

    // Binds both listeners and starts the service threads.
    void start() {
        auto gt = TcpListener::bind(cfg_.listen_gt);
        if (!gt) throw std::runtime_error("detector: cannot bind gt " + cfg_.listen_gt.str());
        auto est = TcpListener::bind(cfg_.listen_est);
        if (!est) throw std::runtime_error("detector: cannot bind est " + cfg_.listen_est.str());
        gt_listener_ = std::make_unique<TcpListener>(std::move(*gt));
        est_listener_ = std::make_unique<TcpListener>(std::move(*est));
        start_wall_us_ = mono_now_us();
        eval_thread_ = std::thread([this] { eval_loop(); });
        gt_accept_thread_ = std::thread([this] { accept_loop(*gt_listener_, true); });
        est_accept_thread_ = std::thread([this] { accept_loop(*est_listener_, false); });
    }

    const Endpoint& gt_endpoint() const { return gt_listener_->bound(); }
    const Endpoint& est_endpoint() const { return est_listener_->bound(); }

    void stop() {
        if (stopping_.exchange(true)) return;
        if (gt_listener_) gt_listener_->close();
        if (est_listener_) est_listener_->close();
        if (gt_accept_thread_.joinable()) gt_accept_thread_.join();
        if (est_accept_thread_.joinable()) est_accept_thread_.join();
        for (auto& t : conn_threads_)
            if (t.joinable()) t.join();
        queue_cv_.notify_all();
        if (eval_thread_.joinable()) eval_thread_.join();
    }

    DetectorStats stats() const {
        std::lock_guard<std::mutex> lock(stats_mu_);
        DetectorStats out = stats_;
        out.pipeline_age_ms = compute_stats(age_samples_);
        return out;
    }

private:
    struct GtHelloEvent {
        HelloMsg hello;
    };
    struct GtBatchEvent {
        std::vector<EntityState> states;
    };
    struct ReportEvent {
        EstimateReportMsg report;
        std::uint64_t t_ingest_us = 0;
    };
    using Event = std::variant<GtHelloEvent, GtBatchEvent, ReportEvent>;

    void push_event(Event ev) {
        {
            std::lock_guard<std::mutex> lock(queue_mu_);
            if (queue_.size() >= 8192) {
                std::lock_guard<std::mutex> slock(stats_mu_);
                ++stats_.queue_dropped;
                return;
            }
            queue_.push_back(std::move(ev));
        }
        queue_cv_.notify_one();
    }

    void accept_loop(TcpListener& listener, bool is_gt) {
        while (!stopping_) {
            auto stream = listener.accept(200);
            if (!stream) continue;
            auto chan = std::make_shared<MsgChannel>(std::move(*stream));
            std::lock_guard<std::mutex> lock(conn_mu_);
            conn_threads_.emplace_back([this, chan, is_gt] { conn_loop(chan, is_gt); });
        }
    }

    void conn_loop(std::shared_ptr<MsgChannel> chan, bool is_gt) {
        while (!stopping_) {
            auto msg = chan->recv(200);
            if (!msg) {
                if (chan->closed()) return;
                continue;
            }
            try {
                switch (msg->type) {
                    case MsgType::Hello:
                        if (is_gt) push_event(GtHelloEvent{decode_hello(msg->payload)});
                        chan->send(MsgType::Ack, std::vector<std::uint8_t>{});
                        break;
                    case MsgType::StateUpdateBatch:
                        if (is_gt) push_event(GtBatchEvent{decode_state_batch(msg->payload)});
                        break;
                    case MsgType::EstimateReport:
                        if (!is_gt)
                            push_event(ReportEvent{decode_estimate_report(msg->payload),
                                                   mono_now_us()});
                        break;
                    case MsgType::Bye:
                        return;
                    default:
                        break; // stray message types ignored
                }
            } catch (const ProtoError&) {
                std::lock_guard<std::mutex> lock(stats_mu_);
                ++stats_.gt_decode_failures; // malformed payload dropped
            }
        }
    }

    void eval_loop() {
        for (;;) {
            Event ev;
            {
                std::unique_lock<std::mutex> lock(queue_mu_);
                queue_cv_.wait_for(lock, std::chrono::milliseconds(100),
                                   [this] { return !queue_.empty() || stopping_.load(); });
                if (queue_.empty()) {
                    if (stopping_) return;
                    continue;
                }
                ev = std::move(queue_.front());
                queue_.pop_front();
            }
            std::visit([this](auto&& e) { handle(e); }, ev);
        }
    }

    void handle(const GtHelloEvent& ev) {
        scenario_name_ = ev.hello.scenario_name;
        seed_ = ev.hello.seed;
        manifest_ = ev.hello.manifest;
        for (const auto& e : manifest_) {
            EntityKind kind;
            kind.cls = e.cls;
            kind.extent_x = e.extent_x;
            kind.extent_y = e.extent_y;
            kind.real_height = e.real_height;
            buffers_.set_kind(e.entity_id, kind);
        }
    }

    void handle(const GtBatchEvent& ev) {
        const int rejected = buffers_.ingest(ev.states);
        std::lock_guard<std::mutex> lock(stats_mu_);
        ++stats_.gt_batches;
        stats_.gt_records += ev.states.size();
        stats_.gt_rejected += static_cast<std::uint64_t>(rejected);
    }

    void handle(const ReportEvent& ev) {
        const auto& report = ev.report;
        {
            std::lock_guard<std::mutex> lock(stats_mu_);
            ++stats_.reports;
            if (ev.t_ingest_us >= start_wall_us_ + static_cast<std::uint64_t>(cfg_.warmup_s * 1e6) &&
                report.t_estimate_us > report.t_render_us)
                age_samples_.push_back(
                    static_cast<double>(report.t_estimate_us - report.t_render_us) / 1000.0);
        }

        // keep the client's report window; the newest entry is the trigger
        auto& window = estimate_windows_[report.client_id];
        window.push_back(report);
        while (!window.empty() &&
               window.front().sim_time_us + window_us_ < report.sim_time_us)
            window.pop_front();

        const auto world = buffers_.align(report.sim_time_us);
        if (!world) {
            std::lock_guard<std::mutex> lock(stats_mu_);
            ++stats_.align_skipped;
        }
        const auto findings = evaluate(report, world, cfg_.criteria);
        if (findings.empty()) return;

        {
            std::lock_guard<std::mutex> lock(stats_mu_);
            stats_.findings_total += findings.size();
        }
        bool criterion_seen[3] = {false, false, false};
        for (const auto& f : findings) {
            const int ci = static_cast<int>(f.criterion);
            if (criterion_seen[ci]) continue; // one record per criterion per report
            criterion_seen[ci] = true;
            if (!debounce_ok(f.criterion, report.client_id, report.sim_time_us)) {
                std::lock_guard<std::mutex> lock(stats_mu_);
                ++stats_.findings_debounced;
                continue;
            }
            persist(f, report, ev.t_ingest_us);
        }
    }

    bool debounce_ok(CriterionTag criterion, std::uint32_t client_id, std::uint64_t sim_time_us) {
        const auto key = std::make_pair(static_cast<int>(criterion), client_id);
        auto it = last_persist_.find(key);
        const auto debounce_us = static_cast<std::uint64_t>(cfg_.criteria.debounce_s * 1e6);
        if (it != last_persist_.end() && sim_time_us < it->second + debounce_us) return false;
        last_persist_[key] = sim_time_us;
        return true;
    }

    void persist(const Finding& f, const EstimateReportMsg& report, std::uint64_t t_ingest_us) {
        MismatchRecord rec;
        rec.record_id = ++record_counter_;
        rec.criterion = f.criterion;
        rec.detail = f.detail;
        rec.sim_time_us = report.sim_time_us;
        rec.client_id = report.client_id;
        rec.entity_id = report.entity_id;
        rec.timing = {report.t_render_us, report.t_estimate_us, t_ingest_us};
        rec.scenario_name = scenario_name_;
        rec.seed = seed_;
        rec.manifest = manifest_;
        for (const auto& [id, buf] : buffers_.buffers())
            rec.gt_window.emplace_back(
                id, std::vector<EntityState>(buf.entries().begin(), buf.entries().end()));
        const auto& window = estimate_windows_[report.client_id];
        rec.estimate_window.assign(window.begin(), window.end());

        // storage write failure is retried once, then surfaced; the
        // detector keeps running either way
        if (!writer_.append(rec) && !writer_.append(rec)) {
            std::fprintf(stderr, "detector: failed to persist record %llu\n",
                         static_cast<unsigned long long>(rec.record_id));
            return;
        }
        std::lock_guard<std::mutex> lock(stats_mu_);
        ++stats_.records_by_criterion[static_cast<int>(f.criterion)];
    }

    DetectorConfig cfg_;
    std::uint64_t window_us_;

    std::unique_ptr<TcpListener> gt_listener_;
    std::unique_ptr<TcpListener> est_listener_;
    std::thread gt_accept_thread_;
    std::thread est_accept_thread_;
    std::thread eval_thread_;
    std::mutex conn_mu_;
    std::vector<std::thread> conn_threads_;
    std::atomic<bool> stopping_{false};

    std::mutex queue_mu_;
    std::condition_variable queue_cv_;
    std::deque<Event> queue_;

    // evaluation-thread state
    GroundTruthBuffers buffers_;
    std::string scenario_name_;
    std::uint64_t seed_ = 0;
    std::vector<ManifestEntry> manifest_;
    std::map<std::uint32_t, std::deque<EstimateReportMsg>> estimate_windows_;
    std::map<std::pair<int, std::uint32_t>, std::uint64_t> last_persist_;
    std::uint64_t record_counter_ = 0;
    MismatchLogWriter writer_;
    std::uint64_t start_wall_us_ = 0;

    mutable std::mutex stats_mu_;
    DetectorStats stats_;
    std::vector<double> age_samples_;
};

} // namespace ccsim
