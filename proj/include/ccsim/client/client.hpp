/**
 * AI client process: one decision loop per client. Receives sensor
 * frames (coalescing to the newest when busy), issues the detection and
 * steering inference requests concurrently, estimates object positions,
 * runs the decision logic, commands the vehicle, and reports its
 * estimated state to the corner case detector. Perception starvation
 * degrades to Stop after stale_budget frames.
 */
#pragma once

#include <atomic>
#include <deque>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "ccsim/client/pipeline.hpp"
#include "ccsim/core/stats.hpp"
#include "ccsim/core/time.hpp"
#include "ccsim/net/channel.hpp"

namespace ccsim {

struct ClientConfig {
    std::string server_addr;
    std::string inference_addr;
    std::string detector_addr; // empty = reports are counted as dropped
    DrivingParams params;
    std::uint32_t client_id = 0; // 0 = server assigns
    std::uint32_t entity_id = 0; // 0 = server assigns
    std::uint16_t fps_request = 0;
    std::string detect_model = "detector";
    std::string steer_model = "steering";
    double warmup_s = 0.0;
};

struct ClientStats {
    std::uint32_t client_id = 0;
    std::uint32_t entity_id = 0;
    std::uint32_t fps = 0;
    std::uint64_t frames_received = 0;
    std::uint64_t frames_in_window = 0;
    std::uint64_t frames_coalesced = 0;
    std::uint64_t reports_sent = 0;
    std::uint64_t reports_dropped = 0;
    std::uint64_t infer_overload = 0;
    std::uint64_t infer_timeout = 0;
    std::uint64_t stale_frames = 0;
    std::uint64_t failsafe_stops = 0;
    std::uint64_t unresolvable_boxes = 0;
    double window_s = 0.0;
    SampleStats detect_rtt_ms;
    SampleStats steer_rtt_ms;
    SampleStats detect_service_ms;
    SampleStats steer_service_ms;
    SampleStats control_rtt_ms;
    SampleStats pipeline_age_ms; // t_estimate - t_render per report
    // raw in-window samples, for pooling across clients
    std::vector<double> detect_rtt_samples;
    std::vector<double> steer_rtt_samples;
    std::vector<double> control_rtt_samples;
    std::vector<double> age_samples;
};

class AiClient {
public:
    explicit AiClient(ClientConfig cfg) : cfg_(std::move(cfg)) {}

    // Blocks until the server closes the session (end of scenario) or
    // *stop. Returns 0 on a clean session, 1 on connection failure.
    int run(const std::atomic<bool>& stop) {
        start_wall_us_ = mono_now_us();
        auto server_stream = TcpStream::connect(parse_endpoint(cfg_.server_addr), 5000);
        if (!server_stream) return 1;
        server_ = std::make_unique<MsgChannel>(std::move(*server_stream));

        HelloMsg hello;
        hello.role = HelloRole::Client;
        hello.client_id = cfg_.client_id;
        hello.entity_id = cfg_.entity_id;
        hello.requested_fps = cfg_.fps_request;
        if (!server_->send(MsgType::Hello, encode_hello(hello))) return 1;
        auto ack_msg = server_->recv(5000);
        if (!ack_msg || ack_msg->type != MsgType::Ack) return 1;
        HelloAck ack = decode_hello_ack(ack_msg->payload);
        if (ack.status != 0) return 1;

        client_id_ = ack.client_id;
        entity_id_ = ack.entity_id;
        fps_ = ack.fps;
        frame_interval_us_ = ack.fps > 0 ? 1000000ull / ack.fps : 50000;
        camera_.image_width_px = ack.image_width_px;
        camera_.image_height_px = ack.image_height_px;
        camera_.hfov_rad = ack.hfov_rad;
        camera_.mount = ack.mount;
        camera_.mount_yaw_rad = ack.mount_yaw_rad;
        heights_.vehicle = ack.height_vehicle;
        heights_.pedestrian = ack.height_pedestrian;
        heights_.static_obstacle = ack.height_static;

        connect_inference();
        connect_detector();

        std::optional<SensorFrameMsg> latest;
        while (!stop) {
            auto msg = server_->recv(latest ? 0 : 50);
            if (!msg) {
                if (server_->closed()) break;
                if (latest) {
                    process_frame(*latest);
                    latest.reset();
                }
                continue;
            }
            switch (msg->type) {
                case MsgType::SensorFrame: {
                    if (latest) ++stats_coalesced_; // a newer frame replaces it
                    try {
                        latest = decode_sensor_frame(msg->payload);
                    } catch (const ProtoError&) {
                        latest.reset();
                    }
                    break;
                }
                case MsgType::Ack: {
                    handle_control_ack(msg->payload);
                    break;
                }
                case MsgType::Bye:
                    goto done;
                default:
                    break;
            }
        }
    done:
        if (detector_) detector_->send(MsgType::Bye, std::vector<std::uint8_t>{});
        if (infer_) infer_->send(MsgType::Bye, std::vector<std::uint8_t>{});
        return 0;
    }

    ClientStats stats() const {
        ClientStats s;
        s.client_id = client_id_;
        s.entity_id = entity_id_;
        s.fps = fps_;
        s.frames_received = frames_received_;
        s.frames_in_window = frames_in_window_;
        s.frames_coalesced = stats_coalesced_;
        s.reports_sent = reports_sent_;
        s.reports_dropped = reports_dropped_;
        s.infer_overload = infer_overload_;
        s.infer_timeout = infer_timeout_;
        s.stale_frames = stale_frames_;
        s.failsafe_stops = failsafe_stops_;
        s.unresolvable_boxes = unresolvable_;
        s.window_s = static_cast<double>(mono_now_us() - window_start_us()) * 1e-6;
        s.detect_rtt_ms = compute_stats(detect_rtt_ms_);
        s.steer_rtt_ms = compute_stats(steer_rtt_ms_);
        s.detect_service_ms = compute_stats(detect_service_ms_);
        s.steer_service_ms = compute_stats(steer_service_ms_);
        s.control_rtt_ms = compute_stats(control_rtt_ms_);
        s.pipeline_age_ms = compute_stats(age_ms_);
        s.detect_rtt_samples = detect_rtt_ms_;
        s.steer_rtt_samples = steer_rtt_ms_;
        s.control_rtt_samples = control_rtt_ms_;
        s.age_samples = age_ms_;
        return s;
    }

private:
    std::uint64_t window_start_us() const {
        return start_wall_us_ + static_cast<std::uint64_t>(cfg_.warmup_s * 1e6);
    }
    bool in_window() const { return mono_now_us() >= window_start_us(); }

    void connect_inference() {
        auto stream = TcpStream::connect(parse_endpoint(cfg_.inference_addr), 2000);
        if (stream)
            infer_ = std::make_unique<MsgChannel>(std::move(*stream));
        else
            infer_.reset();
        infer_retry_us_ = mono_now_us() + 2000000;
    }

    void connect_detector() {
        if (cfg_.detector_addr.empty()) return;
        auto stream = TcpStream::connect(parse_endpoint(cfg_.detector_addr), 2000);
        detector_retry_us_ = mono_now_us() + 2000000;
        if (!stream) return;
        detector_ = std::make_unique<MsgChannel>(std::move(*stream));
        HelloMsg hello;
        hello.role = HelloRole::Estimate;
        hello.client_id = client_id_;
        hello.entity_id = entity_id_;
        detector_->send(MsgType::Hello, encode_hello(hello));
    }

    void handle_control_ack(const std::vector<std::uint8_t>& payload) {
        ControlAck ack;
        try {
            ack = decode_control_ack(payload);
        } catch (const ProtoError&) {
            return;
        }
        auto it = control_sent_us_.find(ack.frame_id_ref);
        if (it != control_sent_us_.end()) {
            if (in_window())
                control_rtt_ms_.push_back(static_cast<double>(mono_now_us() - it->second) / 1000.0);
            control_sent_us_.erase(it);
        }
    }

    struct InferOutcome {
        bool got_detect = false;
        bool got_steer = false;
        std::vector<Detection> detections;
        float steering = 0.0f;
    };

    // Issues both requests back to back (they run concurrently in the
    // service) and waits for the pair with a one-frame-interval deadline.
    InferOutcome do_inference(const SensorFrameMsg& frame) {
        InferOutcome out;
        if (!infer_ || infer_->closed()) {
            if (mono_now_us() >= infer_retry_us_) connect_inference();
            if (!infer_) return out;
        }
        InferRequestMsg req;
        req.frame_id = frame.frame_id;
        req.sim_time_us = frame.sim_time_us;
        req.t_send_us = mono_now_us();
        req.camera = frame.camera;
        req.annotations = frame.annotations; // forwarded opaque, never inspected
        req.model_name = cfg_.detect_model;
        const bool sent_detect = infer_->send(MsgType::InferRequest, encode_infer_request(req));
        req.model_name = cfg_.steer_model;
        req.annotations.clear(); // the steering model only needs the pose
        const bool sent_steer = infer_->send(MsgType::InferRequest, encode_infer_request(req));
        if (!sent_detect || !sent_steer) {
            infer_.reset();
            return out;
        }

        const std::uint64_t t_send = req.t_send_us;
        // generous enough for slow models (staleness experiments), still
        // bounded; a closed channel fails immediately regardless
        const std::uint64_t deadline =
            mono_now_us() + std::max<std::uint64_t>(2 * frame_interval_us_, 250000);
        while ((!out.got_detect || !out.got_steer) && mono_now_us() < deadline) {
            const auto left = static_cast<int>((deadline - mono_now_us()) / 1000) + 1;
            auto msg = infer_->recv(left);
            if (!msg) {
                if (infer_->closed()) {
                    infer_.reset();
                    break;
                }
                continue;
            }
            if (msg->type != MsgType::InferResponse) continue;
            InferResponseMsg resp;
            try {
                resp = decode_infer_response(msg->payload);
            } catch (const ProtoError&) {
                continue;
            }
            if (resp.frame_id != frame.frame_id) continue; // stale response
            if (resp.status == InferStatus::Overload) {
                ++infer_overload_;
                continue;
            }
            if (resp.status != InferStatus::Ok) continue;
            const double rtt_ms = static_cast<double>(mono_now_us() - t_send) / 1000.0;
            if (resp.kind == ModelKind::ObjectDetector) {
                out.got_detect = true;
                out.detections = std::move(resp.detections);
                if (in_window()) {
                    detect_rtt_ms_.push_back(rtt_ms);
                    detect_service_ms_.push_back(static_cast<double>(resp.t_service_us) / 1000.0);
                }
            } else {
                out.got_steer = true;
                out.steering = resp.steering_rad;
                if (in_window()) {
                    steer_rtt_ms_.push_back(rtt_ms);
                    steer_service_ms_.push_back(static_cast<double>(resp.t_service_us) / 1000.0);
                }
            }
        }
        if (!out.got_detect || !out.got_steer) ++infer_timeout_;
        return out;
    }

    void process_frame(const SensorFrameMsg& frame) {
        ++frames_received_;
        if (in_window()) ++frames_in_window_;

        auto inf = do_inference(frame);

        // stale-perception policy: reuse the last good results for up to
        // stale_budget frames, then fail safe
        bool failsafe = false;
        if (inf.got_detect) {
            last_detections_ = inf.detections;
            stale_count_ = 0;
        } else {
            ++stale_frames_;
            ++stale_count_;
            if (stale_count_ > cfg_.params.stale_budget || !last_detections_) failsafe = true;
        }
        if (inf.got_steer) last_steering_ = inf.steering;

        DerivedState state;
        ControlCmdMsg cmd;
        std::vector<ObjectEstimate> estimates;
        if (failsafe) {
            ++failsafe_stops_;
            state = DerivedState::Stop;
            cmd.steering = last_steering_;
            cmd.throttle = 0.0f;
            cmd.brake = 1.0f;
        } else {
            const auto& detections = inf.got_detect ? inf.detections : *last_detections_;
            auto perceived = perceive(frame, detections, camera_, heights_, cfg_.params);
            unresolvable_ += static_cast<std::uint64_t>(perceived.unresolvable);
            estimates = std::move(perceived.estimates);
            const float speed = estimate_speed(frame);
            Decision d = decide(estimates, last_steering_, speed, last_steering_, cfg_.params);
            state = d.state;
            cmd = d.cmd;
        }
        cmd.frame_id_ref = frame.frame_id;
        control_sent_us_[frame.frame_id] = mono_now_us();
        if (control_sent_us_.size() > 64) control_sent_us_.erase(control_sent_us_.begin());
        server_->send(MsgType::ControlCmd, encode_control_cmd(cmd));

        const std::uint64_t t_estimate = mono_now_us();
        auto report = make_report(client_id_, entity_id_, frame, state, estimates, t_estimate);
        send_report(report);
        if (in_window() && t_estimate > frame.t_render_us)
            age_ms_.push_back(static_cast<double>(t_estimate - frame.t_render_us) / 1000.0);

        last_pose_ = frame.camera;
        last_sim_time_us_ = frame.sim_time_us;
    }

    // Visual-odometry style speed estimate from consecutive camera poses.
    float estimate_speed(const SensorFrameMsg& frame) {
        if (last_sim_time_us_ == 0 || frame.sim_time_us <= last_sim_time_us_) return 0.0f;
        const double dt = static_cast<double>(frame.sim_time_us - last_sim_time_us_) * 1e-6;
        const double dist = planar_dist(frame.camera.position, last_pose_.position);
        return static_cast<float>(dist / dt);
    }

    void send_report(const EstimateReportMsg& report) {
        if (!detector_ || detector_->closed()) {
            if (!cfg_.detector_addr.empty() && mono_now_us() >= detector_retry_us_) {
                connect_detector();
                flush_report_buffer();
            }
            if (!detector_ || detector_->closed()) {
                report_buffer_.push_back(report);
                if (report_buffer_.size() > 256) {
                    report_buffer_.pop_front();
                    ++reports_dropped_;
                }
                return;
            }
        }
        flush_report_buffer();
        if (detector_->send(MsgType::EstimateReport, encode_estimate_report(report)))
            ++reports_sent_;
        else
            ++reports_dropped_;
    }

    void flush_report_buffer() {
        if (!detector_ || detector_->closed()) return;
        while (!report_buffer_.empty()) {
            if (detector_->send(MsgType::EstimateReport,
                                encode_estimate_report(report_buffer_.front())))
                ++reports_sent_;
            else
                return;
            report_buffer_.pop_front();
        }
    }

    ClientConfig cfg_;
    std::unique_ptr<MsgChannel> server_;
    std::unique_ptr<MsgChannel> infer_;
    std::unique_ptr<MsgChannel> detector_;
    std::uint64_t infer_retry_us_ = 0;
    std::uint64_t detector_retry_us_ = 0;

    std::uint32_t client_id_ = 0;
    std::uint32_t entity_id_ = 0;
    std::uint32_t fps_ = 0;
    std::uint64_t frame_interval_us_ = 50000;
    CameraModel camera_;
    ClassHeights heights_;

    std::optional<std::vector<Detection>> last_detections_;
    int stale_count_ = 0;
    float last_steering_ = 0.0f;
    CameraPose last_pose_;
    std::uint64_t last_sim_time_us_ = 0;
    std::map<std::uint64_t, std::uint64_t> control_sent_us_;
    std::deque<EstimateReportMsg> report_buffer_;

    std::uint64_t start_wall_us_ = 0;
    std::uint64_t frames_received_ = 0;
    std::uint64_t frames_in_window_ = 0;
    std::uint64_t stats_coalesced_ = 0;
    std::uint64_t reports_sent_ = 0;
    std::uint64_t reports_dropped_ = 0;
    std::uint64_t infer_overload_ = 0;
    std::uint64_t infer_timeout_ = 0;
    std::uint64_t stale_frames_ = 0;
    std::uint64_t failsafe_stops_ = 0;
    std::uint64_t unresolvable_ = 0;
    std::vector<double> detect_rtt_ms_;
    std::vector<double> steer_rtt_ms_;
    std::vector<double> detect_service_ms_;
    std::vector<double> steer_service_ms_;
    std::vector<double> control_rtt_ms_;
    std::vector<double> age_ms_;
};

struct MultiClientResult {
    std::vector<ClientStats> stats;
    int worst_rc = 0;
};

// Runs `count` independent client instances in-process, one thread each.
inline MultiClientResult run_clients(const ClientConfig& base, int count,
                                     const std::atomic<bool>& stop) {
    std::vector<std::unique_ptr<AiClient>> clients;
    std::vector<int> rcs(static_cast<size_t>(count), 0);
    std::vector<std::thread> threads;
    for (int i = 0; i < count; ++i) {
        ClientConfig cfg = base;
        if (base.client_id != 0) cfg.client_id = base.client_id + static_cast<std::uint32_t>(i);
        clients.push_back(std::make_unique<AiClient>(cfg));
    }
    threads.reserve(clients.size());
    for (int i = 0; i < count; ++i)
        threads.emplace_back([&, i] { rcs[static_cast<size_t>(i)] = clients[static_cast<size_t>(i)]->run(stop); });
    for (auto& t : threads) t.join();
    MultiClientResult out;
    out.stats.reserve(clients.size());
    for (const auto& c : clients) out.stats.push_back(c->stats());
    for (int rc : rcs) out.worst_rc = std::max(out.worst_rc, rc);
    return out;
}

} // namespace ccsim
