/**
 * Authoritative simulation service. One simulation thread owns the world
 * and ticks at the configured rate on absolute wall-clock deadlines,
 * never waiting for clients: a silent client's vehicle keeps integrating
 * its last command. Per-client sensor frames are scheduled in simulation
 * time and built by a single serialized render worker (which can charge a
 * synthetic per-frame cost); when rendering falls behind, pending frames
 * are replaced rather than queued, so clients always get the freshest
 * world at whatever rate the renderer sustains. Ground-truth state deltas
 * stream to the corner case detector over a bounded drop-oldest queue.
 */
#pragma once

#include <atomic>
#include <condition_variable>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <thread>
#include <vector>

#include "ccsim/core/stats.hpp"
#include "ccsim/core/time.hpp"
#include "ccsim/geom/camera.hpp"
#include "ccsim/net/channel.hpp"
#include "ccsim/proto/messages.hpp"
#include "ccsim/world/world.hpp"

namespace ccsim {

struct ServerConfig {
    Endpoint listen_clients{"127.0.0.1", 0};
    std::string detector_addr;   // empty = run without a detector
    std::uint32_t default_fps = 20;
    bool padding = false;
    double time_scale = 1.0;     // simulated seconds per wall second
    double render_cost_ms = 0.0; // synthetic serialized per-frame cost
    bool render_burn = false;    // burn CPU instead of sleeping the cost
    std::optional<std::uint64_t> seed_override;
    std::optional<double> duration_override_s;
    double warmup_s = 0.0;       // excluded from windowed counters
};

struct SessionStats {
    std::uint32_t client_id = 0;
    std::uint32_t entity_id = 0;
    std::uint32_t fps = 0;
    std::uint64_t frames_sent = 0;
    std::uint64_t frames_in_window = 0;
    std::uint64_t frames_shed = 0;
    std::uint64_t cmds_accepted = 0;
    std::uint64_t cmds_rejected = 0;
    std::uint64_t cmds_overwritten = 0;
};

struct ServerStats {
    std::uint64_t ticks = 0;
    double sim_duration_s = 0.0;
    double wall_duration_s = 0.0;
    std::uint64_t frames_total = 0;
    std::uint64_t frames_in_window = 0;
    std::uint64_t frames_shed = 0;
    double window_s = 0.0; // wall seconds covered by *_in_window counters
    std::uint64_t gt_batches = 0;
    std::uint64_t gt_dropped = 0;
    SampleStats tick_period_ms;
    std::vector<SessionStats> sessions;
};

class SimServer {
public:
    SimServer(ServerConfig cfg, Scenario scenario)
        : cfg_(std::move(cfg)), scenario_(std::move(scenario)) {
        if (cfg_.seed_override) scenario_.seed = *cfg_.seed_override;
        if (cfg_.duration_override_s) scenario_.duration_s = *cfg_.duration_override_s;
        if (cfg_.default_fps == 0) cfg_.default_fps = scenario_.sensor_fps;
        cfg_.default_fps = clamp_fps(cfg_.default_fps);
        for (const auto& e : scenario_.entities)
            if (e.script.type == ScriptType::ClientControlled)
                free_entities_.insert(e.initial.entity_id);
    }

    ~SimServer() { stop(); }

    // Binds the client listener; call before run().
    Endpoint start_listening() {
        auto listener = TcpListener::bind(cfg_.listen_clients);
        if (!listener) throw std::runtime_error("server: cannot bind " + cfg_.listen_clients.str());
        listener_ = std::make_unique<TcpListener>(std::move(*listener));
        return listener_->bound();
    }

    // Runs the simulation to completion (or until *stop). Returns 0 on a
    // clean run.
    int run(const std::atomic<bool>& stop) {
        if (!listener_) start_listening();
        world_ = std::make_unique<WorldState>(scenario_);
        if (!cfg_.detector_addr.empty()) {
            detector_thread_ = std::thread([this] { detector_loop(); });
        }
        accept_thread_ = std::thread([this] { accept_loop(); });
        render_thread_ = std::thread([this] { render_loop(); });

        const std::uint64_t total_ticks = scenario_.total_ticks();
        const double tick_period_wall_us =
            static_cast<double>(world_->tick_dt_us()) / cfg_.time_scale;
        const std::uint64_t t0 = mono_now_us();
        start_wall_us_ = t0;
        const std::uint64_t warmup_end_us = t0 + static_cast<std::uint64_t>(cfg_.warmup_s * 1e6);
        std::uint64_t prev_tick_start = 0;

        publish_ground_truth(world_->changed_states()); // initial full state

        for (std::uint64_t tick = 1; tick <= total_ticks && !stop && !stopping_; ++tick) {
            sleep_until_us(t0 + static_cast<std::uint64_t>(tick_period_wall_us * tick));
            const std::uint64_t tick_start = mono_now_us();
            if (prev_tick_start != 0 && tick_start >= warmup_end_us) {
                std::lock_guard<std::mutex> lock(stats_mu_);
                tick_period_samples_.push_back(
                    static_cast<double>(tick_start - prev_tick_start) / 1000.0);
            }
            prev_tick_start = tick_start;

            std::map<std::uint32_t, ControlCmd> controls;
            {
                std::lock_guard<std::mutex> lock(sessions_mu_);
                for (auto& s : sessions_) {
                    if (s->dead) continue;
                    std::lock_guard<std::mutex> cmd_lock(s->cmd_mu);
                    if (s->pending_cmd) {
                        const auto& m = *s->pending_cmd;
                        controls[s->entity_id] = {m.steering, m.throttle, m.brake};
                        s->pending_cmd.reset();
                    }
                }
            }
            world_->step(controls);
            sim_time_pub_.store(world_->sim_time_us());

            auto changed = world_->changed_states();
            if (!changed.empty()) publish_ground_truth(changed);

            schedule_due_frames();
        }

        const std::uint64_t t_end = mono_now_us();
        {
            std::lock_guard<std::mutex> lock(stats_mu_);
            stats_.ticks = world_->tick();
            stats_.sim_duration_s = world_->sim_time_s();
            stats_.wall_duration_s = static_cast<double>(t_end - t0) * 1e-6;
            stats_.window_s =
                t_end > warmup_end_us ? static_cast<double>(t_end - warmup_end_us) * 1e-6 : 0.0;
        }
        shutdown_network();
        return 0;
    }

    void stop() {
        stopping_ = true;
        shutdown_network();
    }

    ServerStats stats() const {
        std::lock_guard<std::mutex> lock(stats_mu_);
        ServerStats out = stats_;
        out.tick_period_ms = compute_stats(tick_period_samples_);
        std::lock_guard<std::mutex> slock(sessions_mu_);
        for (const auto& s : sessions_) {
            SessionStats ss;
            ss.client_id = s->client_id;
            ss.entity_id = s->entity_id;
            ss.fps = s->fps;
            ss.frames_sent = s->frames_sent;
            ss.frames_in_window = s->frames_in_window;
            ss.frames_shed = s->frames_shed;
            ss.cmds_accepted = s->cmds_accepted;
            ss.cmds_rejected = s->cmds_rejected;
            ss.cmds_overwritten = s->cmds_overwritten;
            out.frames_total += s->frames_sent;
            out.frames_in_window += s->frames_in_window;
            out.frames_shed += s->frames_shed;
            out.sessions.push_back(ss);
        }
        return out;
    }

private:
    struct Session {
        std::uint32_t client_id = 0;
        std::uint32_t entity_id = 0;
        std::uint32_t fps = 20;
        std::uint64_t frame_interval_us = 50000;
        std::uint64_t next_frame_sim_us = 0;
        std::uint64_t last_frame_id = 0;
        std::shared_ptr<MsgChannel> chan;
        std::atomic<bool> dead{false};

        std::mutex cmd_mu;
        std::optional<ControlCmdMsg> pending_cmd;

        // render handoff: latest-wins snapshot slot
        std::mutex render_mu;
        std::shared_ptr<const std::vector<EntitySnapshot>> pending_snapshot;
        std::uint64_t pending_sim_time_us = 0;
        bool render_queued = false;

        // writer handoff: ordered acks + latest-wins frame
        std::mutex write_mu;
        std::condition_variable write_cv;
        std::deque<std::vector<std::uint8_t>> ack_queue;
        std::optional<std::vector<std::uint8_t>> pending_frame;
        bool writer_stop = false;

        std::thread reader;
        std::thread writer;

        std::atomic<std::uint64_t> frames_sent{0};
        std::atomic<std::uint64_t> frames_in_window{0};
        std::atomic<std::uint64_t> frames_shed{0};
        std::atomic<std::uint64_t> cmds_accepted{0};
        std::atomic<std::uint64_t> cmds_rejected{0};
        std::atomic<std::uint64_t> cmds_overwritten{0};
    };

    std::uint32_t clamp_fps(std::uint32_t fps) const {
        const std::uint32_t max_fps = std::max(1u, scenario_.tick_rate_hz / 2);
        return std::clamp(fps, 1u, max_fps);
    }

    // --- sim-thread helpers -------------------------------------------

    void schedule_due_frames() {
        std::shared_ptr<const std::vector<EntitySnapshot>> snapshot;
        const std::uint64_t now_sim = world_->sim_time_us();
        std::lock_guard<std::mutex> lock(sessions_mu_);
        for (auto& s : sessions_) {
            if (s->dead) continue;
            if (now_sim < s->next_frame_sim_us) continue;
            if (!snapshot)
                snapshot = std::make_shared<const std::vector<EntitySnapshot>>(world_->snapshot());
            {
                std::lock_guard<std::mutex> rlock(s->render_mu);
                if (s->pending_snapshot) s->frames_shed++; // replaced before render
                s->pending_snapshot = snapshot;
                s->pending_sim_time_us = now_sim;
                if (!s->render_queued) {
                    s->render_queued = true;
                    std::lock_guard<std::mutex> qlock(render_q_mu_);
                    render_q_.push_back(s);
                    render_q_cv_.notify_one();
                }
            }
            // catch up without bursting: next slot in the future
            while (s->next_frame_sim_us <= now_sim) s->next_frame_sim_us += s->frame_interval_us;
        }
    }

    void publish_ground_truth(const std::vector<EntityState>& states) {
        {
            std::lock_guard<std::mutex> lock(stats_mu_);
            ++stats_.gt_batches;
        }
        if (cfg_.detector_addr.empty()) return;
        std::lock_guard<std::mutex> lock(gt_q_mu_);
        if (gt_q_.size() >= 1024) {
            gt_q_.pop_front(); // drop-oldest under backpressure
            std::lock_guard<std::mutex> slock(stats_mu_);
            ++stats_.gt_dropped;
        }
        gt_q_.push_back(encode_state_batch(states));
        gt_q_cv_.notify_one();
    }

    // --- render worker -------------------------------------------------

    void render_loop() {
        const auto cost_us = static_cast<std::uint64_t>(cfg_.render_cost_ms * 1000.0);
        std::uint64_t slot_end = 0;
        while (!stopping_) {
            std::shared_ptr<Session> session;
            {
                std::unique_lock<std::mutex> lock(render_q_mu_);
                render_q_cv_.wait_for(lock, std::chrono::milliseconds(50),
                                      [this] { return !render_q_.empty() || stopping_.load(); });
                if (stopping_) return;
                if (render_q_.empty()) continue;
                session = render_q_.front();
                render_q_.pop_front();
            }

            std::shared_ptr<const std::vector<EntitySnapshot>> snapshot;
            std::uint64_t sim_time_us = 0;
            {
                std::lock_guard<std::mutex> rlock(session->render_mu);
                snapshot = std::move(session->pending_snapshot);
                session->pending_snapshot.reset();
                sim_time_us = session->pending_sim_time_us;
                session->render_queued = false;
            }
            if (!snapshot || session->dead) continue;

            if (cost_us > 0) {
                // absolute slot schedule: long-run rate is exactly 1/cost
                slot_end = std::max(slot_end + cost_us, mono_now_us() + cost_us);
                if (cfg_.render_burn)
                    burn_until_us(slot_end);
                else
                    sleep_until_us(slot_end);
            }

            const EntityState* vehicle = nullptr;
            for (const auto& e : *snapshot)
                if (e.state.entity_id == session->entity_id) vehicle = &e.state;
            if (!vehicle) continue;

            SensorFrameMsg frame;
            frame.frame_id = ++session->last_frame_id;
            frame.sim_time_us = sim_time_us;
            frame.camera = camera_pose_for(scenario_.camera, *vehicle);
            frame.annotations =
                render_annotations(scenario_.camera, frame.camera, *snapshot, session->entity_id);
            frame.padding_len = cfg_.padding ? kFramePaddingBytes : 0;
            frame.t_render_us = mono_now_us();

            auto payload = encode_sensor_frame(frame);
            auto framed = frame_message(MsgType::SensorFrame, payload);
            {
                std::lock_guard<std::mutex> wlock(session->write_mu);
                if (session->pending_frame) session->frames_shed++; // replaced before send
                session->pending_frame = std::move(framed);
            }
            session->write_cv.notify_one();
        }
    }

    // --- per-session I/O ------------------------------------------------

    void accept_loop() {
        while (!stopping_) {
            auto stream = listener_->accept(200);
            if (!stream) continue;
            auto chan = std::make_shared<MsgChannel>(std::move(*stream));
            std::lock_guard<std::mutex> lock(handshake_mu_);
            handshake_threads_.emplace_back([this, chan] { handshake(chan); });
        }
    }

    void handshake(std::shared_ptr<MsgChannel> chan) {
        auto msg = chan->recv(5000);
        if (!msg || msg->type != MsgType::Hello) return;
        HelloMsg hello;
        try {
            hello = decode_hello(msg->payload);
        } catch (const ProtoError&) {
            return;
        }
        if (hello.role != HelloRole::Client) return;

        auto session = std::make_shared<Session>();
        HelloAck ack;
        {
            std::lock_guard<std::mutex> lock(sessions_mu_);
            std::uint32_t entity_id = 0;
            if (hello.entity_id != 0 && free_entities_.count(hello.entity_id)) {
                entity_id = hello.entity_id;
            } else if (hello.entity_id == 0 && !free_entities_.empty()) {
                entity_id = *free_entities_.begin();
            }
            if (entity_id == 0) {
                ack.status = 1; // no free client-controlled entity
                chan->send(MsgType::Ack, encode_hello_ack(ack));
                return;
            }
            free_entities_.erase(entity_id);
            session->entity_id = entity_id;
            session->client_id = hello.client_id != 0 ? hello.client_id : next_client_id_++;
            session->fps = hello.requested_fps != 0 ? clamp_fps(hello.requested_fps) : cfg_.default_fps;
            session->frame_interval_us = 1000000ull / session->fps;
            session->next_frame_sim_us = sim_time_pub_.load();
            session->chan = chan;
        }

        ack.status = 0;
        ack.client_id = session->client_id;
        ack.entity_id = session->entity_id;
        ack.fps = static_cast<std::uint16_t>(session->fps);
        ack.tick_rate_hz = scenario_.tick_rate_hz;
        ack.padding_enabled = cfg_.padding ? 1 : 0;
        ack.image_width_px = static_cast<std::uint16_t>(scenario_.camera.image_width_px);
        ack.image_height_px = static_cast<std::uint16_t>(scenario_.camera.image_height_px);
        ack.hfov_rad = scenario_.camera.hfov_rad;
        ack.mount = scenario_.camera.mount;
        ack.mount_yaw_rad = scenario_.camera.mount_yaw_rad;
        ack.height_vehicle = scenario_.heights.vehicle;
        ack.height_pedestrian = scenario_.heights.pedestrian;
        ack.height_static = scenario_.heights.static_obstacle;
        if (!chan->send(MsgType::Ack, encode_hello_ack(ack))) return;

        session->reader = std::thread([this, session] { session_reader(session); });
        session->writer = std::thread([this, session] { session_writer(session); });
        std::lock_guard<std::mutex> lock(sessions_mu_);
        sessions_.push_back(session);
    }

    void session_reader(std::shared_ptr<Session> session) {
        while (!stopping_ && !session->dead) {
            auto msg = session->chan->recv(200);
            if (!msg) {
                if (session->chan->closed()) break;
                continue;
            }
            if (msg->type == MsgType::Bye) break;
            if (msg->type != MsgType::ControlCmd) continue;
            ControlCmdMsg cmd;
            bool ok = true;
            try {
                cmd = decode_control_cmd(msg->payload);
            } catch (const ProtoError&) {
                ok = false;
            }
            ok = ok && cmd.throttle >= 0.0f && cmd.throttle <= 1.0f && cmd.brake >= 0.0f &&
                 cmd.brake <= 1.0f && std::isfinite(cmd.steering) &&
                 std::fabs(cmd.steering) <= 3.1415927f &&
                 !(cmd.throttle > 0.5f && cmd.brake > 0.5f);
            ControlAck ack;
            ack.frame_id_ref = cmd.frame_id_ref;
            ack.status = ok ? 0 : 1;
            if (ok) {
                std::lock_guard<std::mutex> lock(session->cmd_mu);
                if (session->pending_cmd) session->cmds_overwritten++; // latest wins
                session->pending_cmd = cmd;
                session->cmds_accepted++;
            } else {
                session->cmds_rejected++; // previous command remains in force
            }
            {
                std::lock_guard<std::mutex> lock(session->write_mu);
                session->ack_queue.push_back(encode_control_ack(ack));
            }
            session->write_cv.notify_one();
        }
        retire_session(*session);
    }

    void session_writer(std::shared_ptr<Session> session) {
        for (;;) {
            std::vector<std::uint8_t> ack;
            std::optional<std::vector<std::uint8_t>> frame;
            {
                std::unique_lock<std::mutex> lock(session->write_mu);
                session->write_cv.wait(lock, [&] {
                    return session->writer_stop || !session->ack_queue.empty() ||
                           session->pending_frame.has_value();
                });
                if (session->writer_stop && session->ack_queue.empty() &&
                    !session->pending_frame)
                    return;
                if (!session->ack_queue.empty()) {
                    ack = std::move(session->ack_queue.front());
                    session->ack_queue.pop_front();
                } else if (session->pending_frame) {
                    frame = std::move(session->pending_frame);
                    session->pending_frame.reset();
                }
            }
            if (!ack.empty()) {
                if (!session->chan->send(MsgType::Ack, ack)) session->dead = true;
            } else if (frame) {
                // pre-framed bytes; send directly
                if (!session->chan->send_raw(*frame)) session->dead = true;
                else {
                    session->frames_sent++;
                    if (mono_now_us() >=
                        start_wall_us_ + static_cast<std::uint64_t>(cfg_.warmup_s * 1e6))
                        session->frames_in_window++;
                }
            }
            if (session->dead) return;
        }
    }

    void retire_session(Session& session) {
        session.dead = true;
        std::lock_guard<std::mutex> lock(sessions_mu_);
        free_entities_.insert(session.entity_id); // vehicle becomes assignable again
    }

    // --- detector channel -------------------------------------------------

    void detector_loop() {
        const Endpoint ep = parse_endpoint(cfg_.detector_addr);
        std::unique_ptr<MsgChannel> chan;
        std::uint64_t next_connect_us = 0;
        for (;;) {
            if (stopping_ && (!chan || !pending_gt())) break;
            if (!chan) {
                const auto now = mono_now_us();
                if (now < next_connect_us) {
                    sleep_for_us(std::min<std::uint64_t>(next_connect_us - now, 50000));
                    continue;
                }
                auto stream = TcpStream::connect(ep, 1000);
                next_connect_us = mono_now_us() + 2000000; // retry every 2 s
                if (!stream) continue;
                chan = std::make_unique<MsgChannel>(std::move(*stream));
                HelloMsg hello;
                hello.role = HelloRole::GtPush;
                hello.scenario_name = scenario_.name;
                hello.seed = scenario_.seed;
                hello.tick_rate_hz = scenario_.tick_rate_hz;
                for (const auto& e : scenario_.entities) {
                    ManifestEntry m;
                    m.entity_id = e.initial.entity_id;
                    m.cls = e.kind.cls;
                    m.extent_x = e.kind.extent_x;
                    m.extent_y = e.kind.extent_y;
                    m.real_height = e.kind.real_height;
                    m.client_controlled = e.script.type == ScriptType::ClientControlled ? 1 : 0;
                    hello.manifest.push_back(m);
                }
                if (!chan->send(MsgType::Hello, encode_hello(hello))) {
                    chan.reset();
                    continue;
                }
            }
            std::vector<std::uint8_t> batch;
            {
                std::unique_lock<std::mutex> lock(gt_q_mu_);
                gt_q_cv_.wait_for(lock, std::chrono::milliseconds(100), [this] {
                    return !gt_q_.empty() || stopping_.load();
                });
                if (gt_q_.empty()) {
                    if (stopping_) break;
                    continue;
                }
                batch = std::move(gt_q_.front());
                gt_q_.pop_front();
            }
            if (!chan->send(MsgType::StateUpdateBatch, batch)) chan.reset();
        }
        if (chan) chan->send(MsgType::Bye, std::vector<std::uint8_t>{});
    }

    bool pending_gt() {
        std::lock_guard<std::mutex> lock(gt_q_mu_);
        return !gt_q_.empty();
    }

    void shutdown_network() {
        if (net_down_.exchange(true)) return;
        stopping_ = true;
        if (listener_) listener_->close();
        if (accept_thread_.joinable()) accept_thread_.join();
        {
            std::lock_guard<std::mutex> lock(handshake_mu_);
            for (auto& t : handshake_threads_)
                if (t.joinable()) t.join();
        }
        render_q_cv_.notify_all();
        if (render_thread_.joinable()) render_thread_.join();
        gt_q_cv_.notify_all();
        if (detector_thread_.joinable()) detector_thread_.join();
        std::vector<std::shared_ptr<Session>> sessions;
        {
            std::lock_guard<std::mutex> lock(sessions_mu_);
            sessions = sessions_;
        }
        for (auto& s : sessions) {
            s->chan->send(MsgType::Bye, std::vector<std::uint8_t>{});
            {
                std::lock_guard<std::mutex> lock(s->write_mu);
                s->writer_stop = true;
            }
            s->write_cv.notify_all();
            s->chan->close();
            if (s->reader.joinable()) s->reader.join();
            if (s->writer.joinable()) s->writer.join();
        }
    }

    ServerConfig cfg_;
    Scenario scenario_;
    std::unique_ptr<WorldState> world_;
    std::unique_ptr<TcpListener> listener_;

    std::thread accept_thread_;
    std::thread render_thread_;
    std::thread detector_thread_;
    std::mutex handshake_mu_;
    std::vector<std::thread> handshake_threads_;
    std::atomic<bool> stopping_{false};
    std::atomic<bool> net_down_{false};

    mutable std::mutex sessions_mu_;
    std::vector<std::shared_ptr<Session>> sessions_;
    std::set<std::uint32_t> free_entities_;
    std::uint32_t next_client_id_ = 1;

    std::mutex render_q_mu_;
    std::condition_variable render_q_cv_;
    std::deque<std::shared_ptr<Session>> render_q_;

    std::mutex gt_q_mu_;
    std::condition_variable gt_q_cv_;
    std::deque<std::vector<std::uint8_t>> gt_q_;

    std::uint64_t start_wall_us_ = 0;
    std::atomic<std::uint64_t> sim_time_pub_{0};
    mutable std::mutex stats_mu_;
    ServerStats stats_;
    std::vector<double> tick_period_samples_;
};

} // namespace ccsim
