/**
 * Emulated model serving. Each registered model owns a FIFO queue drained
 * by `parallelism` workers; a request occupies a worker for its sampled
 * service latency (slept or burned), which is what makes saturation and
 * queueing behavior real. Results come from the geometric oracles
 * degraded by the model's noise spec, keyed by frame id so they are
 * independent of arrival order.
 */
#pragma once

#include <atomic>
#include <condition_variable>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "ccsim/core/time.hpp"
#include "ccsim/geom/noise.hpp"
#include "ccsim/geom/steering.hpp"
#include "ccsim/infer/spec.hpp"
#include "ccsim/proto/messages.hpp"

namespace ccsim {

// Static context shared by all models: the world the oracles consult.
struct InferenceContext {
    std::vector<Vec3> road;
    CameraModel camera;
    std::uint64_t seed = 0;
    SteeringParams steering;
    bool cpu_burn = false;
};

struct ModelStats {
    std::uint64_t served = 0;
    std::uint64_t overloaded = 0;
};

class InferenceEngine {
public:
    using Responder = std::function<void(const InferResponseMsg&)>;

    explicit InferenceEngine(InferenceContext ctx) : ctx_(std::move(ctx)) {}

    ~InferenceEngine() { shutdown(); }

    // Registers or replaces a model. Replacing bumps the version; requests
    // already accepted finish on the spec they were accepted under.
    std::uint32_t register_model(ModelSpec spec) {
        spec.validate();
        std::lock_guard<std::mutex> lock(mu_);
        const std::uint32_t version = ++versions_[spec.name];
        auto queue = std::make_shared<ModelQueue>(spec, version, ctx_);
        auto it = models_.find(spec.name);
        if (it != models_.end()) {
            it->second->stop_accepting();
            retired_.push_back(it->second);
            it->second = queue;
        } else {
            models_.emplace(spec.name, queue);
        }
        return version;
    }

    // Hands the request to the named model. The responder runs on a worker
    // thread (or inline for immediate rejections).
    void submit(const InferRequestMsg& req, Responder respond) {
        std::shared_ptr<ModelQueue> queue;
        {
            std::lock_guard<std::mutex> lock(mu_);
            auto it = models_.find(req.model_name);
            if (it != models_.end()) queue = it->second;
        }
        if (!queue) {
            InferResponseMsg resp;
            resp.frame_id = req.frame_id;
            resp.status = InferStatus::NoModel;
            respond(resp);
            return;
        }
        queue->submit(req, std::move(respond));
    }

    std::unordered_map<std::string, ModelStats> stats() const {
        std::lock_guard<std::mutex> lock(mu_);
        std::unordered_map<std::string, ModelStats> out;
        for (const auto& [name, q] : models_) out[name] = q->stats();
        return out;
    }

    std::vector<std::string> model_names() const {
        std::lock_guard<std::mutex> lock(mu_);
        std::vector<std::string> out;
        for (const auto& [name, q] : models_) out.push_back(name);
        return out;
    }

    void shutdown() {
        std::lock_guard<std::mutex> lock(mu_);
        for (auto& [name, q] : models_) q->stop_accepting();
        for (auto& q : retired_) q->join();
        for (auto& [name, q] : models_) q->join();
        retired_.clear();
        models_.clear();
    }

private:
    class ModelQueue {
    public:
        ModelQueue(ModelSpec spec, std::uint32_t version, const InferenceContext& ctx)
            : spec_(std::move(spec)), version_(version), ctx_(ctx) {
            workers_.reserve(spec_.parallelism);
            for (std::uint32_t i = 0; i < spec_.parallelism; ++i)
                workers_.emplace_back([this] { worker_loop(); });
        }

        ~ModelQueue() { join(); }

        void submit(const InferRequestMsg& req, Responder respond) {
            Job job;
            job.req = req;
            job.respond = std::move(respond);
            job.t_arrival_us = mono_now_us();
            {
                std::unique_lock<std::mutex> lock(mu_);
                if (!accepting_ || queue_.size() >= spec_.queue_capacity) {
                    lock.unlock();
                    InferResponseMsg resp;
                    resp.frame_id = req.frame_id;
                    resp.status = InferStatus::Overload;
                    resp.model_version = version_;
                    resp.kind = spec_.kind;
                    ++stats_overloaded_;
                    job.respond(resp);
                    return;
                }
                queue_.push_back(std::move(job));
            }
            cv_.notify_one();
        }

        void stop_accepting() {
            {
                std::lock_guard<std::mutex> lock(mu_);
                accepting_ = false;
                stopping_ = true;
            }
            cv_.notify_all();
        }

        void join() {
            stop_accepting();
            for (auto& w : workers_)
                if (w.joinable()) w.join();
        }

        ModelStats stats() const {
            return {stats_served_.load(), stats_overloaded_.load()};
        }

    private:
        struct Job {
            InferRequestMsg req;
            Responder respond;
            std::uint64_t t_arrival_us = 0;
        };

        void worker_loop() {
            for (;;) {
                Job job;
                {
                    std::unique_lock<std::mutex> lock(mu_);
                    cv_.wait(lock, [this] { return stopping_ || !queue_.empty(); });
                    if (queue_.empty()) return; // stopping and drained
                    job = std::move(queue_.front());
                    queue_.pop_front();
                }
                serve(job);
            }
        }

        void serve(const Job& job) {
            const std::uint64_t t_start = mono_now_us();
            InferResponseMsg resp;
            resp.frame_id = job.req.frame_id;
            resp.status = InferStatus::Ok;
            resp.model_version = version_;
            resp.kind = spec_.kind;
            resp.t_queue_us = t_start - job.t_arrival_us;

            if (spec_.kind == ModelKind::ObjectDetector) {
                KeyedRng rng(ctx_.seed, "noise/" + spec_.name, job.req.frame_id);
                resp.detections =
                    apply_noise(rng, job.req.annotations, spec_.noise,
                                static_cast<double>(job.req.sim_time_us) * 1e-6,
                                ctx_.camera.image_width_px, ctx_.camera.image_height_px);
            } else {
                double angle = steering_oracle(job.req.camera.position, job.req.camera.heading,
                                               ctx_.road, ctx_.steering);
                if (spec_.steering_noise_std > 0.0) {
                    KeyedRng rng(ctx_.seed, "noise/" + spec_.name, job.req.frame_id);
                    angle += rng.normal(0.0, spec_.steering_noise_std);
                }
                resp.steering_rad = static_cast<float>(angle);
            }

            KeyedRng lat_rng(ctx_.seed, "latency/" + spec_.name, job.req.frame_id);
            const double latency_ms = spec_.latency.sample_ms(lat_rng);
            const auto deadline = t_start + static_cast<std::uint64_t>(latency_ms * 1000.0);
            if (ctx_.cpu_burn)
                burn_until_us(deadline);
            else
                sleep_until_us(deadline);

            resp.t_service_us = mono_now_us() - t_start;
            ++stats_served_;
            job.respond(resp);
        }

        ModelSpec spec_;
        std::uint32_t version_;
        const InferenceContext& ctx_;
        std::mutex mu_;
        std::condition_variable cv_;
        std::deque<Job> queue_;
        bool accepting_ = true;
        bool stopping_ = false;
        std::vector<std::thread> workers_;
        std::atomic<std::uint64_t> stats_served_{0};
        std::atomic<std::uint64_t> stats_overloaded_{0};
    };

    InferenceContext ctx_;
    mutable std::mutex mu_;
    std::unordered_map<std::string, std::shared_ptr<ModelQueue>> models_;
    std::vector<std::shared_ptr<ModelQueue>> retired_;
    std::unordered_map<std::string, std::uint32_t> versions_;
};

} // namespace ccsim
