/**
 * Network front for the inference engine: accepts connections, decodes
 * InferRequest frames, and answers from model worker threads over the
 * same connection.
 */
#pragma once

#include <atomic>
#include <memory>
#include <thread>
#include <vector>

#include "ccsim/infer/engine.hpp"
#include "ccsim/net/channel.hpp"

namespace ccsim {

struct InferenceServiceConfig {
    Endpoint listen{"127.0.0.1", 0};
    std::vector<ModelSpec> models;
    InferenceContext context;
};

class InferenceService {
public:
    explicit InferenceService(InferenceServiceConfig cfg)
        : cfg_(std::move(cfg)), engine_(cfg_.context) {
        for (const auto& spec : cfg_.models) engine_.register_model(spec);
    }

    ~InferenceService() { stop(); }

    // Binds and starts serving. Returns the bound endpoint.
    Endpoint start() {
        auto listener = TcpListener::bind(cfg_.listen);
        if (!listener) throw std::runtime_error("inference: cannot bind " + cfg_.listen.str());
        bound_ = listener->bound();
        listener_ = std::make_unique<TcpListener>(std::move(*listener));
        accept_thread_ = std::thread([this] { accept_loop(); });
        return bound_;
    }

    const Endpoint& bound() const { return bound_; }
    InferenceEngine& engine() { return engine_; }

    void stop() {
        if (stopping_.exchange(true)) return;
        if (listener_) listener_->close();
        if (accept_thread_.joinable()) accept_thread_.join();
        for (auto& t : conn_threads_)
            if (t.joinable()) t.join();
        engine_.shutdown();
    }

private:
    void accept_loop() {
        while (!stopping_) {
            auto stream = listener_->accept(200);
            if (!stream) continue;
            auto chan = std::make_shared<MsgChannel>(std::move(*stream));
            conn_threads_.emplace_back([this, chan] { conn_loop(chan); });
        }
    }

    void conn_loop(std::shared_ptr<MsgChannel> chan) {
        while (!stopping_) {
            auto msg = chan->recv(200);
            if (!msg) {
                if (chan->closed()) return;
                continue;
            }
            if (msg->type == MsgType::Bye) return;
            if (msg->type == MsgType::Hello) {
                chan->send(MsgType::Ack, std::vector<std::uint8_t>{});
                continue;
            }
            if (msg->type != MsgType::InferRequest) continue; // ignore strays
            InferRequestMsg req;
            try {
                req = decode_infer_request(msg->payload);
            } catch (const ProtoError&) {
                continue; // malformed request dropped
            }
            engine_.submit(req, [chan](const InferResponseMsg& resp) {
                chan->send(MsgType::InferResponse, encode_infer_response(resp));
            });
        }
    }

    InferenceServiceConfig cfg_;
    InferenceEngine engine_;
    std::unique_ptr<TcpListener> listener_;
    Endpoint bound_;
    std::thread accept_thread_;
    std::vector<std::thread> conn_threads_;
    std::atomic<bool> stopping_{false};
};

} // namespace ccsim
