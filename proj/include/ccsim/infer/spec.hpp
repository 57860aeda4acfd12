/**
 * Model specifications for the emulated serving layer: which oracle a
 * model wraps, how it is degraded, its service-latency distribution, and
 * its concurrency envelope.
 */
#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "ccsim/core/rng.hpp"
#include "ccsim/proto/messages.hpp"
#include "ccsim/world/scenario.hpp"

namespace ccsim {

enum class LatencyKind : std::uint8_t { Constant = 0, Uniform = 1, Lognormal = 2 };

struct LatencyDist {
    LatencyKind kind = LatencyKind::Constant;
    double a_ms = 0.0;     // constant c | uniform lo | lognormal mu (of ln(ms))
    double b_ms = 0.0;     // uniform hi | lognormal sigma
    double shift_ms = 0.0; // lognormal offset

    double sample_ms(KeyedRng& rng) const {
        switch (kind) {
            case LatencyKind::Constant: return a_ms;
            case LatencyKind::Uniform: return rng.uniform(a_ms, b_ms);
            case LatencyKind::Lognormal: return shift_ms + rng.lognormal(a_ms, b_ms);
        }
        return 0.0;
    }

    double mean_ms() const {
        switch (kind) {
            case LatencyKind::Constant: return a_ms;
            case LatencyKind::Uniform: return (a_ms + b_ms) / 2.0;
            case LatencyKind::Lognormal: return shift_ms + std::exp(a_ms + b_ms * b_ms / 2.0);
        }
        return 0.0;
    }

    static LatencyDist constant(double c_ms) { return {LatencyKind::Constant, c_ms, 0.0, 0.0}; }
    static LatencyDist uniform(double lo_ms, double hi_ms) {
        return {LatencyKind::Uniform, lo_ms, hi_ms, 0.0};
    }
    static LatencyDist lognormal(double mu, double sigma, double shift_ms = 0.0) {
        return {LatencyKind::Lognormal, mu, sigma, shift_ms};
    }
    // lognormal with a target mean in ms
    static LatencyDist lognormal_mean(double mean_ms, double sigma = 0.25) {
        return lognormal(std::log(mean_ms) - sigma * sigma / 2.0, sigma, 0.0);
    }
};

struct ModelSpec {
    std::string name;
    ModelKind kind = ModelKind::ObjectDetector;
    NoiseModel noise;                // ObjectDetector
    double steering_noise_std = 0.0; // SteeringPredictor, radians
    LatencyDist latency;
    std::uint32_t parallelism = 2;
    std::uint32_t queue_capacity = 64;

    void validate() const {
        if (name.empty()) throw std::runtime_error("model spec: empty name");
        if (parallelism < 1) throw std::runtime_error("model spec: parallelism must be >= 1");
        if (latency.kind == LatencyKind::Uniform && latency.b_ms < latency.a_ms)
            throw std::runtime_error("model spec: uniform latency with hi < lo");
        if (latency.a_ms < 0.0 || latency.shift_ms < 0.0)
            throw std::runtime_error("model spec: negative latency");
    }
};

// Paper-style pairing: a heavier object detector and a lighter steering
// model. The means are knobs, not calibrated values.
inline std::vector<ModelSpec> default_model_specs(const NoiseModel& noise) {
    ModelSpec detector;
    detector.name = "detector";
    detector.kind = ModelKind::ObjectDetector;
    detector.noise = noise;
    detector.latency = LatencyDist::lognormal_mean(40.0);
    ModelSpec steering;
    steering.name = "steering";
    steering.kind = ModelKind::SteeringPredictor;
    steering.latency = LatencyDist::lognormal_mean(10.0);
    return {detector, steering};
}

// Model spec file: [model] sections in the scenario file grammar.
inline std::vector<ModelSpec> parse_model_specs(const std::string& text, const NoiseModel& scenario_noise) {
    std::vector<ModelSpec> specs;
    ModelSpec* cur = nullptr;
    std::istringstream in(text);
    std::string raw;
    int line_no = 0;
    auto fail = [&](const std::string& what) {
        throw std::runtime_error("models:" + std::to_string(line_no) + ": " + what);
    };
    while (std::getline(in, raw)) {
        ++line_no;
        std::string line = raw;
        if (auto hash = line.find('#'); hash != std::string::npos) line = line.substr(0, hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        if (line == "[model]") {
            specs.emplace_back();
            cur = &specs.back();
            cur->noise = scenario_noise;
            continue;
        }
        if (!cur) fail("content before [model]");
        const auto eq = line.find('=');
        if (eq == std::string::npos) fail("expected key = value");
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string val = detail::trim(line.substr(eq + 1));
        auto toks = detail::split_ws(val);
        if (key == "name") cur->name = val;
        else if (key == "kind") {
            if (val == "ObjectDetector") cur->kind = ModelKind::ObjectDetector;
            else if (val == "SteeringPredictor") cur->kind = ModelKind::SteeringPredictor;
            else fail("unknown model kind '" + val + "'");
        } else if (key == "latency") {
            if (toks.size() == 2 && toks[0] == "constant")
                cur->latency = LatencyDist::constant(detail::parse_num(toks[1], line_no));
            else if (toks.size() == 3 && toks[0] == "uniform")
                cur->latency = LatencyDist::uniform(detail::parse_num(toks[1], line_no),
                                                    detail::parse_num(toks[2], line_no));
            else if (toks.size() == 4 && toks[0] == "lognormal")
                cur->latency = LatencyDist::lognormal(detail::parse_num(toks[1], line_no),
                                                      detail::parse_num(toks[2], line_no),
                                                      detail::parse_num(toks[3], line_no));
            else fail("latency wants: constant C | uniform A B | lognormal MU SIGMA SHIFT");
        } else if (key == "parallelism") cur->parallelism = static_cast<std::uint32_t>(detail::parse_num(val, line_no));
        else if (key == "queue_capacity") cur->queue_capacity = static_cast<std::uint32_t>(detail::parse_num(val, line_no));
        else if (key == "steering_noise_std") cur->steering_noise_std = detail::parse_num(val, line_no);
        else if (key == "p_miss") cur->noise.p_miss = detail::parse_num(val, line_no);
        else if (key == "p_false") cur->noise.p_false = detail::parse_num(val, line_no);
        else if (key == "box_jitter_px") cur->noise.box_jitter_px = detail::parse_num(val, line_no);
        else if (key == "confidence_noise") cur->noise.confidence_noise = detail::parse_num(val, line_no);
        else fail("unknown model key '" + key + "'");
    }
    for (auto& s : specs) s.validate();
    return specs;
}

inline std::vector<ModelSpec> load_model_specs_file(const std::string& path,
                                                    const NoiseModel& scenario_noise) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open models file '" + path + "'");
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse_model_specs(ss.str(), scenario_noise);
}

} // namespace ccsim
