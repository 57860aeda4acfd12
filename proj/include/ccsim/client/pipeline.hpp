/**
 * The example AI pipeline: object position estimation from detections and
 * the decision-logic state machine that derives SafeToDrive / SlowDown /
 * Stop and the control command.
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "ccsim/geom/camera.hpp"
#include "ccsim/proto/messages.hpp"

namespace ccsim {

struct DrivingParams {
    float cruise_speed = 8.0f;       // m/s
    float d_slow = 15.0f;            // m, SlowDown threshold
    float d_stop = 5.0f;             // m, Stop threshold
    float corridor_halfwidth = 2.0f; // m
    float lookahead_m = 10.0f;       // forwarded to the steering model host
    float min_confidence = 0.3f;
    float kp_speed = 0.5f;  // throttle gain toward cruise
    float kb_brake = 0.5f;  // brake gain above the allowed speed
    int stale_budget = 3;   // frames served from stale perception before fail-safe

    bool valid() const {
        return d_stop < d_slow && d_stop > 0.0f && cruise_speed > 0.0f &&
               corridor_halfwidth > 0.0f;
    }
};

struct ObjectEstimate {
    EntityClass cls = EntityClass::Vehicle;
    float distance_m = 0.0f; // forward range from the camera
    float bearing_rad = 0.0f;
    Vec3 world_pos;
    float confidence = 0.0f;
    std::uint64_t source_frame_id = 0;
};

struct PerceiveOutcome {
    std::vector<ObjectEstimate> estimates;
    int unresolvable = 0; // boxes too small to range
    int low_confidence = 0;
};

// Object position estimation: inverse-project each detection that clears
// the confidence threshold, using the per-class height table.
inline PerceiveOutcome perceive(const SensorFrameMsg& frame, const std::vector<Detection>& detections,
                                const CameraModel& cam, const ClassHeights& heights,
                                const DrivingParams& params) {
    PerceiveOutcome out;
    for (const auto& det : detections) {
        if (det.confidence < params.min_confidence) {
            ++out.low_confidence;
            continue;
        }
        auto rel = estimate_relative_position(cam, det, heights.of(det.cls));
        if (!rel) {
            ++out.unresolvable;
            continue;
        }
        ObjectEstimate est;
        est.cls = rel->cls;
        est.distance_m = rel->distance_m;
        est.bearing_rad = rel->bearing_rad;
        est.world_pos = world_from_estimate(frame.camera, *rel);
        est.confidence = rel->confidence;
        est.source_frame_id = frame.frame_id;
        out.estimates.push_back(est);
    }
    return out;
}

// Key/value params file for the client tool.
inline DrivingParams parse_driving_params(const std::string& text) {
    DrivingParams p;
    std::istringstream in(text);
    std::string raw;
    int line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        std::string line = raw;
        if (auto hash = line.find('#'); hash != std::string::npos) line = line.substr(0, hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("params:" + std::to_string(line_no) + ": expected key = value");
        const std::string key = detail::trim(line.substr(0, eq));
        const double val = detail::parse_num(detail::trim(line.substr(eq + 1)), line_no);
        if (key == "cruise_speed") p.cruise_speed = static_cast<float>(val);
        else if (key == "d_slow") p.d_slow = static_cast<float>(val);
        else if (key == "d_stop") p.d_stop = static_cast<float>(val);
        else if (key == "corridor_halfwidth") p.corridor_halfwidth = static_cast<float>(val);
        else if (key == "lookahead_m") p.lookahead_m = static_cast<float>(val);
        else if (key == "min_confidence") p.min_confidence = static_cast<float>(val);
        else if (key == "stale_budget") p.stale_budget = static_cast<int>(val);
        else
            throw std::runtime_error("params:" + std::to_string(line_no) + ": unknown key '" + key + "'");
    }
    if (!p.valid()) throw std::runtime_error("params: invariant d_stop < d_slow violated");
    return p;
}

struct Decision {
    DerivedState state = DerivedState::SafeToDrive;
    ControlCmdMsg cmd;
    float nearest_in_corridor_m = -1.0f; // negative = nothing in the corridor
};

// Nearest estimate whose lateral offset lies inside the driving corridor.
inline std::optional<float> nearest_corridor_distance(const std::vector<ObjectEstimate>& estimates,
                                                      float corridor_halfwidth) {
    std::optional<float> nearest;
    for (const auto& e : estimates) {
        const float lateral = e.distance_m * std::tan(e.bearing_rad);
        if (std::fabs(lateral) >= corridor_halfwidth) continue;
        if (!nearest || e.distance_m < *nearest) nearest = e.distance_m;
    }
    return nearest;
}

// Decision logic. Speed tracking aims at an allowed speed that ramps
// linearly from cruise at d_slow down to zero at d_stop, so commanded
// throttle is continuous across the SlowDown boundary and the vehicle
// brakes early enough to stop short of the obstacle. Throttle and brake
// are complementary (never both nonzero). In Stop the steering is held.
inline Decision decide(const std::vector<ObjectEstimate>& estimates, float steering_angle,
                       float current_speed, float last_steering, const DrivingParams& params) {
    Decision d;
    const auto nearest = nearest_corridor_distance(estimates, params.corridor_halfwidth);
    if (nearest) d.nearest_in_corridor_m = *nearest;

    float scale = 1.0f;
    if (nearest) {
        if (*nearest < params.d_stop) {
            d.state = DerivedState::Stop;
            d.cmd.brake = 1.0f;
            d.cmd.throttle = 0.0f;
            d.cmd.steering = last_steering;
            return d;
        }
        if (*nearest < params.d_slow) {
            d.state = DerivedState::SlowDown;
            scale = (*nearest - params.d_stop) / (params.d_slow - params.d_stop);
        }
    }

    const float allowed = params.cruise_speed * scale;
    if (current_speed > allowed + 0.1f) {
        d.cmd.brake = std::clamp(params.kb_brake * (current_speed - allowed), 0.0f, 1.0f);
        d.cmd.throttle = 0.0f;
    } else {
        d.cmd.throttle =
            std::clamp(params.kp_speed * (params.cruise_speed - current_speed), 0.0f, 1.0f) * scale;
        d.cmd.brake = 0.0f;
    }
    d.cmd.steering = steering_angle;
    return d;
}

// Report assembly; t_estimate is stamped by the caller when the decision
// completed.
inline EstimateReportMsg make_report(std::uint32_t client_id, std::uint32_t entity_id,
                                     const SensorFrameMsg& frame, DerivedState state,
                                     const std::vector<ObjectEstimate>& estimates,
                                     std::uint64_t t_estimate_us) {
    EstimateReportMsg report;
    report.client_id = client_id;
    report.entity_id = entity_id;
    report.frame_id_ref = frame.frame_id;
    report.sim_time_us = frame.sim_time_us;
    report.derived_state = state;
    report.t_render_us = frame.t_render_us;
    report.t_estimate_us = t_estimate_us;
    for (const auto& e : estimates)
        report.estimates.push_back(
            {e.cls, e.distance_m, e.bearing_rad, e.world_pos, e.confidence});
    return report;
}

} // namespace ccsim
