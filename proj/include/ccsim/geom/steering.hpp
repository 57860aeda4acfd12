/**
 * Pure-pursuit steering toward the road centerline. Stands in for the
 * steering predictor model: given the vehicle pose it returns the angle
 * that keeps the vehicle on the road polyline.
 */
#pragma once

#include <cmath>
#include <vector>

#include "ccsim/world/types.hpp"

namespace ccsim {

struct SteeringParams {
    double lookahead_m = 10.0;
    double wheelbase_m = 2.5; // matches VehicleDynamics::wheelbase
    double max_steer_rad = 0.6;
    double recovery_distance_m = 10.0; // beyond this, saturate toward the road
};

struct RoadProjection {
    double arclength = 0.0;       // along the polyline, of the closest point
    double lateral = 0.0;         // signed: positive when vehicle is right of road
    double distance = 0.0;        // unsigned distance to the closest point
    Vec3 closest{};
};

// Closest point on the polyline, with its arclength and the vehicle's
// signed lateral offset relative to the local road direction.
inline RoadProjection project_on_road(const std::vector<Vec3>& road, Vec3 p) {
    RoadProjection best;
    best.distance = 1e30;
    double s_acc = 0.0;
    for (size_t i = 0; i + 1 < road.size(); ++i) {
        const Vec3 a = road[i];
        const Vec3 b = road[i + 1];
        const float seg_len = planar_dist(a, b);
        if (seg_len <= 1e-9f) continue;
        const float t = std::clamp(((p.x - a.x) * (b.x - a.x) + (p.y - a.y) * (b.y - a.y)) /
                                       (seg_len * seg_len),
                                   0.0f, 1.0f);
        const Vec3 c = a + (b - a) * t;
        const double d = planar_dist(p, c);
        if (d < best.distance) {
            best.distance = d;
            best.arclength = s_acc + t * seg_len;
            best.closest = c;
            const Vec3 seg_dir = normalized(b - a);
            best.lateral = dot(p - c, right_of(seg_dir));
        }
        s_acc += seg_len;
    }
    return best;
}

inline double road_length(const std::vector<Vec3>& road) {
    double s = 0.0;
    for (size_t i = 0; i + 1 < road.size(); ++i) s += planar_dist(road[i], road[i + 1]);
    return s;
}

inline Vec3 point_at_arclength(const std::vector<Vec3>& road, double s) {
    if (s <= 0.0) return road.front();
    for (size_t i = 0; i + 1 < road.size(); ++i) {
        const double seg_len = planar_dist(road[i], road[i + 1]);
        if (s <= seg_len && seg_len > 0.0)
            return road[i] + (road[i + 1] - road[i]) * static_cast<float>(s / seg_len);
        s -= seg_len;
    }
    return road.back();
}

// Pure-pursuit angle toward the centerline point `lookahead_m` ahead of the
// vehicle's closest centerline point: atan(2 * wheelbase * y_r / L^2) where
// y_r is the target's lateral offset in the vehicle frame and L the chord
// length. Positive output steers right. A vehicle farther than
// recovery_distance from the road gets the saturated angle toward it.
inline double steering_oracle(Vec3 position, Vec3 heading, const std::vector<Vec3>& road,
                              const SteeringParams& params = {}) {
    const RoadProjection proj = project_on_road(road, position);
    const Vec3 right = right_of(heading);

    if (proj.distance > params.recovery_distance_m) {
        const Vec3 toward = proj.closest - position;
        return dot(toward, right) >= 0.0f ? params.max_steer_rad : -params.max_steer_rad;
    }

    const Vec3 target = point_at_arclength(road, proj.arclength + params.lookahead_m);
    const Vec3 rel = target - position;
    const double fwd = dot(rel, heading);
    const double lat = dot(rel, right);
    const double chord_sq = fwd * fwd + lat * lat;
    if (chord_sq < 1e-9) return 0.0;
    const double angle = std::atan(2.0 * params.wheelbase_m * lat / chord_sq);
    return std::clamp(angle, -params.max_steer_rad, params.max_steer_rad);
}

} // namespace ccsim
