/**
 * Pinhole projection of world entities to pixel bounding boxes, and the
 * inverse estimation of object range and bearing from a box.
 *
 * Entities are projected as upright billboards through their center axis:
 * the box height is exactly focal_px * real_height / forward_distance, so
 * height-based ranging inverts it exactly. "Distance" throughout means the
 * forward (boresight) range along the camera axis; world positions are
 * reconstructed as distance * heading + distance * tan(bearing) * right.
 * Bearing is 0 straight ahead, positive to the right.
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "ccsim/world/scenario.hpp"
#include "ccsim/world/types.hpp"

namespace ccsim {

struct CameraPose {
    Vec3 position;           // world, z up
    Vec3 heading;            // unit, ground plane
};

// Camera pose for a vehicle state given the mount offset (forward, left, up).
inline CameraPose camera_pose_for(const CameraModel& cam, const EntityState& vehicle) {
    const Vec3 fwd = vehicle.direction;
    const Vec3 left = right_of(fwd) * -1.0f;
    CameraPose pose;
    pose.position = vehicle.position + fwd * cam.mount.x + left * cam.mount.y +
                    Vec3{0.0f, 0.0f, cam.mount.z};
    const float yaw = yaw_from_heading(fwd) + cam.mount_yaw_rad;
    pose.heading = heading_from_yaw(yaw);
    return pose;
}

struct PixelBox {
    float u_min = 0.0f;
    float v_min = 0.0f;
    float w = 0.0f; // b in pixels
    float h = 0.0f;

    float u_center() const { return u_min + w / 2.0f; }
    float area() const { return w * h; }
};

struct ProjectedBox {
    std::uint32_t entity_id = 0;
    EntityClass cls = EntityClass::Vehicle;
    PixelBox box;
    bool truncated = false; // clipped at an image border
    float forward_m = 0.0f; // used for occlusion ordering, not serialized
};

struct Detection {
    EntityClass cls = EntityClass::Vehicle;
    float confidence = 0.0f;
    PixelBox box;
};

struct RelativeEstimate {
    EntityClass cls = EntityClass::Vehicle;
    float distance_m = 0.0f; // forward range along the camera axis
    float bearing_rad = 0.0f;
    float confidence = 0.0f;
};

constexpr float kNearPlaneM = 0.3f;
constexpr float kMinBoxPx = 2.0f; // boxes at or below this are unrangeable

inline std::optional<ProjectedBox> project(const CameraModel& cam, const CameraPose& pose,
                                           const EntityKind& kind, const EntityState& entity) {
    const Vec3 rel = entity.position - pose.position;
    const Vec3 right = right_of(pose.heading);
    const float fwd = rel.x * pose.heading.x + rel.y * pose.heading.y;
    if (fwd <= kNearPlaneM) return std::nullopt;
    const float lat = rel.x * right.x + rel.y * right.y;

    const float f = cam.focal_px();
    const float cx = static_cast<float>(cam.image_width_px) / 2.0f;
    const float cy = static_cast<float>(cam.image_height_px) / 2.0f;

    // Billboard half-width: footprint extents projected on the camera-right axis.
    const float half_w = kind.extent_x * std::fabs(right.x) + kind.extent_y * std::fabs(right.y);
    const float base_z = entity.position.z;
    const float top_z = base_z + kind.real_height;

    float u0 = cx + f * (lat - half_w) / fwd;
    float u1 = cx + f * (lat + half_w) / fwd;
    float v0 = cy + f * (pose.position.z - top_z) / fwd;  // top edge
    float v1 = cy + f * (pose.position.z - base_z) / fwd; // bottom edge

    const float W = static_cast<float>(cam.image_width_px);
    const float H = static_cast<float>(cam.image_height_px);
    const bool truncated = u0 < 0.0f || u1 > W || v0 < 0.0f || v1 > H;
    u0 = std::clamp(u0, 0.0f, W);
    u1 = std::clamp(u1, 0.0f, W);
    v0 = std::clamp(v0, 0.0f, H);
    v1 = std::clamp(v1, 0.0f, H);
    if (u1 - u0 <= 0.0f || v1 - v0 <= 0.0f) return std::nullopt;

    ProjectedBox out;
    out.entity_id = entity.entity_id;
    out.cls = kind.cls;
    out.box = {u0, v0, u1 - u0, v1 - v0};
    out.truncated = truncated;
    out.forward_m = fwd;
    return out;
}

// Inverse of the projection: range from box height against the known real
// height of the class, bearing from the box center column. Boxes too small
// to range (h <= min_box_px) are rejected.
inline std::optional<RelativeEstimate> estimate_relative_position(const CameraModel& cam,
                                                                  const Detection& det,
                                                                  float real_height,
                                                                  float min_box_px = kMinBoxPx) {
    if (det.box.h <= min_box_px || real_height <= 0.0f) return std::nullopt;
    const float f = cam.focal_px();
    const float cx = static_cast<float>(cam.image_width_px) / 2.0f;
    RelativeEstimate est;
    est.cls = det.cls;
    est.distance_m = f * real_height / det.box.h;
    est.bearing_rad = std::atan((det.box.u_center() - cx) / f);
    est.confidence = det.confidence;
    return est;
}

// Ground-plane world position of an estimate (flat world, z = 0).
inline Vec3 world_from_estimate(const CameraPose& pose, const RelativeEstimate& est) {
    const Vec3 right = right_of(pose.heading);
    const float lateral = est.distance_m * std::tan(est.bearing_rad);
    Vec3 p = pose.position + pose.heading * est.distance_m + right * lateral;
    p.z = 0.0f;
    return p;
}

// Projects every entity visible from `pose` except `own_id`, then applies a
// painter's-order occlusion test: a box with >= 90% of its area inside a
// strictly nearer entity's box is suppressed. Output is ordered by entity id.
inline std::vector<ProjectedBox> render_annotations(const CameraModel& cam, const CameraPose& pose,
                                                    const std::vector<EntitySnapshot>& entities,
                                                    std::uint32_t own_id) {
    std::vector<ProjectedBox> boxes;
    for (const auto& e : entities) {
        if (e.state.entity_id == own_id) continue;
        if (auto b = project(cam, pose, e.kind, e.state)) boxes.push_back(*b);
    }
    std::sort(boxes.begin(), boxes.end(),
              [](const ProjectedBox& a, const ProjectedBox& b) { return a.forward_m < b.forward_m; });
    std::vector<ProjectedBox> visible;
    for (size_t i = 0; i < boxes.size(); ++i) {
        bool occluded = false;
        for (size_t j = 0; j < i && !occluded; ++j) {
            const PixelBox& a = boxes[i].box;
            const PixelBox& b = boxes[j].box;
            const float ix = std::max(0.0f, std::min(a.u_min + a.w, b.u_min + b.w) -
                                                std::max(a.u_min, b.u_min));
            const float iy = std::max(0.0f, std::min(a.v_min + a.h, b.v_min + b.h) -
                                                std::max(a.v_min, b.v_min));
            if (a.area() > 0.0f && ix * iy >= 0.9f * a.area()) occluded = true;
        }
        if (!occluded) visible.push_back(boxes[i]);
    }
    std::sort(visible.begin(), visible.end(),
              [](const ProjectedBox& a, const ProjectedBox& b) { return a.entity_id < b.entity_id; });
    return visible;
}

} // namespace ccsim
