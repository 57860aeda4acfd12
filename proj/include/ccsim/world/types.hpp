#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ccsim/world/vec3.hpp"

namespace ccsim {

enum class EntityClass : std::uint8_t { Vehicle = 0, Pedestrian = 1, StaticObstacle = 2 };

inline const char* to_string(EntityClass c) {
    switch (c) {
        case EntityClass::Vehicle: return "Vehicle";
        case EntityClass::Pedestrian: return "Pedestrian";
        case EntityClass::StaticObstacle: return "StaticObstacle";
    }
    return "?";
}

// Physical description of an entity class instance: axis-aligned ground
// footprint half-dimensions plus the upright height used by projection.
struct EntityKind {
    EntityClass cls = EntityClass::Vehicle;
    float extent_x = 1.0f;    // half-length (m)
    float extent_y = 1.0f;    // half-width  (m)
    float real_height = 1.5f; // m
};

// Ground-truth kinematic record of one entity. This is the 48-byte unit
// of the state-delta stream (see proto::encode_state_update).
struct EntityState {
    std::uint32_t entity_id = 0;
    std::uint64_t sim_time_us = 0;
    Vec3 position;  // m
    Vec3 velocity;  // m/s
    Vec3 direction; // unit heading

    friend bool operator==(const EntityState& a, const EntityState& b) {
        return a.entity_id == b.entity_id && a.sim_time_us == b.sim_time_us &&
               a.position == b.position && a.velocity == b.velocity &&
               a.direction == b.direction;
    }
};

// Minimal view of one entity at an instant; the unit shared by the live
// world, the detector's aligned reconstructions, and replay.
struct EntitySnapshot {
    EntityKind kind;
    EntityState state;
};

enum class GroundTruthHazard : std::uint8_t { Safe = 0, CollisionPossible = 1, Collision = 2 };

inline const char* to_string(GroundTruthHazard h) {
    switch (h) {
        case GroundTruthHazard::Safe: return "Safe";
        case GroundTruthHazard::CollisionPossible: return "CollisionPossible";
        case GroundTruthHazard::Collision: return "Collision";
    }
    return "?";
}

struct CollisionEvent {
    std::uint64_t tick = 0;
    std::uint32_t entity_a = 0; // always < entity_b
    std::uint32_t entity_b = 0;
    float penetration_depth = 0.0f; // m
};

// Stopping-envelope parameters for ground-truth hazard classification.
struct HazardParams {
    float corridor_halfwidth = 2.0f; // m
    float margin = 2.0f;             // m added past the stopping distance
    float a_brake = 6.0f;            // m/s^2
};

struct ControlCmd {
    float steering = 0.0f; // rad, positive = right
    float throttle = 0.0f; // [0,1]
    float brake = 0.0f;    // [0,1]
};

// Vehicle dynamics constants (point mass with heading).
struct VehicleDynamics {
    float a_max = 3.0f;     // full-throttle acceleration, m/s^2
    float a_brake = 6.0f;   // full-brake deceleration, m/s^2
    float wheelbase = 2.5f; // virtual wheelbase for the kinematic turn, m
    float max_speed = 30.0f;
};

} // namespace ccsim
