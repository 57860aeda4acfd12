/**
 * Deterministic simulation model.
 *
 * One WorldState owner advances ticks; everything handed outward is an
 * immutable snapshot. Client vehicles integrate point-mass-with-heading
 * dynamics with explicit Euler at the fixed tick rate; scripted entities
 * follow waypoint schedules at constant speed. Collision detection is
 * axis-aligned footprint overlap in the ground plane.
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <vector>

#include "ccsim/world/scenario.hpp"
#include "ccsim/world/types.hpp"

namespace ccsim {

// One event per overlapping footprint pair, ordered by (entity_a, entity_b).
// Requires `entities` sorted by entity_id (WorldState maintains this).
inline std::vector<CollisionEvent> detect_collisions(const std::vector<EntitySnapshot>& entities,
                                                     std::uint64_t tick) {
    std::vector<CollisionEvent> events;
    for (size_t i = 0; i < entities.size(); ++i) {
        for (size_t j = i + 1; j < entities.size(); ++j) {
            const auto& a = entities[i];
            const auto& b = entities[j];
            const float ox = (a.kind.extent_x + b.kind.extent_x) -
                             std::fabs(a.state.position.x - b.state.position.x);
            const float oy = (a.kind.extent_y + b.kind.extent_y) -
                             std::fabs(a.state.position.y - b.state.position.y);
            if (ox > 0.0f && oy > 0.0f) {
                CollisionEvent ev;
                ev.tick = tick;
                ev.entity_a = std::min(a.state.entity_id, b.state.entity_id);
                ev.entity_b = std::max(a.state.entity_id, b.state.entity_id);
                ev.penetration_depth = std::min(ox, oy);
                events.push_back(ev);
            }
        }
    }
    std::sort(events.begin(), events.end(), [](const CollisionEvent& l, const CollisionEvent& r) {
        return l.entity_a != r.entity_a ? l.entity_a < r.entity_a : l.entity_b < r.entity_b;
    });
    return events;
}

// Ground-truth hazard for one vehicle: Collision if it is party to a
// collision event; CollisionPossible if any other entity's center lies in
// the stopping envelope, a corridor of params.corridor_halfwidth along the
// heading with length v^2/(2 a_brake) + margin; Safe otherwise.
inline GroundTruthHazard classify_hazard(const std::vector<EntitySnapshot>& entities,
                                         std::uint32_t vehicle_id, const HazardParams& params,
                                         std::uint64_t tick = 0) {
    const EntitySnapshot* vehicle = nullptr;
    for (const auto& e : entities)
        if (e.state.entity_id == vehicle_id) vehicle = &e;
    if (!vehicle) throw std::out_of_range("classify_hazard: unknown vehicle_id");

    for (const auto& ev : detect_collisions(entities, tick))
        if (ev.entity_a == vehicle_id || ev.entity_b == vehicle_id)
            return GroundTruthHazard::Collision;

    const float speed = planar_norm(vehicle->state.velocity);
    const float envelope = speed * speed / (2.0f * params.a_brake) + params.margin;
    const Vec3 heading = vehicle->state.direction;
    const Vec3 right = right_of(heading);
    for (const auto& e : entities) {
        if (e.state.entity_id == vehicle_id) continue;
        const Vec3 rel = e.state.position - vehicle->state.position;
        const float fwd = dot(rel, heading);
        const float lat = dot(rel, right);
        if (fwd > 0.0f && fwd <= envelope && std::fabs(lat) < params.corridor_halfwidth)
            return GroundTruthHazard::CollisionPossible;
    }
    return GroundTruthHazard::Safe;
}

class WorldState {
public:
    WorldState() = default;

    explicit WorldState(const Scenario& sc, VehicleDynamics dyn = {})
        : scenario_(sc), dyn_(dyn), tick_dt_us_(std::llround(1e6 / sc.tick_rate_hz)) {
        for (const auto& se : sc.entities) {
            Entity e;
            e.kind = se.kind;
            e.state = se.initial;
            e.script = se.script;
            e.speed = planar_norm(se.initial.velocity);
            e.yaw = yaw_from_heading(se.initial.direction);
            entities_.push_back(e);
        }
        std::sort(entities_.begin(), entities_.end(), [](const Entity& a, const Entity& b) {
            return a.state.entity_id < b.state.entity_id;
        });
        prev_states_.assign(entities_.size(), EntityState{}); // all differ at tick 0
    }

    std::uint64_t tick() const { return tick_; }
    std::uint64_t sim_time_us() const { return sim_time_us_; }
    double sim_time_s() const { return static_cast<double>(sim_time_us_) * 1e-6; }
    std::uint64_t tick_dt_us() const { return tick_dt_us_; }
    const Scenario& scenario() const { return scenario_; }
    bool finished() const { return tick_ >= scenario_.total_ticks(); }

    // Advances one tick. Control entries for unknown or non-client entities
    // are rejected per-entry (their ids returned); the step still proceeds.
    std::vector<std::uint32_t> step(const std::map<std::uint32_t, ControlCmd>& controls) {
        std::vector<std::uint32_t> rejected;
        for (const auto& [id, cmd] : controls) {
            Entity* e = find(id);
            if (!e || e->script.type != ScriptType::ClientControlled) {
                rejected.push_back(id);
                continue;
            }
            e->cmd = cmd;
        }

        const double dt = static_cast<double>(tick_dt_us_) * 1e-6;
        const double t_start_s = sim_time_s();
        for (size_t i = 0; i < entities_.size(); ++i) prev_states_[i] = entities_[i].state;

        sim_time_us_ += tick_dt_us_;
        ++tick_;
        for (auto& e : entities_) {
            switch (e.script.type) {
                case ScriptType::ClientControlled: step_vehicle(e, dt); break;
                case ScriptType::Waypoints: step_scripted(e, dt, t_start_s); break;
                case ScriptType::Static: break;
            }
            e.state.sim_time_us = sim_time_us_;
        }
        return rejected;
    }

    std::vector<EntitySnapshot> snapshot() const {
        std::vector<EntitySnapshot> out;
        out.reserve(entities_.size());
        for (const auto& e : entities_) out.push_back({e.kind, e.state});
        return out;
    }

    // Entities whose position, velocity, or direction changed in the last
    // step. Before any step (tick 0) this is every entity.
    std::vector<EntityState> changed_states() const {
        std::vector<EntityState> out;
        for (size_t i = 0; i < entities_.size(); ++i) {
            const EntityState& cur = entities_[i].state;
            const EntityState& prev = prev_states_[i];
            if (tick_ == 0 || !(cur.position == prev.position && cur.velocity == prev.velocity &&
                                cur.direction == prev.direction))
                out.push_back(cur);
        }
        return out;
    }

    std::vector<CollisionEvent> collisions() const { return detect_collisions(snapshot(), tick_); }

    GroundTruthHazard hazard(std::uint32_t vehicle_id, const HazardParams& params) const {
        return classify_hazard(snapshot(), vehicle_id, params, tick_);
    }

    const EntityState* state_of(std::uint32_t id) const {
        const Entity* e = const_cast<WorldState*>(this)->find(id);
        return e ? &e->state : nullptr;
    }

    const EntityKind* kind_of(std::uint32_t id) const {
        const Entity* e = const_cast<WorldState*>(this)->find(id);
        return e ? &e->kind : nullptr;
    }

private:
    struct Entity {
        EntityKind kind;
        EntityState state;
        EntityScript script;
        ControlCmd cmd;          // latest command, client-controlled only
        double speed = 0.0;      // scalar speed along heading
        double yaw = 0.0;
        size_t next_wp = 0;      // waypoint script progress
        double hold_until = -1.0;
    };

    Entity* find(std::uint32_t id) {
        auto it = std::lower_bound(entities_.begin(), entities_.end(), id,
                                   [](const Entity& e, std::uint32_t v) {
                                       return e.state.entity_id < v;
                                   });
        return (it != entities_.end() && it->state.entity_id == id) ? &*it : nullptr;
    }

    // Explicit Euler: position advances with the pre-step velocity, then
    // speed and heading update from the stored command.
    void step_vehicle(Entity& e, double dt) {
        const double v0 = e.speed;
        e.state.position = e.state.position + e.state.direction * static_cast<float>(v0 * dt);

        const double accel = static_cast<double>(e.cmd.throttle) * dyn_.a_max -
                             static_cast<double>(e.cmd.brake) * dyn_.a_brake;
        e.speed = std::clamp(v0 + accel * dt, 0.0, static_cast<double>(dyn_.max_speed));
        e.yaw -= (v0 / dyn_.wheelbase) * std::tan(static_cast<double>(e.cmd.steering)) * dt;
        e.state.direction = heading_from_yaw(static_cast<float>(e.yaw));
        e.state.velocity = e.state.direction * static_cast<float>(e.speed);
    }

    // Constant-speed waypoint following with instantaneous turns. A
    // waypoint's depart time gates leaving it; gates are evaluated against
    // the tick-start clock so actor timing is a pure function of the tick.
    void step_scripted(Entity& e, double dt, double t_start_s) {
        const auto& wps = e.script.waypoints;
        double budget = e.script.speed_mps * dt;
        bool moved = false;
        while (budget > 1e-12) {
            if (e.hold_until >= 0.0 && t_start_s < e.hold_until) break;
            e.hold_until = -1.0;
            if (e.next_wp >= wps.size()) break;
            const Waypoint& target = wps[e.next_wp];
            const Vec3 to_target = target.pos - e.state.position;
            const float d = planar_norm(to_target);
            if (d > 1e-6f) e.state.direction = normalized(to_target);
            if (d <= budget) {
                e.state.position = target.pos;
                budget -= d;
                e.hold_until = target.depart_s;
                ++e.next_wp;
                moved = moved || d > 0.0f;
            } else {
                e.state.position =
                    e.state.position + e.state.direction * static_cast<float>(budget);
                budget = 0.0;
                moved = true;
            }
        }
        e.state.velocity =
            moved ? e.state.direction * static_cast<float>(e.script.speed_mps) : Vec3{};
        if (!moved && e.next_wp < wps.size()) {
            const Vec3 to_next = wps[e.next_wp].pos - e.state.position;
            if (planar_norm(to_next) > 1e-6f) e.state.direction = normalized(to_next);
        }
    }

    Scenario scenario_;
    VehicleDynamics dyn_;
    std::uint64_t tick_dt_us_ = 10000;
    std::uint64_t tick_ = 0;
    std::uint64_t sim_time_us_ = 0;
    std::vector<Entity> entities_;
    std::vector<EntityState> prev_states_;
};

} // namespace ccsim
