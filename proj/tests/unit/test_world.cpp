#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <random>

#include "ccsim/core/rng.hpp"
#include "ccsim/proto/messages.hpp"
#include "ccsim/world/world.hpp"

using namespace ccsim;

namespace {

Scenario two_waypoint_scenario(std::uint32_t tick_rate = 10) {
    Scenario sc;
    sc.name = "unit";
    sc.tick_rate_hz = tick_rate;
    sc.sensor_fps = tick_rate / 2;
    sc.duration_s = 60.0;
    sc.road = {{0, 0, 0}, {300, 0, 0}};
    return sc;
}

ScenarioEntity vehicle_at(std::uint32_t id, Vec3 pos, Vec3 vel) {
    ScenarioEntity e;
    e.kind = {EntityClass::Vehicle, 2.0f, 0.9f, 1.5f};
    e.initial.entity_id = id;
    e.initial.position = pos;
    e.initial.velocity = vel;
    e.initial.direction = norm(vel) > 0 ? normalized(vel) : Vec3{1, 0, 0};
    e.script.type = ScriptType::ClientControlled;
    return e;
}

EntitySnapshot snap(std::uint32_t id, EntityClass cls, Vec3 pos, Vec3 vel, float ex, float ey) {
    EntitySnapshot s;
    s.kind = {cls, ex, ey, 1.5f};
    s.state.entity_id = id;
    s.state.position = pos;
    s.state.velocity = vel;
    s.state.direction = norm(vel) > 0 ? normalized(vel) : Vec3{1, 0, 0};
    return s;
}

} // namespace

TEST_CASE("uncontrolled vehicle advances by v*dt") {
    auto sc = two_waypoint_scenario(10); // dt = 0.1 s
    sc.entities = {vehicle_at(1, {0, 0, 0}, {1, 0, 0})};
    WorldState w(sc);
    w.step({});
    REQUIRE_THAT(w.state_of(1)->position.x, Catch::Matchers::WithinAbs(0.1, 1e-6));
    REQUIRE(w.sim_time_us() == 100000);
}

TEST_CASE("full brake sheds a_brake*dt of speed") {
    auto sc = two_waypoint_scenario(10);
    sc.entities = {vehicle_at(1, {0, 0, 0}, {10, 0, 0})};
    WorldState w(sc);
    ControlCmd cmd;
    cmd.brake = 1.0f;
    w.step({{1, cmd}});
    // analytic kinematics: v - a_brake * dt = 10 - 6 * 0.1
    const double expected = 10.0 - 6.0 * 0.1;
    REQUIRE_THAT(planar_norm(w.state_of(1)->velocity), Catch::Matchers::WithinAbs(expected, 1e-5));
}

TEST_CASE("throttle accelerates by throttle*a_max*dt") {
    auto sc = two_waypoint_scenario(10);
    sc.entities = {vehicle_at(1, {0, 0, 0}, {0, 0, 0})};
    WorldState w(sc);
    ControlCmd cmd;
    cmd.throttle = 0.5f;
    w.step({{1, cmd}});
    REQUIRE_THAT(planar_norm(w.state_of(1)->velocity),
                 Catch::Matchers::WithinAbs(0.5 * 3.0 * 0.1, 1e-5));
}

TEST_CASE("steering rotates heading at v/wheelbase*tan(angle)") {
    auto sc = two_waypoint_scenario(10);
    sc.entities = {vehicle_at(1, {0, 0, 0}, {10, 0, 0})};
    WorldState w(sc);
    ControlCmd cmd;
    cmd.steering = 0.1f; // positive = right = clockwise
    w.step({{1, cmd}});
    const double expected_yaw = -(10.0 / 2.5) * std::tan(0.1) * 0.1;
    REQUIRE_THAT(yaw_from_heading(w.state_of(1)->direction),
                 Catch::Matchers::WithinAbs(expected_yaw, 1e-6));
}

TEST_CASE("unknown control targets are rejected per-entry") {
    auto sc = two_waypoint_scenario(10);
    sc.entities = {vehicle_at(1, {0, 0, 0}, {1, 0, 0})};
    WorldState w(sc);
    ControlCmd cmd;
    cmd.throttle = 1.0f;
    auto rejected = w.step({{99, cmd}});
    REQUIRE(rejected == std::vector<std::uint32_t>{99});
    // the step still proceeded
    REQUIRE(w.tick() == 1);
}

TEST_CASE("scripted entity moves speed*dt toward the next waypoint") {
    auto sc = two_waypoint_scenario(10);
    ScenarioEntity ped;
    ped.kind = {EntityClass::Pedestrian, 0.3f, 0.3f, 1.7f};
    ped.initial.entity_id = 2;
    ped.initial.position = {10, 0, 0};
    ped.initial.direction = {0, 1, 0};
    ped.script.type = ScriptType::Waypoints;
    ped.script.speed_mps = 1.5;
    ped.script.waypoints = {{{10, 0, 0}, -1.0}, {{10, 8, 0}, -1.0}};
    sc.entities = {ped};
    WorldState w(sc);
    w.step({});
    // analytic waypoint-following: 1.5 m/s * 0.1 s toward +y
    REQUIRE_THAT(w.state_of(2)->position.y, Catch::Matchers::WithinAbs(0.15, 1e-5));
    REQUIRE_THAT(w.state_of(2)->velocity.y, Catch::Matchers::WithinAbs(1.5, 1e-5));
}

TEST_CASE("waypoint depart time holds the entity in place") {
    auto sc = two_waypoint_scenario(10);
    ScenarioEntity ped;
    ped.kind = {EntityClass::Pedestrian, 0.3f, 0.3f, 1.7f};
    ped.initial.entity_id = 2;
    ped.initial.position = {10, 0, 0};
    ped.initial.direction = {0, 1, 0};
    ped.script.type = ScriptType::Waypoints;
    ped.script.speed_mps = 1.5;
    ped.script.waypoints = {{{10, 0, 0}, 0.5}, {{10, 8, 0}, -1.0}};
    sc.entities = {ped};
    WorldState w(sc);
    for (int i = 0; i < 5; ++i) w.step({}); // t reaches 0.5 s
    REQUIRE_THAT(w.state_of(2)->position.y, Catch::Matchers::WithinAbs(0.0, 1e-6));
    REQUIRE(planar_norm(w.state_of(2)->velocity) == 0.0f);
    w.step({}); // tick starting at t=0.5: gate opens
    REQUIRE_THAT(w.state_of(2)->position.y, Catch::Matchers::WithinAbs(0.15, 1e-5));
}

TEST_CASE("collision detection: separated, coincident, offset") {
    SECTION("100 m apart is empty") {
        auto entities = std::vector<EntitySnapshot>{
            snap(1, EntityClass::Vehicle, {0, 0, 0}, {}, 0.5f, 0.5f),
            snap(2, EntityClass::Vehicle, {100, 0, 0}, {}, 0.5f, 0.5f)};
        REQUIRE(detect_collisions(entities, 0).empty());
    }
    SECTION("identical positions, 1x1 m footprints fully overlap") {
        auto entities = std::vector<EntitySnapshot>{
            snap(1, EntityClass::Vehicle, {5, 5, 0}, {}, 0.5f, 0.5f),
            snap(2, EntityClass::Vehicle, {5, 5, 0}, {}, 0.5f, 0.5f)};
        auto evs = detect_collisions(entities, 3);
        REQUIRE(evs.size() == 1);
        CHECK(evs[0].entity_a == 1);
        CHECK(evs[0].entity_b == 2);
        CHECK(evs[0].tick == 3);
        CHECK_THAT(evs[0].penetration_depth, Catch::Matchers::WithinAbs(1.0, 1e-6));
    }
    SECTION("0.8 m x-offset with 0.5 m half-extents penetrates 0.2 m") {
        auto entities = std::vector<EntitySnapshot>{
            snap(1, EntityClass::Vehicle, {0, 0, 0}, {}, 0.5f, 0.5f),
            snap(2, EntityClass::Vehicle, {0.8f, 0, 0}, {}, 0.5f, 0.5f)};
        auto evs = detect_collisions(entities, 0);
        REQUIRE(evs.size() == 1);
        CHECK_THAT(evs[0].penetration_depth, Catch::Matchers::WithinAbs(0.2, 1e-5));
    }
}

TEST_CASE("collision result is invariant under input reordering and has no self pairs") {
    std::mt19937 gen(99);
    std::uniform_real_distribution<float> coord(-5.0f, 5.0f);
    std::vector<EntitySnapshot> entities;
    for (std::uint32_t id = 1; id <= 8; ++id)
        entities.push_back(snap(id, EntityClass::Vehicle, {coord(gen), coord(gen), 0}, {}, 1.0f, 1.0f));
    auto baseline = detect_collisions(entities, 0);
    for (const auto& ev : baseline) REQUIRE(ev.entity_a < ev.entity_b);

    auto shuffled = entities;
    std::shuffle(shuffled.begin(), shuffled.end(), gen);
    auto again = detect_collisions(shuffled, 0);
    REQUIRE(again.size() == baseline.size());
    for (size_t i = 0; i < again.size(); ++i) {
        CHECK(again[i].entity_a == baseline[i].entity_a);
        CHECK(again[i].entity_b == baseline[i].entity_b);
        CHECK(again[i].penetration_depth == baseline[i].penetration_depth);
    }
}

TEST_CASE("hazard classification") {
    HazardParams params; // corridor 2 m, margin 2 m, a_brake 6
    SECTION("nothing within 200 m is Safe") {
        auto entities = std::vector<EntitySnapshot>{
            snap(1, EntityClass::Vehicle, {0, 0, 0}, {10, 0, 0}, 2.0f, 0.9f),
            snap(2, EntityClass::Pedestrian, {250, 0, 0}, {}, 0.3f, 0.3f)};
        REQUIRE(classify_hazard(entities, 1, params) == GroundTruthHazard::Safe);
    }
    SECTION("pedestrian inside the stopping envelope") {
        // envelope length oracle: v^2/(2 a) + margin = 100/12 + 2
        const double envelope = 10.0 * 10.0 / (2.0 * 6.0) + 2.0;
        REQUIRE(envelope > 5.0);
        auto entities = std::vector<EntitySnapshot>{
            snap(1, EntityClass::Vehicle, {0, 0, 0}, {10, 0, 0}, 2.0f, 0.9f),
            snap(2, EntityClass::Pedestrian, {5, 0, 0}, {}, 0.3f, 0.3f)};
        REQUIRE(classify_hazard(entities, 1, params) == GroundTruthHazard::CollisionPossible);
        // just beyond the envelope it is Safe again
        entities[1].state.position.x = static_cast<float>(envelope) + 0.01f;
        REQUIRE(classify_hazard(entities, 1, params) == GroundTruthHazard::Safe);
    }
    SECTION("overlap dominates regardless of velocity") {
        auto entities = std::vector<EntitySnapshot>{
            snap(1, EntityClass::Vehicle, {0, 0, 0}, {0, 0, 0}, 2.0f, 0.9f),
            snap(2, EntityClass::Pedestrian, {1, 0, 0}, {}, 0.3f, 0.3f)};
        REQUIRE(classify_hazard(entities, 1, params) == GroundTruthHazard::Collision);
    }
    SECTION("unknown vehicle id throws") {
        auto entities = std::vector<EntitySnapshot>{
            snap(1, EntityClass::Vehicle, {0, 0, 0}, {0, 0, 0}, 2.0f, 0.9f)};
        REQUIRE_THROWS_AS(classify_hazard(entities, 9, params), std::out_of_range);
    }
}

TEST_CASE("hazard is monotone in obstacle distance") {
    HazardParams params;
    KeyedRng rng(4, "hazard-monotone", 0);
    for (int trial = 0; trial < 200; ++trial) {
        const float speed = static_cast<float>(rng.uniform(0.0, 15.0));
        const float bearing_lat = static_cast<float>(rng.uniform(-1.9, 1.9));
        const float d0 = static_cast<float>(rng.uniform(0.5, 30.0));
        const float d1 = d0 + static_cast<float>(rng.uniform(0.1, 20.0));
        auto world_at = [&](float d) {
            return std::vector<EntitySnapshot>{
                snap(1, EntityClass::Vehicle, {0, 0, 0}, {speed, 0, 0}, 2.0f, 0.9f),
                snap(2, EntityClass::Pedestrian, {d, bearing_lat, 0}, {}, 0.3f, 0.3f)};
        };
        const auto near = classify_hazard(world_at(d0), 1, params);
        const auto far = classify_hazard(world_at(d1), 1, params);
        REQUIRE(static_cast<int>(far) <= static_cast<int>(near));
    }
}

TEST_CASE("deterministic traces: same scenario, seed, and control stream") {
    auto sc = two_waypoint_scenario(100);
    sc.entities = {vehicle_at(1, {0, 0, 0}, {0, 0, 0})};
    ScenarioEntity ped;
    ped.kind = {EntityClass::Pedestrian, 0.3f, 0.3f, 1.7f};
    ped.initial.entity_id = 2;
    ped.initial.position = {50, 5, 0};
    ped.initial.direction = {0, -1, 0};
    ped.script.type = ScriptType::Waypoints;
    ped.script.speed_mps = 1.5;
    ped.script.waypoints = {{{50, 5, 0}, 1.0}, {{50, -5, 0}, -1.0}};
    sc.entities.push_back(ped);

    auto run_trace = [&]() {
        WorldState w(sc);
        std::vector<std::uint8_t> trace;
        KeyedRng ctrl_rng(7, "control-stream", 0); // recorded control stream
        for (int t = 0; t < 500; ++t) {
            ControlCmd cmd;
            cmd.throttle = static_cast<float>(ctrl_rng.uniform(0.0, 1.0));
            cmd.steering = static_cast<float>(ctrl_rng.uniform(-0.2, 0.2));
            w.step({{1, cmd}});
            for (const auto& s : w.changed_states()) {
                auto rec = encode_state_update(s);
                trace.insert(trace.end(), rec.begin(), rec.end());
            }
        }
        return trace;
    };
    const auto a = run_trace();
    const auto b = run_trace();
    REQUIRE(a.size() > 0);
    REQUIRE(a == b); // byte-identical
}

TEST_CASE("scripted motion is independent of client behavior") {
    auto sc = two_waypoint_scenario(100);
    sc.entities = {vehicle_at(1, {0, 0, 0}, {0, 0, 0})};
    ScenarioEntity ped;
    ped.kind = {EntityClass::Pedestrian, 0.3f, 0.3f, 1.7f};
    ped.initial.entity_id = 2;
    ped.initial.position = {50, 5, 0};
    ped.initial.direction = {0, -1, 0};
    ped.script.type = ScriptType::Waypoints;
    ped.script.speed_mps = 2.0;
    ped.script.waypoints = {{{50, -5, 0}, -1.0}};
    sc.entities.push_back(ped);

    auto ped_positions = [&](float throttle) {
        WorldState w(sc);
        std::vector<Vec3> out;
        ControlCmd cmd;
        cmd.throttle = throttle;
        for (int t = 0; t < 300; ++t) {
            w.step({{1, cmd}});
            out.push_back(w.state_of(2)->position);
        }
        return out;
    };
    auto idle = ped_positions(0.0f);
    auto busy = ped_positions(1.0f);
    for (size_t i = 0; i < idle.size(); ++i) REQUIRE(idle[i] == busy[i]);
}

TEST_CASE("delta stream: statics drop out after the initial batch") {
    auto sc = two_waypoint_scenario(100);
    sc.entities = {vehicle_at(1, {0, 0, 0}, {1, 0, 0})};
    ScenarioEntity rock;
    rock.kind = {EntityClass::StaticObstacle, 0.5f, 0.5f, 1.0f};
    rock.initial.entity_id = 5;
    rock.initial.position = {20, 3, 0};
    rock.script.type = ScriptType::Static;
    sc.entities.push_back(rock);

    WorldState w(sc);
    REQUIRE(w.changed_states().size() == 2); // initial batch carries everyone
    w.step({});
    auto changed = w.changed_states();
    REQUIRE(changed.size() == 1);
    REQUIRE(changed[0].entity_id == 1);
}
