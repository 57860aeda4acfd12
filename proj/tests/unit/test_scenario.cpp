#include <catch2/catch_amalgamated.hpp>

#include "ccsim/world/scenario.hpp"

using namespace ccsim;

namespace {

const char* kMinimal = R"(
[scenario]
name = minimal
seed = 0
tick_rate_hz = 100
sensor_fps = 20
duration_s = 10

[road]
0 0 0
100 0 0

[entity]
id = 1
kind = Vehicle
extent = 2.0 0.9
real_height = 1.5
position = 0 0 0
velocity = 0 0 0
direction = 1 0 0
script = client
)";

} // namespace

TEST_CASE("minimal scenario parses") {
    auto sc = parse_scenario(kMinimal);
    CHECK(sc.name == "minimal");
    CHECK(sc.seed == 0);
    REQUIRE(sc.entities.size() == 1);
    CHECK(sc.entities[0].script.type == ScriptType::ClientControlled);
    CHECK(sc.road.size() == 2);
}

TEST_CASE("sensor rate above half the tick rate is rejected") {
    std::string text = kMinimal;
    const auto pos = text.find("sensor_fps = 20");
    text.replace(pos, 15, "sensor_fps = 60");
    REQUIRE_THROWS_WITH(parse_scenario(text),
                        Catch::Matchers::ContainsSubstring("tick_rate_hz >= 2 x sensor_fps"));
}

TEST_CASE("parse errors carry the line number") {
    const std::string bad = "[scenario]\nname = x\nbogus line without equals\n";
    try {
        parse_scenario(bad);
        FAIL("expected ScenarioError");
    } catch (const ScenarioError& e) {
        CHECK(e.line() == 3);
        CHECK_THAT(e.what(), Catch::Matchers::ContainsSubstring("key = value"));
    }
}

TEST_CASE("validation names the violated invariant") {
    SECTION("road too short") {
        std::string text = kMinimal;
        const auto pos = text.find("100 0 0\n");
        text.erase(pos, 8);
        REQUIRE_THROWS_WITH(parse_scenario(text),
                            Catch::Matchers::ContainsSubstring("road needs at least 2 waypoints"));
    }
    SECTION("non-unit direction on a moving entity") {
        std::string text = kMinimal;
        const auto pos = text.find("direction = 1 0 0");
        text.replace(pos, 17, "direction = 2 0 0");
        std::string t2 = text;
        const auto vel = t2.find("velocity = 0 0 0");
        t2.replace(vel, 16, "velocity = 1 0 0");
        REQUIRE_THROWS_WITH(parse_scenario(t2),
                            Catch::Matchers::ContainsSubstring("|direction| = 1"));
    }
    SECTION("duplicate entity ids") {
        std::string text = kMinimal;
        text += "\n[entity]\nid = 1\nkind = StaticObstacle\nextent = 1 1\nreal_height = 1\n"
                "position = 5 5 0\nscript = static\n";
        REQUIRE_THROWS_WITH(parse_scenario(text),
                            Catch::Matchers::ContainsSubstring("duplicate entity id"));
    }
    SECTION("entity without script") {
        std::string text = kMinimal;
        const auto pos = text.find("script = client");
        text.erase(pos, 15);
        REQUIRE_THROWS_WITH(parse_scenario(text),
                            Catch::Matchers::ContainsSubstring("script"));
    }
}

TEST_CASE("bundled ped-crossing scenario loads") {
    auto sc = load_scenario_file(std::string(CCSIM_SCENARIO_DIR) + "/ped-crossing.scn");
    CHECK(sc.name == "ped-crossing");
    REQUIRE(sc.entities.size() == 2);
    CHECK(sc.duration_s == 20.0);
    const auto* ped = sc.find_entity(2);
    REQUIRE(ped != nullptr);
    CHECK(ped->kind.cls == EntityClass::Pedestrian);
    CHECK(ped->script.type == ScriptType::Waypoints);
    REQUIRE(ped->script.waypoints.size() == 2);
    CHECK(ped->script.waypoints[0].depart_s > 0.0);
}

TEST_CASE("bundled blind scenario carries the fault window") {
    auto sc = load_scenario_file(std::string(CCSIM_SCENARIO_DIR) + "/ped-crossing-blind.scn");
    REQUIRE(sc.noise.fault_windows.size() == 1);
    CHECK(sc.noise.fault_windows[0].cls == EntityClass::Pedestrian);
    CHECK(sc.noise.blinded(EntityClass::Pedestrian, 8.0));
    CHECK_FALSE(sc.noise.blinded(EntityClass::Vehicle, 8.0));
    CHECK_FALSE(sc.noise.blinded(EntityClass::Pedestrian, 15.0));
}

TEST_CASE("serialization round-trips through the parser") {
    auto sc = load_scenario_file(std::string(CCSIM_SCENARIO_DIR) + "/ped-crossing-blind.scn");
    const std::string text = scenario_to_text(sc);
    auto re = parse_scenario(text);
    // a second serialization must be byte-identical
    REQUIRE(scenario_to_text(re) == text);
    CHECK(re.entities.size() == sc.entities.size());
    CHECK(re.camera.hfov_rad == sc.camera.hfov_rad);
    CHECK(re.noise.fault_windows.size() == 1);
}
