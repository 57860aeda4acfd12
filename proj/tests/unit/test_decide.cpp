#include <catch2/catch_amalgamated.hpp>

#include "ccsim/client/pipeline.hpp"

using namespace ccsim;

namespace {

ObjectEstimate obj(float distance, float bearing = 0.0f, EntityClass cls = EntityClass::Pedestrian) {
    ObjectEstimate e;
    e.cls = cls;
    e.distance_m = distance;
    e.bearing_rad = bearing;
    e.confidence = 0.9f;
    return e;
}

} // namespace

TEST_CASE("no estimates: SafeToDrive and steering passes through") {
    DrivingParams params;
    auto d = decide({}, 0.12f, 8.0f, 0.0f, params);
    CHECK(d.state == DerivedState::SafeToDrive);
    CHECK(d.cmd.steering == 0.12f);
    CHECK(d.nearest_in_corridor_m < 0.0f);
}

TEST_CASE("in-corridor object at 10 m scales throttle by 0.5") {
    DrivingParams params; // d_slow 15, d_stop 5, cruise 8
    // at v = 4 the base throttle saturates at 1, isolating the scale
    auto d = decide({obj(10.0f)}, 0.0f, 4.0f, 0.0f, params);
    CHECK(d.state == DerivedState::SlowDown);
    // linear interpolation: (10 - 5) / (15 - 5) = 0.5
    CHECK_THAT(d.cmd.throttle, Catch::Matchers::WithinAbs(0.5, 1e-6));
    CHECK(d.cmd.brake == 0.0f);
}

TEST_CASE("in-corridor object at 3 m stops the vehicle") {
    DrivingParams params;
    auto d = decide({obj(3.0f)}, 0.3f, 8.0f, 0.07f, params);
    CHECK(d.state == DerivedState::Stop);
    CHECK(d.cmd.brake == 1.0f);
    CHECK(d.cmd.throttle == 0.0f);
    CHECK(d.cmd.steering == 0.07f); // held, not the fresh angle
}

TEST_CASE("objects outside the corridor are ignored") {
    DrivingParams params;
    // bearing such that lateral = 10 * tan(0.3) = 3.1 m > 2 m halfwidth
    auto d = decide({obj(10.0f, 0.3f)}, 0.0f, 8.0f, 0.0f, params);
    CHECK(d.state == DerivedState::SafeToDrive);
}

TEST_CASE("overspeed triggers braking, never together with throttle") {
    DrivingParams params;
    auto d = decide({}, 0.0f, 12.0f, 0.0f, params); // above cruise 8
    CHECK(d.state == DerivedState::SafeToDrive);
    CHECK(d.cmd.brake > 0.0f);
    CHECK(d.cmd.throttle == 0.0f);
}

TEST_CASE("derived state is monotone in nearest distance") {
    DrivingParams params;
    auto severity = [](DerivedState s) { return static_cast<int>(s); };
    int prev = severity(DerivedState::Stop);
    for (float dist = 0.5f; dist < 30.0f; dist += 0.25f) {
        auto d = decide({obj(dist)}, 0.0f, 6.0f, 0.0f, params);
        const int cur = severity(d.state);
        REQUIRE(cur <= prev); // moving farther never escalates
        prev = cur;
    }
}

TEST_CASE("throttle is continuous across the d_slow boundary") {
    DrivingParams params;
    for (float v : {2.0f, 5.0f, 7.9f, 9.0f}) {
        const float just_below =
            decide({obj(params.d_slow - 1e-4f)}, 0.0f, v, 0.0f, params).cmd.throttle;
        const float just_above =
            decide({obj(params.d_slow + 1e-4f)}, 0.0f, v, 0.0f, params).cmd.throttle;
        REQUIRE_THAT(just_below, Catch::Matchers::WithinAbs(just_above, 1e-3));
    }
}

TEST_CASE("throttle and brake are complementary everywhere") {
    DrivingParams params;
    for (float dist = 1.0f; dist < 25.0f; dist += 0.5f) {
        for (float v = 0.0f; v < 12.0f; v += 0.5f) {
            auto d = decide({obj(dist)}, 0.0f, v, 0.0f, params);
            REQUIRE_FALSE((d.cmd.throttle > 0.0f && d.cmd.brake > 0.0f));
            REQUIRE(d.cmd.throttle >= 0.0f);
            REQUIRE(d.cmd.throttle <= 1.0f);
            REQUIRE(d.cmd.brake >= 0.0f);
            REQUIRE(d.cmd.brake <= 1.0f);
        }
    }
}

TEST_CASE("nearest in-corridor object wins") {
    DrivingParams params;
    auto d = decide({obj(20.0f), obj(7.0f), obj(12.0f)}, 0.0f, 6.0f, 0.0f, params);
    CHECK(d.state == DerivedState::SlowDown);
    CHECK_THAT(d.nearest_in_corridor_m, Catch::Matchers::WithinAbs(7.0, 1e-6));
}

TEST_CASE("perceive filters and inverse-projects detections") {
    CameraModel cam;
    ClassHeights heights;
    DrivingParams params;
    SensorFrameMsg frame;
    frame.frame_id = 12;
    frame.camera.position = {5, 0, 1.4f};
    frame.camera.heading = {1, 0, 0};

    SECTION("empty detections make empty estimates") {
        auto out = perceive(frame, {}, cam, heights, params);
        CHECK(out.estimates.empty());
    }
    SECTION("a pedestrian box at h=22.67 px ranges to 12 m") {
        Detection det;
        det.cls = EntityClass::Pedestrian;
        det.confidence = 0.9f;
        const float h = 160.0f * 1.7f / 12.0f;
        det.box = {160.0f - 3.0f, 100.0f, 6.0f, h};
        auto out = perceive(frame, {det}, cam, heights, params);
        REQUIRE(out.estimates.size() == 1);
        CHECK_THAT(out.estimates[0].distance_m, Catch::Matchers::WithinRel(12.0f, 1e-4f));
        CHECK_THAT(out.estimates[0].bearing_rad, Catch::Matchers::WithinAbs(0.0, 1e-5));
        CHECK(out.estimates[0].source_frame_id == 12);
        // world position: camera at x=5 plus 12 m forward
        CHECK_THAT(out.estimates[0].world_pos.x, Catch::Matchers::WithinAbs(17.0, 1e-3));
    }
    SECTION("low-confidence detections are dropped") {
        Detection det;
        det.cls = EntityClass::Pedestrian;
        det.confidence = 0.1f;
        det.box = {100, 100, 10, 20};
        auto out = perceive(frame, {det}, cam, heights, params);
        CHECK(out.estimates.empty());
        CHECK(out.low_confidence == 1);
    }
    SECTION("unresolvable boxes are counted") {
        Detection det;
        det.cls = EntityClass::Pedestrian;
        det.confidence = 0.9f;
        det.box = {100, 100, 1.0f, 1.5f};
        auto out = perceive(frame, {det}, cam, heights, params);
        CHECK(out.estimates.empty());
        CHECK(out.unresolvable == 1);
    }
}
