#include <catch2/catch_amalgamated.hpp>

#include "ccsim/geom/camera.hpp"

using namespace ccsim;

namespace {

CameraModel default_cam() {
    CameraModel cam; // 320x240, hfov 90 deg -> focal 160 px
    return cam;
}

EntityState entity_at(std::uint32_t id, Vec3 pos) {
    EntityState s;
    s.entity_id = id;
    s.position = pos;
    s.direction = {1, 0, 0};
    return s;
}

} // namespace

TEST_CASE("focal length from width and hfov") {
    CameraModel cam = default_cam();
    REQUIRE_THAT(cam.focal_px(), Catch::Matchers::WithinAbs(160.0, 1e-3));
}

TEST_CASE("pinhole projection of a 1.5 m object dead ahead at 12 m") {
    CameraModel cam = default_cam();
    CameraPose pose{{0, 0, 1.4f}, {1, 0, 0}};
    EntityKind kind{EntityClass::Vehicle, 0.8f, 0.8f, 1.5f};
    auto box = project(cam, pose, kind, entity_at(7, {12, 0, 0}));
    REQUIRE(box.has_value());
    // h = focal * real_height / distance = 160 * 1.5 / 12 = 20 px
    CHECK_THAT(box->box.h, Catch::Matchers::WithinAbs(20.0, 1e-3));
    CHECK_THAT(box->box.u_center(), Catch::Matchers::WithinAbs(160.0, 1e-3));
    CHECK(box->entity_id == 7);
    CHECK_FALSE(box->truncated);
}

TEST_CASE("objects behind the camera produce no box") {
    CameraModel cam = default_cam();
    CameraPose pose{{0, 0, 1.4f}, {1, 0, 0}};
    EntityKind kind{EntityClass::Pedestrian, 0.3f, 0.3f, 1.7f};
    CHECK_FALSE(project(cam, pose, kind, entity_at(1, {-5, 0, 0})).has_value());
    CHECK_FALSE(project(cam, pose, kind, entity_at(1, {0.1f, 0, 0})).has_value());
}

TEST_CASE("boxes clipped at the border are flagged truncated") {
    CameraModel cam = default_cam();
    CameraPose pose{{0, 0, 1.4f}, {1, 0, 0}};
    EntityKind kind{EntityClass::Vehicle, 2.0f, 2.0f, 1.5f};
    auto box = project(cam, pose, kind, entity_at(1, {6, 5.5f, 0}));
    REQUIRE(box.has_value());
    CHECK(box->truncated);
    CHECK(box->box.u_min >= 0.0f);
    CHECK(box->box.u_min + box->box.w <= 320.0f);
}

TEST_CASE("ranging inverts the projection formula") {
    CameraModel cam = default_cam();
    Detection det;
    det.cls = EntityClass::Vehicle;
    det.confidence = 0.9f;
    det.box = {150.0f, 110.0f, 20.0f, 20.0f};
    auto est = estimate_relative_position(cam, det, 1.5f);
    REQUIRE(est.has_value());
    // distance = focal * H / h = 160 * 1.5 / 20 = 12 m
    CHECK_THAT(est->distance_m, Catch::Matchers::WithinAbs(12.0, 1e-4));
    CHECK_THAT(est->bearing_rad, Catch::Matchers::WithinAbs(0.0, 1e-6)); // centered box
}

TEST_CASE("boxes too small to range are rejected") {
    CameraModel cam = default_cam();
    Detection det;
    det.box = {100.0f, 100.0f, 3.0f, 1.5f};
    CHECK_FALSE(estimate_relative_position(cam, det, 1.5f).has_value());
}

TEST_CASE("estimated distance is strictly decreasing in box height") {
    CameraModel cam = default_cam();
    float prev = 1e9f;
    for (float h = 3.0f; h < 120.0f; h += 1.7f) {
        Detection det;
        det.box = {160.0f - h / 4, 100.0f, h / 2, h};
        auto est = estimate_relative_position(cam, det, 1.5f);
        REQUIRE(est.has_value());
        REQUIRE(est->distance_m < prev);
        prev = est->distance_m;
    }
}

TEST_CASE("estimate(project(x)) reproduces range and bearing on a pose grid") {
    CameraModel cam = default_cam();
    CameraPose pose{{3.0f, -2.0f, 1.4f}, heading_from_yaw(0.35f)};
    EntityKind ped{EntityClass::Pedestrian, 0.3f, 0.3f, 1.7f};

    const float max_bearing = 0.9f * cam.hfov_rad / 2.0f;
    int poses = 0;
    for (float dist = 5.0f; dist <= 50.0f; dist += 1.25f) {
        for (float bearing = -max_bearing; bearing <= max_bearing; bearing += 0.1f) {
            const float lateral = dist * std::tan(bearing);
            const Vec3 fwd = pose.heading;
            const Vec3 right = right_of(fwd);
            EntityState s = entity_at(9, pose.position + fwd * dist + right * lateral);
            s.position.z = 0.0f;

            auto box = project(cam, pose, ped, s);
            REQUIRE(box.has_value());
            if (box->truncated) continue;
            Detection det;
            det.cls = ped.cls;
            det.box = box->box;
            det.confidence = 1.0f;
            auto est = estimate_relative_position(cam, det, ped.real_height);
            REQUIRE(est.has_value());
            REQUIRE_THAT(est->distance_m, Catch::Matchers::WithinRel(dist, 0.01f));
            REQUIRE_THAT(est->bearing_rad,
                         Catch::Matchers::WithinAbs(bearing, 0.5 * 3.14159265 / 180.0));
            // world-position reconstruction lands on the entity footprint
            const Vec3 world = world_from_estimate(pose, *est);
            REQUIRE(planar_dist(world, s.position) < 0.6f);
            ++poses;
        }
    }
    REQUIRE(poses >= 500);
}

TEST_CASE("camera pose follows the vehicle mount") {
    CameraModel cam = default_cam(); // mount (1.0, 0, 1.4)
    EntityState vehicle = entity_at(1, {10, 20, 0});
    vehicle.direction = heading_from_yaw(1.5707963f); // facing +y
    auto pose = camera_pose_for(cam, vehicle);
    CHECK_THAT(pose.position.x, Catch::Matchers::WithinAbs(10.0, 1e-4));
    CHECK_THAT(pose.position.y, Catch::Matchers::WithinAbs(21.0, 1e-4)); // 1 m forward
    CHECK_THAT(pose.position.z, Catch::Matchers::WithinAbs(1.4, 1e-5));
    CHECK_THAT(pose.heading.y, Catch::Matchers::WithinAbs(1.0, 1e-5));
}

TEST_CASE("occlusion suppresses a box contained in a nearer one") {
    CameraModel cam = default_cam();
    CameraPose pose{{0, 0, 1.4f}, {1, 0, 0}};
    std::vector<EntitySnapshot> entities;
    EntitySnapshot near_truck;
    near_truck.kind = {EntityClass::Vehicle, 2.0f, 2.0f, 3.0f};
    near_truck.state = entity_at(2, {8, 0, 0});
    EntitySnapshot far_ped;
    far_ped.kind = {EntityClass::Pedestrian, 0.3f, 0.3f, 1.7f};
    far_ped.state = entity_at(3, {30, 0, 0});
    entities.push_back(far_ped);
    entities.push_back(near_truck);

    auto boxes = render_annotations(cam, pose, entities, 1);
    REQUIRE(boxes.size() == 1);
    CHECK(boxes[0].entity_id == 2);

    // moved far enough aside, the pedestrian is visible again
    entities[0].state.position.y = 8.0f;
    boxes = render_annotations(cam, pose, entities, 1);
    REQUIRE(boxes.size() == 2);
}

TEST_CASE("own vehicle is excluded from annotations") {
    CameraModel cam = default_cam();
    CameraPose pose{{0, 0, 1.4f}, {1, 0, 0}};
    EntitySnapshot self;
    self.kind = {EntityClass::Vehicle, 2.0f, 0.9f, 1.5f};
    self.state = entity_at(1, {5, 0, 0});
    auto boxes = render_annotations(cam, pose, {self}, 1);
    CHECK(boxes.empty());
}
