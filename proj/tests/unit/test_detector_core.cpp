#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>

#include "ccsim/detector/buffers.hpp"
#include "ccsim/detector/criteria.hpp"
#include "ccsim/detector/evaluate.hpp"
#include "ccsim/detector/storage.hpp"

using namespace ccsim;

namespace {

EntityState state_at(std::uint32_t id, std::uint64_t t_us, Vec3 pos, Vec3 vel = {}) {
    EntityState s;
    s.entity_id = id;
    s.sim_time_us = t_us;
    s.position = pos;
    s.velocity = vel;
    s.direction = norm(vel) > 0 ? normalized(vel) : Vec3{1, 0, 0};
    return s;
}

EstimateReportMsg report_at(std::uint64_t sim_time_us, DerivedState state) {
    EstimateReportMsg r;
    r.client_id = 1;
    r.entity_id = 1;
    r.frame_id_ref = sim_time_us / 50000;
    r.sim_time_us = sim_time_us;
    r.derived_state = state;
    r.t_render_us = 1000000;
    r.t_estimate_us = 1050000; // 50 ms pipeline
    return r;
}

AlignedWorld world_with(std::vector<EntitySnapshot> entities, std::uint64_t t_us) {
    AlignedWorld w;
    w.entities = std::move(entities);
    w.sim_time_us = t_us;
    return w;
}

EntitySnapshot vehicle_snap(Vec3 pos, Vec3 vel) {
    EntitySnapshot s;
    s.kind = {EntityClass::Vehicle, 2.0f, 0.9f, 1.5f};
    s.state = state_at(1, 0, pos, vel);
    return s;
}

EntitySnapshot ped_snap(std::uint32_t id, Vec3 pos) {
    EntitySnapshot s;
    s.kind = {EntityClass::Pedestrian, 0.3f, 0.3f, 1.7f};
    s.state = state_at(id, 0, pos);
    return s;
}

} // namespace

TEST_CASE("state buffer keeps order and evicts beyond the window") {
    StateBuffer buf(1'000'000); // 1 s window
    REQUIRE(buf.push(state_at(1, 100, {0, 0, 0})));
    REQUIRE(buf.push(state_at(1, 200, {1, 0, 0})));
    REQUIRE_FALSE(buf.push(state_at(1, 150, {2, 0, 0}))); // out of order
    REQUIRE(buf.size() == 2);

    // fill 2 s at 100 Hz: only ~1 s survives
    for (std::uint64_t t = 0; t <= 2'000'000; t += 10'000) buf.push(state_at(1, t + 300, {0, 0, 0}));
    REQUIRE(buf.span_us() <= 1'000'000);
    REQUIRE(buf.span_us() >= 990'000);
    // capacity arithmetic: about one entry per tick across the window
    REQUIRE(buf.size() >= 99);
    REQUIRE(buf.size() <= 102);
}

TEST_CASE("alignment: exact hit, interpolation, extrapolation") {
    StateBuffer buf(10'000'000);
    // entity moving 1 m/s in x, samples 10 ms apart
    buf.push(state_at(1, 1'000'000, {5.0f, 0, 0}, {1, 0, 0}));
    buf.push(state_at(1, 1'010'000, {5.01f, 0, 0}, {1, 0, 0}));

    SECTION("query on a sample returns it exactly") {
        auto a = buf.at(1'000'000);
        REQUIRE(a.has_value());
        CHECK_FALSE(a->extrapolated);
        CHECK(a->state.position.x == 5.0f);
    }
    SECTION("midpoint interpolates linearly") {
        auto a = buf.at(1'005'000);
        REQUIRE(a.has_value());
        CHECK_FALSE(a->extrapolated);
        CHECK_THAT(a->state.position.x, Catch::Matchers::WithinAbs(5.005, 1e-6));
        CHECK(a->state.velocity.x == 1.0f); // from the earlier sample
        CHECK(a->state.sim_time_us == 1'005'000);
    }
    SECTION("outside the window is flagged extrapolated") {
        auto before = buf.at(900'000);
        REQUIRE(before.has_value());
        CHECK(before->extrapolated);
        auto after = buf.at(2'000'000);
        REQUIRE(after.has_value());
        CHECK(after->extrapolated);
        CHECK(after->state.position.x == 5.01f); // nearest available
    }
}

TEST_CASE("constant-velocity interpolation is exact at every query point") {
    StateBuffer buf(10'000'000);
    for (int k = 0; k <= 100; ++k)
        buf.push(state_at(1, static_cast<std::uint64_t>(k) * 10'000,
                          {static_cast<float>(k) * 0.01f, 0, 0}, {1, 0, 0}));
    for (std::uint64_t t = 0; t <= 1'000'000; t += 3'333) {
        auto a = buf.at(t);
        REQUIRE(a.has_value());
        const double expected = static_cast<double>(t) * 1e-6; // 1 m/s
        REQUIRE_THAT(a->state.position.x, Catch::Matchers::WithinAbs(expected, 1e-5));
    }
}

TEST_CASE("ground truth buffers ingest batches and align worlds") {
    GroundTruthBuffers buffers(10'000'000);
    buffers.set_kind(1, {EntityClass::Vehicle, 2.0f, 0.9f, 1.5f});
    buffers.set_kind(2, {EntityClass::Pedestrian, 0.3f, 0.3f, 1.7f});
    REQUIRE_FALSE(buffers.align(0).has_value()); // empty: alignment unavailable

    REQUIRE(buffers.ingest({state_at(1, 10'000, {1, 0, 0}), state_at(2, 10'000, {50, 5, 0})}) == 0);
    REQUIRE(buffers.ingest({state_at(1, 20'000, {2, 0, 0})}) == 0);
    REQUIRE(buffers.ingest({state_at(1, 15'000, {9, 9, 9})}) == 1); // out of order

    auto world = buffers.align(20'000);
    REQUIRE(world.has_value());
    REQUIRE(world->entities.size() == 2);
    CHECK(world->entities[0].state.position.x == 2.0f);
    CHECK(world->entities[0].kind.cls == EntityClass::Vehicle);
    CHECK(world->entities[1].kind.cls == EntityClass::Pedestrian);
}

TEST_CASE("derived-state criterion follows the table") {
    MatchCriteria criteria;
    const auto t = 1'000'000ull;

    // vehicle overlapping a pedestrian: ground truth Collision
    auto collision_world =
        world_with({vehicle_snap({0, 0, 0}, {8, 0, 0}), ped_snap(2, {1.0f, 0, 0})}, t);
    // pedestrian inside the stopping envelope: CollisionPossible
    auto possible_world =
        world_with({vehicle_snap({0, 0, 0}, {8, 0, 0}), ped_snap(2, {6.0f, 0, 0})}, t);
    // empty road: Safe
    auto safe_world = world_with({vehicle_snap({0, 0, 0}, {8, 0, 0})}, t);

    auto has_derived = [&](const AlignedWorld& w, DerivedState s) {
        auto findings = evaluate(report_at(t, s), w, criteria);
        for (const auto& f : findings)
            if (f.criterion == CriterionTag::DerivedState) return true;
        return false;
    };

    CHECK(has_derived(collision_world, DerivedState::SafeToDrive));
    CHECK(has_derived(possible_world, DerivedState::SafeToDrive));
    CHECK(has_derived(collision_world, DerivedState::SlowDown));
    CHECK_FALSE(has_derived(possible_world, DerivedState::SlowDown));
    CHECK_FALSE(has_derived(collision_world, DerivedState::Stop)); // Stop never mismatches
    CHECK_FALSE(has_derived(safe_world, DerivedState::SafeToDrive));
    CHECK_FALSE(has_derived(safe_world, DerivedState::Stop));
}

TEST_CASE("position criterion: tolerance, misses, class gating") {
    MatchCriteria criteria; // tolerance 2 m, corridor 2 m, range 15 m
    const auto t = 1'000'000ull;
    auto world = world_with({vehicle_snap({0, 0, 0}, {8, 0, 0}), ped_snap(2, {12.8f, 0.5f, 0})}, t);

    auto report_with_estimate = [&](Vec3 est_pos, EntityClass cls) {
        auto r = report_at(t, DerivedState::SlowDown);
        r.estimates.push_back({cls, planar_norm(est_pos), 0.0f, est_pos, 0.9f});
        return r;
    };

    SECTION("0.8 m error is inside the 2 m tolerance") {
        auto findings =
            evaluate(report_with_estimate({12.0f, 0.5f, 0}, EntityClass::Pedestrian), world, criteria);
        CHECK(findings.empty());
    }
    SECTION("beyond tolerance is a finding") {
        auto findings =
            evaluate(report_with_estimate({14.5f, 3.0f, 0}, EntityClass::Pedestrian), world, criteria);
        bool position = false;
        for (const auto& f : findings) position = position || f.criterion == CriterionTag::Position;
        CHECK(position);
    }
    SECTION("an unmatched in-corridor entity is a missed object") {
        auto r = report_at(t, DerivedState::SafeToDrive); // no estimates at all
        auto findings = evaluate(r, world, criteria);
        bool missed = false;
        for (const auto& f : findings)
            missed = missed ||
                     (f.criterion == CriterionTag::Position &&
                      f.detail.find("not matched") != std::string::npos);
        CHECK(missed);
    }
    SECTION("out-of-corridor entities are not required to be seen") {
        auto far_world =
            world_with({vehicle_snap({0, 0, 0}, {8, 0, 0}), ped_snap(2, {12.8f, 6.0f, 0})}, t);
        auto r = report_at(t, DerivedState::SafeToDrive);
        CHECK(evaluate(r, far_world, criteria).empty());
    }
    SECTION("class gating blocks cross-class matches") {
        auto findings =
            evaluate(report_with_estimate({12.8f, 0.5f, 0}, EntityClass::Vehicle), world, criteria);
        // the Vehicle estimate cannot match the Pedestrian, which is then missed
        bool missed = false;
        for (const auto& f : findings)
            missed = missed || f.detail.find("not matched") != std::string::npos;
        CHECK(missed);
        MatchCriteria lax = criteria;
        lax.class_must_match = false;
        CHECK(evaluate(report_with_estimate({12.8f, 0.5f, 0}, EntityClass::Vehicle), world, lax)
                  .empty());
    }
}

TEST_CASE("staleness criterion and clock domains") {
    MatchCriteria criteria; // threshold 100 ms
    auto r = report_at(1'000'000, DerivedState::SafeToDrive);
    auto world = world_with({vehicle_snap({0, 0, 0}, {1, 0, 0})}, 1'000'000);

    r.t_render_us = 1'000'000;
    r.t_estimate_us = 1'150'000; // 150 ms
    auto findings = evaluate(r, world, criteria);
    REQUIRE(findings.size() == 1);
    CHECK(findings[0].criterion == CriterionTag::Staleness);
    CHECK_THAT(findings[0].magnitude, Catch::Matchers::WithinAbs(150.0, 1e-6));

    r.t_estimate_us = 1'050'000; // 50 ms: fine
    CHECK(evaluate(r, world, criteria).empty());

    r.t_estimate_us = 1'150'000;
    MatchCriteria split_clock = criteria;
    split_clock.assume_shared_clock = false; // cross-host timestamps: skip
    CHECK(evaluate(r, world, split_clock).empty());
}

TEST_CASE("criteria files parse and override the defaults") {
    const char* text = R"(
position_tolerance_m = 3.5
staleness_threshold_ms = 250
debounce_s = 1
class_must_match = false
enable = derived_state staleness
table = SafeToDrive Collision mismatch
)";
    auto c = parse_criteria(text);
    CHECK(c.position_tolerance_m == 3.5);
    CHECK(c.staleness_threshold_ms == 250.0);
    CHECK(c.debounce_s == 1.0);
    CHECK_FALSE(c.class_must_match);
    CHECK_FALSE(c.enable_position);
    CHECK(c.enable_derived_state);
    // explicit table: only the listed pair mismatches
    CHECK(c.mismatch(DerivedState::SafeToDrive, GroundTruthHazard::Collision));
    CHECK_FALSE(c.mismatch(DerivedState::SafeToDrive, GroundTruthHazard::CollisionPossible));

    REQUIRE_THROWS_WITH(parse_criteria("bogus\n"), Catch::Matchers::ContainsSubstring("key = value"));
    REQUIRE_THROWS_WITH(parse_criteria("table = Stop Weird mismatch\n"),
                        Catch::Matchers::ContainsSubstring("unknown hazard"));
    REQUIRE_THROWS_WITH(parse_criteria("position_tolerance_m = -1\n"),
                        Catch::Matchers::ContainsSubstring("must be > 0"));
}

TEST_CASE("mismatch records round-trip byte-identically") {
    MismatchRecord rec;
    rec.record_id = 3;
    rec.criterion = CriterionTag::DerivedState;
    rec.detail = "SafeToDrive vs CollisionPossible";
    rec.sim_time_us = 7'950'000;
    rec.client_id = 1;
    rec.entity_id = 1;
    rec.timing = {1000, 51'000, 52'000};
    rec.scenario_name = "ped-crossing";
    rec.seed = 42;
    rec.manifest = {{1, EntityClass::Vehicle, 2.0f, 0.9f, 1.5f, 1},
                    {2, EntityClass::Pedestrian, 0.3f, 0.3f, 1.7f, 0}};
    std::vector<EntityState> vehicle_states;
    for (int k = 0; k < 100; ++k)
        vehicle_states.push_back(
            state_at(1, static_cast<std::uint64_t>(k) * 10'000, {static_cast<float>(k), 0, 0}));
    rec.gt_window.emplace_back(1, vehicle_states);
    rec.gt_window.emplace_back(2, std::vector<EntityState>{state_at(2, 0, {50, 5, 0})});
    auto rep = report_at(7'950'000, DerivedState::SafeToDrive);
    rep.estimates.push_back({EntityClass::Pedestrian, 12.0f, -0.05f, {60, 1, 0}, 0.92f});
    rec.estimate_window = {rep};

    const auto bytes = encode_mismatch_record(rec);
    const auto back = decode_mismatch_record(bytes);
    CHECK(back.record_id == 3);
    CHECK(back.detail == rec.detail);
    CHECK(back.manifest.size() == 2);
    REQUIRE(back.gt_window.size() == 2);
    CHECK(back.gt_window[0].second.size() == 100);
    CHECK(encode_mismatch_record(back) == bytes); // byte-identical round trip
    CHECK(back.gt_span_us() == 990'000);

    SECTION("log writer/reader round trip with index") {
        namespace fs = std::filesystem;
        const auto dir = fs::temp_directory_path() / "ccsim-storage-test";
        fs::remove_all(dir);
        fs::create_directories(dir);
        MismatchLogWriter writer(dir.string());
        REQUIRE(writer.append(rec));
        auto rec2 = rec;
        rec2.record_id = 4;
        rec2.criterion = CriterionTag::Staleness;
        REQUIRE(writer.append(rec2));

        auto log = read_mismatch_log((dir / "mismatches.bin").string());
        REQUIRE_FALSE(log.truncated);
        REQUIRE(log.records.size() == 2);
        CHECK(encode_mismatch_record(log.records[0]) == bytes);
        CHECK(log.records[1].criterion == CriterionTag::Staleness);

        std::ifstream idx(dir / "mismatches.index");
        std::string line1, line2;
        std::getline(idx, line1);
        std::getline(idx, line2);
        CHECK_THAT(line1, Catch::Matchers::ContainsSubstring("criterion=derived_state"));
        CHECK_THAT(line1, Catch::Matchers::ContainsSubstring("scenario=ped-crossing"));
        CHECK_THAT(line2, Catch::Matchers::ContainsSubstring("record=4"));

        SECTION("a truncated log reads partially with a warning flag") {
            auto path = dir / "mismatches.bin";
            const auto full = fs::file_size(path);
            fs::resize_file(path, full - 17);
            auto partial = read_mismatch_log(path.string());
            CHECK(partial.truncated);
            REQUIRE(partial.records.size() == 1);
        }
        fs::remove_all(dir);
    }
}
