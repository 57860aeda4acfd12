#include <catch2/catch_amalgamated.hpp>

#include <cstring>
#include <random>

#include "ccsim/core/rng.hpp"
#include "ccsim/proto/framing.hpp"
#include "ccsim/proto/messages.hpp"

using namespace ccsim;

namespace {

EntityState random_state(KeyedRng& rng) {
    EntityState s;
    s.entity_id = static_cast<std::uint32_t>(rng.next_u64());
    s.sim_time_us = rng.next_u64() >> 16;
    auto rnd = [&] { return static_cast<float>(rng.uniform(-1000.0, 1000.0)); };
    s.position = {rnd(), rnd(), rnd()};
    s.velocity = {rnd(), rnd(), rnd()};
    s.direction = normalized({rnd(), rnd(), rnd()});
    return s;
}

} // namespace

TEST_CASE("state record byte layout") {
    SECTION("all-zero state is 48 zero bytes") {
        EntityState s;
        auto bytes = encode_state_update(s);
        REQUIRE(bytes.size() == 48);
        for (auto b : bytes) REQUIRE(b == 0);
    }
    SECTION("field offsets against a hand-built record") {
        EntityState s;
        s.entity_id = 7;
        s.sim_time_us = 1;
        s.direction = {1.0f, 0, 0};
        auto bytes = encode_state_update(s);

        // independent manual serialization: id @0, time @4, direction @36
        std::uint8_t expected[48] = {0};
        expected[0] = 0x07;
        expected[4] = 0x01;
        expected[36] = 0x00; // IEEE-754 1.0f little-endian = 00 00 80 3F
        expected[37] = 0x00;
        expected[38] = 0x80;
        expected[39] = 0x3F;
        REQUIRE(std::memcmp(bytes.data(), expected, 48) == 0);
    }
    SECTION("position sits at offset 12") {
        EntityState s;
        s.position = {0, -2.0f, 0};
        auto bytes = encode_state_update(s);
        // -2.0f little-endian = 00 00 00 C0 at offset 16 (y component)
        CHECK(bytes[16] == 0x00);
        CHECK(bytes[17] == 0x00);
        CHECK(bytes[18] == 0x00);
        CHECK(bytes[19] == 0xC0);
    }
}

TEST_CASE("state record is exactly 384 bits and round-trips for 1e5 states") {
    KeyedRng rng(42, "proto-fuzz", 0);
    for (int i = 0; i < 100000; ++i) {
        const EntityState s = random_state(rng);
        const auto bytes = encode_state_update(s);
        REQUIRE(bytes.size() * 8 == 384);
        const EntityState back = decode_state_update(bytes);
        REQUIRE(back == s);
    }
}

TEST_CASE("state record error paths") {
    EntityState s;
    SECTION("wrong length") {
        std::vector<std::uint8_t> short_buf(47, 0);
        REQUIRE_THROWS_WITH(decode_state_update(short_buf),
                            Catch::Matchers::ContainsSubstring("48 bytes"));
    }
    SECTION("NaN decode names the offset") {
        s.position = {1, 2, 3};
        auto bytes = encode_state_update(s);
        bytes[12] = 0x00;
        bytes[13] = 0x00;
        bytes[14] = 0xC0;
        bytes[15] = 0x7F; // quiet NaN
        REQUIRE_THROWS_WITH(decode_state_update(bytes),
                            Catch::Matchers::ContainsSubstring("offset 12"));
    }
    SECTION("non-finite encode is refused") {
        s.velocity.y = std::numeric_limits<float>::infinity();
        REQUIRE_THROWS_AS(encode_state_update(s), ProtoError);
    }
}

TEST_CASE("framing basics") {
    SECTION("empty Ack is an 8-byte frame") {
        auto framed = frame_message(MsgType::Ack, {});
        REQUIRE(framed.size() == 8);
        CHECK(framed[0] == 0xC0);
        CHECK(framed[1] == 0xCA);
        CHECK(framed[3] == static_cast<std::uint8_t>(MsgType::Ack));
    }
    SECTION("batch of 3 records has payload 4 + 3*48") {
        std::vector<EntityState> states(3);
        states[0].entity_id = 1;
        states[1].entity_id = 2;
        states[2].entity_id = 3;
        auto payload = encode_state_batch(states);
        REQUIRE(payload.size() == 148);
        auto framed = frame_message(MsgType::StateUpdateBatch, payload);
        REQUIRE(framed.size() == 156);
        auto back = decode_state_batch(payload);
        REQUIRE(back.size() == 3);
        CHECK(back[2].entity_id == 3);
    }
    SECTION("oversize payload is refused") {
        std::vector<std::uint8_t> big(kMaxPayloadLen + 1);
        REQUIRE_THROWS_AS(frame_message(MsgType::Ack, big), ProtoError);
    }
}

TEST_CASE("parser yields identical messages for any read partition") {
    // Build a stream of several messages, then parse it under random splits.
    std::vector<std::vector<std::uint8_t>> payloads;
    std::vector<std::uint8_t> stream;
    KeyedRng rng(3, "split", 0);
    for (int i = 0; i < 25; ++i) {
        std::vector<std::uint8_t> p(static_cast<size_t>(rng.uniform(0.0, 300.0)));
        for (auto& b : p) b = static_cast<std::uint8_t>(rng.next_u64());
        payloads.push_back(p);
        auto framed = frame_message(MsgType::StateUpdateBatch, p);
        stream.insert(stream.end(), framed.begin(), framed.end());
    }

    for (int trial = 0; trial < 50; ++trial) {
        StreamParser parser;
        std::vector<Message> got;
        size_t pos = 0;
        while (pos < stream.size()) {
            const size_t chunk =
                std::min(stream.size() - pos, static_cast<size_t>(rng.uniform(1.0, 67.0)));
            parser.feed(std::span<const std::uint8_t>(stream.data() + pos, chunk));
            pos += chunk;
            while (auto m = parser.next()) got.push_back(std::move(*m));
        }
        REQUIRE(got.size() == payloads.size());
        for (size_t i = 0; i < got.size(); ++i) {
            REQUIRE(got[i].type == MsgType::StateUpdateBatch);
            REQUIRE(got[i].payload == payloads[i]);
        }
        REQUIRE(parser.resyncs() == 0);
    }
}

TEST_CASE("parser resynchronizes after garbage") {
    std::vector<std::uint8_t> stream = {0x13, 0x37, 0xC0, 0x00, 0xFF}; // noise with a magic decoy
    auto good = frame_message(MsgType::Bye, {});
    stream.insert(stream.end(), good.begin(), good.end());

    StreamParser parser;
    parser.feed(stream);
    auto m = parser.next();
    REQUIRE(m.has_value());
    CHECK(m->type == MsgType::Bye);
    CHECK(parser.resyncs() > 0);
}

TEST_CASE("bad version and unknown type are rejected then skipped") {
    auto frame = frame_message(MsgType::Ack, {});
    auto bad_version = frame;
    bad_version[2] = 9;
    auto bad_type = frame;
    bad_type[3] = 0x7F;

    StreamParser parser;
    parser.feed(bad_version);
    parser.feed(bad_type);
    auto good = frame_message(MsgType::Hello, encode_hello(HelloMsg{}));
    parser.feed(good);
    auto m = parser.next();
    REQUIRE(m.has_value());
    CHECK(m->type == MsgType::Hello);
    CHECK(parser.bad_version() == 1);
    CHECK(parser.bad_type() == 1);
}

TEST_CASE("sensor frame carries exactly 230400 padding bytes when enabled") {
    SensorFrameMsg frame;
    frame.frame_id = 5;
    frame.sim_time_us = 123456;
    frame.t_render_us = 999;
    frame.camera.position = {1, 2, 1.4f};
    frame.camera.heading = {1, 0, 0};
    ProjectedBox box;
    box.entity_id = 2;
    box.cls = EntityClass::Pedestrian;
    box.box = {10, 20, 12, 34};
    frame.annotations.push_back(box);

    SECTION("no padding") {
        frame.padding_len = 0;
        auto payload = encode_sensor_frame(frame);
        auto back = decode_sensor_frame(payload);
        CHECK(back.frame_id == 5);
        REQUIRE(back.annotations.size() == 1);
        CHECK(back.annotations[0].box.h == 34.0f);
    }
    SECTION("padding on") {
        frame.padding_len = kFramePaddingBytes;
        auto payload = encode_sensor_frame(frame);
        REQUIRE(payload.size() >= 230400);
        auto back = decode_sensor_frame(payload);
        CHECK(back.padding_len == 230400);
    }
    SECTION("other padding sizes are invalid") {
        frame.padding_len = 5;
        REQUIRE_THROWS_AS(encode_sensor_frame(frame), ProtoError);
    }
}

TEST_CASE("every message type round-trips") {
    SECTION("hello + manifest") {
        HelloMsg m;
        m.role = HelloRole::GtPush;
        m.scenario_name = "ped-crossing";
        m.seed = 42;
        m.tick_rate_hz = 100;
        m.manifest = {{1, EntityClass::Vehicle, 2.0f, 0.9f, 1.5f, 1},
                      {2, EntityClass::Pedestrian, 0.3f, 0.3f, 1.7f, 0}};
        auto back = decode_hello(encode_hello(m));
        CHECK(back.scenario_name == "ped-crossing");
        REQUIRE(back.manifest.size() == 2);
        CHECK(back.manifest[1].real_height == 1.7f);
        CHECK(back.manifest[0].client_controlled == 1);
    }
    SECTION("hello ack") {
        HelloAck m;
        m.client_id = 3;
        m.entity_id = 1;
        m.fps = 20;
        m.tick_rate_hz = 100;
        m.image_width_px = 320;
        m.image_height_px = 240;
        m.hfov_rad = 1.5707963f;
        m.mount = {1.0f, 0.0f, 1.4f};
        m.height_pedestrian = 1.7f;
        auto back = decode_hello_ack(encode_hello_ack(m));
        CHECK(back.fps == 20);
        CHECK(back.mount.z == 1.4f);
        CHECK(back.height_pedestrian == 1.7f);
    }
    SECTION("control command and ack") {
        ControlCmdMsg m{17, 0.05f, 0.6f, 0.0f};
        auto back = decode_control_cmd(encode_control_cmd(m));
        CHECK(back.frame_id_ref == 17);
        CHECK(back.throttle == 0.6f);
        ControlAck a{17, 1};
        auto aback = decode_control_ack(encode_control_ack(a));
        CHECK(aback.status == 1);
    }
    SECTION("estimate report") {
        EstimateReportMsg m;
        m.client_id = 2;
        m.entity_id = 1;
        m.frame_id_ref = 88;
        m.sim_time_us = 1234567;
        m.derived_state = DerivedState::SlowDown;
        m.t_render_us = 1000;
        m.t_estimate_us = 1050;
        m.estimates = {{EntityClass::Pedestrian, 12.0f, -0.1f, {60, 1, 0}, 0.9f}};
        auto back = decode_estimate_report(encode_estimate_report(m));
        CHECK(back.derived_state == DerivedState::SlowDown);
        REQUIRE(back.estimates.size() == 1);
        CHECK(back.estimates[0].distance_m == 12.0f);
        CHECK(back.t_estimate_us == 1050);
    }
    SECTION("infer request/response") {
        InferRequestMsg m;
        m.model_name = "detector";
        m.frame_id = 4;
        m.sim_time_us = 777;
        m.t_send_us = 888;
        m.camera.position = {0, 0, 1.4f};
        m.camera.heading = {0, 1, 0};
        ProjectedBox box;
        box.entity_id = 9;
        box.box = {5, 6, 7, 8};
        m.annotations.push_back(box);
        auto back = decode_infer_request(encode_infer_request(m));
        CHECK(back.model_name == "detector");
        REQUIRE(back.annotations.size() == 1);
        CHECK(back.annotations[0].box.w == 7.0f);

        InferResponseMsg r;
        r.frame_id = 4;
        r.kind = ModelKind::SteeringPredictor;
        r.steering_rad = -0.2f;
        r.t_service_us = 50123;
        auto rback = decode_infer_response(encode_infer_response(r));
        CHECK(rback.steering_rad == -0.2f);
        CHECK(rback.t_service_us == 50123);

        InferResponseMsg d;
        d.frame_id = 5;
        d.kind = ModelKind::ObjectDetector;
        d.detections = {{EntityClass::Vehicle, 0.8f, {1, 2, 3, 4}}};
        auto dback = decode_infer_response(encode_infer_response(d));
        REQUIRE(dback.detections.size() == 1);
        CHECK(dback.detections[0].box.h == 4.0f);
    }
}
