/**
 * Message bodies for all inter-process traffic. Layouts are fixed and
 * documented byte-exactly in docs/wire-protocol.md; the 48-byte state
 * update record is the unit of the ground-truth delta stream.
 */
#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ccsim/geom/camera.hpp"
#include "ccsim/proto/wire.hpp"
#include "ccsim/world/types.hpp"

namespace ccsim {

constexpr size_t kStateRecordBytes = 48; // 384 bits per moving entity
constexpr std::uint32_t kFramePaddingBytes = 230400; // 320 x 240 x 3 bytes

// --- 48-byte ground-truth state record ---------------------------------
// [0..4) entity_id u32 | [4..12) sim_time_us u64 | [12..24) position f32x3
// | [24..36) velocity f32x3 | [36..48) direction f32x3, little-endian.

inline std::array<std::uint8_t, kStateRecordBytes> encode_state_update(const EntityState& s) {
    if (!finite(s.position) || !finite(s.velocity) || !finite(s.direction))
        throw ProtoError("encode_state_update: non-finite component");
    ByteWriter w;
    w.put_u32(s.entity_id);
    w.put_u64(s.sim_time_us);
    for (const Vec3* v : {&s.position, &s.velocity, &s.direction}) {
        w.put_f32(v->x);
        w.put_f32(v->y);
        w.put_f32(v->z);
    }
    std::array<std::uint8_t, kStateRecordBytes> out{};
    std::memcpy(out.data(), w.bytes().data(), kStateRecordBytes);
    return out;
}

inline EntityState decode_state_update(std::span<const std::uint8_t> bytes) {
    if (bytes.size() != kStateRecordBytes)
        throw ProtoError("state update record must be exactly 48 bytes, got " +
                         std::to_string(bytes.size()));
    ByteReader r(bytes);
    EntityState s;
    s.entity_id = r.get_u32();
    s.sim_time_us = r.get_u64();
    for (Vec3* v : {&s.position, &s.velocity, &s.direction}) {
        const size_t off = r.offset();
        v->x = r.get_f32();
        v->y = r.get_f32();
        v->z = r.get_f32();
        if (!finite(*v))
            throw ProtoError("non-finite float in state record at offset " + std::to_string(off));
    }
    return s;
}

// --- message bodies -----------------------------------------------------

enum class HelloRole : std::uint8_t {
    Client = 1,    // client -> server
    GtPush = 2,    // server -> detector ground-truth channel
    Estimate = 3,  // client -> detector estimate channel
    Infer = 4,     // client -> inference service
};

struct ManifestEntry {
    std::uint32_t entity_id = 0;
    EntityClass cls = EntityClass::Vehicle;
    float extent_x = 0.0f;
    float extent_y = 0.0f;
    float real_height = 0.0f;
    std::uint8_t client_controlled = 0;
};

struct HelloMsg {
    HelloRole role = HelloRole::Client;
    std::uint32_t client_id = 0;   // Client/Estimate/Infer
    std::uint32_t entity_id = 0;   // Client: requested (0 = assign), Estimate: controlled
    std::uint16_t requested_fps = 0; // Client: 0 = server default
    // GtPush only:
    std::string scenario_name;
    std::uint64_t seed = 0;
    std::uint32_t tick_rate_hz = 0;
    std::vector<ManifestEntry> manifest;
};

struct HelloAck {
    std::uint8_t status = 0; // 0 ok
    std::uint32_t client_id = 0;
    std::uint32_t entity_id = 0;
    std::uint16_t fps = 0;
    std::uint32_t tick_rate_hz = 0;
    std::uint8_t padding_enabled = 0;
    // camera intrinsics + per-class heights the client needs for ranging
    std::uint16_t image_width_px = 0;
    std::uint16_t image_height_px = 0;
    float hfov_rad = 0.0f;
    Vec3 mount;
    float mount_yaw_rad = 0.0f;
    float height_vehicle = 0.0f;
    float height_pedestrian = 0.0f;
    float height_static = 0.0f;
};

struct SensorFrameMsg {
    std::uint64_t frame_id = 0;     // strictly monotone per session
    std::uint64_t sim_time_us = 0;
    std::uint64_t t_render_us = 0;  // server monotonic clock
    CameraPose camera;
    std::vector<ProjectedBox> annotations; // opaque to client decision logic
    std::uint32_t padding_len = 0;         // 0 or 230400
};

struct ControlCmdMsg {
    std::uint64_t frame_id_ref = 0;
    float steering = 0.0f;
    float throttle = 0.0f;
    float brake = 0.0f;
};

struct ControlAck {
    std::uint64_t frame_id_ref = 0;
    std::uint8_t status = 0; // 0 accepted, 1 rejected
};

enum class DerivedState : std::uint8_t { SafeToDrive = 0, SlowDown = 1, Stop = 2 };

inline const char* to_string(DerivedState s) {
    switch (s) {
        case DerivedState::SafeToDrive: return "SafeToDrive";
        case DerivedState::SlowDown: return "SlowDown";
        case DerivedState::Stop: return "Stop";
    }
    return "?";
}

struct ObjectEstimateWire {
    EntityClass cls = EntityClass::Vehicle;
    float distance_m = 0.0f;
    float bearing_rad = 0.0f;
    Vec3 world_pos;
    float confidence = 0.0f;
};

struct EstimateReportMsg {
    std::uint32_t client_id = 0;
    std::uint32_t entity_id = 0;   // controlled entity
    std::uint64_t frame_id_ref = 0;
    std::uint64_t sim_time_us = 0; // frame simulation time (alignment key)
    DerivedState derived_state = DerivedState::SafeToDrive;
    std::uint64_t t_render_us = 0;   // echoed from the frame
    std::uint64_t t_estimate_us = 0; // stamped when the decision completed
    std::vector<ObjectEstimateWire> estimates;
};

struct InferRequestMsg {
    std::string model_name;
    std::uint64_t frame_id = 0;
    std::uint64_t sim_time_us = 0;
    std::uint64_t t_send_us = 0;
    CameraPose camera;
    std::vector<ProjectedBox> annotations; // forwarded, never inspected by the client
};

enum class InferStatus : std::uint8_t { Ok = 0, Overload = 1, NoModel = 2, WrongKind = 3 };
enum class ModelKind : std::uint8_t { ObjectDetector = 0, SteeringPredictor = 1 };

struct InferResponseMsg {
    std::uint64_t frame_id = 0;
    InferStatus status = InferStatus::Ok;
    std::uint32_t model_version = 0;
    ModelKind kind = ModelKind::ObjectDetector;
    std::uint64_t t_queue_us = 0;   // time spent queued
    std::uint64_t t_service_us = 0; // service duration (>= sampled latency)
    std::vector<Detection> detections; // ObjectDetector
    float steering_rad = 0.0f;         // SteeringPredictor
};

// --- encoders / decoders -------------------------------------------------

namespace wire {

inline void put_vec3(ByteWriter& w, Vec3 v) {
    w.put_f32(v.x);
    w.put_f32(v.y);
    w.put_f32(v.z);
}

inline Vec3 get_vec3(ByteReader& r) {
    Vec3 v;
    v.x = r.get_f32();
    v.y = r.get_f32();
    v.z = r.get_f32();
    return v;
}

inline void put_box(ByteWriter& w, const ProjectedBox& b) {
    w.put_u32(b.entity_id);
    w.put_u8(static_cast<std::uint8_t>(b.cls));
    w.put_u8(b.truncated ? 1 : 0);
    w.put_f32(b.box.u_min);
    w.put_f32(b.box.v_min);
    w.put_f32(b.box.w);
    w.put_f32(b.box.h);
}

inline ProjectedBox get_box(ByteReader& r) {
    ProjectedBox b;
    b.entity_id = r.get_u32();
    b.cls = static_cast<EntityClass>(r.get_u8());
    b.truncated = r.get_u8() != 0;
    b.box.u_min = r.get_f32();
    b.box.v_min = r.get_f32();
    b.box.w = r.get_f32();
    b.box.h = r.get_f32();
    return b;
}

} // namespace wire

inline std::vector<std::uint8_t> encode_hello(const HelloMsg& m) {
    ByteWriter w;
    w.put_u8(static_cast<std::uint8_t>(m.role));
    w.put_u32(m.client_id);
    w.put_u32(m.entity_id);
    w.put_u16(m.requested_fps);
    if (m.role == HelloRole::GtPush) {
        w.put_string8(m.scenario_name);
        w.put_u64(m.seed);
        w.put_u32(m.tick_rate_hz);
        w.put_u16(static_cast<std::uint16_t>(m.manifest.size()));
        for (const auto& e : m.manifest) {
            w.put_u32(e.entity_id);
            w.put_u8(static_cast<std::uint8_t>(e.cls));
            w.put_f32(e.extent_x);
            w.put_f32(e.extent_y);
            w.put_f32(e.real_height);
            w.put_u8(e.client_controlled);
        }
    }
    return w.take();
}

inline HelloMsg decode_hello(std::span<const std::uint8_t> p) {
    ByteReader r(p);
    HelloMsg m;
    m.role = static_cast<HelloRole>(r.get_u8());
    m.client_id = r.get_u32();
    m.entity_id = r.get_u32();
    m.requested_fps = r.get_u16();
    if (m.role == HelloRole::GtPush) {
        m.scenario_name = r.get_string8();
        m.seed = r.get_u64();
        m.tick_rate_hz = r.get_u32();
        const size_t n = r.get_u16();
        for (size_t i = 0; i < n; ++i) {
            ManifestEntry e;
            e.entity_id = r.get_u32();
            e.cls = static_cast<EntityClass>(r.get_u8());
            e.extent_x = r.get_f32();
            e.extent_y = r.get_f32();
            e.real_height = r.get_f32();
            e.client_controlled = r.get_u8();
            m.manifest.push_back(e);
        }
    }
    r.expect_done();
    return m;
}

inline std::vector<std::uint8_t> encode_hello_ack(const HelloAck& m) {
    ByteWriter w;
    w.put_u8(m.status);
    w.put_u32(m.client_id);
    w.put_u32(m.entity_id);
    w.put_u16(m.fps);
    w.put_u32(m.tick_rate_hz);
    w.put_u8(m.padding_enabled);
    w.put_u16(m.image_width_px);
    w.put_u16(m.image_height_px);
    w.put_f32(m.hfov_rad);
    wire::put_vec3(w, m.mount);
    w.put_f32(m.mount_yaw_rad);
    w.put_f32(m.height_vehicle);
    w.put_f32(m.height_pedestrian);
    w.put_f32(m.height_static);
    return w.take();
}

inline HelloAck decode_hello_ack(std::span<const std::uint8_t> p) {
    ByteReader r(p);
    HelloAck m;
    m.status = r.get_u8();
    m.client_id = r.get_u32();
    m.entity_id = r.get_u32();
    m.fps = r.get_u16();
    m.tick_rate_hz = r.get_u32();
    m.padding_enabled = r.get_u8();
    m.image_width_px = r.get_u16();
    m.image_height_px = r.get_u16();
    m.hfov_rad = r.get_f32();
    m.mount = wire::get_vec3(r);
    m.mount_yaw_rad = r.get_f32();
    m.height_vehicle = r.get_f32();
    m.height_pedestrian = r.get_f32();
    m.height_static = r.get_f32();
    r.expect_done();
    return m;
}

inline std::vector<std::uint8_t> encode_sensor_frame(const SensorFrameMsg& m) {
    if (m.padding_len != 0 && m.padding_len != kFramePaddingBytes)
        throw ProtoError("padding_len must be 0 or 230400");
    ByteWriter w;
    w.put_u64(m.frame_id);
    w.put_u64(m.sim_time_us);
    w.put_u64(m.t_render_us);
    wire::put_vec3(w, m.camera.position);
    wire::put_vec3(w, m.camera.heading);
    w.put_u16(static_cast<std::uint16_t>(m.annotations.size()));
    for (const auto& b : m.annotations) wire::put_box(w, b);
    w.put_u32(m.padding_len);
    w.put_zeros(m.padding_len);
    return w.take();
}

inline SensorFrameMsg decode_sensor_frame(std::span<const std::uint8_t> p) {
    ByteReader r(p);
    SensorFrameMsg m;
    m.frame_id = r.get_u64();
    m.sim_time_us = r.get_u64();
    m.t_render_us = r.get_u64();
    m.camera.position = wire::get_vec3(r);
    m.camera.heading = wire::get_vec3(r);
    const size_t n = r.get_u16();
    for (size_t i = 0; i < n; ++i) m.annotations.push_back(wire::get_box(r));
    m.padding_len = r.get_u32();
    if (m.padding_len != 0 && m.padding_len != kFramePaddingBytes)
        throw ProtoError("padding_len must be 0 or 230400");
    r.skip(m.padding_len);
    r.expect_done();
    return m;
}

inline std::vector<std::uint8_t> encode_control_cmd(const ControlCmdMsg& m) {
    ByteWriter w;
    w.put_u64(m.frame_id_ref);
    w.put_f32(m.steering);
    w.put_f32(m.throttle);
    w.put_f32(m.brake);
    return w.take();
}

inline ControlCmdMsg decode_control_cmd(std::span<const std::uint8_t> p) {
    ByteReader r(p);
    ControlCmdMsg m;
    m.frame_id_ref = r.get_u64();
    m.steering = r.get_f32();
    m.throttle = r.get_f32();
    m.brake = r.get_f32();
    r.expect_done();
    return m;
}

inline std::vector<std::uint8_t> encode_control_ack(const ControlAck& m) {
    ByteWriter w;
    w.put_u64(m.frame_id_ref);
    w.put_u8(m.status);
    return w.take();
}

inline ControlAck decode_control_ack(std::span<const std::uint8_t> p) {
    ByteReader r(p);
    ControlAck m;
    m.frame_id_ref = r.get_u64();
    m.status = r.get_u8();
    r.expect_done();
    return m;
}

inline std::vector<std::uint8_t> encode_state_batch(const std::vector<EntityState>& states) {
    ByteWriter w;
    w.put_u32(static_cast<std::uint32_t>(states.size()));
    for (const auto& s : states) {
        auto rec = encode_state_update(s);
        w.put_bytes(rec);
    }
    return w.take();
}

inline std::vector<EntityState> decode_state_batch(std::span<const std::uint8_t> p) {
    ByteReader r(p);
    const std::uint32_t n = r.get_u32();
    std::vector<EntityState> out;
    out.reserve(n);
    for (std::uint32_t i = 0; i < n; ++i) out.push_back(decode_state_update(r.get_bytes(48)));
    r.expect_done();
    return out;
}

inline std::vector<std::uint8_t> encode_estimate_report(const EstimateReportMsg& m) {
    ByteWriter w;
    w.put_u32(m.client_id);
    w.put_u32(m.entity_id);
    w.put_u64(m.frame_id_ref);
    w.put_u64(m.sim_time_us);
    w.put_u8(static_cast<std::uint8_t>(m.derived_state));
    w.put_u64(m.t_render_us);
    w.put_u64(m.t_estimate_us);
    w.put_u16(static_cast<std::uint16_t>(m.estimates.size()));
    for (const auto& e : m.estimates) {
        w.put_u8(static_cast<std::uint8_t>(e.cls));
        w.put_f32(e.distance_m);
        w.put_f32(e.bearing_rad);
        wire::put_vec3(w, e.world_pos);
        w.put_f32(e.confidence);
    }
    return w.take();
}

inline EstimateReportMsg decode_estimate_report(std::span<const std::uint8_t> p) {
    ByteReader r(p);
    EstimateReportMsg m;
    m.client_id = r.get_u32();
    m.entity_id = r.get_u32();
    m.frame_id_ref = r.get_u64();
    m.sim_time_us = r.get_u64();
    m.derived_state = static_cast<DerivedState>(r.get_u8());
    m.t_render_us = r.get_u64();
    m.t_estimate_us = r.get_u64();
    const size_t n = r.get_u16();
    for (size_t i = 0; i < n; ++i) {
        ObjectEstimateWire e;
        e.cls = static_cast<EntityClass>(r.get_u8());
        e.distance_m = r.get_f32();
        e.bearing_rad = r.get_f32();
        e.world_pos = wire::get_vec3(r);
        e.confidence = r.get_f32();
        m.estimates.push_back(e);
    }
    r.expect_done();
    return m;
}

inline std::vector<std::uint8_t> encode_infer_request(const InferRequestMsg& m) {
    ByteWriter w;
    w.put_string8(m.model_name);
    w.put_u64(m.frame_id);
    w.put_u64(m.sim_time_us);
    w.put_u64(m.t_send_us);
    wire::put_vec3(w, m.camera.position);
    wire::put_vec3(w, m.camera.heading);
    w.put_u16(static_cast<std::uint16_t>(m.annotations.size()));
    for (const auto& b : m.annotations) wire::put_box(w, b);
    return w.take();
}

inline InferRequestMsg decode_infer_request(std::span<const std::uint8_t> p) {
    ByteReader r(p);
    InferRequestMsg m;
    m.model_name = r.get_string8();
    m.frame_id = r.get_u64();
    m.sim_time_us = r.get_u64();
    m.t_send_us = r.get_u64();
    m.camera.position = wire::get_vec3(r);
    m.camera.heading = wire::get_vec3(r);
    const size_t n = r.get_u16();
    for (size_t i = 0; i < n; ++i) m.annotations.push_back(wire::get_box(r));
    r.expect_done();
    return m;
}

inline std::vector<std::uint8_t> encode_infer_response(const InferResponseMsg& m) {
    ByteWriter w;
    w.put_u64(m.frame_id);
    w.put_u8(static_cast<std::uint8_t>(m.status));
    w.put_u32(m.model_version);
    w.put_u8(static_cast<std::uint8_t>(m.kind));
    w.put_u64(m.t_queue_us);
    w.put_u64(m.t_service_us);
    if (m.kind == ModelKind::ObjectDetector) {
        w.put_u16(static_cast<std::uint16_t>(m.detections.size()));
        for (const auto& d : m.detections) {
            w.put_u8(static_cast<std::uint8_t>(d.cls));
            w.put_f32(d.confidence);
            w.put_f32(d.box.u_min);
            w.put_f32(d.box.v_min);
            w.put_f32(d.box.w);
            w.put_f32(d.box.h);
        }
    } else {
        w.put_f32(m.steering_rad);
    }
    return w.take();
}

inline InferResponseMsg decode_infer_response(std::span<const std::uint8_t> p) {
    ByteReader r(p);
    InferResponseMsg m;
    m.frame_id = r.get_u64();
    m.status = static_cast<InferStatus>(r.get_u8());
    m.model_version = r.get_u32();
    m.kind = static_cast<ModelKind>(r.get_u8());
    m.t_queue_us = r.get_u64();
    m.t_service_us = r.get_u64();
    if (m.kind == ModelKind::ObjectDetector) {
        const size_t n = r.get_u16();
        for (size_t i = 0; i < n; ++i) {
            Detection d;
            d.cls = static_cast<EntityClass>(r.get_u8());
            d.confidence = r.get_f32();
            d.box.u_min = r.get_f32();
            d.box.v_min = r.get_f32();
            d.box.w = r.get_f32();
            d.box.h = r.get_f32();
            m.detections.push_back(d);
        }
    } else {
        m.steering_rad = r.get_f32();
    }
    r.expect_done();
    return m;
}

} // namespace ccsim
