/**
 * Scenario description files.
 *
 * Newline-delimited key/value pairs grouped into [section] blocks, with
 * bare coordinate rows inside [road]. The full grammar is documented in
 * docs/scenario-format.md. Units: meters, seconds, radians.
 */
#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "ccsim/world/types.hpp"

namespace ccsim {

struct CameraModel {
    int image_width_px = 320;
    int image_height_px = 240;
    float hfov_rad = 1.5707964f; // 90 deg -> focal 160 px at width 320
    Vec3 mount{1.0f, 0.0f, 1.4f}; // vehicle frame: forward, left, up
    float mount_yaw_rad = 0.0f;

    float focal_px() const {
        return (static_cast<float>(image_width_px) / 2.0f) / std::tan(hfov_rad / 2.0f);
    }
};

// Per-class real heights used by box-height ranging.
struct ClassHeights {
    float vehicle = 1.5f;
    float pedestrian = 1.7f;
    float static_obstacle = 1.0f;

    float of(EntityClass c) const {
        switch (c) {
            case EntityClass::Vehicle: return vehicle;
            case EntityClass::Pedestrian: return pedestrian;
            case EntityClass::StaticObstacle: return static_obstacle;
        }
        return 1.5f;
    }
};

// Interval during which the detection model is blind to one class.
struct FaultWindow {
    double t_start_s = 0.0;
    double t_end_s = 0.0;
    EntityClass cls = EntityClass::Pedestrian;
};

struct NoiseModel {
    double p_miss = 0.0;           // per true object
    double p_false = 0.0;          // expected false positives per frame
    double box_jitter_px = 0.0;    // stddev of additive edge noise
    double confidence_noise = 0.0; // stddev
    std::vector<FaultWindow> fault_windows;

    bool blinded(EntityClass c, double sim_time_s) const {
        for (const auto& w : fault_windows)
            if (w.cls == c && sim_time_s >= w.t_start_s && sim_time_s < w.t_end_s) return true;
        return false;
    }
};

enum class ScriptType : std::uint8_t { ClientControlled = 0, Static = 1, Waypoints = 2 };

struct Waypoint {
    Vec3 pos;
    double depart_s = -1.0; // hold at this waypoint until depart_s; -1 = no hold
};

struct EntityScript {
    ScriptType type = ScriptType::Static;
    double speed_mps = 0.0; // waypoint-following speed
    std::vector<Waypoint> waypoints;
};

struct ScenarioEntity {
    EntityKind kind;
    EntityState initial;
    EntityScript script;
};

struct Scenario {
    std::string name = "unnamed";
    std::uint64_t seed = 0;
    std::uint32_t tick_rate_hz = 100;
    std::uint32_t sensor_fps = 20; // max configured sensor rate
    double duration_s = 20.0;
    std::vector<Vec3> road; // drivable centerline
    std::vector<ScenarioEntity> entities;
    CameraModel camera;
    ClassHeights heights;
    NoiseModel noise;

    double tick_dt() const { return 1.0 / static_cast<double>(tick_rate_hz); }
    std::uint64_t total_ticks() const {
        return static_cast<std::uint64_t>(std::llround(duration_s * tick_rate_hz));
    }

    const ScenarioEntity* find_entity(std::uint32_t id) const {
        for (const auto& e : entities)
            if (e.initial.entity_id == id) return &e;
        return nullptr;
    }
};

class ScenarioError : public std::runtime_error {
public:
    ScenarioError(int line, const std::string& what)
        : std::runtime_error("scenario:" + std::to_string(line) + ": " + what), line_(line) {}
    explicit ScenarioError(const std::string& what)
        : std::runtime_error("scenario: " + what), line_(0) {}
    int line() const { return line_; }

private:
    int line_;
};

namespace detail {

inline std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_ws(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream is(s);
    std::string tok;
    while (is >> tok) out.push_back(tok);
    return out;
}

inline double parse_num(const std::string& s, int line) {
    try {
        size_t pos = 0;
        double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ScenarioError(line, "expected a number, got '" + s + "'");
    }
}

inline EntityClass parse_class(const std::string& s, int line) {
    if (s == "Vehicle") return EntityClass::Vehicle;
    if (s == "Pedestrian") return EntityClass::Pedestrian;
    if (s == "StaticObstacle") return EntityClass::StaticObstacle;
    throw ScenarioError(line, "unknown entity class '" + s + "'");
}

inline Vec3 parse_vec3(const std::vector<std::string>& toks, int line, size_t off = 0) {
    if (toks.size() < off + 3) throw ScenarioError(line, "expected three coordinates");
    return {static_cast<float>(parse_num(toks[off], line)),
            static_cast<float>(parse_num(toks[off + 1], line)),
            static_cast<float>(parse_num(toks[off + 2], line))};
}

} // namespace detail

// Parses and validates scenario text. Throws ScenarioError with the
// offending line number on parse failures, or the violated invariant by
// name on validation failures.
inline Scenario parse_scenario(const std::string& text) {
    using namespace detail;
    Scenario sc;
    sc.entities.clear();

    std::string section;
    ScenarioEntity* cur_entity = nullptr;
    bool entity_has_script = false;

    std::istringstream in(text);
    std::string raw;
    int line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        std::string line = raw;
        if (auto hash = line.find('#'); hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;

        if (line.front() == '[') {
            if (line.back() != ']') throw ScenarioError(line_no, "unterminated section header");
            if (cur_entity && !entity_has_script)
                throw ScenarioError(line_no, "entity without a script entry");
            section = line.substr(1, line.size() - 2);
            cur_entity = nullptr;
            if (section == "entity") {
                sc.entities.emplace_back();
                cur_entity = &sc.entities.back();
                cur_entity->initial.direction = {1.0f, 0.0f, 0.0f};
                entity_has_script = false;
            } else if (section != "scenario" && section != "road" && section != "camera" &&
                       section != "heights" && section != "noise") {
                throw ScenarioError(line_no, "unknown section [" + section + "]");
            }
            continue;
        }

        if (section.empty()) throw ScenarioError(line_no, "content before any [section]");

        if (section == "road") {
            sc.road.push_back(parse_vec3(split_ws(line), line_no));
            continue;
        }

        auto eq = line.find('=');
        if (eq == std::string::npos) throw ScenarioError(line_no, "expected key = value");
        std::string key = trim(line.substr(0, eq));
        std::string val = trim(line.substr(eq + 1));
        auto toks = split_ws(val);

        if (section == "scenario") {
            if (key == "name") sc.name = val;
            else if (key == "seed") sc.seed = static_cast<std::uint64_t>(parse_num(val, line_no));
            else if (key == "tick_rate_hz") sc.tick_rate_hz = static_cast<std::uint32_t>(parse_num(val, line_no));
            else if (key == "sensor_fps") sc.sensor_fps = static_cast<std::uint32_t>(parse_num(val, line_no));
            else if (key == "duration_s") sc.duration_s = parse_num(val, line_no);
            else throw ScenarioError(line_no, "unknown scenario key '" + key + "'");
        } else if (section == "camera") {
            if (key == "image_width_px") sc.camera.image_width_px = static_cast<int>(parse_num(val, line_no));
            else if (key == "image_height_px") sc.camera.image_height_px = static_cast<int>(parse_num(val, line_no));
            else if (key == "hfov_rad") sc.camera.hfov_rad = static_cast<float>(parse_num(val, line_no));
            else if (key == "mount") sc.camera.mount = parse_vec3(toks, line_no);
            else if (key == "mount_yaw_rad") sc.camera.mount_yaw_rad = static_cast<float>(parse_num(val, line_no));
            else throw ScenarioError(line_no, "unknown camera key '" + key + "'");
        } else if (section == "heights") {
            float h = static_cast<float>(parse_num(val, line_no));
            switch (parse_class(key, line_no)) {
                case EntityClass::Vehicle: sc.heights.vehicle = h; break;
                case EntityClass::Pedestrian: sc.heights.pedestrian = h; break;
                case EntityClass::StaticObstacle: sc.heights.static_obstacle = h; break;
            }
        } else if (section == "noise") {
            if (key == "p_miss") sc.noise.p_miss = parse_num(val, line_no);
            else if (key == "p_false") sc.noise.p_false = parse_num(val, line_no);
            else if (key == "box_jitter_px") sc.noise.box_jitter_px = parse_num(val, line_no);
            else if (key == "confidence_noise") sc.noise.confidence_noise = parse_num(val, line_no);
            else if (key == "fault_window") {
                if (toks.size() != 3) throw ScenarioError(line_no, "fault_window wants: t_start t_end class");
                FaultWindow w;
                w.t_start_s = parse_num(toks[0], line_no);
                w.t_end_s = parse_num(toks[1], line_no);
                w.cls = parse_class(toks[2], line_no);
                sc.noise.fault_windows.push_back(w);
            } else throw ScenarioError(line_no, "unknown noise key '" + key + "'");
        } else if (section == "entity") {
            if (!cur_entity) throw ScenarioError(line_no, "entity key outside [entity]");
            ScenarioEntity& e = *cur_entity;
            if (key == "id") e.initial.entity_id = static_cast<std::uint32_t>(parse_num(val, line_no));
            else if (key == "kind") e.kind.cls = parse_class(val, line_no);
            else if (key == "extent") {
                if (toks.size() != 2) throw ScenarioError(line_no, "extent wants: half_length half_width");
                e.kind.extent_x = static_cast<float>(parse_num(toks[0], line_no));
                e.kind.extent_y = static_cast<float>(parse_num(toks[1], line_no));
            } else if (key == "real_height") e.kind.real_height = static_cast<float>(parse_num(val, line_no));
            else if (key == "position") e.initial.position = parse_vec3(toks, line_no);
            else if (key == "velocity") e.initial.velocity = parse_vec3(toks, line_no);
            else if (key == "direction") e.initial.direction = parse_vec3(toks, line_no);
            else if (key == "script") {
                if (entity_has_script) throw ScenarioError(line_no, "duplicate script entry for entity");
                entity_has_script = true;
                if (val == "client") e.script.type = ScriptType::ClientControlled;
                else if (val == "static") e.script.type = ScriptType::Static;
                else if (!toks.empty() && toks[0] == "waypoints") {
                    if (toks.size() != 2) throw ScenarioError(line_no, "script waypoints wants a speed");
                    e.script.type = ScriptType::Waypoints;
                    e.script.speed_mps = parse_num(toks[1], line_no);
                } else throw ScenarioError(line_no, "unknown script '" + val + "'");
            } else if (key == "waypoint") {
                Waypoint w;
                w.pos = parse_vec3(toks, line_no);
                if (toks.size() >= 4) {
                    const std::string& t = toks[3];
                    if (t.rfind("depart=", 0) != 0)
                        throw ScenarioError(line_no, "waypoint extra field must be depart=T");
                    w.depart_s = parse_num(t.substr(7), line_no);
                }
                e.script.waypoints.push_back(w);
            } else throw ScenarioError(line_no, "unknown entity key '" + key + "'");
        }
    }
    if (cur_entity && !entity_has_script) throw ScenarioError(line_no, "entity without a script entry");

    // --- validation ---
    if (sc.tick_rate_hz == 0) throw ScenarioError("invariant: tick_rate_hz must be positive");
    if (sc.tick_rate_hz < 2 * sc.sensor_fps)
        throw ScenarioError("invariant: tick_rate_hz >= 2 x sensor_fps violated (" +
                            std::to_string(sc.tick_rate_hz) + " < 2 x " +
                            std::to_string(sc.sensor_fps) + ")");
    if (sc.road.size() < 2) throw ScenarioError("invariant: road needs at least 2 waypoints");
    if (sc.duration_s <= 0.0) throw ScenarioError("invariant: duration_s must be positive");
    if (!(sc.camera.hfov_rad > 0.0f && sc.camera.hfov_rad < 3.14159265f))
        throw ScenarioError("invariant: hfov_rad must be in (0, pi)");
    if (sc.noise.p_miss < 0.0 || sc.noise.p_miss > 1.0)
        throw ScenarioError("invariant: p_miss must be in [0,1]");
    if (sc.noise.p_false < 0.0) throw ScenarioError("invariant: p_false must be >= 0");

    std::vector<std::uint32_t> seen;
    for (const auto& e : sc.entities) {
        for (std::uint32_t id : seen)
            if (id == e.initial.entity_id)
                throw ScenarioError("invariant: duplicate entity id " +
                                    std::to_string(e.initial.entity_id));
        seen.push_back(e.initial.entity_id);
        if (e.kind.extent_x <= 0.0f || e.kind.extent_y <= 0.0f)
            throw ScenarioError("invariant: extent components must be > 0");
        if (e.kind.real_height <= 0.0f)
            throw ScenarioError("invariant: real_height must be > 0");
        const bool moving = e.script.type != ScriptType::Static || norm(e.initial.velocity) > 0.0f;
        if (moving && std::fabs(norm(e.initial.direction) - 1.0f) > 1e-4f)
            throw ScenarioError("invariant: |direction| = 1 required for moving entity " +
                                std::to_string(e.initial.entity_id));
        if (e.script.type == ScriptType::Waypoints) {
            if (e.script.waypoints.empty())
                throw ScenarioError("invariant: waypoint script without waypoints");
            if (e.script.speed_mps <= 0.0)
                throw ScenarioError("invariant: waypoint speed must be > 0");
        }
    }
    return sc;
}

// Serializes a Scenario back into the file grammar (parse round-trip safe).
inline std::string scenario_to_text(const Scenario& sc) {
    std::ostringstream o;
    o.precision(9);
    o << "[scenario]\n"
      << "name = " << sc.name << "\n"
      << "seed = " << sc.seed << "\n"
      << "tick_rate_hz = " << sc.tick_rate_hz << "\n"
      << "sensor_fps = " << sc.sensor_fps << "\n"
      << "duration_s = " << sc.duration_s << "\n\n[road]\n";
    for (const auto& w : sc.road) o << w.x << " " << w.y << " " << w.z << "\n";
    o << "\n[camera]\n"
      << "image_width_px = " << sc.camera.image_width_px << "\n"
      << "image_height_px = " << sc.camera.image_height_px << "\n"
      << "hfov_rad = " << sc.camera.hfov_rad << "\n"
      << "mount = " << sc.camera.mount.x << " " << sc.camera.mount.y << " " << sc.camera.mount.z << "\n"
      << "mount_yaw_rad = " << sc.camera.mount_yaw_rad << "\n";
    o << "\n[heights]\n"
      << "Vehicle = " << sc.heights.vehicle << "\n"
      << "Pedestrian = " << sc.heights.pedestrian << "\n"
      << "StaticObstacle = " << sc.heights.static_obstacle << "\n";
    o << "\n[noise]\n"
      << "p_miss = " << sc.noise.p_miss << "\n"
      << "p_false = " << sc.noise.p_false << "\n"
      << "box_jitter_px = " << sc.noise.box_jitter_px << "\n"
      << "confidence_noise = " << sc.noise.confidence_noise << "\n";
    for (const auto& w : sc.noise.fault_windows)
        o << "fault_window = " << w.t_start_s << " " << w.t_end_s << " " << to_string(w.cls) << "\n";
    for (const auto& e : sc.entities) {
        o << "\n[entity]\n"
          << "id = " << e.initial.entity_id << "\n"
          << "kind = " << to_string(e.kind.cls) << "\n"
          << "extent = " << e.kind.extent_x << " " << e.kind.extent_y << "\n"
          << "real_height = " << e.kind.real_height << "\n"
          << "position = " << e.initial.position.x << " " << e.initial.position.y << " " << e.initial.position.z << "\n"
          << "velocity = " << e.initial.velocity.x << " " << e.initial.velocity.y << " " << e.initial.velocity.z << "\n"
          << "direction = " << e.initial.direction.x << " " << e.initial.direction.y << " " << e.initial.direction.z << "\n";
        switch (e.script.type) {
            case ScriptType::ClientControlled: o << "script = client\n"; break;
            case ScriptType::Static: o << "script = static\n"; break;
            case ScriptType::Waypoints:
                o << "script = waypoints " << e.script.speed_mps << "\n";
                for (const auto& w : e.script.waypoints) {
                    o << "waypoint = " << w.pos.x << " " << w.pos.y << " " << w.pos.z;
                    if (w.depart_s >= 0.0) o << " depart=" << w.depart_s;
                    o << "\n";
                }
                break;
        }
    }
    return o.str();
}

inline Scenario load_scenario_file(const std::string& path);

} // namespace ccsim

#include <fstream>

namespace ccsim {

inline Scenario load_scenario_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ScenarioError("cannot open scenario file '" + path + "'");
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse_scenario(ss.str());
}

} // namespace ccsim
