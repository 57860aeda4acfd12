#pragma once

#include <cmath>

namespace ccsim {

// 32-bit float triple. Position/velocity in meters(/s), z up.
struct Vec3 {
    float x = 0.0f;
    float y = 0.0f;
    float z = 0.0f;

    friend Vec3 operator+(Vec3 a, Vec3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
    friend Vec3 operator-(Vec3 a, Vec3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
    friend Vec3 operator*(Vec3 a, float s) { return {a.x * s, a.y * s, a.z * s}; }
    friend Vec3 operator*(float s, Vec3 a) { return a * s; }
    friend bool operator==(const Vec3& a, const Vec3& b) {
        return a.x == b.x && a.y == b.y && a.z == b.z;
    }
};

inline float dot(Vec3 a, Vec3 b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline float norm(Vec3 a) { return std::sqrt(dot(a, a)); }
inline float planar_norm(Vec3 a) { return std::hypot(a.x, a.y); }
inline float planar_dist(Vec3 a, Vec3 b) { return std::hypot(a.x - b.x, a.y - b.y); }

inline Vec3 normalized(Vec3 a) {
    const float n = norm(a);
    return n > 0.0f ? a * (1.0f / n) : Vec3{1.0f, 0.0f, 0.0f};
}

inline bool finite(Vec3 a) {
    return std::isfinite(a.x) && std::isfinite(a.y) && std::isfinite(a.z);
}

// Unit heading in the ground plane from a yaw angle (CCW from +x).
inline Vec3 heading_from_yaw(float yaw) { return {std::cos(yaw), std::sin(yaw), 0.0f}; }
inline float yaw_from_heading(Vec3 h) { return std::atan2(h.y, h.x); }

// Right-hand lateral axis of a heading: +1 means to the vehicle's right.
inline Vec3 right_of(Vec3 heading) { return {heading.y, -heading.x, 0.0f}; }

} // namespace ccsim
