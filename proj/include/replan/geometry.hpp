#pragma once

#include <array>
#include <cmath>

#include <json.hpp>

namespace replan {

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  friend Vec3 operator+(Vec3 a, Vec3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
  friend Vec3 operator-(Vec3 a, Vec3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
  friend Vec3 operator*(double s, Vec3 v) { return {s * v.x, s * v.y, s * v.z}; }
  friend Vec3 operator-(Vec3 v) { return {-v.x, -v.y, -v.z}; }
  friend bool operator==(const Vec3&, const Vec3&) = default;

  double dot(Vec3 o) const { return x * o.x + y * o.y + z * o.z; }
  double norm() const { return std::sqrt(dot(*this)); }
  bool finite() const { return std::isfinite(x) && std::isfinite(y) && std::isfinite(z); }
};

// Stored in (qx, qy, qz, qw) order.
struct Quaternion {
  double qx = 0.0;
  double qy = 0.0;
  double qz = 0.0;
  double qw = 1.0;

  friend bool operator==(const Quaternion&, const Quaternion&) = default;

  double norm() const { return std::sqrt(qx * qx + qy * qy + qz * qz + qw * qw); }
  Quaternion normalized() const {
    const double n = norm();
    return {qx / n, qy / n, qz / n, qw / n};
  }
};

inline constexpr double kQuaternionNormTolerance = 1e-9;

struct Pose {
  Vec3 position;
  Quaternion orientation;

  friend bool operator==(const Pose&, const Pose&) = default;

  bool valid() const {
    return position.finite() && std::abs(orientation.norm() - 1.0) <= kQuaternionNormTolerance;
  }
};

inline void to_json(nlohmann::json& j, const Vec3& v) { j = nlohmann::json::array({v.x, v.y, v.z}); }
inline void from_json(const nlohmann::json& j, Vec3& v) {
  v = {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()};
}

inline void to_json(nlohmann::json& j, const Quaternion& q) {
  j = nlohmann::json::array({q.qx, q.qy, q.qz, q.qw});
}
inline void from_json(const nlohmann::json& j, Quaternion& q) {
  q = {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>(), j.at(3).get<double>()};
}

inline void to_json(nlohmann::json& j, const Pose& p) {
  j = nlohmann::json{{"position", p.position}, {"orientation", p.orientation}};
}
inline void from_json(const nlohmann::json& j, Pose& p) {
  p.position = j.at("position").get<Vec3>();
  p.orientation = j.at("orientation").get<Quaternion>();
}

}  // namespace replan
