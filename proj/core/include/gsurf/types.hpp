#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace gsurf {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;

// All failures surface as this exception; the CLI turns it into a message + exit code.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

inline void check(bool cond, const std::string& msg) {
  if (!cond) throw Error(msg);
}

// Axis-aligned box; used to normalize positions into [0,1]^3.
struct Box3 {
  Vec3 lo = Vec3::Zero();
  Vec3 hi = Vec3::Ones();

  Vec3 extent() const { return hi - lo; }
  bool valid() const { return (hi.array() > lo.array()).all(); }
};

}  // namespace gsurf
