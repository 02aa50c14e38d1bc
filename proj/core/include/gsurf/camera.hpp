#pragma once

#include "gsurf/types.hpp"

#include <string>

namespace gsurf {

// Pinhole camera. Camera frame: +x right, +y down (pixel space), +z forward.
// Pixel (px, py) maps to the ray through ((px+0.5-cx)/fx, (py+0.5-cy)/fy, 1).
struct Camera {
  double fx = 0.0, fy = 0.0;
  double cx = 0.0, cy = 0.0;
  int width = 0, height = 0;
  double near = 0.01, far = 100.0;
  Mat3 rotation = Mat3::Identity();  // world -> camera
  Vec3 translation = Vec3::Zero();

  Vec3 to_camera(const Vec3& p_world) const { return rotation * p_world + translation; }
  Vec3 rotate_to_camera(const Vec3& v_world) const { return rotation * v_world; }
  Vec3 center_world() const { return -rotation.transpose() * translation; }
  Vec3 pixel_ray(double px, double py) const {
    return Vec3((px + 0.5 - cx) / fx, (py + 0.5 - cy) / fy, 1.0);
  }

  void validate() const;
};

// Camera looking from eye toward target; +z forward, +y aligned against
// world up so pixel y grows downward.
Camera make_look_at(const Vec3& eye, const Vec3& target, const Vec3& up, double fx, double fy,
                    int width, int height, double near, double far);

// JSON schema: {fx, fy, cx, cy, world_to_camera: 16 row-major floats,
// width, height, near, far}.
Camera load_camera_json(const std::string& path);
void save_camera_json(const std::string& path, const Camera& cam);

}  // namespace gsurf
