#include "gsurf/camera.hpp"

#include <nlohmann/json.hpp>

#include <fstream>

namespace gsurf {

using nlohmann::json;

void Camera::validate() const {
  check(fx > 0.0 && fy > 0.0, "camera: focal lengths must be positive");
  check(width > 0 && height > 0, "camera: image size must be positive");
  check(near > 0.0 && near < far, "camera: need 0 < near < far");
  const Mat3 rtr = rotation.transpose() * rotation;
  check((rtr - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-8,
        "camera: world_to_camera rotation is not orthonormal");
}

Camera make_look_at(const Vec3& eye, const Vec3& target, const Vec3& up, double fx, double fy,
                    int width, int height, double near, double far) {
  const Vec3 z = (target - eye).normalized();
  Vec3 x = z.cross(up);
  check(x.norm() > 1e-12, "make_look_at: up is parallel to the view direction");
  x.normalize();
  const Vec3 y = z.cross(x);
  Camera cam;
  cam.rotation.row(0) = x;
  cam.rotation.row(1) = y;
  cam.rotation.row(2) = z;
  cam.translation = -cam.rotation * eye;
  cam.fx = fx;
  cam.fy = fy;
  cam.cx = 0.5 * width;
  cam.cy = 0.5 * height;
  cam.width = width;
  cam.height = height;
  cam.near = near;
  cam.far = far;
  cam.validate();
  return cam;
}

Camera load_camera_json(const std::string& path) {
  std::ifstream in(path);
  check(in.good(), "load_camera_json: cannot open " + path);
  json j = json::parse(in, nullptr, true);
  for (const char* key : {"fx", "fy", "cx", "cy", "world_to_camera", "width", "height",
                          "near", "far"}) {
    check(j.contains(key), "load_camera_json: missing field '" + std::string(key) + "' in " + path);
  }
  Camera cam;
  cam.fx = j["fx"].get<double>();
  cam.fy = j["fy"].get<double>();
  cam.cx = j["cx"].get<double>();
  cam.cy = j["cy"].get<double>();
  cam.width = j["width"].get<int>();
  cam.height = j["height"].get<int>();
  cam.near = j["near"].get<double>();
  cam.far = j["far"].get<double>();
  const auto& m = j["world_to_camera"];
  check(m.is_array() && m.size() == 16, "load_camera_json: world_to_camera must be 16 floats");
  Mat4 w2c;
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) w2c(r, c) = m[4 * r + c].get<double>();
  }
  cam.rotation = w2c.topLeftCorner<3, 3>();
  cam.translation = w2c.topRightCorner<3, 1>();
  cam.validate();
  return cam;
}

void save_camera_json(const std::string& path, const Camera& cam) {
  json j;
  j["fx"] = cam.fx;
  j["fy"] = cam.fy;
  j["cx"] = cam.cx;
  j["cy"] = cam.cy;
  j["width"] = cam.width;
  j["height"] = cam.height;
  j["near"] = cam.near;
  j["far"] = cam.far;
  Mat4 w2c = Mat4::Identity();
  w2c.topLeftCorner<3, 3>() = cam.rotation;
  w2c.topRightCorner<3, 1>() = cam.translation;
  std::vector<double> flat(16);
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) flat[4 * r + c] = w2c(r, c);
  }
  j["world_to_camera"] = flat;
  std::ofstream out(path);
  check(out.good(), "save_camera_json: cannot open " + path);
  out << j.dump(2) << "\n";
  check(out.good(), "save_camera_json: write failed");
}

}  // namespace gsurf
