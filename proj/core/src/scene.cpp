#include "gsurf/scene.hpp"

#include "gsurf/serialize.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>

namespace gsurf {

namespace {

using nlohmann::json;

Mat3 axis_angle(const Vec3& k, double theta) {
  const double c = std::cos(theta), s = std::sin(theta);
  Mat3 kx;
  kx << 0, -k.z(), k.y(), k.z(), 0, -k.x(), -k.y(), k.x(), 0;
  return c * Mat3::Identity() + s * kx + (1.0 - c) * (k * k.transpose());
}

Mat3 axis_angle_dtheta(const Vec3& k, double theta) {
  const double c = std::cos(theta), s = std::sin(theta);
  Mat3 kx;
  kx << 0, -k.z(), k.y(), k.z(), 0, -k.x(), -k.y(), k.x(), 0;
  return -s * Mat3::Identity() + c * kx + s * (k * k.transpose());
}

}  // namespace

Residuals Residuals::zeros(std::size_t n) {
  Residuals r;
  r.dp.assign(n, Vec3::Zero());
  r.ds.assign(n, Vec2::Zero());
  r.dr.assign(n, Vec3::Zero());
  r.malpha.assign(n, 1.0);
  return r;
}

DeformedGrads DeformedGrads::zeros(std::size_t n) {
  DeformedGrads g;
  g.p.assign(n, Vec3::Zero());
  g.tu.assign(n, Vec3::Zero());
  g.tv.assign(n, Vec3::Zero());
  g.s.assign(n, Vec2::Zero());
  g.alpha.assign(n, 0.0);
  ShCoeffs zero{};
  g.sh.assign(n, zero);
  return g;
}

SurfelScene init_scene(const TriangleMesh& mesh, const SceneInitConfig& config) {
  check(config.init_opacity >= 0.0 && config.init_opacity <= 1.0,
        "init_scene: init_opacity must be in [0, 1]");
  const auto surfels = fractal_densify(mesh, config.densify_depth);

  SurfelScene scene;
  scene.sh_degree = sh_basis_count(config.sh_degree) > 0 ? config.sh_degree : 3;
  scene.densify_depth = config.densify_depth;
  const std::size_t n = surfels.size();
  scene.base_p.reserve(n);
  scene.base_tu.reserve(n);
  scene.base_tv.reserve(n);
  scene.base_s.reserve(n);
  for (const auto& s : surfels) {
    scene.base_p.push_back(s.frame.centroid);
    scene.base_tu.push_back(s.frame.t_u);
    scene.base_tv.push_back(s.frame.t_v);
    scene.base_s.push_back(Vec2(s.frame.s1, s.frame.s2));
    scene.face_id.push_back(s.face_id);
    scene.corner_tag.push_back(static_cast<uint8_t>(s.tag));
  }
  scene.delta_p.assign(n, Vec3::Zero());
  scene.delta_s.assign(n, Vec2::Zero());
  scene.delta_r.assign(n, Vec3::Zero());
  scene.opacity.assign(n, config.init_opacity);

  ShCoeffs coeffs{};
  const double dc = 0.5 / kShC0;  // mid-gray
  coeffs[0] = coeffs[1] = coeffs[2] = dc;
  scene.sh.assign(n, coeffs);
  return scene;
}

void reattach_base(SurfelScene& scene, const TriangleMesh& mesh) {
  const auto surfels = fractal_densify(mesh, scene.densify_depth);
  check(surfels.size() == scene.size(),
        "reattach_base: mesh produces " + std::to_string(surfels.size()) +
            " surfels, scene has " + std::to_string(scene.size()));
  for (std::size_t i = 0; i < surfels.size(); ++i) {
    check(surfels[i].face_id == scene.face_id[i] &&
              static_cast<uint8_t>(surfels[i].tag) == scene.corner_tag[i],
          "reattach_base: surfel provenance mismatch (topology changed?)");
    scene.base_p[i] = surfels[i].frame.centroid;
    scene.base_tu[i] = surfels[i].frame.t_u;
    scene.base_tv[i] = surfels[i].frame.t_v;
    scene.base_s[i] = Vec2(surfels[i].frame.s1, surfels[i].frame.s2);
  }
}

Mat3 residual_rotation(const Vec3& tu, const Vec3& tv, const Vec3& dr) {
  const Vec3 n = tu.cross(tv);
  return axis_angle(n, dr[0]) * axis_angle(tv, dr[2]) * axis_angle(tu, dr[1]);
}

DeformedSurfels apply_deformation(const SurfelScene& scene, const Residuals* residuals) {
  const std::size_t n = scene.size();
  Residuals stored;
  if (residuals == nullptr) {
    stored.dp = scene.delta_p;
    stored.ds = scene.delta_s;
    stored.dr = scene.delta_r;
    stored.malpha.assign(n, 1.0);
    residuals = &stored;
  }
  check(residuals->dp.size() == n && residuals->ds.size() == n && residuals->dr.size() == n &&
            residuals->malpha.size() == n,
        "apply_deformation: residual size mismatch");

  DeformedSurfels out;
  out.p.resize(n);
  out.tu.resize(n);
  out.tv.resize(n);
  out.s.resize(n);
  out.alpha.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3& tu = scene.base_tu[i];
    const Vec3& tv = scene.base_tv[i];
    const Vec3 nrm = tu.cross(tv);
    const Vec3& dp = residuals->dp[i];
    out.p[i] = scene.base_p[i] + dp.x() * tu + dp.y() * tv + dp.z() * nrm;
    const Mat3 rot = residual_rotation(tu, tv, residuals->dr[i]);
    out.tu[i] = rot * tu;
    out.tv[i] = rot * tv;
    out.s[i] = (scene.base_s[i] + residuals->ds[i]).cwiseMax(0.0);
    out.alpha[i] = scene.opacity[i] * residuals->malpha[i];
  }
  return out;
}

ResidualGrads apply_deformation_backward(const SurfelScene& scene, const Residuals& residuals,
                                         const DeformedGrads& upstream) {
  const std::size_t n = scene.size();
  check(residuals.dp.size() == n && upstream.p.size() == n,
        "apply_deformation_backward: size mismatch");

  ResidualGrads g;
  g.dp.assign(n, Vec3::Zero());
  g.ds.assign(n, Vec2::Zero());
  g.dr.assign(n, Vec3::Zero());
  g.malpha.assign(n, 0.0);
  g.base_opacity.assign(n, 0.0);

  for (std::size_t i = 0; i < n; ++i) {
    const Vec3& tu = scene.base_tu[i];
    const Vec3& tv = scene.base_tv[i];
    const Vec3 nrm = tu.cross(tv);

    // p' = p + [tu tv n] dp
    const Vec3& gp = upstream.p[i];
    g.dp[i] = Vec3(gp.dot(tu), gp.dot(tv), gp.dot(nrm));

    // s' = max(s + ds, 0): subgradient 0 where clamped
    for (int k = 0; k < 2; ++k) {
      if (scene.base_s[i][k] + residuals.ds[i][k] > 0.0) g.ds[i][k] = upstream.s[i][k];
    }

    // alpha' = alpha * malpha
    g.malpha[i] = upstream.alpha[i] * scene.opacity[i];
    g.base_opacity[i] = upstream.alpha[i] * residuals.malpha[i];

    // Rotation chain: R = Rn(psi) Rv(tau_v) Ru(tau_u), axes fixed to base.
    const Vec3& dr = residuals.dr[i];
    const Mat3 ru = axis_angle(tu, dr[1]);
    const Mat3 rv = axis_angle(tv, dr[2]);
    const Mat3 rn = axis_angle(nrm, dr[0]);
    const Mat3 dru = axis_angle_dtheta(tu, dr[1]);
    const Mat3 drv = axis_angle_dtheta(tv, dr[2]);
    const Mat3 drn = axis_angle_dtheta(nrm, dr[0]);

    const Mat3 d_psi = drn * rv * ru;
    const Mat3 d_tau_u = rn * rv * dru;
    const Mat3 d_tau_v = rn * drv * ru;

    const Vec3& gtu = upstream.tu[i];
    const Vec3& gtv = upstream.tv[i];
    g.dr[i][0] = gtu.dot(d_psi * tu) + gtv.dot(d_psi * tv);
    g.dr[i][1] = gtu.dot(d_tau_u * tu) + gtv.dot(d_tau_u * tv);
    g.dr[i][2] = gtu.dot(d_tau_v * tu) + gtv.dot(d_tau_v * tv);
  }
  return g;
}

void save_scene(const std::string& path, const SurfelScene& scene) {
  const std::size_t n = scene.size();
  BinaryWriter w(path);
  w.write_magic("MSRF");
  w.write_u32(1);  // version
  w.write_u64(n);

  auto write_vec3 = [&](const std::vector<Vec3>& v) {
    std::vector<float> buf;
    buf.reserve(v.size() * 3);
    for (const auto& x : v) {
      buf.push_back(static_cast<float>(x.x()));
      buf.push_back(static_cast<float>(x.y()));
      buf.push_back(static_cast<float>(x.z()));
    }
    w.write_f32_array(buf);
  };
  auto write_vec2 = [&](const std::vector<Vec2>& v) {
    std::vector<float> buf;
    buf.reserve(v.size() * 2);
    for (const auto& x : v) {
      buf.push_back(static_cast<float>(x.x()));
      buf.push_back(static_cast<float>(x.y()));
    }
    w.write_f32_array(buf);
  };

  write_vec3(scene.base_p);
  write_vec3(scene.base_tu);
  write_vec3(scene.base_tv);
  write_vec2(scene.base_s);
  write_vec3(scene.delta_p);
  write_vec2(scene.delta_s);
  write_vec3(scene.delta_r);
  {
    std::vector<float> buf(n);
    for (std::size_t i = 0; i < n; ++i) buf[i] = static_cast<float>(scene.opacity[i]);
    w.write_f32_array(buf);
  }
  {
    std::vector<float> buf;
    buf.reserve(n * kShCoeffCount);
    for (const auto& sh : scene.sh) {
      for (double v : sh) buf.push_back(static_cast<float>(v));
    }
    w.write_f32_array(buf);
  }
  w.write_u32_array(scene.face_id);
  w.write_u8_array(scene.corner_tag);
  w.close();

  json meta;
  meta["format"] = "surfel-scene";
  meta["version"] = 1;
  meta["count"] = n;
  meta["sh_degree"] = scene.sh_degree;
  meta["densify_depth"] = scene.densify_depth;
  meta["fields"] = {"base_p[3]",   "base_tu[3]", "base_tv[3]", "base_s[2]",
                    "delta_p[3]",  "delta_s[2]", "delta_r[3]", "opacity[1]",
                    "sh[48]",      "face_id[u32]", "corner_tag[u8]"};
  std::ofstream side(path + ".json");
  check(side.good(), "save_scene: cannot open sidecar " + path + ".json");
  side << meta.dump(2) << "\n";
  check(side.good(), "save_scene: sidecar write failed");
}

SurfelScene load_scene(const std::string& path) {
  BinaryReader r(path);
  r.expect_magic("MSRF");
  const uint32_t version = r.read_u32();
  check(version == 1, "load_scene: unsupported version " + std::to_string(version));
  const std::size_t n = r.read_u64();

  SurfelScene scene;
  auto read_vec3 = [&](std::vector<Vec3>& v) {
    const auto buf = r.read_f32_array(n * 3);
    v.resize(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = Vec3(buf[3 * i], buf[3 * i + 1], buf[3 * i + 2]);
  };
  auto read_vec2 = [&](std::vector<Vec2>& v) {
    const auto buf = r.read_f32_array(n * 2);
    v.resize(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = Vec2(buf[2 * i], buf[2 * i + 1]);
  };

  read_vec3(scene.base_p);
  read_vec3(scene.base_tu);
  read_vec3(scene.base_tv);
  read_vec2(scene.base_s);
  read_vec3(scene.delta_p);
  read_vec2(scene.delta_s);
  read_vec3(scene.delta_r);
  {
    const auto buf = r.read_f32_array(n);
    scene.opacity.assign(buf.begin(), buf.end());
  }
  {
    const auto buf = r.read_f32_array(n * kShCoeffCount);
    scene.sh.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      for (int k = 0; k < kShCoeffCount; ++k) scene.sh[i][k] = buf[i * kShCoeffCount + k];
    }
  }
  scene.face_id = r.read_u32_array(n);
  scene.corner_tag = r.read_u8_array(n);
  check(r.at_end(), "load_scene: trailing bytes in " + path);

  std::ifstream side(path + ".json");
  check(side.good(), "load_scene: missing sidecar " + path + ".json");
  json meta = json::parse(side, nullptr, true);
  check(meta.value("format", "") == "surfel-scene", "load_scene: bad sidecar format field");
  check(meta.value("count", std::size_t(0)) == n, "load_scene: sidecar count mismatch");
  scene.sh_degree = meta.value("sh_degree", 3);
  scene.densify_depth = meta.value("densify_depth", 1);
  return scene;
}

}  // namespace gsurf
