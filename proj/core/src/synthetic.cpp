#include "gsurf/synthetic.hpp"

#include "gsurf/camera.hpp"
#include "gsurf/image.hpp"
#include "gsurf/mesh.hpp"
#include "gsurf/render.hpp"
#include "gsurf/rng.hpp"
#include "gsurf/scene.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <vector>

namespace gsurf {

namespace fs = std::filesystem;

namespace {

constexpr double kTau = 6.283185307179586476925286766559;

std::string frame_name(int t) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "frame_%03d", t);
  return buf;
}

TriangleMesh make_icosphere(int subdivisions) {
  TriangleMesh mesh = loop_subdivide(make_icosahedron(), subdivisions);
  for (Vec3& v : mesh.vertices) v.normalize();
  return mesh;
}

// Smooth radial wobble; a function of the frame phase only.
TriangleMesh wobble_mesh(const TriangleMesh& base, double amp, double phase) {
  TriangleMesh out = base;
  for (Vec3& v : out.vertices) {
    const double r =
        1.0 + amp * std::sin(4.0 * v.y() + phase) * std::cos(2.0 * v.x() + 0.7);
    v *= r;
  }
  return out;
}

}  // namespace

void make_synthetic(const std::string& out_dir, const SyntheticConfig& cfg) {
  check(cfg.frames >= 2, "make_synthetic: need at least 2 frames");
  check(cfg.width > 0 && cfg.height > 0, "make_synthetic: bad image size");
  check(cfg.theta_dim > 0 && cfg.beta_dim >= 0, "make_synthetic: bad cond dims");

  for (const char* sub : {"frames", "masks", "meshes", "cond", "cameras"})
    fs::create_directories(fs::path(out_dir) / sub);

  const TriangleMesh sphere = make_icosphere(cfg.subdivisions);

  // Conditioning trajectories: smooth sinusoids for theta, constant beta.
  Rng traj_rng(cfg.seed, 11);
  std::vector<double> amp(cfg.theta_dim), phase(cfg.theta_dim);
  std::vector<int> freq(cfg.theta_dim);
  for (int j = 0; j < cfg.theta_dim; ++j) {
    amp[j] = traj_rng.uniform(0.3, 0.9);
    phase[j] = traj_rng.uniform(0.0, kTau);
    freq[j] = 1 + static_cast<int>(traj_rng.uniform_index(2));
  }
  std::vector<double> beta(cfg.beta_dim);
  for (double& b : beta) b = traj_rng.normal(0.0, 0.5);

  // Unit-norm mixing vector: the bump phase responds to every theta entry.
  Rng mix_rng(cfg.seed, 12);
  std::vector<double> mix(cfg.theta_dim);
  double mix_norm = 0.0;
  for (double& m : mix) {
    m = mix_rng.uniform(-1.0, 1.0);
    mix_norm += m * m;
  }
  mix_norm = std::sqrt(mix_norm);
  for (double& m : mix) m /= mix_norm;

  auto theta_at = [&](int t) {
    std::vector<double> theta(cfg.theta_dim);
    for (int j = 0; j < cfg.theta_dim; ++j)
      theta[j] = amp[j] * std::sin(kTau * freq[j] * t / cfg.frames + phase[j]);
    return theta;
  };

  // Ground-truth surfel color: fixed per surfel, derived from the frame-0
  // registration so it is consistent across frames.
  SceneInitConfig init_cfg;
  init_cfg.densify_depth = cfg.densify_depth;
  init_cfg.init_opacity = cfg.gt_opacity;
  const TriangleMesh mesh0 = wobble_mesh(sphere, cfg.wobble_amp, 0.0);
  SurfelScene gt_scene = init_scene(mesh0, init_cfg);
  const std::size_t n = gt_scene.size();
  {
    const double psi[3] = {0.0, 2.1, 4.2};
    const Vec3 axes[3] = {Vec3(1, 0.3, 0.1).normalized(), Vec3(0.2, 1, 0.4).normalized(),
                          Vec3(0.1, 0.5, 1).normalized()};
    for (std::size_t i = 0; i < n; ++i) {
      const Vec3 p = gt_scene.base_p[i];
      ShCoeffs& c = gt_scene.sh[i];
      for (int ch = 0; ch < 3; ++ch) {
        const double tone =
            0.5 + 0.3 * std::sin(cfg.texture_freq * p.dot(axes[ch]) + psi[ch]);
        c[ch] = tone / kShC0;
        // Mild view dependence in the first band.
        for (int k = 1; k < 4; ++k)
          c[static_cast<std::size_t>(k) * 3 + ch] =
              0.12 * std::sin(1.7 * cfg.texture_freq * p[(k + ch) % 3] + k);
      }
    }
  }

  const Vec3 bump_dir = Vec3(0.6, 1.0, 0.3).normalized();
  nlohmann::ordered_json frames_json = nlohmann::ordered_json::array();
  Vec3 box_lo = Vec3::Constant(1e300), box_hi = Vec3::Constant(-1e300);

  for (int t = 0; t < cfg.frames; ++t) {
    const std::string name = frame_name(t);
    const TriangleMesh mesh = wobble_mesh(sphere, cfg.wobble_amp, kTau * t / cfg.frames);
    save_mesh_obj((fs::path(out_dir) / "meshes" / (name + ".obj")).string(), mesh);
    for (const Vec3& v : mesh.vertices) {
      box_lo = box_lo.cwiseMin(v);
      box_hi = box_hi.cwiseMax(v);
    }

    const std::vector<double> theta = theta_at(t);
    double mixed = 0.0;
    for (int j = 0; j < cfg.theta_dim; ++j) mixed += mix[j] * theta[j];

    // Camera: orbit sweep with a slow elevation cycle.
    const double az = (kTau / 360.0) * cfg.orbit_deg *
                      (cfg.frames > 1 ? 2.0 * t / (cfg.frames - 1) - 1.0 : 0.0);
    const double el = (kTau / 360.0) * 0.4 * cfg.orbit_deg *
                      std::cos(kTau * t / cfg.frames);
    const Vec3 eye = cfg.camera_distance *
                     Vec3(std::sin(az) * std::cos(el), std::sin(el),
                          std::cos(az) * std::cos(el));
    const Camera cam = make_look_at(eye, Vec3::Zero(), Vec3(0, 1, 0), cfg.focal,
                                    cfg.focal, cfg.width, cfg.height, 0.01, 100.0);
    save_camera_json((fs::path(out_dir) / "cameras" / (name + ".json")).string(), cam);

    // Ground truth: reattach to this frame's mesh, then push surfels along
    // their normals by the conditioning-driven bump (meshes do not carry it).
    reattach_base(gt_scene, mesh);
    SurfelScene displaced = gt_scene;
    for (std::size_t i = 0; i < n; ++i) {
      const Vec3 nrm = displaced.base_tu[i].cross(displaced.base_tv[i]);
      const double b = cfg.bump_amp *
                       std::sin(5.0 * displaced.base_p[i].dot(bump_dir) + 3.0 * mixed);
      displaced.base_p[i] += b * nrm;
    }
    const RenderBuffers buffers = render(displaced, cam);
    const Image color = buffers.color_image();
    write_png((fs::path(out_dir) / "frames" / (name + ".png")).string(), color);

    Image mask(cfg.width, cfg.height, 1);
    for (std::size_t p = 0; p < buffers.alpha.size(); ++p)
      mask.data[p] = buffers.alpha[p] > 0.5 ? 1.0 : 0.0;
    write_png((fs::path(out_dir) / "masks" / (name + ".png")).string(), mask);

    nlohmann::ordered_json cond;
    cond["theta"] = theta;
    cond["beta"] = beta;
    std::ofstream cf((fs::path(out_dir) / "cond" / (name + ".json")).string());
    check(cf.good(), "make_synthetic: cannot write cond file");
    cf << cond.dump(2) << "\n";
    check(cf.good(), "make_synthetic: failed writing cond file");

    nlohmann::ordered_json fj;
    fj["image"] = "frames/" + name + ".png";
    fj["mask"] = "masks/" + name + ".png";
    fj["mesh"] = "meshes/" + name + ".obj";
    fj["cond"] = "cond/" + name + ".json";
    fj["camera"] = "cameras/" + name + ".json";
    frames_json.push_back(fj);
  }

  // Normalization box: mesh extent plus room for the bump and the residuals.
  const Vec3 margin = Vec3::Constant(0.1 + 2.0 * cfg.bump_amp);
  box_lo -= margin;
  box_hi += margin;

  nlohmann::ordered_json manifest;
  manifest["format"] = "gsurf-dataset";
  manifest["version"] = 1;
  manifest["theta_dim"] = cfg.theta_dim;
  manifest["beta_dim"] = cfg.beta_dim;
  manifest["scene_box"] = {{"lo", {box_lo.x(), box_lo.y(), box_lo.z()}},
                           {"hi", {box_hi.x(), box_hi.y(), box_hi.z()}}};
  manifest["frames"] = frames_json;
  std::ofstream mf((fs::path(out_dir) / "manifest.json").string());
  check(mf.good(), "make_synthetic: cannot write manifest");
  mf << manifest.dump(2) << "\n";
  check(mf.good(), "make_synthetic: failed writing manifest");
}

}  // namespace gsurf
