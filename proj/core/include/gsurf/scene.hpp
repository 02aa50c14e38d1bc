#pragma once

#include "gsurf/inellipse.hpp"
#include "gsurf/mesh.hpp"
#include "gsurf/sh.hpp"
#include "gsurf/types.hpp"

#include <optional>
#include <string>
#include <vector>

namespace gsurf {

// Surfel collection, struct-of-arrays. Base (attached) frames come from
// mesh registration; residuals are the persistent deformation state.
// Attributes are float64 in memory and float32 in scene files.
struct SurfelScene {
  std::vector<Vec3> base_p;   // attached centroids
  std::vector<Vec3> base_tu;  // attached major axes (unit)
  std::vector<Vec3> base_tv;  // attached minor axes (unit)
  std::vector<Vec2> base_s;   // attached scales (s1, s2)

  std::vector<Vec3> delta_p;  // residual translation, local (t_u, t_v, n) frame
  std::vector<Vec2> delta_s;  // residual scale offsets
  std::vector<Vec3> delta_r;  // (in-plane angle, tilt about t_u, tilt about t_v)

  std::vector<double> opacity;  // base alpha in [0, 1]
  std::vector<ShCoeffs> sh;     // 16 x 3, basis-major

  std::vector<uint32_t> face_id;
  std::vector<uint8_t> corner_tag;

  int sh_degree = 3;
  int densify_depth = 1;

  std::size_t size() const { return base_p.size(); }
};

struct SceneInitConfig {
  int densify_depth = 1;
  double init_opacity = 0.9;
  int sh_degree = 3;
};

// Registers every face (with fractal densification), zero residuals,
// uniform opacity, mid-gray DC color (0.5 / Y00), higher bands zero.
SurfelScene init_scene(const TriangleMesh& mesh, const SceneInitConfig& config = {});

// Recomputes base frames from a same-topology mesh (per-frame attachment).
// Residuals, opacity, sh, ids are untouched.
void reattach_base(SurfelScene& scene, const TriangleMesh& mesh);

// Transient residual set (deformation network output) for one evaluation.
struct Residuals {
  std::vector<Vec3> dp;
  std::vector<Vec2> ds;
  std::vector<Vec3> dr;
  std::vector<double> malpha;  // multiplicative opacity mask in (0, 1)

  static Residuals zeros(std::size_t n);
};

// Deformed per-surfel state fed to the renderer.
struct DeformedSurfels {
  std::vector<Vec3> p;
  std::vector<Vec3> tu;
  std::vector<Vec3> tv;
  std::vector<Vec2> s;
  std::vector<double> alpha;

  std::size_t size() const { return p.size(); }
};

// Rotation applied by a rotation residual, composed about the base axes:
// R = R(n, dr[0]) * R(t_v, dr[2]) * R(t_u, dr[1]).
Mat3 residual_rotation(const Vec3& tu, const Vec3& tv, const Vec3& dr);

// p' = p + [t_u t_v n] dp; axes rotated by residual_rotation; s' =
// max(s + ds, 0); alpha' = alpha * malpha. residuals == nullptr uses the
// scene's stored deltas with malpha = 1.
DeformedSurfels apply_deformation(const SurfelScene& scene, const Residuals* residuals);

// Upstream gradients w.r.t. the deformed state (plus pass-through sh grads).
struct DeformedGrads {
  std::vector<Vec3> p;
  std::vector<Vec3> tu;
  std::vector<Vec3> tv;
  std::vector<Vec2> s;
  std::vector<double> alpha;
  std::vector<ShCoeffs> sh;

  static DeformedGrads zeros(std::size_t n);
};

struct ResidualGrads {
  std::vector<Vec3> dp;
  std::vector<Vec2> ds;
  std::vector<Vec3> dr;
  std::vector<double> malpha;
  std::vector<double> base_opacity;  // chain to the learnable base alpha
};

ResidualGrads apply_deformation_backward(const SurfelScene& scene, const Residuals& residuals,
                                         const DeformedGrads& upstream);

// Scene container: magic "MSRF", version u32, count u64, then little-endian
// f32 arrays in field order (base centroid/t_u/t_v/s, delta_p, delta_s,
// delta_r, opacity, sh), then u32 face ids and u8 corner tags. A JSON
// sidecar at <path>.json carries the metadata.
void save_scene(const std::string& path, const SurfelScene& scene);
SurfelScene load_scene(const std::string& path);

}  // namespace gsurf
