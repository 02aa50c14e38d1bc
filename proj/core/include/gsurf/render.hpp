#pragma once

#include "gsurf/camera.hpp"
#include "gsurf/image.hpp"
#include "gsurf/scene.hpp"
#include "gsurf/types.hpp"

#include <limits>
#include <vector>

namespace gsurf {

struct RenderOptions {
  int sh_degree_cap = 3;
  int tile_size = 16;
  double alpha_skip = 1.0 / 255.0;   // fragments below this alpha are dropped
  double rho_cutoff = 9.0;           // Gaussian support cutoff on u^2 + v^2 (3 sigma)
  double term_transmittance = 1e-4;  // early termination threshold
  bool early_termination = true;
  double min_footprint_px = 0.3;     // minimum projected semi-axis, pixels
  bool keep_fragments = true;

  // Cutoff-free configuration: the forward map becomes smooth in every
  // attribute, which finite-difference gradient checks require.
  static RenderOptions smooth(int cap = 3) {
    RenderOptions o;
    o.sh_degree_cap = cap;
    o.alpha_skip = 0.0;
    o.rho_cutoff = std::numeric_limits<double>::infinity();
    o.early_termination = false;
    o.min_footprint_px = 0.0;
    return o;
  }
};

// One composited sample along a pixel ray.
struct Fragment {
  uint32_t surfel = 0;
  double z = 0.0;      // camera-space depth of the ray-plane intersection
  double a = 0.0;      // alpha' * G
  double omega = 0.0;  // blending weight a * prod(1 - a_earlier)
  Vec3 rgb = Vec3::Zero();
  Vec3 n = Vec3::Zero();  // camera-facing unit normal, camera space
};

struct RenderBuffers {
  int width = 0;
  int height = 0;
  std::vector<Vec3> color;     // black background
  std::vector<double> alpha;   // sum of omegas
  std::vector<double> depth;   // omega-weighted mean depth (0 where empty)
  std::vector<Vec3> normal;    // normalized omega-weighted normal (0 where empty)

  // Per-ray fragment lists, front-to-back, truncated at early termination.
  std::vector<uint32_t> frag_begin;  // width*height
  std::vector<uint32_t> frag_count;  // width*height
  std::vector<Fragment> fragments;

  std::size_t pixel(int x, int y) const { return static_cast<std::size_t>(y) * width + x; }

  Image color_image() const;
  Image alpha_image() const;
  Image depth_image() const;
  Image normal_image() const;
};

// Normalizer in depth = sum(omega*z) / (alpha + kDepthEps); keeps the map
// smooth so gradients check out, and yields 0 depth on empty pixels.
inline constexpr double kDepthEps = 1e-10;

RenderBuffers render(const SurfelScene& scene, const DeformedSurfels& deformed,
                     const Camera& cam, const RenderOptions& opts = {});

// Stored-residual convenience (malpha = 1).
RenderBuffers render(const SurfelScene& scene, const Camera& cam,
                     const RenderOptions& opts = {});

// The alpha plane of render(); same code path, bit-identical values.
Image render_silhouette(const SurfelScene& scene, const DeformedSurfels& deformed,
                        const Camera& cam, const RenderOptions& opts = {});

// Optional upstream gradients w.r.t. retained fragments (losses defined on
// per-ray fragment lists). Empty vectors mean zero.
struct FragmentGrads {
  std::vector<double> d_omega;
  std::vector<double> d_z;
  std::vector<Vec3> d_normal;
};

// Analytic adjoint of render(). Upstream gradients: per-pixel d(color),
// d(alpha), d(depth) (any may be null) and optional fragment gradients.
// Returns gradients w.r.t. the deformed attributes and sh coefficients.
// Requires buffers rendered with keep_fragments = true.
DeformedGrads render_backward(const SurfelScene& scene, const DeformedSurfels& deformed,
                              const Camera& cam, const RenderBuffers& buffers,
                              const Image* grad_color, const Image* grad_alpha,
                              const Image* grad_depth, const FragmentGrads* frag_grads,
                              const RenderOptions& opts = {});

}  // namespace gsurf
