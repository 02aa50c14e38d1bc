#pragma once

#include "gsurf/camera.hpp"
#include "gsurf/image.hpp"
#include "gsurf/mesh.hpp"
#include "gsurf/render.hpp"
#include "gsurf/scene.hpp"

#include <vector>

namespace gsurf {

struct LossWeights {
  double color = 1.0;
  double normal = 0.02;
  double depth = 1000.0;
  double silhouette = 1.0;
  double binding = 1.0;
};

struct BindingConfig {
  double cutoff = 0.005;  // distance below which the distance gradient is cut
};

// 0.8 * mean-L1 + 0.2 * (1 - SSIM); gradient w.r.t. `rendered`.
struct ColorLoss {
  double value = 0.0;
  Image grad;
};
ColorLoss loss_color(const Image& rendered, const Image& target,
                     double lambda_ssim = 0.2);

// Per-ray pairwise weighted depth disparity, averaged over rays that carry
// at least two fragments. Gradients index buffers.fragments.
struct DepthDistortionLoss {
  double value = 0.0;
  std::vector<double> d_omega;
  std::vector<double> d_z;
};
DepthDistortionLoss loss_depth_distortion(const RenderBuffers& buffers);

// sum_i omega_i (1 - n_i . N) per ray, N being the camera-space normal of
// the depth map (central differences, one-sided at borders), averaged over
// valid rays (>= 1 fragment, well-defined N). Differentiated through the
// fragment weights and normals and through the depth map itself.
struct NormalLoss {
  double value = 0.0;
  std::vector<double> d_omega;
  std::vector<Vec3> d_normal;
  Image grad_depth;
};
NormalLoss loss_normal(const RenderBuffers& buffers, const Camera& cam);

// Mean L1 between rendered alpha and the mask; gradient w.r.t. alpha.
struct SilhouetteLoss {
  double value = 0.0;
  Image grad;
};
SilhouetteLoss loss_silhouette(const Image& alpha, const Image& mask);

// sum_i max(d_i, cutoff) * (1 - n_i . N_face(i)): point-to-plane distance of
// the deformed centroid to its source face, times normal misalignment.
// Gradients w.r.t. the deformed centroid and tangent axes.
struct BindingLoss {
  double value = 0.0;
  std::vector<Vec3> g_p;
  std::vector<Vec3> g_tu;
  std::vector<Vec3> g_tv;
};
BindingLoss loss_binding(const SurfelScene& scene, const DeformedSurfels& deformed,
                         const TriangleMesh& mesh, const BindingConfig& config = {});

struct LossParts {
  double color = 0.0;
  double normal = 0.0;
  double depth = 0.0;
  double silhouette = 0.0;
  double binding = 0.0;
};

double loss_total(const LossParts& parts, const LossWeights& weights);

}  // namespace gsurf
