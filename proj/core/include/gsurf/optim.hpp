#pragma once

#include "gsurf/dataset.hpp"
#include "gsurf/deform_net.hpp"
#include "gsurf/losses.hpp"
#include "gsurf/render.hpp"
#include "gsurf/scene.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace gsurf {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<double> m, v;
  int64_t step = 0;

  static AdamState zeros(std::size_t n) {
    AdamState s;
    s.m.assign(n, 0.0);
    s.v.assign(n, 0.0);
    return s;
  }
};

// Bias-corrected Adam update over a flat parameter span. `mask` (optional)
// freezes entries entirely: no parameter motion, no moment updates. Throws
// on non-finite gradients, naming the group.
void adam_step(double* value, const double* grad, std::size_t size, AdamState& state,
               double lr, const AdamConfig& cfg = {}, const uint8_t* mask = nullptr,
               const std::string& group_name = "params");

struct TrainConfig {
  int stage1_iters = 3000;
  int stage2_iters = 2000;
  double lr_sh = 2.5e-3;
  double lr_opacity = 5e-2;
  double lr_net = 1e-3;
  double lr_grid = 5e-3;
  LossWeights weights;
  double binding_cutoff = 0.005;
  int sh_cap_stage1 = 0;
  int sh_cap_stage2 = 3;
  double clip_norm = 1.0;  // global-norm clip on deform-net gradients
  uint64_t seed = 1;
  // The pipeline always runs ordered reductions, so results are already
  // thread-count independent; the flag is accepted for interface stability.
  bool deterministic = true;
  int holdout = -1;         // frame held out of training; -1 = last
  int checkpoint_every = 0; // 0 = never (final artifacts are the caller's)
  RenderOptions render;
};

struct LossLogRow {
  int iteration = 0;  // global, 0-based
  int stage = 1;
  double color = 0.0, normal = 0.0, depth = 0.0, silhouette = 0.0, binding = 0.0;
  double total = 0.0;  // weighted
};

struct FitResult {
  std::vector<LossLogRow> log;
  int holdout_frame = 0;
  double holdout_psnr = 0.0;
  // Deformed-centroid to source-face-plane distance, max over surfels and
  // training frames, measured when stage 1 ends (attachment diagnostics).
  double max_face_distance_stage1 = 0.0;
};

using CheckpointFn =
    std::function<void(int iteration, const SurfelScene&, const DeformNet&)>;

// Two-stage fit. Stage 1 trains the net's geometry heads, base opacity and
// DC color under all five losses with the mask forced to 1; stage 2 freezes
// geometry (trunk and geometry rows untouched, so deformed geometry is
// bit-identical) and trains the mask head plus all SH bands under color +
// silhouette. The scene's base attachment is recomputed per sampled frame.
FitResult fit(const Dataset& ds, SurfelScene& scene, DeformNet& net,
              const TrainConfig& cfg, const CheckpointFn& checkpoint = nullptr);

// One frame's full forward pass as used inside fit (net residuals applied to
// that frame's attachment), exposed for evaluation commands.
RenderBuffers render_frame(const Dataset& ds, std::size_t frame, SurfelScene& scene,
                           const DeformNet& net, int sh_cap,
                           const RenderOptions& base_opts = {},
                           const std::vector<double>* theta_override = nullptr);

}  // namespace gsurf
