#pragma once

#include "gsurf/types.hpp"

#include <cstdint>
#include <string>

namespace gsurf {

// Synthetic icosphere sequence with self-rendered ground truth. The data
// meshes wobble smoothly per frame; the ground-truth renders additionally
// displace surfels along their normals by a conditioning-driven bump that is
// absent from the meshes, so a fit must learn the theta dependence to match.
struct SyntheticConfig {
  int frames = 20;
  int width = 64;
  int height = 64;
  int subdivisions = 2;    // icosphere refinement before registration
  int densify_depth = 1;
  int theta_dim = 45;
  int beta_dim = 10;
  double camera_distance = 3.5;
  double focal = 96.0;
  double orbit_deg = 15.0;
  double wobble_amp = 0.06;   // per-frame radial mesh wobble
  double bump_amp = 0.02;     // conditioning-driven ground-truth bump
  double texture_freq = 3.0;  // spatial frequency of the color pattern
  double gt_opacity = 0.95;
  uint64_t seed = 7;
};

// Writes frames/, masks/, meshes/, cond/, cameras/ and manifest.json under
// out_dir. Re-running with the same config reproduces every file bit-exactly.
void make_synthetic(const std::string& out_dir, const SyntheticConfig& cfg);

}  // namespace gsurf
