#pragma once

#include "gsurf/scene.hpp"
#include "gsurf/types.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

namespace gsurf {

struct HashGridConfig {
  int levels = 12;
  int table_size = 1 << 15;  // power of two
  int features = 2;
  int base_resolution = 16;
  double growth = 1.38;

  int resolution(int level) const;         // floor(base * growth^level)
  bool dense(int level) const;             // (res+1)^3 fits in table_size
  int feature_dim() const { return levels * features; }
};

struct DeformNetConfig {
  HashGridConfig grid;
  int embed_dim = 8;
  int hidden = 64;
  double scale_dp = 0.01;
  double scale_ds = 0.01;
  double scale_dr = 0.1;
  // Decoder starts zeroed (identity deformation); the mask logit bias keeps
  // sigmoid(bias) ~ 1 so attached rendering is the training start point.
  double malpha_bias_init = 6.0;
};

// Hashgrid + face embedding -> MLP encoder -> residual decoder. Weights are
// row-major [out][in] flat vectors so one optimizer handles every group.
struct DeformNet {
  DeformNetConfig cfg;
  int face_count = 0;
  int theta_dim = 0;
  int beta_dim = 0;

  std::vector<double> grid;   // levels * table_size * features
  std::vector<double> embed;  // face_count * embed_dim
  std::vector<double> enc_w1, enc_b1;  // hidden x enc_in, hidden
  std::vector<double> enc_w2, enc_b2;  // hidden x hidden
  std::vector<double> dec_w1, dec_b1;  // hidden x hidden
  std::vector<double> dec_w2, dec_b2;  // 9 x hidden

  int grid_feat_dim() const { return cfg.grid.feature_dim(); }
  int enc_in() const { return grid_feat_dim() + cfg.embed_dim + theta_dim + beta_dim; }
  static constexpr int kOut = 9;  // 3 dp + 2 ds + 3 dr + 1 mask logit
};

// Seeded initialization: grid U[-1e-4, 1e-4], embeddings N(0, 0.01), MLP
// weights Kaiming-uniform with zero biases, decoder output layer zeroed
// except the mask logit bias.
DeformNet make_deform_net(const DeformNetConfig& cfg, int face_count, int theta_dim,
                          int beta_dim, uint64_t seed);

struct DeformNetGrads {
  std::vector<double> grid, embed;
  std::vector<double> enc_w1, enc_b1, enc_w2, enc_b2;
  std::vector<double> dec_w1, dec_b1, dec_w2, dec_b2;

  static DeformNetGrads zeros(const DeformNet& net);
};

// Named views over the parameter/gradient vectors, in a fixed order.
struct ParamRef {
  std::string name;
  std::vector<double>* value = nullptr;
  std::vector<double>* grad = nullptr;  // null when grads not attached
  bool is_grid = false;                 // hashgrid group (separate lr)
};
std::vector<ParamRef> param_refs(DeformNet& net, DeformNetGrads* grads);

// Multiresolution hash encoding of one normalized position (clamped to
// [0,1]^3): per level, trilinear interpolation over 8 corners addressed
// densely when the level fits the table, hashed otherwise.
void hashgrid_encode(const DeformNet& net, const Vec3& p_unit, double* out);

// Retained activations for the backward pass.
struct DeformCache {
  std::size_t n = 0;
  Box3 box;
  std::vector<uint32_t> corner_index;  // n * levels * 8
  std::vector<double> corner_weight;   // n * levels * 8
  std::vector<double> frac;            // n * levels * 3
  std::vector<uint8_t> pos_clamped;    // n * 3
  std::vector<uint32_t> face_ids;      // n
  Eigen::MatrixXd x;       // enc_in x n
  Eigen::MatrixXd enc_a1;  // hidden x n (post-ReLU)
  Eigen::MatrixXd f_r;     // hidden x n (post-ReLU)
  Eigen::MatrixXd dec_a1;  // hidden x n (post-ReLU)
  Eigen::MatrixXd out;     // 9 x n (raw logits, pre scale/sigmoid)
};

struct DeformResult {
  Residuals residuals;
  DeformCache cache;
};

// positions are world-space attachment points, normalized by `box`.
DeformResult deform_forward(const DeformNet& net, const std::vector<Vec3>& positions,
                            const std::vector<uint32_t>& face_ids,
                            const std::vector<double>& theta,
                            const std::vector<double>& beta, const Box3& box);

DeformResult deform_forward(const DeformNet& net, const SurfelScene& scene,
                            const std::vector<double>& theta,
                            const std::vector<double>& beta, const Box3& box);

struct DeformBackwardResult {
  DeformNetGrads params;
  std::vector<Vec3> d_position;  // gradient w.r.t. the world-space inputs
};

// Reverse-mode pass; `upstream` holds gradients w.r.t. the scaled residuals
// and the sigmoid mask (base_opacity field ignored).
DeformBackwardResult deform_backward(const DeformNet& net, const DeformCache& cache,
                                     const ResidualGrads& upstream);

// Checkpoint container: magic "MDNP", named shaped f32 arrays, JSON sidecar
// with the architecture so load can validate.
void save_deform_net(const std::string& path, const DeformNet& net);
DeformNet load_deform_net(const std::string& path);

}  // namespace gsurf
