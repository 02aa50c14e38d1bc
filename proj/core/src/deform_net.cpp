#include "gsurf/deform_net.hpp"

#include "gsurf/parallel.hpp"
#include "gsurf/rng.hpp"
#include "gsurf/serialize.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>

namespace gsurf {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMat = Eigen::Map<const RowMat>;
using ConstVec = Eigen::Map<const Eigen::VectorXd>;

int HashGridConfig::resolution(int level) const {
  return static_cast<int>(std::floor(base_resolution * std::pow(growth, level)));
}

bool HashGridConfig::dense(int level) const {
  const long long r = resolution(level) + 1;
  return r * r * r <= table_size;
}

namespace {

constexpr uint64_t kHashPrimes[3] = {1ULL, 2654435761ULL, 805459861ULL};

uint32_t grid_entry(const HashGridConfig& cfg, int level, int x, int y, int z) {
  if (cfg.dense(level)) {
    const uint32_t side = static_cast<uint32_t>(cfg.resolution(level)) + 1;
    return (static_cast<uint32_t>(z) * side + y) * side + x;
  }
  const uint64_t h = static_cast<uint64_t>(x) * kHashPrimes[0] ^
                     static_cast<uint64_t>(y) * kHashPrimes[1] ^
                     static_cast<uint64_t>(z) * kHashPrimes[2];
  return static_cast<uint32_t>(h & static_cast<uint64_t>(cfg.table_size - 1));
}

// Cell corners + trilinear weights for one level.
void sample_level(const HashGridConfig& cfg, int level, const Vec3& p_unit,
                  uint32_t idx[8], double w[8], double frac[3]) {
  const int res = cfg.resolution(level);
  int i0[3];
  for (int ax = 0; ax < 3; ++ax) {
    const double pos = p_unit[ax] * res;
    const int cell = std::min(static_cast<int>(std::floor(pos)), res - 1);
    i0[ax] = std::max(cell, 0);
    frac[ax] = pos - i0[ax];
  }
  for (int c = 0; c < 8; ++c) {
    const int dx = c & 1, dy = (c >> 1) & 1, dz = (c >> 2) & 1;
    idx[c] = grid_entry(cfg, level, i0[0] + dx, i0[1] + dy, i0[2] + dz);
    w[c] = (dx ? frac[0] : 1.0 - frac[0]) * (dy ? frac[1] : 1.0 - frac[1]) *
           (dz ? frac[2] : 1.0 - frac[2]);
  }
}

Vec3 normalize_position(const Vec3& p, const Box3& box, uint8_t clamped[3]) {
  Vec3 u;
  const Vec3 ext = box.extent();
  for (int ax = 0; ax < 3; ++ax) {
    double v = (p[ax] - box.lo[ax]) / ext[ax];
    clamped[ax] = (v < 0.0 || v > 1.0) ? 1 : 0;
    u[ax] = std::clamp(v, 0.0, 1.0);
  }
  return u;
}

void fill_kaiming(std::vector<double>& w, int fan_in, Rng& rng) {
  const double bound = std::sqrt(6.0 / fan_in);
  for (double& v : w) v = rng.uniform(-bound, bound);
}

}  // namespace

DeformNet make_deform_net(const DeformNetConfig& cfg, int face_count, int theta_dim,
                          int beta_dim, uint64_t seed) {
  check(face_count > 0, "deform net: face_count must be positive");
  check(theta_dim >= 0 && beta_dim >= 0, "deform net: negative cond dims");
  check(cfg.grid.levels > 0 && cfg.grid.features > 0, "deform net: bad grid config");
  check((cfg.grid.table_size & (cfg.grid.table_size - 1)) == 0,
        "deform net: table_size must be a power of two");

  DeformNet net;
  net.cfg = cfg;
  net.face_count = face_count;
  net.theta_dim = theta_dim;
  net.beta_dim = beta_dim;

  const int h = cfg.hidden;
  const int in = net.enc_in();
  net.grid.resize(static_cast<std::size_t>(cfg.grid.levels) * cfg.grid.table_size *
                  cfg.grid.features);
  net.embed.resize(static_cast<std::size_t>(face_count) * cfg.embed_dim);
  net.enc_w1.resize(static_cast<std::size_t>(h) * in);
  net.enc_b1.assign(h, 0.0);
  net.enc_w2.resize(static_cast<std::size_t>(h) * h);
  net.enc_b2.assign(h, 0.0);
  net.dec_w1.resize(static_cast<std::size_t>(h) * h);
  net.dec_b1.assign(h, 0.0);
  net.dec_w2.assign(static_cast<std::size_t>(DeformNet::kOut) * h, 0.0);
  net.dec_b2.assign(DeformNet::kOut, 0.0);

  Rng grid_rng(seed, 1);
  for (double& v : net.grid) v = grid_rng.uniform(-1e-4, 1e-4);
  Rng embed_rng(seed, 2);
  for (double& v : net.embed) v = embed_rng.normal(0.0, 0.01);
  Rng w_rng(seed, 3);
  fill_kaiming(net.enc_w1, in, w_rng);
  fill_kaiming(net.enc_w2, h, w_rng);
  fill_kaiming(net.dec_w1, h, w_rng);
  // Decoder output layer stays zero: training starts at the identity
  // deformation, with the mask saturated near 1.
  net.dec_b2[8] = cfg.malpha_bias_init;
  return net;
}

DeformNetGrads DeformNetGrads::zeros(const DeformNet& net) {
  DeformNetGrads g;
  g.grid.assign(net.grid.size(), 0.0);
  g.embed.assign(net.embed.size(), 0.0);
  g.enc_w1.assign(net.enc_w1.size(), 0.0);
  g.enc_b1.assign(net.enc_b1.size(), 0.0);
  g.enc_w2.assign(net.enc_w2.size(), 0.0);
  g.enc_b2.assign(net.enc_b2.size(), 0.0);
  g.dec_w1.assign(net.dec_w1.size(), 0.0);
  g.dec_b1.assign(net.dec_b1.size(), 0.0);
  g.dec_w2.assign(net.dec_w2.size(), 0.0);
  g.dec_b2.assign(net.dec_b2.size(), 0.0);
  return g;
}

std::vector<ParamRef> param_refs(DeformNet& net, DeformNetGrads* grads) {
  auto ref = [&](const char* name, std::vector<double>& v, std::vector<double>* g,
                 bool is_grid) {
    return ParamRef{name, &v, g, is_grid};
  };
  std::vector<ParamRef> out;
  out.push_back(ref("grid", net.grid, grads ? &grads->grid : nullptr, true));
  out.push_back(ref("face_embed", net.embed, grads ? &grads->embed : nullptr, false));
  out.push_back(ref("enc_w1", net.enc_w1, grads ? &grads->enc_w1 : nullptr, false));
  out.push_back(ref("enc_b1", net.enc_b1, grads ? &grads->enc_b1 : nullptr, false));
  out.push_back(ref("enc_w2", net.enc_w2, grads ? &grads->enc_w2 : nullptr, false));
  out.push_back(ref("enc_b2", net.enc_b2, grads ? &grads->enc_b2 : nullptr, false));
  out.push_back(ref("dec_w1", net.dec_w1, grads ? &grads->dec_w1 : nullptr, false));
  out.push_back(ref("dec_b1", net.dec_b1, grads ? &grads->dec_b1 : nullptr, false));
  out.push_back(ref("dec_w2", net.dec_w2, grads ? &grads->dec_w2 : nullptr, false));
  out.push_back(ref("dec_b2", net.dec_b2, grads ? &grads->dec_b2 : nullptr, false));
  return out;
}

void hashgrid_encode(const DeformNet& net, const Vec3& p_unit, double* out) {
  const HashGridConfig& g = net.cfg.grid;
  const int F = g.features;
  for (int l = 0; l < g.levels; ++l) {
    uint32_t idx[8];
    double w[8], frac[3];
    sample_level(g, l, p_unit, idx, w, frac);
    const std::size_t base = static_cast<std::size_t>(l) * g.table_size * F;
    for (int f = 0; f < F; ++f) {
      double acc = 0.0;
      for (int c = 0; c < 8; ++c) acc += w[c] * net.grid[base + idx[c] * F + f];
      out[l * F + f] = acc;
    }
  }
}

DeformResult deform_forward(const DeformNet& net, const std::vector<Vec3>& positions,
                            const std::vector<uint32_t>& face_ids,
                            const std::vector<double>& theta,
                            const std::vector<double>& beta, const Box3& box) {
  const std::size_t n = positions.size();
  check(face_ids.size() == n, "deform_forward: face_ids size mismatch");
  check(static_cast<int>(theta.size()) == net.theta_dim,
        "deform_forward: theta dimension mismatch");
  check(static_cast<int>(beta.size()) == net.beta_dim,
        "deform_forward: beta dimension mismatch");
  check(box.valid(), "deform_forward: invalid scene box");
  for (uint32_t f : face_ids)
    check(static_cast<int>(f) < net.face_count, "deform_forward: face id out of range");

  const HashGridConfig& g = net.cfg.grid;
  const int F = g.features;
  const int GF = net.grid_feat_dim();
  const int E = net.cfg.embed_dim;
  const int in = net.enc_in();
  const int h = net.cfg.hidden;

  DeformResult res;
  DeformCache& cache = res.cache;
  cache.n = n;
  cache.box = box;
  cache.face_ids = face_ids;
  cache.corner_index.resize(n * g.levels * 8);
  cache.corner_weight.resize(n * g.levels * 8);
  cache.frac.resize(n * g.levels * 3);
  cache.pos_clamped.resize(n * 3);
  cache.x.resize(in, static_cast<Eigen::Index>(n));

  parallel_chunks(n, [&](std::size_t i) {
    uint8_t* clamped = &cache.pos_clamped[i * 3];
    const Vec3 u = normalize_position(positions[i], box, clamped);
    for (int l = 0; l < g.levels; ++l) {
      uint32_t* idx = &cache.corner_index[(i * g.levels + l) * 8];
      double* w = &cache.corner_weight[(i * g.levels + l) * 8];
      double* frac = &cache.frac[(i * g.levels + l) * 3];
      sample_level(g, l, u, idx, w, frac);
      const std::size_t base = static_cast<std::size_t>(l) * g.table_size * F;
      for (int f = 0; f < F; ++f) {
        double acc = 0.0;
        for (int c = 0; c < 8; ++c) acc += w[c] * net.grid[base + idx[c] * F + f];
        cache.x(l * F + f, static_cast<Eigen::Index>(i)) = acc;
      }
    }
    const std::size_t erow = static_cast<std::size_t>(face_ids[i]) * E;
    for (int e = 0; e < E; ++e)
      cache.x(GF + e, static_cast<Eigen::Index>(i)) = net.embed[erow + e];
    for (int t = 0; t < net.theta_dim; ++t)
      cache.x(GF + E + t, static_cast<Eigen::Index>(i)) = theta[t];
    for (int b = 0; b < net.beta_dim; ++b)
      cache.x(GF + E + net.theta_dim + b, static_cast<Eigen::Index>(i)) = beta[b];
  });

  ConstMat enc_w1(net.enc_w1.data(), h, in);
  ConstMat enc_w2(net.enc_w2.data(), h, h);
  ConstMat dec_w1(net.dec_w1.data(), h, h);
  ConstMat dec_w2(net.dec_w2.data(), DeformNet::kOut, h);
  ConstVec enc_b1(net.enc_b1.data(), h);
  ConstVec enc_b2(net.enc_b2.data(), h);
  ConstVec dec_b1(net.dec_b1.data(), h);
  ConstVec dec_b2(net.dec_b2.data(), DeformNet::kOut);

  cache.enc_a1 = ((enc_w1 * cache.x).colwise() + enc_b1).cwiseMax(0.0);
  cache.f_r = ((enc_w2 * cache.enc_a1).colwise() + enc_b2).cwiseMax(0.0);
  cache.dec_a1 = ((dec_w1 * cache.f_r).colwise() + dec_b1).cwiseMax(0.0);
  cache.out = (dec_w2 * cache.dec_a1).colwise() + dec_b2;

  Residuals& r = res.residuals;
  r.dp.resize(n);
  r.ds.resize(n);
  r.dr.resize(n);
  r.malpha.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto col = cache.out.col(static_cast<Eigen::Index>(i));
    r.dp[i] = net.cfg.scale_dp * Vec3(col[0], col[1], col[2]);
    r.ds[i] = net.cfg.scale_ds * Vec2(col[3], col[4]);
    r.dr[i] = net.cfg.scale_dr * Vec3(col[5], col[6], col[7]);
    r.malpha[i] = 1.0 / (1.0 + std::exp(-col[8]));
  }
  return res;
}

DeformResult deform_forward(const DeformNet& net, const SurfelScene& scene,
                            const std::vector<double>& theta,
                            const std::vector<double>& beta, const Box3& box) {
  return deform_forward(net, scene.base_p, scene.face_id, theta, beta, box);
}

DeformBackwardResult deform_backward(const DeformNet& net, const DeformCache& cache,
                                     const ResidualGrads& upstream) {
  const std::size_t n = cache.n;
  check(cache.x.cols() == static_cast<Eigen::Index>(n), "deform_backward: missing cache");
  check(upstream.dp.size() == n && upstream.ds.size() == n && upstream.dr.size() == n &&
            upstream.malpha.size() == n,
        "deform_backward: upstream size mismatch");

  const HashGridConfig& g = net.cfg.grid;
  const int F = g.features;
  const int GF = net.grid_feat_dim();
  const int E = net.cfg.embed_dim;
  const int h = net.cfg.hidden;

  Eigen::MatrixXd d_out(DeformNet::kOut, static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::Index c = static_cast<Eigen::Index>(i);
    d_out(0, c) = net.cfg.scale_dp * upstream.dp[i][0];
    d_out(1, c) = net.cfg.scale_dp * upstream.dp[i][1];
    d_out(2, c) = net.cfg.scale_dp * upstream.dp[i][2];
    d_out(3, c) = net.cfg.scale_ds * upstream.ds[i][0];
    d_out(4, c) = net.cfg.scale_ds * upstream.ds[i][1];
    d_out(5, c) = net.cfg.scale_dr * upstream.dr[i][0];
    d_out(6, c) = net.cfg.scale_dr * upstream.dr[i][1];
    d_out(7, c) = net.cfg.scale_dr * upstream.dr[i][2];
    const double s = 1.0 / (1.0 + std::exp(-cache.out(8, c)));
    d_out(8, c) = upstream.malpha[i] * s * (1.0 - s);
  }

  ConstMat enc_w1(net.enc_w1.data(), h, net.enc_in());
  ConstMat enc_w2(net.enc_w2.data(), h, h);
  ConstMat dec_w1(net.dec_w1.data(), h, h);
  ConstMat dec_w2(net.dec_w2.data(), DeformNet::kOut, h);

  DeformBackwardResult res;
  res.params = DeformNetGrads::zeros(net);
  DeformNetGrads& gp = res.params;
  using MapRow = Eigen::Map<RowMat>;
  using MapVec = Eigen::Map<Eigen::VectorXd>;

  MapRow(gp.dec_w2.data(), DeformNet::kOut, h) = d_out * cache.dec_a1.transpose();
  MapVec(gp.dec_b2.data(), DeformNet::kOut) = d_out.rowwise().sum();
  Eigen::MatrixXd d_dec_z1 =
      (dec_w2.transpose() * d_out).cwiseProduct((cache.dec_a1.array() > 0.0).cast<double>().matrix());
  MapRow(gp.dec_w1.data(), h, h) = d_dec_z1 * cache.f_r.transpose();
  MapVec(gp.dec_b1.data(), h) = d_dec_z1.rowwise().sum();
  Eigen::MatrixXd d_enc_z2 =
      (dec_w1.transpose() * d_dec_z1).cwiseProduct((cache.f_r.array() > 0.0).cast<double>().matrix());
  MapRow(gp.enc_w2.data(), h, h) = d_enc_z2 * cache.enc_a1.transpose();
  MapVec(gp.enc_b2.data(), h) = d_enc_z2.rowwise().sum();
  Eigen::MatrixXd d_enc_z1 =
      (enc_w2.transpose() * d_enc_z2).cwiseProduct((cache.enc_a1.array() > 0.0).cast<double>().matrix());
  MapRow(gp.enc_w1.data(), h, net.enc_in()) = d_enc_z1 * cache.x.transpose();
  MapVec(gp.enc_b1.data(), h) = d_enc_z1.rowwise().sum();
  Eigen::MatrixXd d_x = enc_w1.transpose() * d_enc_z1;

  // Grid and embedding scatters run serially in surfel order: hash-collided
  // entries sum in a reproducible order.
  res.d_position.assign(n, Vec3::Zero());
  const Vec3 ext = cache.box.extent();
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::Index col = static_cast<Eigen::Index>(i);
    for (int l = 0; l < g.levels; ++l) {
      const uint32_t* idx = &cache.corner_index[(i * g.levels + l) * 8];
      const double* w = &cache.corner_weight[(i * g.levels + l) * 8];
      const double* frac = &cache.frac[(i * g.levels + l) * 3];
      const std::size_t base = static_cast<std::size_t>(l) * g.table_size * F;
      double g_frac[3] = {0.0, 0.0, 0.0};
      for (int c = 0; c < 8; ++c) {
        const int d[3] = {c & 1, (c >> 1) & 1, (c >> 2) & 1};
        for (int f = 0; f < F; ++f) {
          const double up = d_x(l * F + f, col);
          if (up == 0.0) continue;
          gp.grid[base + idx[c] * F + f] += up * w[c];
          const double entry = net.grid[base + idx[c] * F + f];
          // d(weight)/d(frac_ax): sign from the corner bit, product of the
          // remaining axes' factors.
          for (int ax = 0; ax < 3; ++ax) {
            double prod = 1.0;
            for (int o = 0; o < 3; ++o) {
              if (o == ax) continue;
              prod *= d[o] ? frac[o] : 1.0 - frac[o];
            }
            g_frac[ax] += up * entry * (d[ax] ? prod : -prod);
          }
        }
      }
      const double res_l = g.resolution(l);
      for (int ax = 0; ax < 3; ++ax) {
        if (cache.pos_clamped[i * 3 + ax]) continue;
        res.d_position[i][ax] += g_frac[ax] * res_l / ext[ax];
      }
    }
    const std::size_t erow = static_cast<std::size_t>(cache.face_ids[i]) * E;
    for (int e = 0; e < E; ++e) gp.embed[erow + e] += d_x(GF + e, col);
  }
  return res;
}

void save_deform_net(const std::string& path, const DeformNet& net) {
  nlohmann::ordered_json meta;
  meta["format"] = "MDNP";
  meta["version"] = 1;
  meta["grid"] = {{"levels", net.cfg.grid.levels},
                  {"table_size", net.cfg.grid.table_size},
                  {"features", net.cfg.grid.features},
                  {"base_resolution", net.cfg.grid.base_resolution},
                  {"growth", net.cfg.grid.growth}};
  meta["embed_dim"] = net.cfg.embed_dim;
  meta["hidden"] = net.cfg.hidden;
  meta["scale_dp"] = net.cfg.scale_dp;
  meta["scale_ds"] = net.cfg.scale_ds;
  meta["scale_dr"] = net.cfg.scale_dr;
  meta["malpha_bias_init"] = net.cfg.malpha_bias_init;
  meta["face_count"] = net.face_count;
  meta["theta_dim"] = net.theta_dim;
  meta["beta_dim"] = net.beta_dim;

  auto refs = param_refs(const_cast<DeformNet&>(net), nullptr);
  nlohmann::ordered_json names = nlohmann::ordered_json::array();
  for (const ParamRef& r : refs) names.push_back(r.name);
  meta["arrays"] = names;

  BinaryWriter w(path);
  w.write_magic("MDNP");
  w.write_u32(1);
  w.write_u64(refs.size());
  for (const ParamRef& r : refs) {
    w.write_string(r.name);
    w.write_u64(r.value->size());
    std::vector<float> data(r.value->size());
    for (std::size_t i = 0; i < data.size(); ++i)
      data[i] = static_cast<float>((*r.value)[i]);
    w.write_f32_array(data);
  }
  w.close();

  std::ofstream side(path + ".json");
  check(side.good(), "cannot write " + path + ".json");
  side << meta.dump(2) << "\n";
  check(side.good(), "failed writing " + path + ".json");
}

DeformNet load_deform_net(const std::string& path) {
  std::ifstream side(path + ".json");
  check(side.good(), "cannot open " + path + ".json");
  nlohmann::json meta;
  try {
    side >> meta;
  } catch (const std::exception& e) {
    throw Error(path + ".json: invalid JSON: " + e.what());
  }
  check(meta.value("format", "") == "MDNP", path + ".json: not a checkpoint sidecar");
  check(meta.value("version", 0) == 1, path + ".json: unsupported version");

  DeformNetConfig cfg;
  int face_count = 0, theta_dim = 0, beta_dim = 0;
  try {
    const auto& grid = meta.at("grid");
    cfg.grid.levels = grid.at("levels").get<int>();
    cfg.grid.table_size = grid.at("table_size").get<int>();
    cfg.grid.features = grid.at("features").get<int>();
    cfg.grid.base_resolution = grid.at("base_resolution").get<int>();
    cfg.grid.growth = grid.at("growth").get<double>();
    cfg.embed_dim = meta.at("embed_dim").get<int>();
    cfg.hidden = meta.at("hidden").get<int>();
    cfg.scale_dp = meta.at("scale_dp").get<double>();
    cfg.scale_ds = meta.at("scale_ds").get<double>();
    cfg.scale_dr = meta.at("scale_dr").get<double>();
    cfg.malpha_bias_init = meta.at("malpha_bias_init").get<double>();
    face_count = meta.at("face_count").get<int>();
    theta_dim = meta.at("theta_dim").get<int>();
    beta_dim = meta.at("beta_dim").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(path + ".json: bad checkpoint sidecar: " + e.what());
  }
  DeformNet net = make_deform_net(cfg, face_count, theta_dim, beta_dim, 0);

  BinaryReader r(path);
  r.expect_magic("MDNP");
  check(r.read_u32() == 1, path + ": unsupported checkpoint version");
  const uint64_t count = r.read_u64();
  auto refs = param_refs(net, nullptr);
  check(count == refs.size(), path + ": unexpected array count");
  for (ParamRef& ref : refs) {
    const std::string name = r.read_string();
    check(name == ref.name, path + ": unexpected array '" + name + "'");
    const uint64_t size = r.read_u64();
    check(size == ref.value->size(), path + ": size mismatch for '" + name + "'");
    const std::vector<float> data = r.read_f32_array(size);
    for (std::size_t i = 0; i < data.size(); ++i)
      (*ref.value)[i] = static_cast<double>(data[i]);
  }
  check(r.at_end(), path + ": trailing bytes");
  return net;
}

}  // namespace gsurf
