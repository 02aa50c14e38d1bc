#include <gsurf/optim.hpp>

#include <gsurf/dataset.hpp>
#include <gsurf/deform_net.hpp>
#include <gsurf/scene.hpp>
#include <gsurf/synthetic.hpp>

#include <doctest.h>

#include "test_util.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>
#include <vector>

using namespace gsurf;
using test::TempDir;

namespace {

// Four-frame 16x16 icosphere sequence, generated once per binary run.
const Dataset& tiny_dataset() {
  static TempDir dir("optim_data");
  static Dataset ds = [] {
    SyntheticConfig cfg;
    cfg.frames = 4;
    cfg.width = 16;
    cfg.height = 16;
    cfg.subdivisions = 0;
    cfg.densify_depth = 1;
    cfg.theta_dim = 5;
    cfg.beta_dim = 2;
    cfg.focal = 24.0;  // keeps the sphere inside the small frame
    make_synthetic(dir.path(), cfg);
    return load_dataset(dir.file("manifest.json"));
  }();
  return ds;
}

DeformNetConfig tiny_net_config() {
  DeformNetConfig cfg;
  cfg.grid.levels = 4;
  cfg.grid.table_size = 1 << 10;
  cfg.grid.base_resolution = 4;
  cfg.grid.features = 2;
  cfg.embed_dim = 4;
  cfg.hidden = 32;
  return cfg;
}

SurfelScene fresh_scene(const Dataset& ds) {
  SceneInitConfig sic;
  sic.densify_depth = 1;
  return init_scene(ds.meshes[0], sic);
}

DeformNet fresh_net(const Dataset& ds, uint64_t seed = 11) {
  return make_deform_net(tiny_net_config(), static_cast<int>(ds.meshes[0].num_faces()),
                         ds.theta_dim, ds.beta_dim, seed);
}

TrainConfig tiny_train(int s1, int s2, uint64_t seed = 3) {
  TrainConfig cfg;
  cfg.stage1_iters = s1;
  cfg.stage2_iters = s2;
  cfg.seed = seed;
  return cfg;
}

bool trunk_equal(const DeformNet& a, const DeformNet& b) {
  return a.grid == b.grid && a.embed == b.embed && a.enc_w1 == b.enc_w1 &&
         a.enc_b1 == b.enc_b1 && a.enc_w2 == b.enc_w2 && a.enc_b2 == b.enc_b2 &&
         a.dec_w1 == b.dec_w1 && a.dec_b1 == b.dec_b1;
}

}  // namespace

TEST_CASE("adam leaves values alone on zero gradients but advances the step") {
  std::vector<double> value{1.0, -2.0, 3.5};
  const std::vector<double> grad{0.0, 0.0, 0.0};
  AdamState st = AdamState::zeros(3);

  adam_step(value.data(), grad.data(), 3, st, 0.1);
  CHECK(st.step == 1);
  // zero moments give a zero bias-corrected update before the eps floor
  CHECK(value[0] == 1.0);
  CHECK(value[1] == -2.0);
  CHECK(value[2] == 3.5);

  adam_step(value.data(), grad.data(), 3, st, 0.1);
  CHECK(st.step == 2);
  CHECK(value[0] == 1.0);
}

TEST_CASE("the first step moves each entry by about lr against the gradient sign") {
  std::vector<double> value(4, 0.0);
  const std::vector<double> grad{3.0, -0.5, 1e-3, 0.0};
  AdamState st = AdamState::zeros(4);
  const double lr = 0.02;

  adam_step(value.data(), grad.data(), 4, st, lr);

  // bias correction makes mhat = g and vhat = g*g, so the step is
  // lr * g / (|g| + eps): a signed lr up to the eps floor.
  CHECK(value[0] == doctest::Approx(-lr).epsilon(1e-8));
  CHECK(value[1] == doctest::Approx(lr).epsilon(1e-7));
  CHECK(value[2] == doctest::Approx(-lr).epsilon(1e-4));
  CHECK(value[3] == 0.0);
}

TEST_CASE("the first step ignores gradient magnitude") {
  const std::vector<double> base{1.7, -0.3};
  std::vector<std::vector<double>> results;
  for (const double scale : {1.0, 10.0, 1000.0}) {
    std::vector<double> value(2, 0.0);
    std::vector<double> grad = base;
    for (double& g : grad) g *= scale;
    AdamState st = AdamState::zeros(2);
    adam_step(value.data(), grad.data(), 2, st, 0.01);
    results.push_back(value);
  }
  for (std::size_t k = 1; k < results.size(); ++k) {
    CHECK(std::abs(results[k][0] - results[0][0]) < 1e-8);
    CHECK(std::abs(results[k][1] - results[0][1]) < 1e-8);
  }
}

TEST_CASE("a constant gradient walks the value at lr per step") {
  double v = 0.0;
  const double g = 2.0;
  AdamState st = AdamState::zeros(1);
  for (int k = 0; k < 10; ++k) adam_step(&v, &g, 1, st, 0.05);
  CHECK(st.step == 10);
  CHECK(v == doctest::Approx(-0.5).epsilon(1e-6));

  double w = 0.0;
  const double gneg = -2.0;
  AdamState st2 = AdamState::zeros(1);
  for (int k = 0; k < 10; ++k) adam_step(&w, &gneg, 1, st2, 0.05);
  CHECK(w == doctest::Approx(0.5).epsilon(1e-6));
}

TEST_CASE("masked entries are frozen in value and moments") {
  std::vector<double> value{1.0, 1.0, 1.0};
  std::vector<double> grad{0.7, 0.7, 0.7};
  const std::vector<uint8_t> mask{1, 0, 1};
  AdamState st = AdamState::zeros(3);

  for (int k = 0; k < 3; ++k)
    adam_step(value.data(), grad.data(), 3, st, 0.1, {}, mask.data(), "palette");

  CHECK(st.step == 3);
  CHECK(value[1] == 1.0);
  CHECK(st.m[1] == 0.0);
  CHECK(st.v[1] == 0.0);
  CHECK(value[0] == doctest::Approx(0.7).epsilon(1e-6));
  CHECK(value[0] == value[2]);

  // frozen entries never reach the finite check, so junk there is harmless
  grad[1] = std::numeric_limits<double>::quiet_NaN();
  CHECK_NOTHROW(
      adam_step(value.data(), grad.data(), 3, st, 0.1, {}, mask.data(), "palette"));
}

TEST_CASE("non-finite gradients name the offending group") {
  std::vector<double> value{0.0, 0.0};
  std::vector<double> grad{0.0, std::numeric_limits<double>::infinity()};
  AdamState st = AdamState::zeros(2);
  CHECK_THROWS_WITH_AS(
      adam_step(value.data(), grad.data(), 2, st, 0.1, {}, nullptr, "tangent_colors"),
      doctest::Contains("tangent_colors"), Error);

  grad[1] = std::numeric_limits<double>::quiet_NaN();
  AdamState st2 = AdamState::zeros(2);
  CHECK_THROWS_WITH_AS(
      adam_step(value.data(), grad.data(), 2, st2, 0.1, {}, nullptr, "tangent_colors"),
      doctest::Contains("non-finite gradient"), Error);

  AdamState bad = AdamState::zeros(1);
  CHECK_THROWS_WITH_AS(adam_step(value.data(), grad.data(), 2, bad, 0.1),
                       doctest::Contains("state shape mismatch"), Error);
}

TEST_CASE("a zero-iteration fit reports the holdout without touching learned state") {
  const Dataset& ds = tiny_dataset();
  REQUIRE(ds.size() == 4);
  SurfelScene scene = fresh_scene(ds);
  DeformNet net = fresh_net(ds);
  const DeformNet before = net;
  const auto sh0 = scene.sh;
  const auto opacity0 = scene.opacity;

  FitResult r = fit(ds, scene, net, tiny_train(0, 0));

  CHECK(r.log.empty());
  CHECK(r.holdout_frame == 3);  // -1 selects the last frame
  CHECK(std::isfinite(r.holdout_psnr));
  CHECK(r.holdout_psnr > 0.0);
  CHECK(scene.sh == sh0);
  CHECK(scene.opacity == opacity0);
  CHECK(trunk_equal(net, before));
  CHECK(net.dec_w2 == before.dec_w2);
  CHECK(net.dec_b2 == before.dec_b2);

  TrainConfig pick = tiny_train(0, 0);
  pick.holdout = 1;
  FitResult r2 = fit(ds, scene, net, pick);
  CHECK(r2.holdout_frame == 1);
}

TEST_CASE("every iteration logs a recomputable weighted total") {
  const Dataset& ds = tiny_dataset();
  SurfelScene scene = fresh_scene(ds);
  DeformNet net = fresh_net(ds);
  const TrainConfig cfg = tiny_train(6, 4);

  FitResult r = fit(ds, scene, net, cfg);

  REQUIRE(r.log.size() == 10);
  for (std::size_t i = 0; i < r.log.size(); ++i) {
    const LossLogRow& row = r.log[i];
    CHECK(row.iteration == static_cast<int>(i));
    CHECK(row.stage == (i < 6 ? 1 : 2));
    CHECK(std::isfinite(row.total));
    CHECK(row.color >= 0.0);
    if (row.stage == 2) {
      // stage 2 runs only the color and silhouette terms
      CHECK(row.depth == 0.0);
      CHECK(row.normal == 0.0);
      CHECK(row.binding == 0.0);
    } else {
      CHECK(row.depth >= 0.0);
      // the alignment dot product can round a hair past 1 for attached surfels
      CHECK(row.binding >= -1e-12);
    }
    const double recomputed =
        cfg.weights.color * row.color + cfg.weights.normal * row.normal +
        cfg.weights.depth * row.depth + cfg.weights.silhouette * row.silhouette +
        cfg.weights.binding * row.binding;
    CHECK(row.total == doctest::Approx(recomputed).epsilon(1e-12));
  }

  CHECK(std::isfinite(r.max_face_distance_stage1));
  CHECK(r.max_face_distance_stage1 >= 0.0);
  for (const double a : scene.opacity) {
    CHECK(a >= 1e-4);
    CHECK(a <= 1.0);
  }
}

TEST_CASE("stage two leaves geometry frozen and trains the mask head") {
  const Dataset& ds = tiny_dataset();
  auto run = [&](int stage2_iters) {
    SurfelScene scene = fresh_scene(ds);
    DeformNet net = fresh_net(ds);
    fit(ds, scene, net, tiny_train(8, stage2_iters));
    return std::pair<SurfelScene, DeformNet>(std::move(scene), std::move(net));
  };
  auto [scene_a, net_a] = run(0);
  auto [scene_b, net_b] = run(6);
  const std::size_t h = static_cast<std::size_t>(net_a.cfg.hidden);

  // same seed, so the stage-1 trajectory matches and stage 2 may only move
  // the mask-logit row and the color coefficients
  CHECK(trunk_equal(net_a, net_b));
  CHECK(std::equal(net_a.dec_w2.begin(), net_a.dec_w2.begin() + 8 * h,
                   net_b.dec_w2.begin()));
  for (int k = 0; k < 8; ++k) CHECK(net_a.dec_b2[k] == net_b.dec_b2[k]);
  CHECK(scene_a.opacity == scene_b.opacity);

  CHECK(net_a.dec_b2[8] != net_b.dec_b2[8]);
  CHECK_FALSE(std::equal(net_a.dec_w2.begin() + 8 * h, net_a.dec_w2.end(),
                         net_b.dec_w2.begin() + 8 * h));
  bool sh_differs = false;
  for (std::size_t i = 0; i < scene_a.sh.size() && !sh_differs; ++i)
    sh_differs = !(scene_a.sh[i] == scene_b.sh[i]);
  CHECK(sh_differs);
}

TEST_CASE("the same seed reproduces a fit bit for bit") {
  const Dataset& ds = tiny_dataset();
  auto run = [&] {
    SurfelScene scene = fresh_scene(ds);
    DeformNet net = fresh_net(ds);
    FitResult r = fit(ds, scene, net, tiny_train(5, 3, 17));
    return std::tuple<FitResult, SurfelScene, DeformNet>(
        std::move(r), std::move(scene), std::move(net));
  };
  auto [ra, sa, na] = run();
  auto [rb, sb, nb] = run();

  REQUIRE(ra.log.size() == rb.log.size());
  for (std::size_t i = 0; i < ra.log.size(); ++i) {
    CHECK(ra.log[i].total == rb.log[i].total);
    CHECK(ra.log[i].color == rb.log[i].color);
    CHECK(ra.log[i].normal == rb.log[i].normal);
    CHECK(ra.log[i].depth == rb.log[i].depth);
    CHECK(ra.log[i].silhouette == rb.log[i].silhouette);
    CHECK(ra.log[i].binding == rb.log[i].binding);
  }
  CHECK(ra.holdout_psnr == rb.holdout_psnr);
  CHECK(ra.max_face_distance_stage1 == rb.max_face_distance_stage1);
  CHECK(sa.sh == sb.sh);
  CHECK(sa.opacity == sb.opacity);
  CHECK(trunk_equal(na, nb));
  CHECK(na.dec_w2 == nb.dec_w2);
  CHECK(na.dec_b2 == nb.dec_b2);
}

TEST_CASE("checkpoints fire on the requested cadence") {
  const Dataset& ds = tiny_dataset();
  SurfelScene scene = fresh_scene(ds);
  DeformNet net = fresh_net(ds);
  const std::size_t n = scene.size();

  TrainConfig cfg = tiny_train(4, 2);
  cfg.checkpoint_every = 2;
  std::vector<int> seen;
  fit(ds, scene, net, cfg, [&](int it, const SurfelScene& s, const DeformNet& m) {
    seen.push_back(it);
    CHECK(s.size() == n);
    CHECK(m.face_count == static_cast<int>(ds.meshes[0].num_faces()));
  });
  CHECK(seen == std::vector<int>{2, 4, 6});

  TrainConfig off = tiny_train(2, 0);
  seen.clear();
  fit(ds, scene, net, off,
      [&](int it, const SurfelScene&, const DeformNet&) { seen.push_back(it); });
  CHECK(seen.empty());
}

TEST_CASE("render_frame honors the conditioning override") {
  const Dataset& ds = tiny_dataset();
  SurfelScene scene = fresh_scene(ds);
  DeformNet net = fresh_net(ds);
  // a fresh decoder output layer is zero, so give theta a path to the output
  Rng rng(99);
  for (double& w : net.dec_w2) w = rng.normal(0.0, 0.05);

  const RenderOptions opts;
  const Image base = render_frame(ds, 0, scene, net, 0, opts).color_image();
  const Image swapped =
      render_frame(ds, 0, scene, net, 0, opts, &ds.thetas[1]).color_image();
  const Image repeat = render_frame(ds, 0, scene, net, 0, opts).color_image();

  double worst = 0.0;
  REQUIRE(base.data.size() == swapped.data.size());
  for (std::size_t k = 0; k < base.data.size(); ++k)
    worst = std::max(worst, std::abs(base.data[k] - swapped.data[k]));
  CHECK(worst > 1e-12);
  CHECK(repeat.data == base.data);

  CHECK_THROWS_WITH_AS(render_frame(ds, 99, scene, net, 0, opts),
                       doctest::Contains("frame out of range"), Error);
  const std::vector<double> bad_theta(std::size_t(ds.theta_dim) + 3, 0.0);
  CHECK_THROWS_AS(render_frame(ds, 0, scene, net, 0, opts, &bad_theta), Error);
}

TEST_CASE("fit validates its inputs") {
  const Dataset& ds = tiny_dataset();
  SurfelScene scene = fresh_scene(ds);
  DeformNet net = fresh_net(ds);

  Dataset empty;
  CHECK_THROWS_WITH_AS(fit(empty, scene, net, tiny_train(1, 0)),
                       doctest::Contains("empty dataset"), Error);

  TrainConfig neg = tiny_train(-1, 0);
  CHECK_THROWS_WITH_AS(fit(ds, scene, net, neg),
                       doctest::Contains("negative iteration count"), Error);

  TrainConfig bad_lr = tiny_train(1, 0);
  bad_lr.lr_sh = 0.0;
  CHECK_THROWS_WITH_AS(fit(ds, scene, net, bad_lr),
                       doctest::Contains("learning rates must be positive"), Error);

  SurfelScene hollow;
  CHECK_THROWS_WITH_AS(fit(ds, hollow, net, tiny_train(1, 0)),
                       doctest::Contains("empty scene"), Error);

  TrainConfig far_holdout = tiny_train(1, 0);
  far_holdout.holdout = 7;
  CHECK_THROWS_WITH_AS(fit(ds, scene, net, far_holdout),
                       doctest::Contains("holdout frame out of range"), Error);
}
