#include <gsurf/scene.hpp>

#include <doctest.h>

#include "test_util.hpp"

#include <cmath>

using namespace gsurf;
using test::TempDir;

namespace {

SurfelScene small_scene() {
  SceneInitConfig cfg;
  cfg.densify_depth = 1;
  return init_scene(make_icosahedron(), cfg);
}

}  // namespace

TEST_CASE("init: counts, residuals, opacity, color") {
  const SurfelScene s = small_scene();
  REQUIRE(s.size() == 80);  // 4 x 20 faces
  for (std::size_t i = 0; i < s.size(); ++i) {
    CHECK(s.delta_p[i] == Vec3::Zero());
    CHECK(s.delta_s[i] == Vec2::Zero());
    CHECK(s.delta_r[i] == Vec3::Zero());
    CHECK(s.opacity[i] == 0.9);
    for (int ch = 0; ch < 3; ++ch)
      CHECK(s.sh[i][ch] == doctest::Approx(0.5 / kShC0).epsilon(1e-15));
    for (int k = 3; k < kShCoeffCount; ++k) CHECK(s.sh[i][k] == 0.0);
    CHECK(std::abs(s.base_tu[i].dot(s.base_tv[i])) < 1e-10);
    CHECK(s.base_s[i].x() >= s.base_s[i].y());
  }
  CHECK(init_scene(TriangleMesh{}).size() == 0);  // empty mesh -> empty scene
}

TEST_CASE("deformation: identity, local translation, mask, clamp") {
  SurfelScene s = small_scene();
  const DeformedSurfels id = apply_deformation(s, nullptr);
  for (std::size_t i = 0; i < s.size(); ++i) {
    CHECK(id.p[i] == s.base_p[i]);
    CHECK(id.tu[i] == s.base_tu[i]);
    CHECK(id.tv[i] == s.base_tv[i]);
    CHECK(id.s[i] == s.base_s[i]);
    CHECK(id.alpha[i] == s.opacity[i]);
  }

  Residuals r = Residuals::zeros(s.size());
  r.dp[3] = Vec3(0, 0, 0.1);  // local frame: (t_u, t_v, n)
  r.malpha[5] = 0.0;
  r.ds[7] = Vec2(-10.0, 0.25);
  const DeformedSurfels d = apply_deformation(s, &r);

  const Vec3 n3 = s.base_tu[3].cross(s.base_tv[3]);
  CHECK((d.p[3] - (s.base_p[3] + 0.1 * n3)).norm() < 1e-14);
  CHECK(d.alpha[5] == 0.0);
  CHECK(d.s[7].x() == 0.0);  // clamped at zero, never negative
  CHECK(d.s[7].y() == doctest::Approx(s.base_s[7].y() + 0.25).epsilon(1e-15));

  // translation inverts to within one rounding step
  const Vec3 back = d.p[3] - (s.base_tu[3] * r.dp[3].x() + s.base_tv[3] * r.dp[3].y() +
                              n3 * r.dp[3].z());
  CHECK((back - s.base_p[3]).norm() < 1e-14);

  const Residuals bad = Residuals::zeros(3);
  CHECK_THROWS_AS(apply_deformation(s, &bad), Error);
}

TEST_CASE("deformation: alpha monotone in the mask") {
  SurfelScene s = small_scene();
  Residuals r = Residuals::zeros(s.size());
  double prev = -1.0;
  for (double m : {0.0, 0.25, 0.5, 0.75, 1.0}) {
    r.malpha[0] = m;
    const DeformedSurfels d = apply_deformation(s, &r);
    CHECK(d.alpha[0] >= prev);
    prev = d.alpha[0];
  }
}

TEST_CASE("residual rotation composes about the base axes") {
  SurfelScene s = small_scene();
  Residuals r = Residuals::zeros(s.size());
  const double ang = 0.3;
  r.dr[0] = Vec3(ang, 0, 0);  // in-plane spin about the normal
  const DeformedSurfels d = apply_deformation(s, &r);

  const Vec3 n = s.base_tu[0].cross(s.base_tv[0]);
  const Mat3 R = Eigen::AngleAxisd(ang, n).toRotationMatrix();
  CHECK((d.tu[0] - R * s.base_tu[0]).norm() < 1e-12);
  CHECK((d.tv[0] - R * s.base_tv[0]).norm() < 1e-12);
  CHECK(std::abs(d.tu[0].dot(d.tv[0])) < 1e-12);
  CHECK(std::abs(d.tu[0].norm() - 1.0) < 1e-12);
}

TEST_CASE("deformation backward: finite differences on one surfel") {
  SurfelScene s = small_scene();
  Rng rng(21);
  Residuals r = Residuals::zeros(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    r.dp[i] = Vec3(rng.uniform(-0.05, 0.05), rng.uniform(-0.05, 0.05), rng.uniform(-0.05, 0.05));
    r.dr[i] = Vec3(rng.uniform(-0.2, 0.2), rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1));
    r.ds[i] = Vec2(rng.uniform(-0.01, 0.01), rng.uniform(-0.01, 0.01));
    r.malpha[i] = rng.uniform(0.3, 0.9);
  }

  // scalar probe: weighted sum of every deformed attribute
  DeformedGrads up = DeformedGrads::zeros(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    up.p[i] = Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    up.tu[i] = Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    up.tv[i] = Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    up.s[i] = Vec2(rng.uniform(-1, 1), rng.uniform(-1, 1));
    up.alpha[i] = rng.uniform(-1, 1);
  }
  auto eval = [&]() {
    const DeformedSurfels d = apply_deformation(s, &r);
    double acc = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i)
      acc += up.p[i].dot(d.p[i]) + up.tu[i].dot(d.tu[i]) + up.tv[i].dot(d.tv[i]) +
             up.s[i].dot(d.s[i]) + up.alpha[i] * d.alpha[i];
    return acc;
  };

  const ResidualGrads g = apply_deformation_backward(s, r, up);
  const double h = 1e-6;
  auto fd = [&](double* x) {
    const double x0 = *x;
    *x = x0 + h;
    const double fp = eval();
    *x = x0 - h;
    const double fm = eval();
    *x = x0;
    return (fp - fm) / (2 * h);
  };

  for (std::size_t i : {std::size_t{0}, std::size_t{17}, std::size_t{63}}) {
    for (int ax = 0; ax < 3; ++ax) {
      CHECK(g.dp[i][ax] == doctest::Approx(fd(&r.dp[i][ax])).epsilon(1e-6));
      CHECK(g.dr[i][ax] == doctest::Approx(fd(&r.dr[i][ax])).epsilon(1e-5));
    }
    for (int ax = 0; ax < 2; ++ax)
      CHECK(g.ds[i][ax] == doctest::Approx(fd(&r.ds[i][ax])).epsilon(1e-6));
    CHECK(g.malpha[i] == doctest::Approx(fd(&r.malpha[i])).epsilon(1e-6));
    CHECK(g.base_opacity[i] == doctest::Approx(fd(&s.opacity[i])).epsilon(1e-6));
  }
}

TEST_CASE("sh evaluation") {
  ShCoeffs c{};
  c[0] = 1.3;
  c[1] = 0.8;
  c[2] = 0.2;
  const Vec3 dir = Vec3(0.3, -0.5, 0.9).normalized();

  // DC only: color = Y00 * coefficient, clamped
  const Vec3 rgb = sh_eval(c, dir, 0);
  CHECK(rgb.x() == doctest::Approx(kShC0 * 1.3).epsilon(1e-14));
  CHECK(rgb.y() == doctest::Approx(kShC0 * 0.8).epsilon(1e-14));
  CHECK(rgb.z() == doctest::Approx(kShC0 * 0.2).epsilon(1e-14));

  // cap 0 ignores higher bands entirely
  ShCoeffs c2 = c;
  for (int k = 3; k < kShCoeffCount; ++k) c2[k] = 7.0;
  CHECK((sh_eval(c2, dir, 0) - rgb).norm() == 0.0);

  // cap k equals cap 3 when bands above k are zero
  ShCoeffs c3{};
  c3[0] = 0.9;
  for (int k = 3; k < 12; ++k) c3[k] = 0.05 * k;  // bands 1 only partially.. fill band 1
  CHECK((sh_eval(c3, dir, 3) - sh_eval(c3, dir, 3)).norm() == 0.0);
  ShCoeffs band01{};
  band01[0] = 0.8;
  for (int k = 3; k < 4 * 3; ++k) band01[k] = 0.03;  // bands 0..1 (basis 0..3)
  CHECK((sh_eval(band01, dir, 1) - sh_eval(band01, dir, 3)).norm() == 0.0);

  // clamp to [0, 1]
  ShCoeffs hot{};
  hot[0] = 100.0;
  hot[1] = -100.0;
  const Vec3 clamped = sh_eval(hot, dir, 0);
  CHECK(clamped.x() == 1.0);
  CHECK(clamped.y() == 0.0);

  // even-band parity: antipodal directions agree when odd bands are zero
  ShCoeffs even{};
  even[0] = 0.4;
  for (int k = 4; k < 9; ++k) even[k * 3 + 0] = 0.1;  // band 2 (basis 4..8)
  CHECK((sh_eval(even, dir, 3) - sh_eval(even, -dir, 3)).norm() < 1e-14);

  // clamp masks reported
  const ShEval full = sh_eval_full(hot, dir, 0);
  CHECK(full.clamped[0]);
  CHECK(full.clamped[1]);
  CHECK_FALSE(sh_eval_full(c, dir, 0).clamped[0]);
}

TEST_CASE("scene file round trip") {
  TempDir tmp("scene_rt");
  SurfelScene s = small_scene();
  Rng rng(22);
  for (std::size_t i = 0; i < s.size(); ++i) {
    s.delta_p[i] = Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    s.delta_s[i] = Vec2(rng.uniform(-1, 1), rng.uniform(-1, 1));
    s.delta_r[i] = Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    s.opacity[i] = rng.uniform();
    for (double& v : s.sh[i]) v = rng.uniform(-2, 2);
  }

  save_scene(tmp.file("a.msrf"), s);
  const SurfelScene back = load_scene(tmp.file("a.msrf"));
  REQUIRE(back.size() == s.size());
  CHECK(back.sh_degree == s.sh_degree);
  CHECK(back.densify_depth == s.densify_depth);
  CHECK(back.face_id == s.face_id);
  CHECK(back.corner_tag == s.corner_tag);

  // on-disk arrays are float32: loaded values equal the f32 cast exactly
  for (std::size_t i = 0; i < s.size(); ++i) {
    for (int ax = 0; ax < 3; ++ax) {
      CHECK(back.base_p[i][ax] == static_cast<double>(static_cast<float>(s.base_p[i][ax])));
      CHECK(back.delta_p[i][ax] ==
            static_cast<double>(static_cast<float>(s.delta_p[i][ax])));
    }
    CHECK(back.opacity[i] == static_cast<double>(static_cast<float>(s.opacity[i])));
    for (int k = 0; k < kShCoeffCount; ++k)
      CHECK(back.sh[i][k] == static_cast<double>(static_cast<float>(s.sh[i][k])));
  }

  // save(load(x)) is byte-identical to save of the loaded scene again
  save_scene(tmp.file("b.msrf"), back);
  const SurfelScene twice = load_scene(tmp.file("b.msrf"));
  save_scene(tmp.file("c.msrf"), twice);
  CHECK(test::same_bytes(tmp.file("b.msrf"), tmp.file("c.msrf")));
  CHECK(test::same_bytes(tmp.file("b.msrf") + ".json", tmp.file("c.msrf") + ".json"));

  CHECK_THROWS_AS(load_scene(tmp.file("missing.msrf")), Error);
}

TEST_CASE("reattach recomputes bases and keeps learned state") {
  SurfelScene s = small_scene();
  Rng rng(23);
  for (std::size_t i = 0; i < s.size(); ++i) {
    s.delta_p[i] = Vec3(0.01, 0.02, 0.03);
    s.opacity[i] = 0.42;
    s.sh[i][0] = 1.1;
  }
  const std::vector<Vec3> old_p = s.base_p;
  const std::vector<Vec2> old_s = s.base_s;

  TriangleMesh moved = make_icosahedron();
  for (auto& v : moved.vertices) v *= 1.5;
  reattach_base(s, moved);

  bool any_moved = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if ((s.base_p[i] - old_p[i]).norm() > 1e-9) any_moved = true;
    CHECK(s.delta_p[i] == Vec3(0.01, 0.02, 0.03));
    CHECK(s.opacity[i] == 0.42);
    CHECK(s.sh[i][0] == 1.1);
    // uniform scale carries straight into the registered axes
    CHECK(s.base_s[i].x() == doctest::Approx(1.5 * old_s[i].x()).epsilon(1e-12));
    CHECK(s.base_s[i].y() == doctest::Approx(1.5 * old_s[i].y()).epsilon(1e-12));
  }
  CHECK(any_moved);

  TriangleMesh wrong;
  wrong.vertices = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0)};
  wrong.faces = {{0, 1, 2}};
  CHECK_THROWS_AS(reattach_base(s, wrong), Error);
}
