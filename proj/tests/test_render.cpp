#include <gsurf/render.hpp>

#include <doctest.h>

#include "test_util.hpp"

#include <cmath>
#include <cstring>

using namespace gsurf;

namespace {

struct SurfelSpec {
  Vec3 p = Vec3::Zero();
  Vec3 tu = Vec3(1, 0, 0);
  Vec3 tv = Vec3(0, 1, 0);
  Vec2 s = Vec2(0.5, 0.5);
  double opacity = 0.5;
  Vec3 rgb = Vec3(0.5, 0.5, 0.5);
};

SurfelScene manual_scene(const std::vector<SurfelSpec>& specs) {
  SurfelScene sc;
  sc.densify_depth = 0;
  for (const auto& sp : specs) {
    sc.base_p.push_back(sp.p);
    sc.base_tu.push_back(sp.tu);
    sc.base_tv.push_back(sp.tv);
    sc.base_s.push_back(sp.s);
    sc.face_id.push_back(static_cast<uint32_t>(sc.face_id.size()));
    sc.corner_tag.push_back(0);
    sc.delta_p.push_back(Vec3::Zero());
    sc.delta_s.push_back(Vec2::Zero());
    sc.delta_r.push_back(Vec3::Zero());
    sc.opacity.push_back(sp.opacity);
    ShCoeffs c{};
    for (int ch = 0; ch < 3; ++ch) c[ch] = sp.rgb[ch] / kShC0;
    sc.sh.push_back(c);
  }
  return sc;
}

// Camera at the origin looking down +z, image center at the middle pixel.
Camera centered_camera(int size, double focal) {
  Camera cam;
  cam.fx = cam.fy = focal;
  cam.cx = cam.cy = 0.5 * size;
  cam.width = cam.height = size;
  cam.near = 0.01;
  cam.far = 100.0;
  return cam;
}

Image ones_image(int w, int h, int c) {
  Image im(w, h, c);
  std::fill(im.data.begin(), im.data.end(), 1.0);
  return im;
}

}  // namespace

TEST_CASE("empty scene renders black, zero alpha, no fragments") {
  const SurfelScene sc = manual_scene({});
  const RenderBuffers b = render(sc, centered_camera(4, 8.0));
  REQUIRE(b.width == 4);
  REQUIRE(b.height == 4);
  for (int i = 0; i < 16; ++i) {
    CHECK(b.color[i] == Vec3::Zero());
    CHECK(b.alpha[i] == 0.0);
    CHECK(b.depth[i] == 0.0);
    CHECK(b.normal[i] == Vec3::Zero());
    CHECK(b.frag_count[i] == 0);
  }
  CHECK(b.fragments.empty());
}

TEST_CASE("two fronto-parallel surfels composite front to back") {
  // Red at z=1 over blue at z=2, both alpha 1/2 on the center ray.
  const SurfelScene sc = manual_scene({
      {Vec3(0, 0, 1), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec2(0.5, 0.5), 0.5, Vec3(1, 0, 0)},
      {Vec3(0, 0, 2), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec2(0.5, 0.5), 0.5, Vec3(0, 0, 1)},
  });
  const Camera cam = centered_camera(3, 100.0);
  const RenderBuffers b = render(sc, cam);

  const std::size_t px = b.pixel(1, 1);  // exact optical axis
  CHECK(b.color[px].x() == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(b.color[px].y() == 0.0);
  CHECK(b.color[px].z() == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(b.alpha[px] == doctest::Approx(0.75).epsilon(1e-12));
  const double wz = 0.5 * 1.0 + 0.25 * 2.0;
  CHECK(b.depth[px] == doctest::Approx(wz / (0.75 + kDepthEps)).epsilon(1e-12));
  // Both surfels face the camera: accumulated normal is -z exactly.
  CHECK((b.normal[px] - Vec3(0, 0, -1)).norm() < 1e-12);

  REQUIRE(b.frag_count[px] == 2);
  const Fragment& f0 = b.fragments[b.frag_begin[px]];
  const Fragment& f1 = b.fragments[b.frag_begin[px] + 1];
  CHECK(f0.z == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(f1.z == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(f0.a == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(f0.omega == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(f1.omega == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("blending conserves weight: alpha + final transmittance = 1") {
  Rng rng(401, 0);
  std::vector<SurfelSpec> specs;
  for (int i = 0; i < 8; ++i) {
    SurfelSpec sp;
    sp.p = Vec3(rng.uniform(-0.4, 0.4), rng.uniform(-0.4, 0.4), rng.uniform(1.5, 3.0));
    const Vec3 n = Vec3(rng.normal(), rng.normal(), rng.normal() + 2.0).normalized();
    sp.tu = n.cross(Vec3(0, 1, 0)).normalized();
    sp.tv = n.cross(sp.tu);
    sp.s = Vec2(rng.uniform(0.2, 0.6), rng.uniform(0.1, 0.3));
    sp.opacity = rng.uniform(0.2, 0.95);
    specs.push_back(sp);
  }
  const SurfelScene sc = manual_scene(specs);
  const Camera cam = centered_camera(9, 12.0);
  const RenderBuffers b = render(sc, cam, RenderOptions::smooth());

  for (int i = 0; i < 81; ++i) {
    double T = 1.0;
    for (uint32_t k = 0; k < b.frag_count[i]; ++k)
      T *= 1.0 - b.fragments[b.frag_begin[i] + k].a;
    CHECK(b.alpha[i] + T == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("fragment alpha saturates and the saturated path has zero gradient") {
  const SurfelScene sc = manual_scene(
      {{Vec3(0, 0, 1), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec2(0.5, 0.5), 1.0, Vec3(1, 1, 1)}});
  const Camera cam = centered_camera(1, 50.0);
  const RenderBuffers b = render(sc, cam);
  REQUIRE(b.frag_count[0] == 1);
  CHECK(b.fragments[0].a == 0.9999);  // exact clamp value
  CHECK(b.alpha[0] == 0.9999);

  const DeformedSurfels def = apply_deformation(sc, nullptr);
  const Image ga = ones_image(1, 1, 1);
  const DeformedGrads dg = render_backward(sc, def, cam, b, nullptr, &ga, nullptr, nullptr);
  CHECK(dg.alpha[0] == 0.0);
  CHECK(dg.p[0] == Vec3::Zero());
  CHECK(dg.s[0] == Vec2::Zero());

  // Same geometry below the clamp keeps its gradient.
  SurfelScene sc2 = sc;
  sc2.opacity[0] = 0.5;
  const RenderBuffers b2 = render(sc2, cam);
  const DeformedSurfels def2 = apply_deformation(sc2, nullptr);
  const DeformedGrads dg2 =
      render_backward(sc2, def2, cam, b2, nullptr, &ga, nullptr, nullptr);
  CHECK(dg2.alpha[0] > 0.0);
}

TEST_CASE("early termination stops compositing and hides occluded surfels") {
  const SurfelScene sc = manual_scene({
      {Vec3(0, 0, 1), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec2(0.5, 0.5), 0.999, Vec3(1, 0, 0)},
      {Vec3(0, 0, 2), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec2(0.5, 0.5), 0.999, Vec3(0, 1, 0)},
      {Vec3(0, 0, 3), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec2(0.5, 0.5), 0.5, Vec3(0, 0, 1)},
  });
  const Camera cam = centered_camera(1, 50.0);
  const RenderBuffers b = render(sc, cam);
  // T after two fragments is 1e-6 < 1e-4: the third never composites.
  REQUIRE(b.frag_count[0] == 2);

  const DeformedSurfels def = apply_deformation(sc, nullptr);
  const Image gc = ones_image(1, 1, 3);
  const DeformedGrads dg = render_backward(sc, def, cam, b, &gc, nullptr, nullptr, nullptr);
  CHECK(dg.alpha[2] == 0.0);
  CHECK(dg.p[2] == Vec3::Zero());
  CHECK(dg.sh[2] == ShCoeffs{});
  CHECK(dg.alpha[0] != 0.0);

  RenderOptions no_term;
  no_term.early_termination = false;
  CHECK(render(sc, cam, no_term).frag_count[0] == 3);
}

TEST_CASE("faint and far-tail fragments are culled by the default cutoffs") {
  // Opacity below 1/255 never produces a fragment.
  const SurfelScene faint = manual_scene(
      {{Vec3(0, 0, 1), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec2(0.5, 0.5), 0.003, Vec3(1, 1, 1)}});
  const Camera cam = centered_camera(1, 50.0);
  CHECK(render(faint, cam).frag_count[0] == 0);
  CHECK(render(faint, cam, RenderOptions::smooth()).frag_count[0] == 1);

  // Center 4 sigma off the ray: rho = 16 > 9 under the default cutoff.
  const SurfelScene far_tail = manual_scene(
      {{Vec3(0.4, 0, 1), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec2(0.1, 0.1), 0.9, Vec3(1, 1, 1)}});
  CHECK(render(far_tail, cam).frag_count[0] == 0);
  const RenderBuffers smooth_b = render(far_tail, cam, RenderOptions::smooth());
  REQUIRE(smooth_b.frag_count[0] == 1);
  CHECK(smooth_b.fragments[0].a == doctest::Approx(0.9 * std::exp(-8.0)).epsilon(1e-12));
}

TEST_CASE("silhouette equals the alpha plane bit for bit") {
  Rng rng(402, 0);
  std::vector<SurfelSpec> specs;
  for (int i = 0; i < 5; ++i) {
    SurfelSpec sp;
    sp.p = Vec3(rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5), rng.uniform(1.0, 2.5));
    sp.opacity = rng.uniform(0.3, 0.9);
    sp.s = Vec2(0.3, 0.2);
    specs.push_back(sp);
  }
  const SurfelScene sc = manual_scene(specs);
  const DeformedSurfels def = apply_deformation(sc, nullptr);
  const Camera cam = centered_camera(8, 10.0);

  const RenderBuffers b = render(sc, def, cam);
  const Image sil = render_silhouette(sc, def, cam);
  REQUIRE(sil.width == 8);
  REQUIRE(sil.channels == 1);
  for (int i = 0; i < 64; ++i) CHECK(sil.data[i] == b.alpha[i]);
}

TEST_CASE("outputs are invariant under a joint rigid motion of scene and camera") {
  // One surfel per jittered face: densified surfels are coplanar within a
  // face, so their ray depths tie to rounding and the blend order could flip
  // between the two transforms.
  TriangleMesh mesh = make_icosahedron();
  Rng rng(403, 0);
  for (Vec3& v : mesh.vertices)
    v += 0.08 * Vec3(rng.normal(), rng.normal(), rng.normal());
  SceneInitConfig init_cfg;
  init_cfg.densify_depth = 0;
  SurfelScene sc = init_scene(mesh, init_cfg);
  for (std::size_t i = 0; i < sc.size(); ++i) {
    sc.opacity[i] = rng.uniform(0.3, 0.9);
    sc.sh[i][0] = rng.uniform(0.1, 1.5);
    sc.sh[i][1] = rng.uniform(0.1, 1.5);
    sc.sh[i][2] = rng.uniform(0.1, 1.5);
  }
  Camera cam = centered_camera(16, 20.0);
  cam.translation = Vec3(0, 0, 3.0);  // world origin 3 units ahead

  const Mat3 Q = Eigen::AngleAxisd(0.8, Vec3(0.3, 1.0, -0.2).normalized()).toRotationMatrix();
  const Vec3 b = Vec3(0.7, -1.3, 2.1);

  SurfelScene moved = sc;
  for (std::size_t i = 0; i < sc.size(); ++i) {
    moved.base_p[i] = Q * sc.base_p[i] + b;
    moved.base_tu[i] = Q * sc.base_tu[i];
    moved.base_tv[i] = Q * sc.base_tv[i];
  }
  Camera cam2 = cam;
  cam2.rotation = cam.rotation * Q.transpose();
  cam2.translation = cam.translation - cam.rotation * Q.transpose() * b;

  // Degree cap 0 removes the world-frame view-direction dependence.
  const RenderBuffers r1 = render(sc, cam, RenderOptions::smooth(0));
  const RenderBuffers r2 = render(moved, cam2, RenderOptions::smooth(0));
  double worst = 0.0;
  for (int i = 0; i < 256; ++i) {
    worst = std::max(worst, (r1.color[i] - r2.color[i]).cwiseAbs().maxCoeff());
    worst = std::max(worst, std::abs(r1.alpha[i] - r2.alpha[i]));
    worst = std::max(worst, std::abs(r1.depth[i] - r2.depth[i]));
    worst = std::max(worst, (r1.normal[i] - r2.normal[i]).cwiseAbs().maxCoeff());
  }
  CHECK(worst < 1e-9);
}

TEST_CASE("repeat renders and backward passes are bit-identical") {
  const SurfelScene sc = init_scene(make_icosahedron());
  Camera cam = centered_camera(24, 30.0);
  cam.translation = Vec3(0, 0, 3.0);

  const RenderBuffers r1 = render(sc, cam);
  const RenderBuffers r2 = render(sc, cam);
  REQUIRE(r1.fragments.size() == r2.fragments.size());
  for (std::size_t i = 0; i < r1.color.size(); ++i) {
    CHECK(r1.color[i] == r2.color[i]);
    CHECK(r1.alpha[i] == r2.alpha[i]);
    CHECK(r1.depth[i] == r2.depth[i]);
  }

  const DeformedSurfels def = apply_deformation(sc, nullptr);
  const Image gc = ones_image(24, 24, 3);
  const Image gd = ones_image(24, 24, 1);
  const DeformedGrads g1 = render_backward(sc, def, cam, r1, &gc, nullptr, &gd, nullptr);
  const DeformedGrads g2 = render_backward(sc, def, cam, r2, &gc, nullptr, &gd, nullptr);
  for (std::size_t i = 0; i < sc.size(); ++i) {
    CHECK(g1.p[i] == g2.p[i]);
    CHECK(g1.tu[i] == g2.tu[i]);
    CHECK(g1.tv[i] == g2.tv[i]);
    CHECK(g1.s[i] == g2.s[i]);
    CHECK(g1.alpha[i] == g2.alpha[i]);
    CHECK(g1.sh[i] == g2.sh[i]);
  }
}

TEST_CASE("ray-plane intersection matches an independent linear solve") {
  // Solve [s1 tu | s2 tv | -d] (u, v, t) = -p for each pixel; t is the
  // camera-space depth and u^2 + v^2 the Gaussian argument.
  SurfelSpec sp;
  sp.p = Vec3(0.13, -0.21, 1.7);
  const Vec3 n = Vec3(0.3, 0.45, 1.0).normalized();
  sp.tu = n.cross(Vec3(0, 1, 0.2)).normalized();
  sp.tv = n.cross(sp.tu);
  sp.s = Vec2(0.37, 0.22);
  sp.opacity = 0.7;
  const SurfelScene sc = manual_scene({sp});
  const Camera cam = centered_camera(5, 6.0);

  const RenderBuffers b = render(sc, cam, RenderOptions::smooth());
  int checked = 0;
  for (int y = 0; y < 5; ++y) {
    for (int x = 0; x < 5; ++x) {
      const std::size_t px = b.pixel(x, y);
      if (b.frag_count[px] != 1) continue;
      const Fragment& f = b.fragments[b.frag_begin[px]];

      Mat3 A;
      A.col(0) = sp.s.x() * sp.tu;
      A.col(1) = sp.s.y() * sp.tv;
      A.col(2) = -cam.pixel_ray(x, y);
      const Vec3 uvt = A.fullPivLu().solve(-sp.p);
      CHECK(f.z == doctest::Approx(uvt.z()).epsilon(1e-10));
      const double rho = uvt.x() * uvt.x() + uvt.y() * uvt.y();
      CHECK(-2.0 * std::log(f.a / sp.opacity) == doctest::Approx(rho).epsilon(1e-8));
      ++checked;
    }
  }
  CHECK(checked == 25);
}

TEST_CASE("projected footprint floor widens tiny surfels and freezes their scale grads") {
  SurfelSpec tiny;
  tiny.p = Vec3(0, 0, 1);
  tiny.s = Vec2(1e-4, 1e-4);
  tiny.opacity = 0.8;
  SurfelSpec floored = tiny;
  floored.s = Vec2(0.03, 0.03);  // 0.3 px * z / focal

  const Camera cam = centered_camera(5, 10.0);
  const RenderBuffers bt = render(manual_scene({tiny}), cam);
  const RenderBuffers bf = render(manual_scene({floored}), cam);
  for (int i = 0; i < 25; ++i) {
    CHECK(bt.alpha[i] == doctest::Approx(bf.alpha[i]).epsilon(1e-14));
    CHECK(bt.color[i].x() == doctest::Approx(bf.color[i].x()).epsilon(1e-14));
  }
  CHECK(bt.alpha[bt.pixel(2, 2)] > 0.0);

  const SurfelScene sc = manual_scene({tiny});
  const DeformedSurfels def = apply_deformation(sc, nullptr);
  const Image ga = ones_image(5, 5, 1);
  const DeformedGrads dg = render_backward(sc, def, cam, bt, nullptr, &ga, nullptr, nullptr);
  CHECK(dg.s[0] == Vec2::Zero());
  CHECK(dg.alpha[0] != 0.0);
}

TEST_CASE("depth is the omega-weighted mean with a smoothing epsilon") {
  const SurfelScene sc = manual_scene(
      {{Vec3(0, 0, 1.5), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec2(0.5, 0.5), 0.6, Vec3(1, 1, 1)}});
  const Camera cam = centered_camera(1, 50.0);
  const RenderBuffers b = render(sc, cam);
  REQUIRE(b.frag_count[0] == 1);
  const Fragment& f = b.fragments[0];
  CHECK(b.depth[0] == f.omega * f.z / (f.omega + kDepthEps));
  CHECK(b.depth[0] < f.z);
}

TEST_CASE("camera validation and look-at construction") {
  Camera bad = centered_camera(4, 8.0);
  bad.fx = 0.0;
  CHECK_THROWS_WITH_AS(bad.validate(), doctest::Contains("focal"), Error);
  bad = centered_camera(4, 8.0);
  bad.near = 2.0;
  bad.far = 1.0;
  CHECK_THROWS_WITH_AS(bad.validate(), doctest::Contains("near"), Error);
  bad = centered_camera(4, 8.0);
  bad.rotation = 2.0 * Mat3::Identity();
  CHECK_THROWS_WITH_AS(bad.validate(), doctest::Contains("orthonormal"), Error);

  const Vec3 eye(1.0, 2.0, -3.0), target(0.5, -0.2, 4.0);
  const Camera cam = make_look_at(eye, target, Vec3(0, 1, 0), 30, 30, 16, 16, 0.1, 50);
  cam.validate();
  const Vec3 tc = cam.to_camera(target);
  CHECK(std::abs(tc.x()) < 1e-12);
  CHECK(std::abs(tc.y()) < 1e-12);
  CHECK(tc.z() == doctest::Approx((target - eye).norm()).epsilon(1e-12));
  CHECK((cam.center_world() - eye).norm() < 1e-12);
  // Pixel y grows downward: world up maps to negative camera y.
  CHECK(cam.rotate_to_camera(Vec3(0, 1, 0)).y() < 0.0);
}

TEST_CASE("render rejects mismatched deformed state and bad buffers") {
  const SurfelScene sc = manual_scene(
      {{Vec3(0, 0, 1), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec2(0.5, 0.5), 0.5, Vec3(1, 1, 1)}});
  const Camera cam = centered_camera(2, 8.0);
  DeformedSurfels wrong;  // empty, size 0 != 1
  CHECK_THROWS_WITH_AS(render(sc, wrong, cam), doctest::Contains("size mismatch"), Error);

  RenderOptions no_frag;
  no_frag.keep_fragments = false;
  const RenderBuffers b = render(sc, cam, no_frag);
  CHECK(b.frag_begin.empty());
  const DeformedSurfels def = apply_deformation(sc, nullptr);
  const Image gc = ones_image(2, 2, 3);
  CHECK_THROWS_WITH_AS(render_backward(sc, def, cam, b, &gc, nullptr, nullptr, nullptr),
                       doctest::Contains("without fragments"), Error);
}
