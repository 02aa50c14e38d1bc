#include <gsurf/inellipse.hpp>

#include <doctest.h>

#include "test_util.hpp"

#include <cmath>

using namespace gsurf;

namespace {

constexpr double kPi = 3.14159265358979323846;

double triangle_area(double a, double b, double c) {
  const double s = 0.5 * (a + b + c);
  return std::sqrt(s * (s - a) * (s - b) * (s - c));
}

// Quadratic-form value of the frame's ellipse at a point (1 on the ellipse).
double ellipse_form(const SteinerFrame& f, const Vec3& p) {
  const Vec3 d = p - f.centroid;
  const double u = d.dot(f.t_u) / f.s1;
  const double v = d.dot(f.t_v) / f.s2;
  return u * u + v * v;
}

}  // namespace

TEST_CASE("axes: known values") {
  // equilateral: inellipse is the incircle, radius 1/(2 sqrt 3)
  const auto [e1, e2] = inellipse_axes(1, 1, 1);
  CHECK(e1 == doctest::Approx(1.0 / (2.0 * std::sqrt(3.0))).epsilon(1e-14));
  CHECK(e2 == doctest::Approx(1.0 / (2.0 * std::sqrt(3.0))).epsilon(1e-14));

  // collinear: zero minor axis
  const auto [c1, c2] = inellipse_axes(2, 1, 1);
  CHECK(c1 == doctest::Approx(1.0 / std::sqrt(3.0)).epsilon(1e-14));
  CHECK(c2 == 0.0);

  // 3-4-5: cross-checked against s1^2+s2^2 = (a^2+b^2+c^2)/18 and
  // (s1 s2)^2 = area^2/27, which avoid the nested radical entirely
  const auto [s1, s2] = inellipse_axes(3, 4, 5);
  CHECK(s1 == doctest::Approx(1.4699290230304356).epsilon(1e-14));
  CHECK(s2 == doctest::Approx(0.7855484994770001).epsilon(1e-14));
  CHECK(s1 * s1 + s2 * s2 == doctest::Approx(50.0 / 18.0).epsilon(1e-13));
  CHECK(s1 * s1 * s2 * s2 == doctest::Approx(36.0 / 27.0).epsilon(1e-13));
  CHECK(s1 >= s2);
}

TEST_CASE("axes: rejects impossible side lengths") {
  CHECK_THROWS_AS(inellipse_axes(5, 1, 1), Error);
  CHECK_THROWS_AS(inellipse_axes(-1, 1, 1), Error);
}

TEST_CASE("axes: area identity on random triangles") {
  Rng rng(11);
  for (int i = 0; i < 500; ++i) {
    Vec3 a, b, c;
    test::random_triangle(rng, a, b, c);
    const double la = (b - c).norm(), lb = (c - a).norm(), lc = (a - b).norm();
    const auto [s1, s2] = inellipse_axes(la, lb, lc);
    const double area = triangle_area(la, lb, lc);
    CHECK(kPi * s1 * s2 ==
          doctest::Approx(kPi / (3.0 * std::sqrt(3.0)) * area).epsilon(1e-9));
  }
}

TEST_CASE("registration: right isoceles example") {
  const SteinerFrame f =
      register_triangle(Vec3(0, 0, 0), Vec3(3, 0, 0), Vec3(0, 3, 0));
  CHECK((f.centroid - Vec3(1, 1, 0)).norm() < 1e-14);
  // major axis along the hypotenuse direction, sign fixed by the convention
  CHECK((f.t_u - Vec3(1, -1, 0).normalized()).norm() < 1e-10);
  CHECK(std::abs(f.t_u.dot(f.t_v)) < 1e-10);
  CHECK(std::abs(f.t_u.norm() - 1.0) < 1e-10);
  CHECK(std::abs(f.t_v.norm() - 1.0) < 1e-10);
  CHECK((f.normal() - Vec3(0, 0, 1)).norm() < 1e-10);
}

TEST_CASE("registration: equilateral tie-break along first edge") {
  const Vec3 a(0, 0, 0), b(1, 0, 0), c(0.5, std::sqrt(3.0) / 2.0, 0);
  const SteinerFrame f = register_triangle(a, b, c);
  CHECK((f.t_u - Vec3(1, 0, 0)).norm() < 1e-10);
  CHECK(f.s1 == doctest::Approx(f.s2).epsilon(1e-12));
}

TEST_CASE("registration: degenerate face rejected") {
  CHECK_THROWS_WITH_AS(register_triangle(Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(2, 0, 0)),
                       doctest::Contains("degenerate"), Error);
}

TEST_CASE("registration: tangency at edge midpoints") {
  Rng rng(12);
  for (int i = 0; i < 200; ++i) {
    Vec3 a, b, c;
    test::random_triangle(rng, a, b, c);
    const SteinerFrame f = register_triangle(a, b, c);
    CHECK(ellipse_form(f, 0.5 * (a + b)) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(ellipse_form(f, 0.5 * (b + c)) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(ellipse_form(f, 0.5 * (c + a)) == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("registration: similarity and rigid invariance") {
  Rng rng(13);
  Vec3 a(0.1, -0.4, 0.2), b(1.2, 0.3, -0.1), c(-0.5, 0.9, 0.6);  // scalene
  const SteinerFrame f = register_triangle(a, b, c);

  const double k = 3.7;
  const SteinerFrame fs = register_triangle(k * a, k * b, k * c);
  CHECK(fs.s1 == doctest::Approx(k * f.s1).epsilon(1e-12));
  CHECK(fs.s2 == doctest::Approx(k * f.s2).epsilon(1e-12));
  CHECK((fs.t_u - f.t_u).norm() < 1e-10);

  for (int i = 0; i < 20; ++i) {
    const Vec3 axis = Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1))
                          .normalized();
    const Mat3 R = Eigen::AngleAxisd(rng.uniform(0, kPi), axis).toRotationMatrix();
    const SteinerFrame fr = register_triangle(R * a, R * b, R * c);
    CHECK(fr.s1 == doctest::Approx(f.s1).epsilon(1e-10));
    CHECK(fr.s2 == doctest::Approx(f.s2).epsilon(1e-10));
    CHECK((fr.t_u - R * f.t_u).norm() < 1e-9);
    CHECK((fr.t_v - R * f.t_v).norm() < 1e-9);
  }
}

TEST_CASE("foci: equilateral collapse and sign symmetry") {
  const Vec3 a(0, 0, 0), b(1, 0, 0), c(0.5, std::sqrt(3.0) / 2.0, 0);
  const SteinerFoci foci = steiner_foci(a, b, c);
  CHECK(foci.z_plus.norm() < 1e-8);  // both at the centroid
  CHECK((foci.lift(foci.z_plus) - (a + b + c) / 3.0).norm() < 1e-8);

  Rng rng(14);
  for (int i = 0; i < 50; ++i) {
    Vec3 x, y, z;
    test::random_triangle(rng, x, y, z);
    const SteinerFoci f = steiner_foci(x, y, z);
    CHECK((f.z_plus + f.z_minus).norm() < 1e-12);
    CHECK((0.5 * (f.lift(f.z_plus) + f.lift(f.z_minus)) - (x + y + z) / 3.0).norm() <
          1e-12);
  }
}

TEST_CASE("foci: vertices 0, 1, i oracle") {
  // roots of p'(z) for p(z) = z(z-1)(z-i), lifted through the plane z = x+iy
  const SteinerFoci f = steiner_foci(Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0));
  const Vec3 r1(0.5690355937288492, 0.09763107293781752, 0.0);
  const Vec3 r2(0.09763107293781752, 0.5690355937288492, 0.0);
  const Vec3 p = f.lift(f.z_plus);
  const Vec3 m = f.lift(f.z_minus);
  const bool direct = (p - r1).norm() < 1e-12 && (m - r2).norm() < 1e-12;
  const bool swapped = (p - r2).norm() < 1e-12 && (m - r1).norm() < 1e-12;
  CHECK((direct || swapped));
}

TEST_CASE("foci line parallel to the eigen major axis") {
  Rng rng(15);
  int tested = 0;
  while (tested < 100) {
    Vec3 a, b, c;
    test::random_triangle(rng, a, b, c);
    const SteinerFoci foci = steiner_foci(a, b, c);
    if ((foci.z_plus - foci.z_minus).norm() < 1e-6) continue;  // near-circular
    const SteinerFrame frame = register_triangle(a, b, c);
    const Vec3 axis = (foci.lift(foci.z_plus) - foci.lift(foci.z_minus)).normalized();
    CHECK(axis.cross(frame.t_u).norm() < 1e-8);
    ++tested;
  }
}

TEST_CASE("fractal densification: counts, order, corner geometry") {
  const TriangleMesh ico = make_icosahedron();
  const auto surfels = fractal_densify(ico, 1);
  REQUIRE(surfels.size() == 4 * ico.num_faces());

  CHECK(surfels_per_face(0) == 1);
  CHECK(surfels_per_face(1) == 4);
  CHECK(surfels_per_face(2) == 13);
  CHECK(fractal_densify(ico, 0).size() == ico.num_faces());
  CHECK(fractal_densify(ico, 2).size() == 13 * ico.num_faces());

  for (std::size_t fi = 0; fi < ico.num_faces(); ++fi) {
    const auto& parent = surfels[4 * fi];
    CHECK(parent.face_id == fi);
    CHECK(parent.tag == CornerTag::center);
    for (int k = 1; k < 4; ++k) {
      const auto& corner = surfels[4 * fi + k];
      CHECK(corner.face_id == fi);
      CHECK(corner.tag == static_cast<CornerTag>(k));
      // corner triangles are similar to the parent at ratio 1/2
      CHECK(std::abs(corner.frame.s1 - 0.5 * parent.frame.s1) < 1e-12);
      CHECK(std::abs(corner.frame.s2 - 0.5 * parent.frame.s2) < 1e-12);
    }

    // corner_a centroid = (vA + mAB + mAC)/3
    const auto& f = ico.faces[fi];
    const Vec3 va = ico.vertices[f[0]], vb = ico.vertices[f[1]], vc = ico.vertices[f[2]];
    const Vec3 expect = (va + 0.5 * (va + vb) + 0.5 * (vc + va)) / 3.0;
    CHECK((surfels[4 * fi + 1].frame.centroid - expect).norm() < 1e-12);
  }
}
