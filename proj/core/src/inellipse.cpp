#include "gsurf/inellipse.hpp"

#include <cmath>
#include <complex>

namespace gsurf {

std::pair<double, double> inellipse_axes(double a, double b, double c) {
  check(a >= 0 && b >= 0 && c >= 0, "inellipse_axes: negative side length");
  const double slack = 1e-12 * (a + b + c);
  check(a <= b + c + slack && b <= a + c + slack && c <= a + b + slack,
        "inellipse_axes: side lengths violate the triangle inequality");
  const double a2 = a * a, b2 = b * b, c2 = c * c;
  const double q = a2 * a2 + b2 * b2 + c2 * c2 - a2 * b2 - b2 * c2 - c2 * a2;
  const double f = std::sqrt(std::max(0.0, q));
  const double sum = a2 + b2 + c2;
  const double s1 = std::sqrt(std::max(0.0, sum + 2.0 * f)) / 6.0;
  const double s2 = std::sqrt(std::max(0.0, sum - 2.0 * f)) / 6.0;
  return {s1, s2};
}

namespace {

struct TangentBasis {
  Vec3 centroid;
  Vec3 e1;  // along edge AB
  Vec3 e2;  // n x e1
  Vec3 n;
};

TangentBasis tangent_basis(const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 ab = b - a;
  const Vec3 ac = c - a;
  const Vec3 cross = ab.cross(ac);
  const double area = 0.5 * cross.norm();
  check(area > 1e-12, "degenerate triangle (area <= 1e-12)");
  TangentBasis t;
  t.centroid = (a + b + c) / 3.0;
  t.n = cross.normalized();
  t.e1 = ab.normalized();
  t.e2 = t.n.cross(t.e1);
  return t;
}

}  // namespace

SteinerFrame register_triangle(const Vec3& a, const Vec3& b, const Vec3& c) {
  const TangentBasis tb = tangent_basis(a, b, c);

  // 2x2 covariance of the centered vertices in tangent coordinates.
  double cxx = 0.0, cxy = 0.0, cyy = 0.0;
  for (const Vec3* v : {&a, &b, &c}) {
    const Vec3 d = *v - tb.centroid;
    const double x = d.dot(tb.e1);
    const double y = d.dot(tb.e2);
    cxx += x * x;
    cxy += x * y;
    cyy += y * y;
  }
  cxx /= 3.0;
  cxy /= 3.0;
  cyy /= 3.0;

  const double tr = cxx + cyy;
  const double disc = std::sqrt(std::max(0.0, (cxx - cyy) * (cxx - cyy) + 4.0 * cxy * cxy));
  const double lam1 = 0.5 * (tr + disc);

  Vec2 u;
  if (disc <= 1e-12 * std::max(tr, 1e-300)) {
    u = Vec2(1.0, 0.0);  // isotropic: align with edge AB
  } else {
    // Pick the better-conditioned eigenvector expression for lam1.
    const Vec2 cand1(cxy, lam1 - cxx);
    const Vec2 cand2(lam1 - cyy, cxy);
    u = cand1.norm() >= cand2.norm() ? cand1 : cand2;
    u.normalize();
    if (u.x() < 0.0 || (u.x() == 0.0 && u.y() < 0.0)) u = -u;
  }

  SteinerFrame frame;
  frame.centroid = tb.centroid;
  frame.t_u = u.x() * tb.e1 + u.y() * tb.e2;
  frame.t_v = tb.n.cross(frame.t_u);
  const auto [s1, s2] = inellipse_axes((b - c).norm(), (c - a).norm(), (a - b).norm());
  frame.s1 = s1;
  frame.s2 = s2;
  return frame;
}

SteinerFrame register_face_surfel(const TriangleMesh& mesh, std::size_t face_id) {
  check(face_id < mesh.faces.size(), "register_face_surfel: face id out of range");
  const auto& f = mesh.faces[face_id];
  return register_triangle(mesh.vertices[f[0]], mesh.vertices[f[1]], mesh.vertices[f[2]]);
}

SteinerFoci steiner_foci(const Vec3& a, const Vec3& b, const Vec3& c) {
  const TangentBasis tb = tangent_basis(a, b, c);
  using C = std::complex<double>;
  auto to_c = [&](const Vec3& v) {
    const Vec3 d = v - tb.centroid;
    return C(d.dot(tb.e1), d.dot(tb.e2));
  };
  const C za = to_c(a), zb = to_c(b), zc = to_c(c);
  // Foci = mean +- sqrt(z_a^2 + z_b^2 + z_c^2 - z_a z_b - z_b z_c - z_c z_a)/3;
  // the mean is 0 in centroid-relative coordinates.
  const C rad = std::sqrt(za * za + zb * zb + zc * zc - za * zb - zb * zc - zc * za);
  SteinerFoci out;
  out.origin = tb.centroid;
  out.e1 = tb.e1;
  out.e2 = tb.e2;
  out.z_plus = Vec2(rad.real() / 3.0, rad.imag() / 3.0);
  out.z_minus = -out.z_plus;
  return out;
}

std::size_t surfels_per_face(int depth) {
  std::size_t n = 1;
  for (int i = 0; i < depth; ++i) n = 1 + 3 * n;
  return n;
}

namespace {

void densify_recursive(const Vec3& a, const Vec3& b, const Vec3& c, uint32_t face_id,
                       CornerTag tag, int depth, std::vector<DensifiedSurfel>& out) {
  out.push_back({register_triangle(a, b, c), face_id, tag});
  if (depth <= 0) return;
  const Vec3 mab = 0.5 * (a + b);
  const Vec3 mbc = 0.5 * (b + c);
  const Vec3 mca = 0.5 * (c + a);
  densify_recursive(a, mab, mca, face_id, CornerTag::corner_a, depth - 1, out);
  densify_recursive(b, mbc, mab, face_id, CornerTag::corner_b, depth - 1, out);
  densify_recursive(c, mca, mbc, face_id, CornerTag::corner_c, depth - 1, out);
}

}  // namespace

std::vector<DensifiedSurfel> fractal_densify(const TriangleMesh& mesh, int depth) {
  check(depth >= 0, "fractal_densify: negative depth");
  std::vector<DensifiedSurfel> out;
  out.reserve(mesh.faces.size() * surfels_per_face(depth));
  for (std::size_t fi = 0; fi < mesh.faces.size(); ++fi) {
    const auto& f = mesh.faces[fi];
    densify_recursive(mesh.vertices[f[0]], mesh.vertices[f[1]], mesh.vertices[f[2]],
                      static_cast<uint32_t>(fi), CornerTag::center, depth, out);
  }
  return out;
}

}  // namespace gsurf
