#pragma once

#include "gsurf/mesh.hpp"
#include "gsurf/types.hpp"

#include <vector>

namespace gsurf {

// Semi-axes (s1 >= s2) of the Steiner inellipse of a triangle with side
// lengths a, b, c. Radicands are clamped at zero so needle triangles yield
// s2 = 0 instead of NaN. Violating the (possibly degenerate) triangle
// inequality is an error.
std::pair<double, double> inellipse_axes(double a, double b, double c);

// Oriented surfel frame on a triangle: centroid, orthonormal in-plane axes
// (t_u along the inellipse major axis), semi-axis scales.
struct SteinerFrame {
  Vec3 centroid = Vec3::Zero();
  Vec3 t_u = Vec3::UnitX();
  Vec3 t_v = Vec3::UnitY();
  double s1 = 0.0;
  double s2 = 0.0;

  Vec3 normal() const { return t_u.cross(t_v); }
};

// Frame for an arbitrary vertex triple (counter-clockwise seen from the
// +normal side). t_u direction comes from the eigen-decomposition of the
// 2x2 tangent-plane vertex covariance; near-isotropic covariance falls back
// to the direction of edge AB, and t_u's sign makes its first nonzero
// tangent-plane component positive. Degenerate triangles (area <= 1e-12)
// are an error.
SteinerFrame register_triangle(const Vec3& a, const Vec3& b, const Vec3& c);
SteinerFrame register_face_surfel(const TriangleMesh& mesh, std::size_t face_id);

// Foci of the Steiner inellipse in tangent-plane complex coordinates
// (origin at the centroid, x axis e1 along edge AB, y axis e2 = n x e1).
struct SteinerFoci {
  Vec2 z_plus = Vec2::Zero();
  Vec2 z_minus = Vec2::Zero();
  Vec3 origin = Vec3::Zero();  // centroid
  Vec3 e1 = Vec3::UnitX();
  Vec3 e2 = Vec3::UnitY();

  Vec3 lift(const Vec2& z) const { return origin + z.x() * e1 + z.y() * e2; }
};

SteinerFoci steiner_foci(const Vec3& a, const Vec3& b, const Vec3& c);

enum class CornerTag : uint8_t { center = 0, corner_a = 1, corner_b = 2, corner_c = 3 };

struct DensifiedSurfel {
  SteinerFrame frame;
  uint32_t face_id = 0;
  CornerTag tag = CornerTag::center;
};

// Mesh-wide conversion with midpoint ("fractal") densification. depth 0
// registers one surfel per face; depth 1 (default) adds the three corner
// sub-triangles (vertex + adjacent edge midpoints), 4 surfels per face,
// ordered (face_id, center, corner_a, corner_b, corner_c). Deeper depths
// recurse on the corners depth-first.
std::vector<DensifiedSurfel> fractal_densify(const TriangleMesh& mesh, int depth = 1);

// Surfels emitted per face at the given recursion depth.
std::size_t surfels_per_face(int depth);

}  // namespace gsurf
