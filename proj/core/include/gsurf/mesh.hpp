#pragma once

#include "gsurf/types.hpp"

#include <array>
#include <string>
#include <utility>
#include <vector>

namespace gsurf {

struct TriangleMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<uint32_t, 3>> faces;

  std::size_t num_vertices() const { return vertices.size(); }
  std::size_t num_faces() const { return faces.size(); }
};

// Structural problems (index range, repeated face indices, edges shared by
// more than two faces, inconsistent winding across shared edges). Empty
// result means the mesh is valid.
std::vector<std::string> mesh_problems(const TriangleMesh& mesh);
void validate_mesh(const TriangleMesh& mesh);  // throws with all problems listed

// ASCII OBJ. Accepts v/f lines (f with /t, //n suffixes); ignores comments
// and other directives. Rejects non-triangular faces, negative or
// out-of-range indices. All parse errors are listed in one exception.
TriangleMesh load_mesh(const std::string& path);
void save_mesh_obj(const std::string& path, const TriangleMesh& mesh);

// One Loop subdivision step as an explicit linear stencil so the same
// topology can be re-applied to per-frame vertex positions cheaply.
// Every row is a convex combination of input vertices.
struct LoopStencil {
  // rows[i] = {(source vertex, weight), ...} for output vertex i.
  std::vector<std::vector<std::pair<uint32_t, double>>> rows;
  std::vector<std::array<uint32_t, 3>> faces;  // output topology (4x input faces)
  std::size_t input_vertices = 0;
};

LoopStencil build_loop_stencil(const TriangleMesh& mesh);
TriangleMesh apply_loop_stencil(const LoopStencil& stencil, const TriangleMesh& mesh);

// iterations >= 0; 0 returns the input unchanged.
TriangleMesh loop_subdivide(const TriangleMesh& mesh, int iterations);

// Plane through the face: (centroid, unit normal). Degenerate faces
// (area <= 1e-12) are an error.
std::pair<Vec3, Vec3> face_plane(const TriangleMesh& mesh, std::size_t face_id);

double face_area(const TriangleMesh& mesh, std::size_t face_id);

// Number of distinct boundary loops (edges incident to exactly one face).
std::size_t count_boundary_loops(const TriangleMesh& mesh);

std::size_t count_edges(const TriangleMesh& mesh);

// Unit-radius icosahedron, outward consistent winding. Seed shape for the
// synthetic dataset and several tests.
TriangleMesh make_icosahedron();

}  // namespace gsurf
