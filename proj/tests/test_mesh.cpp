#include <gsurf/mesh.hpp>

#include <doctest.h>

#include "test_util.hpp"

#include <algorithm>
#include <set>

using namespace gsurf;
using test::TempDir;
using test::write_file;

TEST_CASE("obj loading: minimal file") {
  TempDir tmp("mesh_obj_min");
  write_file(tmp.file("tri.obj"),
             "# comment\n"
             "v 0 0 0\n"
             "v 1 0 0\n"
             "v 0 1 0\n"
             "f 1 2 3\n");
  const TriangleMesh m = load_mesh(tmp.file("tri.obj"));
  CHECK(m.num_vertices() == 3);
  CHECK(m.num_faces() == 1);
  CHECK(m.vertices[1] == Vec3(1, 0, 0));  // file order preserved
  CHECK(m.faces[0] == std::array<uint32_t, 3>{0, 1, 2});
}

TEST_CASE("obj loading: faces with texture/normal suffixes") {
  TempDir tmp("mesh_obj_suffix");
  write_file(tmp.file("tri.obj"),
             "v 0 0 0\nv 1 0 0\nv 0 1 0\nvt 0 0\nvn 0 0 1\n"
             "f 1/1 2/1/1 3//1\n");
  const TriangleMesh m = load_mesh(tmp.file("tri.obj"));
  CHECK(m.num_faces() == 1);
}

TEST_CASE("obj loading: rejections") {
  TempDir tmp("mesh_obj_bad");
  write_file(tmp.file("quad.obj"), "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n");
  CHECK_THROWS_WITH_AS(load_mesh(tmp.file("quad.obj")),
                       doctest::Contains("non-triangular"), Error);

  write_file(tmp.file("neg.obj"), "v 0 0 0\nv 1 0 0\nv 0 1 0\nf -3 -2 -1\n");
  CHECK_THROWS_WITH_AS(load_mesh(tmp.file("neg.obj")), doctest::Contains("negative"), Error);

  write_file(tmp.file("range.obj"), "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 4\n");
  CHECK_THROWS_WITH_AS(load_mesh(tmp.file("range.obj")), doctest::Contains("out of range"),
                       Error);

  CHECK_THROWS_AS(load_mesh(tmp.file("missing.obj")), Error);
}

TEST_CASE("obj loading: every parse problem reported at once") {
  TempDir tmp("mesh_obj_multi");
  write_file(tmp.file("bad.obj"), "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 9\nf 1 2 3 1\n");
  try {
    load_mesh(tmp.file("bad.obj"));
    FAIL("expected an error");
  } catch (const Error& e) {
    const std::string msg = e.what();
    CHECK(msg.find("out of range") != std::string::npos);
    CHECK(msg.find("non-triangular") != std::string::npos);
  }
}

TEST_CASE("icosahedron: counts and euler characteristic") {
  TempDir tmp("mesh_ico");
  const TriangleMesh ico = make_icosahedron();
  save_mesh_obj(tmp.file("ico.obj"), ico);
  const TriangleMesh m = load_mesh(tmp.file("ico.obj"));
  CHECK(m.num_vertices() == 12);
  CHECK(m.num_faces() == 20);
  CHECK(count_edges(m) == 30);
  CHECK(12 - 30 + 20 == 2);
  CHECK(mesh_problems(m).empty());
  CHECK(count_boundary_loops(m) == 0);
}

TEST_CASE("mesh problems: index range, repeats, winding, manifoldness") {
  TriangleMesh m;
  m.vertices = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0, 0, 1)};

  m.faces = {{0, 1, 7}};
  CHECK_FALSE(mesh_problems(m).empty());

  m.faces = {{0, 1, 1}};
  CHECK_FALSE(mesh_problems(m).empty());

  // same winding sense on the shared edge 0-1 => inconsistent orientation
  m.faces = {{0, 1, 2}, {0, 1, 3}};
  CHECK_FALSE(mesh_problems(m).empty());

  m.faces = {{0, 1, 2}, {1, 0, 3}};
  CHECK(mesh_problems(m).empty());
  CHECK(count_boundary_loops(m) == 1);
}

TEST_CASE("loop subdivision: icosahedron topology") {
  const TriangleMesh ico = make_icosahedron();
  const TriangleMesh sub = loop_subdivide(ico, 1);
  CHECK(sub.num_faces() == 80);
  CHECK(sub.num_vertices() == 42);  // V + E = 12 + 30
  CHECK(mesh_problems(sub).empty());
  CHECK(count_boundary_loops(sub) == 0);

  const TriangleMesh sub2 = loop_subdivide(ico, 2);
  CHECK(sub2.num_faces() == 320);
  CHECK(sub2.num_vertices() == 42 + count_edges(sub));
}

TEST_CASE("loop subdivision: zero iterations is identity") {
  const TriangleMesh ico = make_icosahedron();
  const TriangleMesh same = loop_subdivide(ico, 0);
  REQUIRE(same.num_vertices() == ico.num_vertices());
  REQUIRE(same.num_faces() == ico.num_faces());
  for (std::size_t i = 0; i < ico.num_vertices(); ++i)
    CHECK(same.vertices[i] == ico.vertices[i]);
  CHECK(same.faces == ico.faces);
}

TEST_CASE("loop subdivision: boundary rules on a single triangle") {
  TriangleMesh tri;
  tri.vertices = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0)};
  tri.faces = {{0, 1, 2}};
  const TriangleMesh sub = loop_subdivide(tri, 1);
  CHECK(sub.num_faces() == 4);
  CHECK(sub.num_vertices() == 6);
  CHECK(count_boundary_loops(sub) == 1);

  // odd (edge) vertices at exact midpoints: 1/2, 1/2 boundary stencil
  std::set<std::array<double, 3>> got;
  for (const auto& v : sub.vertices) got.insert({v.x(), v.y(), v.z()});
  CHECK(got.count({0.5, 0.0, 0.0}) == 1);
  CHECK(got.count({0.0, 0.5, 0.0}) == 1);
  CHECK(got.count({0.5, 0.5, 0.0}) == 1);

  // even (original) vertices: 3/4 self + 1/8 each boundary neighbor
  const Vec3 e0 = 0.75 * Vec3(0, 0, 0) + 0.125 * Vec3(1, 0, 0) + 0.125 * Vec3(0, 1, 0);
  bool found = false;
  for (const auto& v : sub.vertices)
    if ((v - e0).norm() < 1e-15) found = true;
  CHECK(found);
}

TEST_CASE("loop stencil rows are convex combinations") {
  const TriangleMesh ico = make_icosahedron();
  const LoopStencil st = build_loop_stencil(ico);
  REQUIRE(st.input_vertices == 12);
  for (const auto& row : st.rows) {
    double sum = 0.0;
    for (const auto& [src, w] : row) {
      CHECK(w >= 0.0);
      CHECK(src < 12);
      sum += w;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  }

  // re-applying the stencil to moved vertices matches direct subdivision
  TriangleMesh moved = ico;
  Rng rng(3);
  for (auto& v : moved.vertices)
    v += Vec3(rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1));
  const TriangleMesh a = apply_loop_stencil(st, moved);
  const TriangleMesh b = loop_subdivide(moved, 1);
  REQUIRE(a.num_vertices() == b.num_vertices());
  for (std::size_t i = 0; i < a.num_vertices(); ++i)
    CHECK((a.vertices[i] - b.vertices[i]).norm() < 1e-15);
}

TEST_CASE("loop subdivision: non-manifold edge rejected") {
  TriangleMesh m;
  m.vertices = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0, 0, 1), Vec3(0, -1, 0)};
  m.faces = {{0, 1, 2}, {1, 0, 3}, {0, 1, 4}};  // edge 0-1 on three faces
  CHECK_THROWS_AS(loop_subdivide(m, 1), Error);
}

TEST_CASE("face plane") {
  TriangleMesh m;
  m.vertices = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0)};
  m.faces = {{0, 1, 2}};
  const auto [centroid, normal] = face_plane(m, 0);
  CHECK((centroid - Vec3(1.0 / 3, 1.0 / 3, 0)).norm() < 1e-15);
  CHECK((normal - Vec3(0, 0, 1)).norm() < 1e-15);
  CHECK(face_area(m, 0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(std::abs(normal.norm() - 1.0) < 1e-12);

  // flipped winding negates the normal exactly
  TriangleMesh f = m;
  f.faces = {{0, 2, 1}};
  const auto [c2, n2] = face_plane(f, 0);
  CHECK((n2 + normal).norm() == 0.0);
  CHECK(c2 == centroid);

  TriangleMesh big;
  big.vertices = {Vec3(0, 0, 0), Vec3(3, 0, 0), Vec3(0, 3, 0)};
  big.faces = {{0, 1, 2}};
  CHECK((face_plane(big, 0).first - Vec3(1, 1, 0)).norm() < 1e-15);

  TriangleMesh degen;
  degen.vertices = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(2, 0, 0)};
  degen.faces = {{0, 1, 2}};
  CHECK_THROWS_WITH_AS(face_plane(degen, 0), doctest::Contains("degenerate"), Error);
}

TEST_CASE("obj save/load round trip") {
  TempDir tmp("mesh_roundtrip");
  const TriangleMesh ico = loop_subdivide(make_icosahedron(), 1);
  save_mesh_obj(tmp.file("m.obj"), ico);
  const TriangleMesh back = load_mesh(tmp.file("m.obj"));
  REQUIRE(back.num_vertices() == ico.num_vertices());
  REQUIRE(back.faces == ico.faces);
  for (std::size_t i = 0; i < ico.num_vertices(); ++i)
    CHECK((back.vertices[i] - ico.vertices[i]).norm() < 1e-12);
}
