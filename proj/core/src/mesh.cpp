#include "gsurf/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>

namespace gsurf {

namespace {

using Edge = std::pair<uint32_t, uint32_t>;  // (min, max)

Edge make_edge(uint32_t a, uint32_t b) { return {std::min(a, b), std::max(a, b)}; }

struct EdgeInfo {
  int face_count = 0;
  // Directed occurrences: +1 for (min->max), -1 for (max->min).
  int direction_sum = 0;
  std::vector<uint32_t> opposite;  // opposite vertex per incident face
};

std::map<Edge, EdgeInfo> collect_edges(const TriangleMesh& mesh) {
  std::map<Edge, EdgeInfo> edges;
  for (const auto& f : mesh.faces) {
    for (int k = 0; k < 3; ++k) {
      const uint32_t a = f[k];
      const uint32_t b = f[(k + 1) % 3];
      const uint32_t c = f[(k + 2) % 3];
      EdgeInfo& info = edges[make_edge(a, b)];
      info.face_count += 1;
      info.direction_sum += (a < b) ? 1 : -1;
      info.opposite.push_back(c);
    }
  }
  return edges;
}

}  // namespace

std::vector<std::string> mesh_problems(const TriangleMesh& mesh) {
  std::vector<std::string> problems;
  const uint32_t nv = static_cast<uint32_t>(mesh.vertices.size());
  for (std::size_t i = 0; i < mesh.faces.size(); ++i) {
    const auto& f = mesh.faces[i];
    for (int k = 0; k < 3; ++k) {
      if (f[k] >= nv) {
        problems.push_back("face " + std::to_string(i) + ": vertex index " +
                           std::to_string(f[k]) + " out of range (" + std::to_string(nv) +
                           " vertices)");
      }
    }
    if (f[0] == f[1] || f[1] == f[2] || f[2] == f[0]) {
      problems.push_back("face " + std::to_string(i) + ": repeated vertex index");
    }
  }
  if (!problems.empty()) return problems;  // edge analysis needs sane indices

  for (const auto& [edge, info] : collect_edges(mesh)) {
    if (info.face_count > 2) {
      problems.push_back("edge (" + std::to_string(edge.first) + "," +
                         std::to_string(edge.second) + ") shared by " +
                         std::to_string(info.face_count) + " faces (non-manifold)");
    } else if (info.face_count == 2 && info.direction_sum != 0) {
      problems.push_back("edge (" + std::to_string(edge.first) + "," +
                         std::to_string(edge.second) +
                         ") traversed twice in the same direction (inconsistent winding)");
    }
  }
  return problems;
}

void validate_mesh(const TriangleMesh& mesh) {
  const auto problems = mesh_problems(mesh);
  if (problems.empty()) return;
  std::string msg = "invalid mesh:";
  for (const auto& p : problems) msg += "\n  " + p;
  throw Error(msg);
}

TriangleMesh load_mesh(const std::string& path) {
  std::ifstream in(path);
  check(in.good(), "load_mesh: cannot open " + path);

  TriangleMesh mesh;
  std::vector<std::string> errors;
  std::string line;
  std::size_t line_no = 0;

  auto fail = [&](const std::string& what) {
    errors.push_back(path + ":" + std::to_string(line_no) + ": " + what);
  };

  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ss(line);
    std::string tag;
    if (!(ss >> tag) || tag[0] == '#') continue;

    if (tag == "v") {
      double x, y, z;
      if (!(ss >> x >> y >> z)) {
        fail("malformed vertex line: '" + line + "'");
        continue;
      }
      mesh.vertices.emplace_back(x, y, z);
    } else if (tag == "f") {
      std::vector<long> idx;
      std::string tok;
      bool bad = false;
      while (ss >> tok) {
        // accept "i", "i/t", "i//n", "i/t/n"; only the vertex index matters
        const std::size_t slash = tok.find('/');
        const std::string head = slash == std::string::npos ? tok : tok.substr(0, slash);
        try {
          std::size_t used = 0;
          const long v = std::stol(head, &used);
          if (used != head.size()) throw std::invalid_argument(head);
          idx.push_back(v);
        } catch (const std::exception&) {
          fail("malformed face index '" + tok + "'");
          bad = true;
          break;
        }
      }
      if (bad) continue;
      if (idx.size() != 3) {
        fail("non-triangular face with " + std::to_string(idx.size()) + " vertices");
        continue;
      }
      std::array<uint32_t, 3> f{};
      bool ok = true;
      for (int k = 0; k < 3; ++k) {
        const long v = idx[k];
        if (v < 0) {
          fail("negative (relative) face index " + std::to_string(v) + " not supported");
          ok = false;
        } else if (v == 0 || static_cast<std::size_t>(v) > mesh.vertices.size()) {
          fail("face index " + std::to_string(v) + " out of range (have " +
               std::to_string(mesh.vertices.size()) + " vertices)");
          ok = false;
        } else {
          f[k] = static_cast<uint32_t>(v - 1);
        }
      }
      if (ok) mesh.faces.push_back(f);
    }
    // all other directives (vn, vt, o, g, s, usemtl, mtllib, ...) are ignored
  }

  if (!errors.empty()) {
    std::string msg = "load_mesh: " + std::to_string(errors.size()) + " error(s):";
    for (const auto& e : errors) msg += "\n  " + e;
    throw Error(msg);
  }
  validate_mesh(mesh);
  return mesh;
}

void save_mesh_obj(const std::string& path, const TriangleMesh& mesh) {
  std::ofstream out(path);
  check(out.good(), "save_mesh_obj: cannot open " + path);
  char buf[96];
  for (const auto& v : mesh.vertices) {
    std::snprintf(buf, sizeof(buf), "v %.17g %.17g %.17g\n", v.x(), v.y(), v.z());
    out << buf;
  }
  for (const auto& f : mesh.faces) {
    out << "f " << f[0] + 1 << " " << f[1] + 1 << " " << f[2] + 1 << "\n";
  }
  check(out.good(), "save_mesh_obj: write failed for " + path);
}

LoopStencil build_loop_stencil(const TriangleMesh& mesh) {
  validate_mesh(mesh);
  const std::size_t nv = mesh.vertices.size();
  const auto edges = collect_edges(mesh);

  // Neighbor rings and boundary adjacency for even (original) vertices.
  std::vector<std::set<uint32_t>> ring(nv);
  std::vector<std::vector<uint32_t>> boundary_nbr(nv);
  for (const auto& [edge, info] : edges) {
    ring[edge.first].insert(edge.second);
    ring[edge.second].insert(edge.first);
    if (info.face_count == 1) {
      boundary_nbr[edge.first].push_back(edge.second);
      boundary_nbr[edge.second].push_back(edge.first);
    }
  }

  LoopStencil st;
  st.input_vertices = nv;
  st.rows.reserve(nv + edges.size());

  // Even vertices keep their indices.
  for (std::size_t v = 0; v < nv; ++v) {
    std::vector<std::pair<uint32_t, double>> row;
    if (!boundary_nbr[v].empty()) {
      check(boundary_nbr[v].size() == 2,
            "loop_subdivide: boundary vertex " + std::to_string(v) +
                " has " + std::to_string(boundary_nbr[v].size()) +
                " boundary edges (pinched boundary)");
      row.push_back({static_cast<uint32_t>(v), 0.75});
      row.push_back({boundary_nbr[v][0], 0.125});
      row.push_back({boundary_nbr[v][1], 0.125});
    } else if (ring[v].empty()) {
      row.push_back({static_cast<uint32_t>(v), 1.0});  // isolated vertex
    } else {
      const double n = static_cast<double>(ring[v].size());
      const double inner = 0.375 + 0.25 * std::cos(2.0 * std::numbers::pi / n);
      const double beta = (0.625 - inner * inner) / n;
      row.push_back({static_cast<uint32_t>(v), 1.0 - n * beta});
      for (uint32_t nb : ring[v]) row.push_back({nb, beta});
    }
    st.rows.push_back(std::move(row));
  }

  // Odd (edge) vertices, in sorted edge order for determinism.
  std::map<Edge, uint32_t> edge_vertex;
  for (const auto& [edge, info] : edges) {
    const uint32_t id = static_cast<uint32_t>(st.rows.size());
    edge_vertex[edge] = id;
    std::vector<std::pair<uint32_t, double>> row;
    if (info.face_count == 1) {
      row.push_back({edge.first, 0.5});
      row.push_back({edge.second, 0.5});
    } else {
      row.push_back({edge.first, 0.375});
      row.push_back({edge.second, 0.375});
      row.push_back({info.opposite[0], 0.125});
      row.push_back({info.opposite[1], 0.125});
    }
    st.rows.push_back(std::move(row));
  }

  st.faces.reserve(mesh.faces.size() * 4);
  for (const auto& f : mesh.faces) {
    const uint32_t a = f[0], b = f[1], c = f[2];
    const uint32_t mab = edge_vertex.at(make_edge(a, b));
    const uint32_t mbc = edge_vertex.at(make_edge(b, c));
    const uint32_t mca = edge_vertex.at(make_edge(c, a));
    st.faces.push_back({a, mab, mca});
    st.faces.push_back({mab, b, mbc});
    st.faces.push_back({mca, mbc, c});
    st.faces.push_back({mab, mbc, mca});
  }
  return st;
}

TriangleMesh apply_loop_stencil(const LoopStencil& stencil, const TriangleMesh& mesh) {
  check(mesh.vertices.size() == stencil.input_vertices,
        "apply_loop_stencil: vertex count mismatch");
  TriangleMesh out;
  out.vertices.resize(stencil.rows.size());
  for (std::size_t i = 0; i < stencil.rows.size(); ++i) {
    Vec3 p = Vec3::Zero();
    for (const auto& [src, w] : stencil.rows[i]) p += w * mesh.vertices[src];
    out.vertices[i] = p;
  }
  out.faces = stencil.faces;
  return out;
}

TriangleMesh loop_subdivide(const TriangleMesh& mesh, int iterations) {
  check(iterations >= 0, "loop_subdivide: negative iteration count");
  TriangleMesh current = mesh;
  for (int i = 0; i < iterations; ++i) {
    current = apply_loop_stencil(build_loop_stencil(current), current);
  }
  return current;
}

double face_area(const TriangleMesh& mesh, std::size_t face_id) {
  check(face_id < mesh.faces.size(), "face_area: face id out of range");
  const auto& f = mesh.faces[face_id];
  const Vec3 e1 = mesh.vertices[f[1]] - mesh.vertices[f[0]];
  const Vec3 e2 = mesh.vertices[f[2]] - mesh.vertices[f[0]];
  return 0.5 * e1.cross(e2).norm();
}

std::pair<Vec3, Vec3> face_plane(const TriangleMesh& mesh, std::size_t face_id) {
  check(face_id < mesh.faces.size(), "face_plane: face id out of range");
  const auto& f = mesh.faces[face_id];
  const Vec3& a = mesh.vertices[f[0]];
  const Vec3& b = mesh.vertices[f[1]];
  const Vec3& c = mesh.vertices[f[2]];
  const Vec3 n = (b - a).cross(c - a);
  const double area = 0.5 * n.norm();
  check(area > 1e-12, "face_plane: degenerate face " + std::to_string(face_id));
  return {(a + b + c) / 3.0, n / n.norm()};
}

std::size_t count_edges(const TriangleMesh& mesh) { return collect_edges(mesh).size(); }

std::size_t count_boundary_loops(const TriangleMesh& mesh) {
  // Boundary edges form disjoint cycles; count connected components.
  std::map<uint32_t, std::vector<uint32_t>> adj;
  for (const auto& [edge, info] : collect_edges(mesh)) {
    if (info.face_count == 1) {
      adj[edge.first].push_back(edge.second);
      adj[edge.second].push_back(edge.first);
    }
  }
  std::set<uint32_t> unvisited;
  for (const auto& [v, _] : adj) unvisited.insert(v);
  std::size_t loops = 0;
  while (!unvisited.empty()) {
    ++loops;
    std::vector<uint32_t> stack{*unvisited.begin()};
    while (!stack.empty()) {
      const uint32_t v = stack.back();
      stack.pop_back();
      if (!unvisited.erase(v)) continue;
      for (uint32_t nb : adj[v]) {
        if (unvisited.count(nb)) stack.push_back(nb);
      }
    }
  }
  return loops;
}

TriangleMesh make_icosahedron() {
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  TriangleMesh mesh;
  mesh.vertices = {
      {-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0},
      {0, -1, t}, {0, 1, t}, {0, -1, -t}, {0, 1, -t},
      {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1},
  };
  for (auto& v : mesh.vertices) v.normalize();
  mesh.faces = {
      {0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
      {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
      {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
      {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1},
  };
  return mesh;
}

}  // namespace gsurf
