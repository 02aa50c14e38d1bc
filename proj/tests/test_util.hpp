#pragma once

#include <gsurf/camera.hpp>
#include <gsurf/image.hpp>
#include <gsurf/mesh.hpp>
#include <gsurf/rng.hpp>
#include <gsurf/types.hpp>

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace gsurf::test {

// Fresh directory under the working directory, wiped on construction and
// destruction so reruns start clean.
class TempDir {
 public:
  explicit TempDir(const std::string& name) : path_("tmp_" + name) {
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string file(const std::string& leaf) const {
    return (std::filesystem::path(path_) / leaf).string();
  }
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

inline void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

inline bool same_bytes(const std::string& a, const std::string& b) {
  return read_file(a) == read_file(b);
}

// Recursive regular-file byte comparison of two directory trees.
inline bool same_tree(const std::string& a, const std::string& b) {
  namespace fs = std::filesystem;
  auto listing = [](const std::string& root) {
    std::vector<std::string> rel;
    for (const auto& e : fs::recursive_directory_iterator(root))
      if (e.is_regular_file()) rel.push_back(fs::relative(e.path(), root).string());
    std::sort(rel.begin(), rel.end());
    return rel;
  };
  const auto la = listing(a), lb = listing(b);
  if (la != lb) return false;
  for (const auto& r : la)
    if (!same_bytes((fs::path(a) / r).string(), (fs::path(b) / r).string())) return false;
  return true;
}

inline Image random_image(Rng& rng, int w, int h, int c) {
  Image img(w, h, c);
  for (double& v : img.data) v = rng.uniform();
  return img;
}

// Random non-degenerate triangle with edge lengths O(1).
inline void random_triangle(Rng& rng, Vec3& a, Vec3& b, Vec3& c) {
  for (;;) {
    a = Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    b = Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    c = Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    if (0.5 * (b - a).cross(c - a).norm() > 1e-3) return;
  }
}

}  // namespace gsurf::test
