#pragma once

#include "gsurf/camera.hpp"
#include "gsurf/image.hpp"
#include "gsurf/mesh.hpp"
#include "gsurf/types.hpp"

#include <string>
#include <vector>

namespace gsurf {

struct FrameEntry {
  std::string image;
  std::string mask;
  std::string mesh;
  std::string cond;
  std::string camera;
};

// Fully loaded training dataset. Loading is eager (sequences are small) and
// validation is exhaustive: every problem is reported in one error.
struct Dataset {
  std::string root;
  int theta_dim = 0;
  int beta_dim = 0;
  Box3 scene_box;
  std::vector<FrameEntry> entries;

  std::vector<Image> images;  // RGB in [0,1]
  std::vector<Image> masks;   // single channel in [0,1]
  std::vector<TriangleMesh> meshes;
  std::vector<Camera> cameras;
  std::vector<std::vector<double>> thetas;
  std::vector<std::vector<double>> betas;

  std::size_t size() const { return entries.size(); }
};

// Manifest JSON: {"format": "gsurf-dataset", "version": 1, "theta_dim",
// "beta_dim", "scene_box": {"lo": [..], "hi": [..]}, "frames": [{"image",
// "mask", "mesh", "cond", "camera"}, ...]}. Paths are relative to the
// manifest's directory. Conditioning files: {"theta": [..], "beta": [..]}.
Dataset load_dataset(const std::string& manifest_path);

// Validation without payload loading (existence, schema, counts); returns
// all problems instead of throwing. Used by commands that must report every
// issue before touching the output directory.
std::vector<std::string> dataset_problems(const std::string& manifest_path);

}  // namespace gsurf
