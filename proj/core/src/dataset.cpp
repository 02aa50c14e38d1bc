#include "gsurf/dataset.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>

namespace gsurf {

namespace fs = std::filesystem;

namespace {

struct ParsedManifest {
  std::string root;
  int theta_dim = 0;
  int beta_dim = 0;
  Box3 box;
  std::vector<FrameEntry> entries;
};

Vec3 read_vec3(const nlohmann::json& j) {
  check(j.is_array() && j.size() == 3, "expected a 3-element array");
  return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

// Schema pass: fills `out` as far as possible, appending problems.
void parse_manifest(const std::string& manifest_path, ParsedManifest& out,
                    std::vector<std::string>& problems) {
  std::ifstream in(manifest_path);
  if (!in.good()) {
    problems.push_back("cannot open manifest: " + manifest_path);
    return;
  }
  nlohmann::json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    problems.push_back(manifest_path + ": invalid JSON: " + e.what());
    return;
  }
  out.root = fs::path(manifest_path).parent_path().string();
  if (out.root.empty()) out.root = ".";

  if (j.value("format", "") != "gsurf-dataset")
    problems.push_back(manifest_path + ": format must be \"gsurf-dataset\"");
  if (j.value("version", 0) != 1)
    problems.push_back(manifest_path + ": unsupported version (want 1)");

  try {
    out.theta_dim = j.at("theta_dim").get<int>();
    out.beta_dim = j.at("beta_dim").get<int>();
    if (out.theta_dim < 0 || out.beta_dim < 0)
      problems.push_back(manifest_path + ": negative conditioning dimensions");
  } catch (const std::exception&) {
    problems.push_back(manifest_path + ": missing or invalid theta_dim/beta_dim");
  }

  try {
    const auto& box = j.at("scene_box");
    out.box.lo = read_vec3(box.at("lo"));
    out.box.hi = read_vec3(box.at("hi"));
    if (!out.box.valid())
      problems.push_back(manifest_path + ": scene_box must have lo < hi per axis");
  } catch (const std::exception&) {
    problems.push_back(manifest_path + ": missing or invalid scene_box");
  }

  if (!j.contains("frames") || !j["frames"].is_array() || j["frames"].empty()) {
    problems.push_back(manifest_path + ": frames must be a non-empty array");
    return;
  }
  for (std::size_t i = 0; i < j["frames"].size(); ++i) {
    const auto& f = j["frames"][i];
    FrameEntry e;
    bool ok = true;
    for (const char* key : {"image", "mask", "mesh", "cond", "camera"}) {
      if (!f.contains(key) || !f[key].is_string()) {
        problems.push_back(manifest_path + ": frame " + std::to_string(i) +
                           " missing field '" + key + "'");
        ok = false;
      }
    }
    if (!ok) continue;
    e.image = f["image"].get<std::string>();
    e.mask = f["mask"].get<std::string>();
    e.mesh = f["mesh"].get<std::string>();
    e.cond = f["cond"].get<std::string>();
    e.camera = f["camera"].get<std::string>();
    out.entries.push_back(std::move(e));
  }
}

void check_files_exist(const ParsedManifest& m, std::vector<std::string>& problems) {
  for (std::size_t i = 0; i < m.entries.size(); ++i) {
    const FrameEntry& e = m.entries[i];
    for (const std::string* p : {&e.image, &e.mask, &e.mesh, &e.cond, &e.camera}) {
      const fs::path full = fs::path(m.root) / *p;
      if (!fs::exists(full))
        problems.push_back("frame " + std::to_string(i) + ": missing file " +
                           full.string());
    }
  }
}

void load_cond(const std::string& path, int theta_dim, int beta_dim,
               std::vector<double>& theta, std::vector<double>& beta,
               std::vector<std::string>& problems, const std::string& label) {
  std::ifstream in(path);
  if (!in.good()) {
    problems.push_back(label + ": cannot open " + path);
    return;
  }
  nlohmann::json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    problems.push_back(label + ": invalid JSON in " + path + ": " + e.what());
    return;
  }
  for (const char* key : {"theta", "beta"}) {
    if (!j.contains(key) || !j[key].is_array()) {
      problems.push_back(label + ": " + path + " missing array '" + key + "'");
      return;
    }
  }
  theta = j["theta"].get<std::vector<double>>();
  beta = j["beta"].get<std::vector<double>>();
  if (static_cast<int>(theta.size()) != theta_dim)
    problems.push_back(label + ": theta has " + std::to_string(theta.size()) +
                       " entries, manifest declares " + std::to_string(theta_dim));
  if (static_cast<int>(beta.size()) != beta_dim)
    problems.push_back(label + ": beta has " + std::to_string(beta.size()) +
                       " entries, manifest declares " + std::to_string(beta_dim));
}

}  // namespace

std::vector<std::string> dataset_problems(const std::string& manifest_path) {
  ParsedManifest m;
  std::vector<std::string> problems;
  parse_manifest(manifest_path, m, problems);
  if (problems.empty()) check_files_exist(m, problems);
  return problems;
}

Dataset load_dataset(const std::string& manifest_path) {
  ParsedManifest m;
  std::vector<std::string> problems;
  parse_manifest(manifest_path, m, problems);
  if (problems.empty()) check_files_exist(m, problems);

  Dataset ds;
  if (problems.empty()) {
    ds.root = m.root;
    ds.theta_dim = m.theta_dim;
    ds.beta_dim = m.beta_dim;
    ds.scene_box = m.box;
    ds.entries = m.entries;
    const std::size_t n = m.entries.size();
    ds.images.resize(n);
    ds.masks.resize(n);
    ds.meshes.resize(n);
    ds.cameras.resize(n);
    ds.thetas.resize(n);
    ds.betas.resize(n);

    for (std::size_t i = 0; i < n; ++i) {
      const std::string label = "frame " + std::to_string(i);
      const FrameEntry& e = m.entries[i];
      auto full = [&](const std::string& p) { return (fs::path(m.root) / p).string(); };
      try {
        ds.images[i] = read_png(full(e.image));
        if (ds.images[i].channels != 3)
          problems.push_back(label + ": image must be RGB: " + e.image);
      } catch (const std::exception& ex) {
        problems.push_back(label + ": " + ex.what());
      }
      try {
        ds.masks[i] = read_png(full(e.mask));
        if (ds.masks[i].channels != 1)
          problems.push_back(label + ": mask must be single-channel: " + e.mask);
      } catch (const std::exception& ex) {
        problems.push_back(label + ": " + ex.what());
      }
      try {
        ds.meshes[i] = load_mesh(full(e.mesh));
      } catch (const std::exception& ex) {
        problems.push_back(label + ": " + ex.what());
      }
      try {
        ds.cameras[i] = load_camera_json(full(e.camera));
      } catch (const std::exception& ex) {
        problems.push_back(label + ": " + ex.what());
      }
      load_cond(full(e.cond), m.theta_dim, m.beta_dim, ds.thetas[i], ds.betas[i],
                problems, label);
    }

    // Cross-frame consistency.
    for (std::size_t i = 0; i < n; ++i) {
      if (ds.images[i].data.empty() || ds.images[0].data.empty()) continue;
      if (ds.images[i].width != ds.images[0].width ||
          ds.images[i].height != ds.images[0].height)
        problems.push_back("frame " + std::to_string(i) +
                           ": image dimensions differ from frame 0");
      if (!ds.masks[i].data.empty() &&
          (ds.masks[i].width != ds.images[i].width ||
           ds.masks[i].height != ds.images[i].height))
        problems.push_back("frame " + std::to_string(i) +
                           ": mask dimensions differ from its image");
      if (ds.cameras[i].width > 0 &&
          (ds.cameras[i].width != ds.images[i].width ||
           ds.cameras[i].height != ds.images[i].height))
        problems.push_back("frame " + std::to_string(i) +
                           ": camera dimensions differ from its image");
    }
    for (std::size_t i = 1; i < n; ++i) {
      if (ds.meshes[i].vertices.empty() || ds.meshes[0].vertices.empty()) continue;
      if (ds.meshes[i].vertices.size() != ds.meshes[0].vertices.size() ||
          ds.meshes[i].faces != ds.meshes[0].faces)
        problems.push_back("frame " + std::to_string(i) +
                           ": mesh topology differs from frame 0");
    }
  }

  if (!problems.empty()) {
    std::string msg = "dataset validation failed (" + std::to_string(problems.size()) +
                      " problem" + (problems.size() == 1 ? "" : "s") + "):";
    for (const std::string& p : problems) msg += "\n  " + p;
    throw Error(msg);
  }
  return ds;
}

}  // namespace gsurf
