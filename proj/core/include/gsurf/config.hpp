#pragma once

#include "gsurf/deform_net.hpp"
#include "gsurf/optim.hpp"
#include "gsurf/render.hpp"
#include "gsurf/scene.hpp"
#include "gsurf/synthetic.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace gsurf {

struct ConvertConfig {
  int subdivisions = 0;  // Loop subdivision iterations before registration
};

struct GradCheckConfig {
  int rounds = 20;
  uint64_t seed = 5;
  bool corrupt = false;  // bias one analytic gradient; proves failures surface
};

struct AblationConfig {
  std::vector<double> noise_stds{0.0, 0.05, 0.1, 0.2};
  int seeds = 3;
};

// Everything the command-line tool can configure, one struct per section.
// The JSON schema mirrors the members exactly; dotted override paths
// ("train.lr_sh=2e-3") walk the same layout.
struct AppConfig {
  int threads = 0;  // 0 = hardware concurrency
  SceneInitConfig scene;
  ConvertConfig convert;
  RenderOptions render;
  DeformNetConfig net;
  TrainConfig train;  // its RenderOptions member mirrors `render` at use time
  SyntheticConfig synthetic;
  GradCheckConfig gradcheck;
  AblationConfig ablation;
};

// Throws with every problem listed, not just the first.
void validate_config(const AppConfig& cfg);

// Pretty-printed JSON, fixed key order, newline-terminated.
std::string config_to_json_string(const AppConfig& cfg);

// Strict parse over defaults: unknown keys and wrong types are errors,
// missing keys keep their defaults. Validates before returning.
AppConfig config_from_json_string(const std::string& text);

AppConfig load_config_file(const std::string& path);
void save_config_json(const std::string& path, const AppConfig& cfg);

// assignment is "dotted.path=value"; the path must name an existing scalar
// (or numeric array) in the schema and the value must parse as its type.
void apply_override(AppConfig& cfg, const std::string& assignment);

}  // namespace gsurf
