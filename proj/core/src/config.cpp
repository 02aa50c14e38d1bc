#include "gsurf/config.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace gsurf {

namespace {

using ojson = nlohmann::ordered_json;

// ---- struct -> json ----

ojson weights_json(const LossWeights& w) {
  ojson j;
  j["color"] = w.color;
  j["normal"] = w.normal;
  j["depth"] = w.depth;
  j["silhouette"] = w.silhouette;
  j["binding"] = w.binding;
  return j;
}

ojson to_json_tree(const AppConfig& c) {
  ojson j;
  j["threads"] = c.threads;

  ojson scene;
  scene["densify_depth"] = c.scene.densify_depth;
  scene["init_opacity"] = c.scene.init_opacity;
  scene["sh_degree"] = c.scene.sh_degree;
  j["scene"] = scene;

  ojson convert;
  convert["subdivisions"] = c.convert.subdivisions;
  j["convert"] = convert;

  ojson render;
  render["sh_degree_cap"] = c.render.sh_degree_cap;
  render["tile_size"] = c.render.tile_size;
  render["alpha_skip"] = c.render.alpha_skip;
  render["rho_cutoff"] = c.render.rho_cutoff;
  render["term_transmittance"] = c.render.term_transmittance;
  render["early_termination"] = c.render.early_termination;
  render["min_footprint_px"] = c.render.min_footprint_px;
  j["render"] = render;

  ojson grid;
  grid["levels"] = c.net.grid.levels;
  grid["table_size"] = c.net.grid.table_size;
  grid["features"] = c.net.grid.features;
  grid["base_resolution"] = c.net.grid.base_resolution;
  grid["growth"] = c.net.grid.growth;
  ojson net;
  net["grid"] = grid;
  net["embed_dim"] = c.net.embed_dim;
  net["hidden"] = c.net.hidden;
  net["scale_dp"] = c.net.scale_dp;
  net["scale_ds"] = c.net.scale_ds;
  net["scale_dr"] = c.net.scale_dr;
  net["malpha_bias_init"] = c.net.malpha_bias_init;
  j["net"] = net;

  ojson train;
  train["stage1_iters"] = c.train.stage1_iters;
  train["stage2_iters"] = c.train.stage2_iters;
  train["lr_sh"] = c.train.lr_sh;
  train["lr_opacity"] = c.train.lr_opacity;
  train["lr_net"] = c.train.lr_net;
  train["lr_grid"] = c.train.lr_grid;
  train["weights"] = weights_json(c.train.weights);
  train["binding_cutoff"] = c.train.binding_cutoff;
  train["sh_cap_stage1"] = c.train.sh_cap_stage1;
  train["sh_cap_stage2"] = c.train.sh_cap_stage2;
  train["clip_norm"] = c.train.clip_norm;
  train["seed"] = c.train.seed;
  train["deterministic"] = c.train.deterministic;
  train["holdout"] = c.train.holdout;
  train["checkpoint_every"] = c.train.checkpoint_every;
  j["train"] = train;

  ojson syn;
  syn["frames"] = c.synthetic.frames;
  syn["width"] = c.synthetic.width;
  syn["height"] = c.synthetic.height;
  syn["subdivisions"] = c.synthetic.subdivisions;
  syn["densify_depth"] = c.synthetic.densify_depth;
  syn["theta_dim"] = c.synthetic.theta_dim;
  syn["beta_dim"] = c.synthetic.beta_dim;
  syn["camera_distance"] = c.synthetic.camera_distance;
  syn["focal"] = c.synthetic.focal;
  syn["orbit_deg"] = c.synthetic.orbit_deg;
  syn["wobble_amp"] = c.synthetic.wobble_amp;
  syn["bump_amp"] = c.synthetic.bump_amp;
  syn["texture_freq"] = c.synthetic.texture_freq;
  syn["gt_opacity"] = c.synthetic.gt_opacity;
  syn["seed"] = c.synthetic.seed;
  j["synthetic"] = syn;

  ojson gc;
  gc["rounds"] = c.gradcheck.rounds;
  gc["seed"] = c.gradcheck.seed;
  gc["corrupt"] = c.gradcheck.corrupt;
  j["gradcheck"] = gc;

  ojson ab;
  ab["noise_stds"] = c.ablation.noise_stds;
  ab["seeds"] = c.ablation.seeds;
  j["ablation"] = ab;
  return j;
}

// ---- json -> struct (strict) ----

struct Problems {
  std::vector<std::string> items;

  void add(const std::string& s) { items.push_back(s); }
  void raise_if_any(const std::string& head) const {
    if (items.empty()) return;
    std::string msg = head;
    for (const auto& s : items) msg += "\n  - " + s;
    throw Error(msg);
  }
};

void check_keys(const nlohmann::json& j, const std::string& path,
                std::initializer_list<const char*> allowed, Problems& pr) {
  if (!j.is_object()) {
    pr.add(path + ": expected an object");
    return;
  }
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : allowed)
      if (it.key() == k) {
        ok = true;
        break;
      }
    if (!ok) pr.add(path + ": unknown key '" + it.key() + "'");
  }
}

void get_int(const nlohmann::json& j, const std::string& path, int& out, Problems& pr) {
  if (j.is_number_integer())
    out = j.get<int>();
  else
    pr.add(path + ": expected an integer");
}

void get_u64(const nlohmann::json& j, const std::string& path, uint64_t& out, Problems& pr) {
  if (j.is_number_unsigned() || (j.is_number_integer() && j.get<int64_t>() >= 0))
    out = j.get<uint64_t>();
  else
    pr.add(path + ": expected a non-negative integer");
}

void get_double(const nlohmann::json& j, const std::string& path, double& out, Problems& pr) {
  if (j.is_number())
    out = j.get<double>();
  else
    pr.add(path + ": expected a number");
}

void get_bool(const nlohmann::json& j, const std::string& path, bool& out, Problems& pr) {
  if (j.is_boolean())
    out = j.get<bool>();
  else
    pr.add(path + ": expected a boolean");
}

void get_double_array(const nlohmann::json& j, const std::string& path,
                      std::vector<double>& out, Problems& pr) {
  if (!j.is_array()) {
    pr.add(path + ": expected an array of numbers");
    return;
  }
  std::vector<double> vals;
  for (const auto& v : j) {
    if (!v.is_number()) {
      pr.add(path + ": expected an array of numbers");
      return;
    }
    vals.push_back(v.get<double>());
  }
  out = std::move(vals);
}

#define FIELD_INT(obj, name, target) \
  if (obj.contains(name)) get_int(obj.at(name), path + "." + name, target, pr)
#define FIELD_U64(obj, name, target) \
  if (obj.contains(name)) get_u64(obj.at(name), path + "." + name, target, pr)
#define FIELD_DBL(obj, name, target) \
  if (obj.contains(name)) get_double(obj.at(name), path + "." + name, target, pr)
#define FIELD_BOOL(obj, name, target) \
  if (obj.contains(name)) get_bool(obj.at(name), path + "." + name, target, pr)

void parse_scene(const nlohmann::json& j, const std::string& path, SceneInitConfig& c,
                 Problems& pr) {
  check_keys(j, path, {"densify_depth", "init_opacity", "sh_degree"}, pr);
  if (!j.is_object()) return;
  FIELD_INT(j, "densify_depth", c.densify_depth);
  FIELD_DBL(j, "init_opacity", c.init_opacity);
  FIELD_INT(j, "sh_degree", c.sh_degree);
}

void parse_convert(const nlohmann::json& j, const std::string& path, ConvertConfig& c,
                   Problems& pr) {
  check_keys(j, path, {"subdivisions"}, pr);
  if (!j.is_object()) return;
  FIELD_INT(j, "subdivisions", c.subdivisions);
}

void parse_render(const nlohmann::json& j, const std::string& path, RenderOptions& c,
                  Problems& pr) {
  check_keys(j, path,
             {"sh_degree_cap", "tile_size", "alpha_skip", "rho_cutoff",
              "term_transmittance", "early_termination", "min_footprint_px"},
             pr);
  if (!j.is_object()) return;
  FIELD_INT(j, "sh_degree_cap", c.sh_degree_cap);
  FIELD_INT(j, "tile_size", c.tile_size);
  FIELD_DBL(j, "alpha_skip", c.alpha_skip);
  FIELD_DBL(j, "rho_cutoff", c.rho_cutoff);
  FIELD_DBL(j, "term_transmittance", c.term_transmittance);
  FIELD_BOOL(j, "early_termination", c.early_termination);
  FIELD_DBL(j, "min_footprint_px", c.min_footprint_px);
}

void parse_net(const nlohmann::json& j, const std::string& path, DeformNetConfig& c,
               Problems& pr) {
  check_keys(j, path,
             {"grid", "embed_dim", "hidden", "scale_dp", "scale_ds", "scale_dr",
              "malpha_bias_init"},
             pr);
  if (!j.is_object()) return;
  if (j.contains("grid")) {
    const std::string gpath = path + ".grid";
    const auto& g = j.at("grid");
    check_keys(g, gpath, {"levels", "table_size", "features", "base_resolution", "growth"},
               pr);
    if (g.is_object()) {
      const std::string path = gpath;  // macro capture
      FIELD_INT(g, "levels", c.grid.levels);
      FIELD_INT(g, "table_size", c.grid.table_size);
      FIELD_INT(g, "features", c.grid.features);
      FIELD_INT(g, "base_resolution", c.grid.base_resolution);
      FIELD_DBL(g, "growth", c.grid.growth);
    }
  }
  FIELD_INT(j, "embed_dim", c.embed_dim);
  FIELD_INT(j, "hidden", c.hidden);
  FIELD_DBL(j, "scale_dp", c.scale_dp);
  FIELD_DBL(j, "scale_ds", c.scale_ds);
  FIELD_DBL(j, "scale_dr", c.scale_dr);
  FIELD_DBL(j, "malpha_bias_init", c.malpha_bias_init);
}

void parse_weights(const nlohmann::json& j, const std::string& path, LossWeights& w,
                   Problems& pr) {
  check_keys(j, path, {"color", "normal", "depth", "silhouette", "binding"}, pr);
  if (!j.is_object()) return;
  FIELD_DBL(j, "color", w.color);
  FIELD_DBL(j, "normal", w.normal);
  FIELD_DBL(j, "depth", w.depth);
  FIELD_DBL(j, "silhouette", w.silhouette);
  FIELD_DBL(j, "binding", w.binding);
}

void parse_train(const nlohmann::json& j, const std::string& path, TrainConfig& c,
                 Problems& pr) {
  check_keys(j, path,
             {"stage1_iters", "stage2_iters", "lr_sh", "lr_opacity", "lr_net", "lr_grid",
              "weights", "binding_cutoff", "sh_cap_stage1", "sh_cap_stage2", "clip_norm",
              "seed", "deterministic", "holdout", "checkpoint_every"},
             pr);
  if (!j.is_object()) return;
  FIELD_INT(j, "stage1_iters", c.stage1_iters);
  FIELD_INT(j, "stage2_iters", c.stage2_iters);
  FIELD_DBL(j, "lr_sh", c.lr_sh);
  FIELD_DBL(j, "lr_opacity", c.lr_opacity);
  FIELD_DBL(j, "lr_net", c.lr_net);
  FIELD_DBL(j, "lr_grid", c.lr_grid);
  if (j.contains("weights")) parse_weights(j.at("weights"), path + ".weights", c.weights, pr);
  FIELD_DBL(j, "binding_cutoff", c.binding_cutoff);
  FIELD_INT(j, "sh_cap_stage1", c.sh_cap_stage1);
  FIELD_INT(j, "sh_cap_stage2", c.sh_cap_stage2);
  FIELD_DBL(j, "clip_norm", c.clip_norm);
  FIELD_U64(j, "seed", c.seed);
  FIELD_BOOL(j, "deterministic", c.deterministic);
  FIELD_INT(j, "holdout", c.holdout);
  FIELD_INT(j, "checkpoint_every", c.checkpoint_every);
}

void parse_synthetic(const nlohmann::json& j, const std::string& path, SyntheticConfig& c,
                     Problems& pr) {
  check_keys(j, path,
             {"frames", "width", "height", "subdivisions", "densify_depth", "theta_dim",
              "beta_dim", "camera_distance", "focal", "orbit_deg", "wobble_amp", "bump_amp",
              "texture_freq", "gt_opacity", "seed"},
             pr);
  if (!j.is_object()) return;
  FIELD_INT(j, "frames", c.frames);
  FIELD_INT(j, "width", c.width);
  FIELD_INT(j, "height", c.height);
  FIELD_INT(j, "subdivisions", c.subdivisions);
  FIELD_INT(j, "densify_depth", c.densify_depth);
  FIELD_INT(j, "theta_dim", c.theta_dim);
  FIELD_INT(j, "beta_dim", c.beta_dim);
  FIELD_DBL(j, "camera_distance", c.camera_distance);
  FIELD_DBL(j, "focal", c.focal);
  FIELD_DBL(j, "orbit_deg", c.orbit_deg);
  FIELD_DBL(j, "wobble_amp", c.wobble_amp);
  FIELD_DBL(j, "bump_amp", c.bump_amp);
  FIELD_DBL(j, "texture_freq", c.texture_freq);
  FIELD_DBL(j, "gt_opacity", c.gt_opacity);
  FIELD_U64(j, "seed", c.seed);
}

void parse_gradcheck(const nlohmann::json& j, const std::string& path, GradCheckConfig& c,
                     Problems& pr) {
  check_keys(j, path, {"rounds", "seed", "corrupt"}, pr);
  if (!j.is_object()) return;
  FIELD_INT(j, "rounds", c.rounds);
  FIELD_U64(j, "seed", c.seed);
  FIELD_BOOL(j, "corrupt", c.corrupt);
}

void parse_ablation(const nlohmann::json& j, const std::string& path, AblationConfig& c,
                    Problems& pr) {
  check_keys(j, path, {"noise_stds", "seeds"}, pr);
  if (!j.is_object()) return;
  if (j.contains("noise_stds"))
    get_double_array(j.at("noise_stds"), path + ".noise_stds", c.noise_stds, pr);
  FIELD_INT(j, "seeds", c.seeds);
}

#undef FIELD_INT
#undef FIELD_U64
#undef FIELD_DBL
#undef FIELD_BOOL

AppConfig from_json_tree(const nlohmann::json& j) {
  AppConfig c;
  Problems pr;
  {
    const std::string path = "config";
    check_keys(j, path,
               {"threads", "scene", "convert", "render", "net", "train", "synthetic",
                "gradcheck", "ablation"},
               pr);
  }
  if (j.is_object()) {
    if (j.contains("threads")) get_int(j.at("threads"), "config.threads", c.threads, pr);
    if (j.contains("scene")) parse_scene(j.at("scene"), "scene", c.scene, pr);
    if (j.contains("convert")) parse_convert(j.at("convert"), "convert", c.convert, pr);
    if (j.contains("render")) parse_render(j.at("render"), "render", c.render, pr);
    if (j.contains("net")) parse_net(j.at("net"), "net", c.net, pr);
    if (j.contains("train")) parse_train(j.at("train"), "train", c.train, pr);
    if (j.contains("synthetic"))
      parse_synthetic(j.at("synthetic"), "synthetic", c.synthetic, pr);
    if (j.contains("gradcheck"))
      parse_gradcheck(j.at("gradcheck"), "gradcheck", c.gradcheck, pr);
    if (j.contains("ablation")) parse_ablation(j.at("ablation"), "ablation", c.ablation, pr);
  }
  pr.raise_if_any("invalid config:");
  validate_config(c);
  return c;
}

bool is_power_of_two(int v) { return v > 0 && (v & (v - 1)) == 0; }

}  // namespace

void validate_config(const AppConfig& cfg) {
  Problems pr;
  if (cfg.threads < 0) pr.add("threads: must be >= 0");

  if (cfg.scene.densify_depth < 0 || cfg.scene.densify_depth > 6)
    pr.add("scene.densify_depth: must be in [0, 6]");
  if (!(cfg.scene.init_opacity > 0.0 && cfg.scene.init_opacity <= 1.0))
    pr.add("scene.init_opacity: must be in (0, 1]");
  if (cfg.scene.sh_degree < 0 || cfg.scene.sh_degree > 3)
    pr.add("scene.sh_degree: must be in [0, 3]");

  if (cfg.convert.subdivisions < 0 || cfg.convert.subdivisions > 8)
    pr.add("convert.subdivisions: must be in [0, 8]");

  if (cfg.render.sh_degree_cap < 0 || cfg.render.sh_degree_cap > 3)
    pr.add("render.sh_degree_cap: must be in [0, 3]");
  if (cfg.render.tile_size < 1) pr.add("render.tile_size: must be >= 1");
  if (cfg.render.alpha_skip < 0.0 || cfg.render.alpha_skip >= 1.0)
    pr.add("render.alpha_skip: must be in [0, 1)");
  if (!(cfg.render.rho_cutoff > 0.0)) pr.add("render.rho_cutoff: must be > 0");
  if (cfg.render.term_transmittance < 0.0 || cfg.render.term_transmittance >= 1.0)
    pr.add("render.term_transmittance: must be in [0, 1)");
  if (cfg.render.min_footprint_px < 0.0) pr.add("render.min_footprint_px: must be >= 0");

  if (cfg.net.grid.levels < 1 || cfg.net.grid.levels > 24)
    pr.add("net.grid.levels: must be in [1, 24]");
  if (!is_power_of_two(cfg.net.grid.table_size))
    pr.add("net.grid.table_size: must be a positive power of two");
  if (cfg.net.grid.features < 1 || cfg.net.grid.features > 8)
    pr.add("net.grid.features: must be in [1, 8]");
  if (cfg.net.grid.base_resolution < 1) pr.add("net.grid.base_resolution: must be >= 1");
  if (!(cfg.net.grid.growth >= 1.0)) pr.add("net.grid.growth: must be >= 1");
  if (cfg.net.embed_dim < 1) pr.add("net.embed_dim: must be >= 1");
  if (cfg.net.hidden < 1) pr.add("net.hidden: must be >= 1");

  if (cfg.train.stage1_iters < 0) pr.add("train.stage1_iters: must be >= 0");
  if (cfg.train.stage2_iters < 0) pr.add("train.stage2_iters: must be >= 0");
  if (!(cfg.train.lr_sh > 0.0)) pr.add("train.lr_sh: must be > 0");
  if (!(cfg.train.lr_opacity > 0.0)) pr.add("train.lr_opacity: must be > 0");
  if (!(cfg.train.lr_net > 0.0)) pr.add("train.lr_net: must be > 0");
  if (!(cfg.train.lr_grid > 0.0)) pr.add("train.lr_grid: must be > 0");
  if (cfg.train.weights.color < 0.0 || cfg.train.weights.normal < 0.0 ||
      cfg.train.weights.depth < 0.0 || cfg.train.weights.silhouette < 0.0 ||
      cfg.train.weights.binding < 0.0)
    pr.add("train.weights: must be >= 0");
  if (cfg.train.binding_cutoff < 0.0) pr.add("train.binding_cutoff: must be >= 0");
  if (cfg.train.sh_cap_stage1 < 0 || cfg.train.sh_cap_stage1 > 3)
    pr.add("train.sh_cap_stage1: must be in [0, 3]");
  if (cfg.train.sh_cap_stage2 < 0 || cfg.train.sh_cap_stage2 > 3)
    pr.add("train.sh_cap_stage2: must be in [0, 3]");
  if (!(cfg.train.clip_norm >= 0.0)) pr.add("train.clip_norm: must be >= 0");
  if (cfg.train.holdout < -1) pr.add("train.holdout: must be >= -1");
  if (cfg.train.checkpoint_every < 0) pr.add("train.checkpoint_every: must be >= 0");

  if (cfg.synthetic.frames < 1) pr.add("synthetic.frames: must be >= 1");
  if (cfg.synthetic.width < 8) pr.add("synthetic.width: must be >= 8");
  if (cfg.synthetic.height < 8) pr.add("synthetic.height: must be >= 8");
  if (cfg.synthetic.subdivisions < 0 || cfg.synthetic.subdivisions > 6)
    pr.add("synthetic.subdivisions: must be in [0, 6]");
  if (cfg.synthetic.densify_depth < 0 || cfg.synthetic.densify_depth > 6)
    pr.add("synthetic.densify_depth: must be in [0, 6]");
  if (cfg.synthetic.theta_dim < 1) pr.add("synthetic.theta_dim: must be >= 1");
  if (cfg.synthetic.beta_dim < 0) pr.add("synthetic.beta_dim: must be >= 0");
  if (!(cfg.synthetic.camera_distance > 0.0))
    pr.add("synthetic.camera_distance: must be > 0");
  if (!(cfg.synthetic.focal > 0.0)) pr.add("synthetic.focal: must be > 0");
  if (cfg.synthetic.wobble_amp < 0.0) pr.add("synthetic.wobble_amp: must be >= 0");
  if (cfg.synthetic.bump_amp < 0.0) pr.add("synthetic.bump_amp: must be >= 0");
  if (!(cfg.synthetic.gt_opacity > 0.0 && cfg.synthetic.gt_opacity <= 1.0))
    pr.add("synthetic.gt_opacity: must be in (0, 1]");

  if (cfg.gradcheck.rounds < 1) pr.add("gradcheck.rounds: must be >= 1");

  if (cfg.ablation.noise_stds.empty()) pr.add("ablation.noise_stds: must not be empty");
  for (double s : cfg.ablation.noise_stds)
    if (s < 0.0 || !std::isfinite(s)) {
      pr.add("ablation.noise_stds: entries must be finite and >= 0");
      break;
    }
  if (cfg.ablation.seeds < 1) pr.add("ablation.seeds: must be >= 1");

  pr.raise_if_any("invalid config:");
}

std::string config_to_json_string(const AppConfig& cfg) {
  return to_json_tree(cfg).dump(2) + "\n";
}

AppConfig config_from_json_string(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const std::exception& e) {
    throw Error(std::string("config: invalid JSON: ") + e.what());
  }
  return from_json_tree(j);
}

AppConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  check(in.good(), "cannot open config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return config_from_json_string(ss.str());
  } catch (const Error& e) {
    throw Error(path + ": " + e.what());
  }
}

void save_config_json(const std::string& path, const AppConfig& cfg) {
  std::ofstream out(path);
  check(out.good(), "cannot write " + path);
  out << config_to_json_string(cfg);
  check(out.good(), "failed writing " + path);
}

void apply_override(AppConfig& cfg, const std::string& assignment) {
  const std::size_t eq = assignment.find('=');
  check(eq != std::string::npos && eq > 0,
        "override '" + assignment + "': expected dotted.path=value");
  const std::string path = assignment.substr(0, eq);
  const std::string value = assignment.substr(eq + 1);

  ojson tree = to_json_tree(cfg);
  ojson* node = &tree;
  std::size_t start = 0;
  while (start <= path.size()) {
    const std::size_t dot = path.find('.', start);
    const std::string part = path.substr(start, dot == std::string::npos ? dot : dot - start);
    check(!part.empty(), "override '" + assignment + "': empty path segment");
    check(node->is_object(), "override: '" + path.substr(0, start ? start - 1 : 0) +
                                 "' has no sub-keys");
    check(node->contains(part), "override: no config key '" + path.substr(0, start) + part + "'");
    node = &(*node)[part];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  check(!node->is_object(), "override: '" + path + "' is a section, not a value");

  auto fail_type = [&](const char* what) {
    throw Error("override '" + assignment + "': expected " + what + " for " + path);
  };
  if (node->is_boolean()) {
    if (value == "true" || value == "1")
      *node = true;
    else if (value == "false" || value == "0")
      *node = false;
    else
      fail_type("a boolean (true/false)");
  } else if (node->is_number_integer() || node->is_number_unsigned()) {
    errno = 0;
    char* end = nullptr;
    const long long v = std::strtoll(value.c_str(), &end, 10);
    if (errno != 0 || end == value.c_str() || *end != '\0') fail_type("an integer");
    if (node->is_number_unsigned() && v < 0) fail_type("a non-negative integer");
    *node = v;
  } else if (node->is_number_float()) {
    errno = 0;
    char* end = nullptr;
    const double v = std::strtod(value.c_str(), &end);
    if (errno != 0 || end == value.c_str() || *end != '\0') fail_type("a number");
    *node = v;
  } else if (node->is_array()) {
    nlohmann::json arr;
    try {
      arr = nlohmann::json::parse(value);
    } catch (const std::exception&) {
      fail_type("a JSON array, e.g. [0,0.1]");
    }
    if (!arr.is_array()) fail_type("a JSON array, e.g. [0,0.1]");
    *node = arr;
  } else if (node->is_string()) {
    *node = value;
  } else {
    fail_type("a scalar");
  }

  cfg = from_json_tree(tree);
}

}  // namespace gsurf
