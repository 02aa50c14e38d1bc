#pragma once

#include <string>
#include <vector>

#include <gsurf/config.hpp>

namespace gsurf::cli {

// Options shared by every subcommand.
struct Global {
  std::string config_path;
  std::string out;
  std::vector<std::string> sets;
  bool has_seed = false;
  uint64_t seed = 0;
  int threads = -1;  // -1: leave config value alone
  bool deterministic = false;
};

// Resolves the effective configuration: defaults, then --config, then each
// --set in order, then --seed/--threads/--deterministic. Validates and applies
// the thread cap before returning.
AppConfig effective_config(const Global& g);

// Requires --out, creates the directory, and writes the effective config to
// <out>/config.json so runs are reproducible from their artifacts.
void prepare_out(const Global& g, const AppConfig& cfg);

struct ConvertArgs {
  std::string mesh;
};
int cmd_convert(const Global& g, const ConvertArgs& a);

struct RenderArgs {
  std::string scene;
  std::string camera;
  std::string mesh;  // optional: re-anchor surfels to this mesh first
  std::string net;   // optional: apply the learned deformation
  std::string cond;  // conditioning vector file, required with --net
  std::string data;  // dataset root providing the scene box, required with --net
};
int cmd_render(const Global& g, const RenderArgs& a);

struct FitArgs {
  std::string data;
};
int cmd_fit(const Global& g, const FitArgs& a);

struct EvalArgs {
  std::string rendered;
  std::string reference;
};
int cmd_eval(const Global& g, const EvalArgs& a);

int cmd_make_synthetic(const Global& g);

int cmd_gradcheck(const Global& g);

struct AblationArgs {
  std::string data;
  std::string scene;
  std::string net;
};
int cmd_noise_ablation(const Global& g, const AblationArgs& a);

}  // namespace gsurf::cli
