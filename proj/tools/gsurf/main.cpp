#include "commands.hpp"

#include <gsurf/types.hpp>

#include <CLI11.hpp>

#include <cstdio>

int main(int argc, char** argv) {
  using namespace gsurf::cli;

  CLI::App app{"2D Gaussian surfel toolkit: mesh registration, differentiable splatting, "
               "deformation fitting"};
  app.require_subcommand(1);

  Global g;
  app.add_option("--config", g.config_path, "JSON config file (defaults when omitted)");
  app.add_option("--out", g.out, "output directory (receives config.json echo)");
  CLI::Option* seed_opt =
      app.add_option("--seed", g.seed, "override the train/synthetic/gradcheck seeds");
  app.add_option("--threads", g.threads, "worker thread cap (0 = hardware concurrency)");
  app.add_flag("--deterministic", g.deterministic,
               "bit-stable outputs for a fixed seed (reductions are always ordered)");
  app.add_option("--set", g.sets, "config override, dotted.path=value (repeatable)")
      ->type_size(1);

  auto* convert = app.add_subcommand("convert", "register a mesh into a surfel scene");
  ConvertArgs conv_args;
  convert->add_option("--mesh", conv_args.mesh, "input OBJ mesh")->required();

  auto* render = app.add_subcommand("render", "render a scene from a camera");
  RenderArgs render_args;
  render->add_option("--scene", render_args.scene, "scene file (.msrf)")->required();
  render->add_option("--camera", render_args.camera, "camera JSON")->required();
  render->add_option("--mesh", render_args.mesh, "re-anchor the scene to this OBJ first");
  render->add_option("--net", render_args.net, "deformation checkpoint (.mdnp)");
  render->add_option("--cond", render_args.cond, "conditioning JSON (with --net)");
  render->add_option("--data", render_args.data,
                     "dataset manifest providing the scene box (with --net)");

  auto* fit = app.add_subcommand("fit", "fit a surfel scene to an image sequence");
  FitArgs fit_args;
  fit->add_option("--data", fit_args.data, "dataset manifest (or its directory)")->required();

  auto* eval = app.add_subcommand("eval", "compare two image directories (PSNR/SSIM/MS-SSIM)");
  EvalArgs eval_args;
  eval->add_option("--rendered", eval_args.rendered, "directory of rendered .png frames")
      ->required();
  eval->add_option("--reference", eval_args.reference, "directory of reference .png frames")
      ->required();

  auto* synth = app.add_subcommand("make-synthetic", "generate a synthetic dataset");

  auto* gradcheck =
      app.add_subcommand("gradcheck", "finite-difference audit of every analytic gradient");

  auto* ablation =
      app.add_subcommand("noise-ablation", "robustness to conditioning noise (PSNR per std)");
  AblationArgs abl_args;
  ablation->add_option("--data", abl_args.data, "dataset manifest (or its directory)")
      ->required();
  ablation->add_option("--scene", abl_args.scene, "trained scene file (.msrf)")->required();
  ablation->add_option("--net", abl_args.net, "trained checkpoint (.mdnp)")->required();

  for (auto* sub : {convert, render, fit, eval, synth, gradcheck, ablation})
    sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }
  g.has_seed = seed_opt->count() > 0;

  try {
    if (convert->parsed()) return cmd_convert(g, conv_args);
    if (render->parsed()) return cmd_render(g, render_args);
    if (fit->parsed()) return cmd_fit(g, fit_args);
    if (eval->parsed()) return cmd_eval(g, eval_args);
    if (synth->parsed()) return cmd_make_synthetic(g);
    if (gradcheck->parsed()) return cmd_gradcheck(g);
    if (ablation->parsed()) return cmd_noise_ablation(g, abl_args);
  } catch (const gsurf::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
