#include "commands.hpp"

#include <gsurf/dataset.hpp>
#include <gsurf/deform_net.hpp>
#include <gsurf/gradcheck.hpp>
#include <gsurf/image.hpp>
#include <gsurf/mesh.hpp>
#include <gsurf/metrics.hpp>
#include <gsurf/optim.hpp>
#include <gsurf/parallel.hpp>
#include <gsurf/render.hpp>
#include <gsurf/rng.hpp>
#include <gsurf/scene.hpp>
#include <gsurf/synthetic.hpp>

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

namespace fs = std::filesystem;

namespace gsurf::cli {

namespace {

// Accepts either the manifest file or the dataset directory containing it.
std::string resolve_manifest(const std::string& data) {
  check(!data.empty(), "--data is required");
  if (fs::is_directory(data)) return (fs::path(data) / "manifest.json").string();
  return data;
}

nlohmann::json parse_json_file(const std::string& path) {
  std::ifstream in(path);
  check(in.good(), "cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return nlohmann::json::parse(ss.str());
  } catch (const std::exception& e) {
    throw Error(path + ": invalid JSON: " + e.what());
  }
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  check(out.good(), "cannot write " + path);
  out << text;
  check(out.good(), "failed writing " + path);
}

void write_json(const std::string& path, const nlohmann::ordered_json& j) {
  write_text(path, j.dump(2) + "\n");
}

std::vector<double> parse_number_array(const nlohmann::json& j, const std::string& what) {
  check(j.is_array(), what + ": expected an array of numbers");
  std::vector<double> out;
  out.reserve(j.size());
  for (const auto& v : j) {
    check(v.is_number(), what + ": expected an array of numbers");
    out.push_back(v.get<double>());
  }
  return out;
}

// Conditioning file: {"theta": [..], "beta": [..]}.
void load_cond(const std::string& path, std::vector<double>& theta, std::vector<double>& beta) {
  const nlohmann::json j = parse_json_file(path);
  check(j.is_object() && j.contains("theta") && j.contains("beta"),
        path + ": expected an object with 'theta' and 'beta' arrays");
  theta = parse_number_array(j.at("theta"), path + ": theta");
  beta = parse_number_array(j.at("beta"), path + ": beta");
}

// The hashgrid normalization box, without loading the frame payloads.
Box3 manifest_scene_box(const std::string& manifest_path) {
  const nlohmann::json j = parse_json_file(manifest_path);
  check(j.is_object() && j.contains("scene_box"), manifest_path + ": missing scene_box");
  const auto& b = j.at("scene_box");
  check(b.is_object() && b.contains("lo") && b.contains("hi"),
        manifest_path + ": scene_box needs 'lo' and 'hi'");
  const auto lo = parse_number_array(b.at("lo"), manifest_path + ": scene_box.lo");
  const auto hi = parse_number_array(b.at("hi"), manifest_path + ": scene_box.hi");
  check(lo.size() == 3 && hi.size() == 3, manifest_path + ": scene_box entries need 3 numbers");
  Box3 box;
  box.lo = Vec3(lo[0], lo[1], lo[2]);
  box.hi = Vec3(hi[0], hi[1], hi[2]);
  check(box.valid(), manifest_path + ": scene_box is empty");
  return box;
}

std::string join_path(const std::string& dir, const std::string& leaf) {
  return (fs::path(dir) / leaf).string();
}

void write_render_outputs(const std::string& out_dir, const RenderBuffers& buffers) {
  write_png(join_path(out_dir, "color.png"), buffers.color_image());
  write_png(join_path(out_dir, "alpha.png"), buffers.alpha_image());
  write_pfm(join_path(out_dir, "depth.pfm"), buffers.depth_image());
  write_pfm(join_path(out_dir, "normal.pfm"), buffers.normal_image());
}

}  // namespace

AppConfig effective_config(const Global& g) {
  AppConfig cfg;
  if (!g.config_path.empty()) cfg = load_config_file(g.config_path);
  for (const auto& s : g.sets) apply_override(cfg, s);
  if (g.has_seed) {
    cfg.train.seed = g.seed;
    cfg.synthetic.seed = g.seed;
    cfg.gradcheck.seed = g.seed;
  }
  if (g.threads >= 0) cfg.threads = g.threads;
  if (g.deterministic) cfg.train.deterministic = true;
  validate_config(cfg);
  set_max_threads(cfg.threads);
  return cfg;
}

void prepare_out(const Global& g, const AppConfig& cfg) {
  check(!g.out.empty(), "--out is required");
  std::error_code ec;
  fs::create_directories(g.out, ec);
  check(!ec, "cannot create output directory " + g.out + ": " + ec.message());
  save_config_json(join_path(g.out, "config.json"), cfg);
}

int cmd_convert(const Global& g, const ConvertArgs& a) {
  const AppConfig cfg = effective_config(g);
  TriangleMesh mesh = load_mesh(a.mesh);
  mesh = loop_subdivide(mesh, cfg.convert.subdivisions);
  const SurfelScene scene = init_scene(mesh, cfg.scene);
  prepare_out(g, cfg);
  save_scene(join_path(g.out, "scene.msrf"), scene);
  std::printf("vertices: %zu\nfaces: %zu\nsurfels: %zu\n", mesh.num_vertices(),
              mesh.num_faces(), scene.size());
  return 0;
}

int cmd_render(const Global& g, const RenderArgs& a) {
  const AppConfig cfg = effective_config(g);
  SurfelScene scene = load_scene(a.scene);
  const Camera cam = load_camera_json(a.camera);
  if (!a.mesh.empty()) {
    const TriangleMesh mesh = load_mesh(a.mesh);
    reattach_base(scene, mesh);
  }

  RenderOptions opts = cfg.render;
  opts.keep_fragments = false;

  RenderBuffers buffers;
  if (!a.net.empty()) {
    check(!a.cond.empty(), "--net requires --cond (conditioning JSON)");
    check(!a.data.empty(), "--net requires --data (manifest providing the scene box)");
    const DeformNet net = load_deform_net(a.net);
    std::vector<double> theta, beta;
    load_cond(a.cond, theta, beta);
    check(static_cast<int>(theta.size()) == net.theta_dim &&
              static_cast<int>(beta.size()) == net.beta_dim,
          "conditioning dims do not match the checkpoint (theta " +
              std::to_string(theta.size()) + "/" + std::to_string(net.theta_dim) + ", beta " +
              std::to_string(beta.size()) + "/" + std::to_string(net.beta_dim) + ")");
    const Box3 box = manifest_scene_box(resolve_manifest(a.data));
    const DeformResult def = deform_forward(net, scene, theta, beta, box);
    const DeformedSurfels deformed = apply_deformation(scene, &def.residuals);
    buffers = render(scene, deformed, cam, opts);
  } else {
    buffers = render(scene, cam, opts);
  }

  prepare_out(g, cfg);
  write_render_outputs(g.out, buffers);
  return 0;
}

int cmd_fit(const Global& g, const FitArgs& a) {
  const AppConfig cfg = effective_config(g);
  const Dataset ds = load_dataset(resolve_manifest(a.data));

  TrainConfig tc = cfg.train;
  tc.render = cfg.render;

  SurfelScene scene = init_scene(ds.meshes[0], cfg.scene);
  DeformNet net = make_deform_net(cfg.net, static_cast<int>(ds.meshes[0].num_faces()),
                                  ds.theta_dim, ds.beta_dim, tc.seed);

  prepare_out(g, cfg);

  CheckpointFn checkpoint = nullptr;
  if (tc.checkpoint_every > 0) {
    const std::string ckpt_dir = join_path(g.out, "checkpoints");
    std::error_code ec;
    fs::create_directories(ckpt_dir, ec);
    check(!ec, "cannot create " + ckpt_dir + ": " + ec.message());
    checkpoint = [&ckpt_dir](int iteration, const SurfelScene& s, const DeformNet& n) {
      char tag[16];
      std::snprintf(tag, sizeof tag, "%06d", iteration);
      save_scene(join_path(ckpt_dir, std::string("scene_") + tag + ".msrf"), s);
      save_deform_net(join_path(ckpt_dir, std::string("net_") + tag + ".mdnp"), n);
    };
  }

  const FitResult result = fit(ds, scene, net, tc, checkpoint);

  save_scene(join_path(g.out, "scene.msrf"), scene);
  save_deform_net(join_path(g.out, "net.mdnp"), net);

  std::string csv = "iteration,stage,color,normal,depth,silhouette,binding,total\n";
  char line[256];
  for (const auto& row : result.log) {
    std::snprintf(line, sizeof line, "%d,%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                  row.iteration, row.stage, row.color, row.normal, row.depth, row.silhouette,
                  row.binding, row.total);
    csv += line;
  }
  write_text(join_path(g.out, "log.csv"), csv);

  nlohmann::ordered_json m;
  m["holdout_frame"] = result.holdout_frame;
  m["holdout_psnr"] = result.holdout_psnr;
  m["max_face_distance_stage1"] = result.max_face_distance_stage1;
  write_json(join_path(g.out, "metrics.json"), m);

  std::printf("holdout frame %d psnr %.4f dB\n", result.holdout_frame, result.holdout_psnr);
  return 0;
}

int cmd_eval(const Global& g, const EvalArgs& a) {
  const AppConfig cfg = effective_config(g);

  auto list_pngs = [](const std::string& dir) {
    check(fs::is_directory(dir), dir + ": not a directory");
    std::vector<std::string> names;
    for (const auto& e : fs::directory_iterator(dir))
      if (e.is_regular_file() && e.path().extension() == ".png")
        names.push_back(e.path().filename().string());
    std::sort(names.begin(), names.end());
    return names;
  };

  const std::vector<std::string> ra = list_pngs(a.rendered);
  const std::vector<std::string> rb = list_pngs(a.reference);
  const std::set<std::string> sa(ra.begin(), ra.end());
  const std::set<std::string> sb(rb.begin(), rb.end());

  std::vector<std::string> problems;
  for (const auto& n : ra)
    if (!sb.count(n)) problems.push_back(n + ": missing in " + a.reference);
  for (const auto& n : rb)
    if (!sa.count(n)) problems.push_back(n + ": missing in " + a.rendered);
  if (!problems.empty()) {
    std::string msg = "file sets do not match:";
    for (const auto& p : problems) msg += "\n  - " + p;
    throw Error(msg);
  }
  check(!ra.empty(), "no .png files in " + a.rendered);

  nlohmann::ordered_json frames = nlohmann::ordered_json::array();
  double sum_psnr = 0.0, sum_ssim = 0.0, sum_ms = 0.0;
  for (const auto& name : ra) {
    const Image x = read_png(join_path(a.rendered, name));
    const Image y = read_png(join_path(a.reference, name));
    check(x.same_shape(y), name + ": image shapes differ between directories");
    const double p = psnr(x, y);
    const double s = ssim(x, y);
    const double ms = ms_ssim(x, y);
    sum_psnr += p;
    sum_ssim += s;
    sum_ms += ms;
    nlohmann::ordered_json f;
    f["file"] = name;
    f["psnr"] = p;
    f["ssim"] = s;
    f["ms_ssim"] = ms;
    frames.push_back(f);
  }
  const double n = static_cast<double>(ra.size());

  nlohmann::ordered_json report;
  report["frames"] = frames;
  report["mean"] = {{"psnr", sum_psnr / n}, {"ssim", sum_ssim / n}, {"ms_ssim", sum_ms / n}};

  prepare_out(g, cfg);
  write_json(join_path(g.out, "metrics.json"), report);
  std::printf("frames: %zu  mean psnr %.4f  ssim %.6f  ms-ssim %.6f\n", ra.size(),
              sum_psnr / n, sum_ssim / n, sum_ms / n);
  return 0;
}

int cmd_make_synthetic(const Global& g) {
  const AppConfig cfg = effective_config(g);
  prepare_out(g, cfg);
  make_synthetic(g.out, cfg.synthetic);
  std::printf("frames: %d (%dx%d) under %s\n", cfg.synthetic.frames, cfg.synthetic.width,
              cfg.synthetic.height, g.out.c_str());
  return 0;
}

int cmd_gradcheck(const Global& g) {
  const AppConfig cfg = effective_config(g);
  const GradCheckReport report =
      run_gradcheck(cfg.gradcheck.seed, cfg.gradcheck.rounds, cfg.gradcheck.corrupt);
  const std::string text = format_report(report);
  std::fputs(text.c_str(), stdout);

  if (!g.out.empty()) {
    prepare_out(g, cfg);
    write_text(join_path(g.out, "gradcheck.txt"), text);
    nlohmann::ordered_json j;
    j["pass"] = report.pass;
    nlohmann::ordered_json entries = nlohmann::ordered_json::array();
    for (const auto& e : report.entries) {
      nlohmann::ordered_json row;
      row["group"] = e.group;
      row["worst_rel"] = e.worst_rel;
      row["analytic"] = e.analytic;
      row["numeric"] = e.numeric;
      row["checks"] = e.checks;
      row["pass"] = e.pass;
      entries.push_back(row);
    }
    j["entries"] = entries;
    write_json(join_path(g.out, "gradcheck.json"), j);
  }
  // Failures are report content, not a process error.
  return 0;
}

int cmd_noise_ablation(const Global& g, const AblationArgs& a) {
  const AppConfig cfg = effective_config(g);
  const Dataset ds = load_dataset(resolve_manifest(a.data));
  SurfelScene scene = load_scene(a.scene);
  const DeformNet net = load_deform_net(a.net);
  check(net.theta_dim == ds.theta_dim && net.beta_dim == ds.beta_dim,
        "checkpoint conditioning dims do not match the dataset");
  check(scene.size() > 0, "scene is empty");

  prepare_out(g, cfg);

  RenderOptions opts = cfg.render;
  opts.keep_fragments = false;

  const std::vector<double>& stds = cfg.ablation.noise_stds;
  const int seeds = cfg.ablation.seeds;
  const std::size_t frames = ds.size();

  std::vector<std::vector<double>> tab_psnr(stds.size()), tab_ssim(stds.size()),
      tab_ms(stds.size());
  for (std::size_t si = 0; si < stds.size(); ++si) {
    for (int k = 0; k < seeds; ++k) {
      double sum_p = 0.0, sum_s = 0.0, sum_m = 0.0;
      for (std::size_t f = 0; f < frames; ++f) {
        // One stream per (std, seed, frame) so rows are independent draws.
        Rng rng(cfg.train.seed,
                (static_cast<uint64_t>(si) << 40) ^ (static_cast<uint64_t>(k) << 20) ^ f);
        std::vector<double> theta = ds.thetas[f];
        for (double& t : theta) t += stds[si] * rng.normal();
        const RenderBuffers buffers =
            render_frame(ds, f, scene, net, opts.sh_degree_cap, opts, &theta);
        const Image img = buffers.color_image();
        sum_p += psnr(img, ds.images[f]);
        sum_s += ssim(img, ds.images[f]);
        sum_m += ms_ssim(img, ds.images[f]);
      }
      tab_psnr[si].push_back(sum_p / frames);
      tab_ssim[si].push_back(sum_s / frames);
      tab_ms[si].push_back(sum_m / frames);
    }
  }

  auto means = [&](const std::vector<std::vector<double>>& tab) {
    std::vector<double> m;
    for (const auto& row : tab) {
      double s = 0.0;
      for (double v : row) s += v;
      m.push_back(s / row.size());
    }
    return m;
  };
  const std::vector<double> mean_psnr = means(tab_psnr);
  const std::vector<double> mean_ssim = means(tab_ssim);
  const std::vector<double> mean_ms = means(tab_ms);

  nlohmann::ordered_json j;
  j["noise_stds"] = stds;
  j["seeds"] = seeds;
  j["psnr"] = tab_psnr;
  j["ssim"] = tab_ssim;
  j["ms_ssim"] = tab_ms;
  j["psnr_mean"] = mean_psnr;
  j["ssim_mean"] = mean_ssim;
  j["ms_ssim_mean"] = mean_ms;
  write_json(join_path(g.out, "ablation.json"), j);

  for (std::size_t si = 0; si < stds.size(); ++si)
    std::printf("std %.3f  psnr %.4f  ssim %.6f  ms-ssim %.6f\n", stds[si], mean_psnr[si],
                mean_ssim[si], mean_ms[si]);
  return 0;
}

}  // namespace gsurf::cli
