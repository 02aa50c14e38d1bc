#include "gsurf/optim.hpp"

#include "gsurf/metrics.hpp"
#include "gsurf/rng.hpp"

#include <algorithm>
#include <cmath>

namespace gsurf {

void adam_step(double* value, const double* grad, std::size_t size, AdamState& state,
               double lr, const AdamConfig& cfg, const uint8_t* mask,
               const std::string& group_name) {
  check(state.m.size() == size && state.v.size() == size,
        "adam_step: state shape mismatch for " + group_name);
  state.step += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < size; ++i) {
    if (mask && !mask[i]) continue;
    const double g = grad[i];
    check(std::isfinite(g), "adam_step: non-finite gradient in " + group_name);
    state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
    state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
    const double mhat = state.m[i] / bc1;
    const double vhat = state.v[i] / bc2;
    value[i] -= lr * mhat / (std::sqrt(vhat) + cfg.eps);
  }
}

namespace {

struct BaseCache {
  std::vector<Vec3> p, tu, tv;
  std::vector<Vec2> s;
};

void set_base(SurfelScene& scene, const BaseCache& b) {
  scene.base_p = b.p;
  scene.base_tu = b.tu;
  scene.base_tv = b.tv;
  scene.base_s = b.s;
}

BaseCache capture_base(const SurfelScene& scene) {
  return BaseCache{scene.base_p, scene.base_tu, scene.base_tv, scene.base_s};
}

// Parameter group wiring for one stage.
struct Group {
  std::string name;
  double* value = nullptr;
  double* grad = nullptr;
  std::size_t size = 0;
  double lr = 0.0;
  std::vector<uint8_t> mask;  // empty = all trainable
  bool is_net = false;        // participates in the global-norm clip
  AdamState state;
};

double max_face_distance(const SurfelScene& scene, const DeformedSurfels& deformed,
                         const TriangleMesh& mesh) {
  double worst = 0.0;
  for (std::size_t i = 0; i < scene.size(); ++i) {
    const auto [point, normal] = face_plane(mesh, scene.face_id[i]);
    worst = std::max(worst, std::abs((deformed.p[i] - point).dot(normal)));
  }
  return worst;
}

}  // namespace

RenderBuffers render_frame(const Dataset& ds, std::size_t frame, SurfelScene& scene,
                           const DeformNet& net, int sh_cap,
                           const RenderOptions& base_opts,
                           const std::vector<double>* theta_override) {
  check(frame < ds.size(), "render_frame: frame out of range");
  reattach_base(scene, ds.meshes[frame]);
  const std::vector<double>& theta =
      theta_override ? *theta_override : ds.thetas[frame];
  DeformResult fwd = deform_forward(net, scene, theta, ds.betas[frame], ds.scene_box);
  const DeformedSurfels deformed = apply_deformation(scene, &fwd.residuals);
  RenderOptions opts = base_opts;
  opts.sh_degree_cap = sh_cap;
  return render(scene, deformed, ds.cameras[frame], opts);
}

FitResult fit(const Dataset& ds, SurfelScene& scene, DeformNet& net,
              const TrainConfig& cfg, const CheckpointFn& checkpoint) {
  check(ds.size() > 0, "fit: empty dataset");
  check(cfg.stage1_iters >= 0 && cfg.stage2_iters >= 0, "fit: negative iteration count");
  check(cfg.lr_sh > 0 && cfg.lr_opacity > 0 && cfg.lr_net > 0 && cfg.lr_grid > 0,
        "fit: learning rates must be positive");
  const std::size_t n = scene.size();
  check(n > 0, "fit: empty scene");

  FitResult result;
  result.holdout_frame = cfg.holdout < 0 ? static_cast<int>(ds.size()) - 1
                                         : cfg.holdout;
  check(result.holdout_frame >= 0 && result.holdout_frame < static_cast<int>(ds.size()),
        "fit: holdout frame out of range");

  std::vector<std::size_t> train_frames;
  for (std::size_t f = 0; f < ds.size(); ++f)
    if (static_cast<int>(f) != result.holdout_frame || ds.size() == 1)
      train_frames.push_back(f);

  // Attachment is a pure function of the frame's mesh; register once.
  std::vector<BaseCache> bases(ds.size());
  for (std::size_t f = 0; f < ds.size(); ++f) {
    reattach_base(scene, ds.meshes[f]);
    bases[f] = capture_base(scene);
  }

  DeformNetGrads net_grads = DeformNetGrads::zeros(net);
  auto net_refs = param_refs(net, &net_grads);
  const int h = net.cfg.hidden;

  // Flat views over the scene's learnable arrays.
  double* sh_value = scene.sh.empty() ? nullptr : scene.sh[0].data();
  const std::size_t sh_size = n * kShCoeffCount;

  auto build_groups = [&](int stage) {
    std::vector<Group> groups;
    {
      Group g;
      g.name = "sh";
      g.value = sh_value;
      g.size = sh_size;
      g.lr = cfg.lr_sh;
      if (stage == 1) {
        g.mask.assign(sh_size, 0);
        for (std::size_t i = 0; i < sh_size; ++i)
          if (i % kShCoeffCount < 3) g.mask[i] = 1;  // DC only
      }
      g.state = AdamState::zeros(g.size);
      groups.push_back(std::move(g));
    }
    if (stage == 1) {
      Group g;
      g.name = "opacity";
      g.value = scene.opacity.data();
      g.size = n;
      g.lr = cfg.lr_opacity;
      g.state = AdamState::zeros(g.size);
      groups.push_back(std::move(g));
    }
    for (ParamRef& r : net_refs) {
      const bool mask_row = r.name == "dec_w2" || r.name == "dec_b2";
      if (stage == 2 && !mask_row) continue;  // trunk frozen outright
      Group g;
      g.name = r.name;
      g.value = r.value->data();
      g.grad = r.grad->data();
      g.size = r.value->size();
      g.lr = r.is_grid ? cfg.lr_grid : cfg.lr_net;
      g.is_net = true;
      if (mask_row) {
        // The decoder's output layer splits: geometry rows (stage 1) vs the
        // mask-logit row 8 (stage 2).
        g.mask.assign(g.size, stage == 1 ? 1 : 0);
        if (r.name == "dec_w2") {
          for (std::size_t i = 8 * static_cast<std::size_t>(h); i < g.size; ++i)
            g.mask[i] = stage == 1 ? 0 : 1;
        } else {
          g.mask[8] = stage == 1 ? 0 : 1;
        }
      }
      g.state = AdamState::zeros(g.size);
      groups.push_back(std::move(g));
    }
    return groups;
  };

  Rng frame_rng(cfg.seed, 100);
  const int total_iters = cfg.stage1_iters + cfg.stage2_iters;
  result.log.reserve(total_iters);
  std::vector<Group> groups;
  int current_stage = 0;

  for (int it = 0; it < total_iters; ++it) {
    const int stage = it < cfg.stage1_iters ? 1 : 2;
    if (stage != current_stage) {
      groups = build_groups(stage);
      current_stage = stage;
    }

    const std::size_t f =
        train_frames[frame_rng.uniform_index(train_frames.size())];
    set_base(scene, bases[f]);

    DeformResult fwd =
        deform_forward(net, scene, ds.thetas[f], ds.betas[f], ds.scene_box);
    Residuals& res = fwd.residuals;
    if (stage == 1) std::fill(res.malpha.begin(), res.malpha.end(), 1.0);

    const DeformedSurfels deformed = apply_deformation(scene, &res);
    RenderOptions opts = cfg.render;
    opts.sh_degree_cap = stage == 1 ? cfg.sh_cap_stage1 : cfg.sh_cap_stage2;
    opts.keep_fragments = true;
    const RenderBuffers buffers = render(scene, deformed, ds.cameras[f], opts);

    const Image rendered = buffers.color_image();
    const Image alpha = buffers.alpha_image();

    LossLogRow row;
    row.iteration = it;
    row.stage = stage;

    ColorLoss lc = loss_color(rendered, ds.images[f]);
    SilhouetteLoss ls = loss_silhouette(alpha, ds.masks[f]);
    row.color = lc.value;
    row.silhouette = ls.value;

    Image grad_color = lc.grad;
    for (double& v : grad_color.data) v *= cfg.weights.color;
    Image grad_alpha = ls.grad;
    for (double& v : grad_alpha.data) v *= cfg.weights.silhouette;

    FragmentGrads frag_grads;
    const Image* grad_depth_ptr = nullptr;
    Image grad_depth;
    BindingLoss lb;
    if (stage == 1) {
      DepthDistortionLoss ld = loss_depth_distortion(buffers);
      NormalLoss ln = loss_normal(buffers, ds.cameras[f]);
      lb = loss_binding(scene, deformed, ds.meshes[f], {cfg.binding_cutoff});
      row.depth = ld.value;
      row.normal = ln.value;
      row.binding = lb.value;

      frag_grads.d_omega.assign(buffers.fragments.size(), 0.0);
      frag_grads.d_z.assign(buffers.fragments.size(), 0.0);
      frag_grads.d_normal.assign(buffers.fragments.size(), Vec3::Zero());
      for (std::size_t k = 0; k < buffers.fragments.size(); ++k) {
        frag_grads.d_omega[k] = cfg.weights.depth * ld.d_omega[k] +
                                cfg.weights.normal * ln.d_omega[k];
        frag_grads.d_z[k] = cfg.weights.depth * ld.d_z[k];
        frag_grads.d_normal[k] = cfg.weights.normal * ln.d_normal[k];
      }
      grad_depth = ln.grad_depth;
      for (double& v : grad_depth.data) v *= cfg.weights.normal;
      grad_depth_ptr = &grad_depth;
    }

    LossParts parts;
    parts.color = row.color;
    parts.normal = row.normal;
    parts.depth = row.depth;
    parts.silhouette = row.silhouette;
    parts.binding = row.binding;
    row.total = loss_total(parts, cfg.weights);
    result.log.push_back(row);

    DeformedGrads dg = render_backward(scene, deformed, ds.cameras[f], buffers,
                                       &grad_color, &grad_alpha, grad_depth_ptr,
                                       stage == 1 ? &frag_grads : nullptr, opts);
    if (stage == 1) {
      for (std::size_t i = 0; i < n; ++i) {
        dg.p[i] += cfg.weights.binding * lb.g_p[i];
        dg.tu[i] += cfg.weights.binding * lb.g_tu[i];
        dg.tv[i] += cfg.weights.binding * lb.g_tv[i];
      }
    }

    ResidualGrads rg = apply_deformation_backward(scene, res, dg);
    if (stage == 1) {
      // The mask was forced to 1; nothing may flow into its head.
      std::fill(rg.malpha.begin(), rg.malpha.end(), 0.0);
    } else {
      // Geometry heads are detached in stage 2.
      std::fill(rg.dp.begin(), rg.dp.end(), Vec3::Zero());
      std::fill(rg.ds.begin(), rg.ds.end(), Vec2::Zero());
      std::fill(rg.dr.begin(), rg.dr.end(), Vec3::Zero());
    }

    DeformBackwardResult nb = deform_backward(net, fwd.cache, rg);
    net_grads = std::move(nb.params);
    // param_refs holds pointers into net_grads; re-wire after the move.
    net_refs = param_refs(net, &net_grads);
    for (Group& g : groups) {
      if (!g.is_net) continue;
      for (ParamRef& r : net_refs)
        if (r.name == g.name) g.grad = r.grad->data();
    }

    // Global-norm clip over the trainable deform-net entries.
    double sq = 0.0;
    for (const Group& g : groups) {
      if (!g.is_net) continue;
      for (std::size_t i = 0; i < g.size; ++i) {
        if (!g.mask.empty() && !g.mask[i]) continue;
        sq += g.grad[i] * g.grad[i];
      }
    }
    const double norm = std::sqrt(sq);
    const double scale = (cfg.clip_norm > 0.0 && norm > cfg.clip_norm)
                             ? cfg.clip_norm / norm
                             : 1.0;

    for (Group& g : groups) {
      const double* grad = nullptr;
      std::vector<double> scaled;
      if (g.is_net) {
        if (scale != 1.0) {
          scaled.assign(g.grad, g.grad + g.size);
          for (double& v : scaled) v *= scale;
          grad = scaled.data();
        } else {
          grad = g.grad;
        }
      } else if (g.name == "sh") {
        grad = dg.sh.empty() ? nullptr : dg.sh[0].data();
      } else {  // opacity
        grad = rg.base_opacity.data();
      }
      if (!grad) continue;
      adam_step(g.value, grad, g.size, g.state, g.lr, {},
                g.mask.empty() ? nullptr : g.mask.data(), g.name);
    }
    // Opacity stays a valid blending weight.
    if (stage == 1)
      for (double& a : scene.opacity) a = std::clamp(a, 1e-4, 1.0);

    if (it + 1 == cfg.stage1_iters) {
      // Stage-1 attachment diagnostics over the training frames.
      double worst = 0.0;
      for (std::size_t tf : train_frames) {
        set_base(scene, bases[tf]);
        DeformResult dfw =
            deform_forward(net, scene, ds.thetas[tf], ds.betas[tf], ds.scene_box);
        std::fill(dfw.residuals.malpha.begin(), dfw.residuals.malpha.end(), 1.0);
        const DeformedSurfels d = apply_deformation(scene, &dfw.residuals);
        worst = std::max(worst, max_face_distance(scene, d, ds.meshes[tf]));
      }
      result.max_face_distance_stage1 = worst;
    }
    if (checkpoint && cfg.checkpoint_every > 0 && (it + 1) % cfg.checkpoint_every == 0)
      checkpoint(it + 1, scene, net);
  }

  // Holdout evaluation with the final parameters.
  {
    const std::size_t f = static_cast<std::size_t>(result.holdout_frame);
    const int cap = cfg.stage2_iters > 0 ? cfg.sh_cap_stage2 : cfg.sh_cap_stage1;
    RenderOptions opts = cfg.render;
    opts.keep_fragments = false;
    const RenderBuffers buffers = render_frame(ds, f, scene, net, cap, opts);
    result.holdout_psnr = psnr(buffers.color_image(), ds.images[f]);
  }
  return result;
}

}  // namespace gsurf
