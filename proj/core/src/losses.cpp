#include "gsurf/losses.hpp"

#include "gsurf/metrics.hpp"

#include <cmath>

namespace gsurf {

ColorLoss loss_color(const Image& rendered, const Image& target, double lambda_ssim) {
  check(rendered.same_shape(target), "loss_color: image shapes differ");
  check(!rendered.data.empty(), "loss_color: empty image");
  ColorLoss out;
  out.grad = Image(rendered.width, rendered.height, rendered.channels);

  const double n = static_cast<double>(rendered.data.size());
  double l1 = 0.0;
  for (std::size_t i = 0; i < rendered.data.size(); ++i) {
    const double d = rendered.data[i] - target.data[i];
    l1 += std::abs(d);
    const double sign = d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
    out.grad.data[i] = (1.0 - lambda_ssim) * sign / n;
  }
  l1 /= n;

  const SsimResult s = ssim_with_grad(rendered, target);
  out.value = (1.0 - lambda_ssim) * l1 + lambda_ssim * (1.0 - s.value);
  for (std::size_t i = 0; i < rendered.data.size(); ++i)
    out.grad.data[i] -= lambda_ssim * s.grad.data[i];
  return out;
}

DepthDistortionLoss loss_depth_distortion(const RenderBuffers& buffers) {
  check(buffers.frag_begin.size() == buffers.alpha.size(),
        "loss_depth_distortion: fragment lists missing");
  DepthDistortionLoss out;
  out.d_omega.assign(buffers.fragments.size(), 0.0);
  out.d_z.assign(buffers.fragments.size(), 0.0);

  // First pass: the count of qualifying rays sets the normalization.
  std::size_t rays = 0;
  for (uint32_t c : buffers.frag_count) rays += c >= 2 ? 1 : 0;
  if (rays == 0) return out;
  const double inv = 1.0 / static_cast<double>(rays);

  double total = 0.0;
  const std::size_t npx = buffers.frag_begin.size();
  for (std::size_t px = 0; px < npx; ++px) {
    const uint32_t fb = buffers.frag_begin[px];
    const uint32_t fc = buffers.frag_count[px];
    if (fc < 2) continue;

    // Fragments are depth-sorted, so |z_i - z_j| telescopes with prefix sums.
    double a_tot = 0.0, b_tot = 0.0;
    for (uint32_t k = 0; k < fc; ++k) {
      const Fragment& f = buffers.fragments[fb + k];
      a_tot += f.omega;
      b_tot += f.omega * f.z;
    }
    double a_lt = 0.0, b_lt = 0.0, ray_loss = 0.0;
    for (uint32_t k = 0; k < fc; ++k) {
      const Fragment& f = buffers.fragments[fb + k];
      const double a_gt = a_tot - a_lt - f.omega;
      const double b_gt = b_tot - b_lt - f.omega * f.z;
      ray_loss += f.omega * (f.z * a_lt - b_lt);
      out.d_omega[fb + k] = inv * ((f.z * a_lt - b_lt) + (b_gt - f.z * a_gt));
      out.d_z[fb + k] = inv * f.omega * (a_lt - a_gt);
      a_lt += f.omega;
      b_lt += f.omega * f.z;
    }
    total += ray_loss;
  }
  out.value = total * inv;
  return out;
}

NormalLoss loss_normal(const RenderBuffers& buffers, const Camera& cam) {
  check(buffers.frag_begin.size() == buffers.alpha.size(),
        "loss_normal: fragment lists missing");
  check(buffers.width == cam.width && buffers.height == cam.height,
        "loss_normal: camera size mismatch");
  const int w = buffers.width, h = buffers.height;
  NormalLoss out;
  out.d_omega.assign(buffers.fragments.size(), 0.0);
  out.d_normal.assign(buffers.fragments.size(), Vec3::Zero());
  out.grad_depth = Image(w, h, 1);
  if (w == 0 || h == 0) return out;

  std::vector<Vec3> rays(static_cast<std::size_t>(w) * h);
  std::vector<Vec3> points(rays.size());
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const std::size_t p = static_cast<std::size_t>(y) * w + x;
      rays[p] = cam.pixel_ray(x, y);
      points[p] = buffers.depth[p] * rays[p];
    }

  struct PixelRef {
    std::size_t plus, minus;  // P(plus) - P(minus)
  };
  auto x_ref = [&](int x, int y) {
    const std::size_t row = static_cast<std::size_t>(y) * w;
    const int xp = std::min(x + 1, w - 1), xm = std::max(x - 1, 0);
    return PixelRef{row + xp, row + xm};
  };
  auto y_ref = [&](int x, int y) {
    const int yp = std::min(y + 1, h - 1), ym = std::max(y - 1, 0);
    return PixelRef{static_cast<std::size_t>(yp) * w + x,
                    static_cast<std::size_t>(ym) * w + x};
  };

  // Pass 1: find valid rays (fragments present, normal well defined).
  std::size_t valid = 0;
  std::vector<uint8_t> is_valid(rays.size(), 0);
  std::vector<Vec3> normals(rays.size(), Vec3::Zero());
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const std::size_t p = static_cast<std::size_t>(y) * w + x;
      if (buffers.frag_count[p] == 0) continue;
      const PixelRef rx = x_ref(x, y), ry = y_ref(x, y);
      const Vec3 tx = points[rx.plus] - points[rx.minus];
      const Vec3 ty = points[ry.plus] - points[ry.minus];
      const Vec3 c = ty.cross(tx);
      const double cn = c.norm();
      if (cn < 1e-12) continue;
      is_valid[p] = 1;
      normals[p] = c / cn;
      ++valid;
    }
  if (valid == 0) return out;
  const double inv = 1.0 / static_cast<double>(valid);

  // Pass 2: loss terms and gradients.
  std::vector<Vec3> g_points(rays.size(), Vec3::Zero());
  double total = 0.0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const std::size_t p = static_cast<std::size_t>(y) * w + x;
      if (!is_valid[p]) continue;
      const Vec3& N = normals[p];
      const uint32_t fb = buffers.frag_begin[p];
      const uint32_t fc = buffers.frag_count[p];
      Vec3 g_N = Vec3::Zero();
      for (uint32_t k = 0; k < fc; ++k) {
        const Fragment& f = buffers.fragments[fb + k];
        total += f.omega * (1.0 - f.n.dot(N));
        out.d_omega[fb + k] = inv * (1.0 - f.n.dot(N));
        out.d_normal[fb + k] = -inv * f.omega * N;
        g_N -= inv * f.omega * f.n;
      }
      // N = c / |c|, c = ty x tx
      const PixelRef rx = x_ref(x, y), ry = y_ref(x, y);
      const Vec3 tx = points[rx.plus] - points[rx.minus];
      const Vec3 ty = points[ry.plus] - points[ry.minus];
      const Vec3 c = ty.cross(tx);
      const double cn = c.norm();
      const Vec3 g_c = (g_N - N * N.dot(g_N)) / cn;
      const Vec3 g_ty = tx.cross(g_c);
      const Vec3 g_tx = g_c.cross(ty);
      g_points[rx.plus] += g_tx;
      g_points[rx.minus] -= g_tx;
      g_points[ry.plus] += g_ty;
      g_points[ry.minus] -= g_ty;
    }
  out.value = total * inv;

  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const std::size_t p = static_cast<std::size_t>(y) * w + x;
      out.grad_depth.at(x, y, 0) = g_points[p].dot(rays[p]);
    }
  return out;
}

SilhouetteLoss loss_silhouette(const Image& alpha, const Image& mask) {
  check(alpha.same_shape(mask), "loss_silhouette: image shapes differ");
  check(!alpha.data.empty(), "loss_silhouette: empty image");
  SilhouetteLoss out;
  out.grad = Image(alpha.width, alpha.height, alpha.channels);
  const double n = static_cast<double>(alpha.data.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < alpha.data.size(); ++i) {
    const double d = alpha.data[i] - mask.data[i];
    acc += std::abs(d);
    out.grad.data[i] = (d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0)) / n;
  }
  out.value = acc / n;
  return out;
}

BindingLoss loss_binding(const SurfelScene& scene, const DeformedSurfels& deformed,
                         const TriangleMesh& mesh, const BindingConfig& config) {
  const std::size_t n = scene.size();
  check(deformed.p.size() == n, "loss_binding: deformed size mismatch");
  check(config.cutoff > 0.0, "loss_binding: cutoff must be positive");
  BindingLoss out;
  out.g_p.assign(n, Vec3::Zero());
  out.g_tu.assign(n, Vec3::Zero());
  out.g_tv.assign(n, Vec3::Zero());

  // Face planes once per face actually referenced.
  std::vector<int8_t> plane_ready(mesh.faces.size(), 0);
  std::vector<Vec3> plane_point(mesh.faces.size());
  std::vector<Vec3> plane_normal(mesh.faces.size());

  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const uint32_t fid = scene.face_id[i];
    check(fid < mesh.faces.size(), "loss_binding: face_id out of range");
    if (!plane_ready[fid]) {
      const auto [point, normal] = face_plane(mesh, fid);
      plane_point[fid] = point;
      plane_normal[fid] = normal;
      plane_ready[fid] = 1;
    }
    const Vec3& N = plane_normal[fid];
    const double signed_d = (deformed.p[i] - plane_point[fid]).dot(N);
    const double d = std::abs(signed_d);
    const double dist = std::max(d, config.cutoff);

    const Vec3 c = deformed.tu[i].cross(deformed.tv[i]);
    const double cn = c.norm();
    check(cn > 1e-15, "loss_binding: degenerate surfel frame");
    const Vec3 nu = c / cn;
    const double mis = 1.0 - nu.dot(N);
    total += dist * mis;

    if (d > config.cutoff) {
      const double sgn = signed_d >= 0.0 ? 1.0 : -1.0;
      out.g_p[i] += sgn * mis * N;
    }
    // d(mis)/d(nu) = -N, through the normalization and the cross product.
    const Vec3 g_nu = -dist * N;
    const Vec3 g_c = (g_nu - nu * nu.dot(g_nu)) / cn;
    out.g_tu[i] += deformed.tv[i].cross(g_c);
    out.g_tv[i] += g_c.cross(deformed.tu[i]);
  }
  out.value = total;
  return out;
}

double loss_total(const LossParts& parts, const LossWeights& weights) {
  return weights.color * parts.color + weights.normal * parts.normal +
         weights.depth * parts.depth + weights.silhouette * parts.silhouette +
         weights.binding * parts.binding;
}

}  // namespace gsurf
