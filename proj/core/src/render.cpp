#include "gsurf/render.hpp"

#include "gsurf/parallel.hpp"
#include "gsurf/sh.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <unordered_map>

namespace gsurf {

namespace {

// Per-surfel, per-camera data shared by forward and backward.
struct SurfelCam {
  bool visible = false;
  Vec3 pc = Vec3::Zero();  // centroid, camera space
  Vec3 uc = Vec3::Zero();  // unit tangent axes, camera space
  Vec3 vc = Vec3::Zero();
  Vec3 nc = Vec3::Zero();  // uc x vc (unit up to rounding)
  Vec3 nc_unit = Vec3::Zero();
  double nc_norm = 0.0;
  Vec2 s = Vec2::Zero();  // effective scales after the footprint floor
  bool s_clamped[2] = {false, false};
  ShEval sh;        // color + basis at the per-surfel view direction
  Vec3 dir = Vec3::Zero();  // unit view direction, world space
  double dir_len = 0.0;     // |p_world - camera_center|
  int tx0 = 0, tx1 = 0, ty0 = 0, ty1 = 0;  // half-open tile range
};

struct TileGrid {
  int tiles_x = 0, tiles_y = 0, tile = 16;
};

std::vector<SurfelCam> preprocess(const SurfelScene& scene, const DeformedSurfels& def,
                                  const Camera& cam, const RenderOptions& opts,
                                  const TileGrid& grid) {
  const std::size_t n = def.p.size();
  std::vector<SurfelCam> out(n);
  const Mat3 R = cam.rotation;
  const Vec3 t = cam.translation;
  const Vec3 cc = cam.center_world();
  const double focal = 0.5 * (cam.fx + cam.fy);
  const bool finite_cut = std::isfinite(opts.rho_cutoff);
  const double extent = finite_cut ? std::sqrt(opts.rho_cutoff) : 0.0;

  parallel_chunks(n, [&](std::size_t i) {
    SurfelCam& sc = out[i];
    sc.pc = R * def.p[i] + t;
    sc.uc = R * def.tu[i];
    sc.vc = R * def.tv[i];
    sc.nc = sc.uc.cross(sc.vc);
    sc.nc_norm = sc.nc.norm();
    if (sc.nc_norm < 1e-15) return;  // degenerate frame
    sc.nc_unit = sc.nc / sc.nc_norm;

    sc.s = def.s[i];
    if (opts.min_footprint_px > 0.0 && sc.pc.z() > 0.0) {
      // Pixel-size floor on the projected axes; the threshold is held
      // constant in the backward pass (clamped axes get zero gradient).
      const double s_min = opts.min_footprint_px * sc.pc.z() / focal;
      for (int k = 0; k < 2; ++k) {
        if (sc.s[k] < s_min) {
          sc.s[k] = s_min;
          sc.s_clamped[k] = true;
        }
      }
    }
    if (sc.s[0] < 1e-15 || sc.s[1] < 1e-15) return;
    if (def.alpha[i] <= 0.0) return;

    // Screen bounds from the corners of the +-extent*sigma parallelogram.
    if (finite_cut) {
      double min_x = 1e300, max_x = -1e300, min_y = 1e300, max_y = -1e300;
      bool any_front = false, near_plane = false;
      for (int corner = 0; corner < 4; ++corner) {
        const double su = (corner & 1) ? extent : -extent;
        const double sv = (corner & 2) ? extent : -extent;
        const Vec3 q = sc.pc + su * sc.s[0] * sc.uc + sv * sc.s[1] * sc.vc;
        if (q.z() >= cam.near) any_front = true;
        if (q.z() < 1e-6) {
          near_plane = true;
          continue;
        }
        const double px = cam.fx * q.x() / q.z() + cam.cx;
        const double py = cam.fy * q.y() / q.z() + cam.cy;
        min_x = std::min(min_x, px);
        max_x = std::max(max_x, px);
        min_y = std::min(min_y, py);
        max_y = std::max(max_y, py);
      }
      if (!any_front) return;
      if (near_plane) {  // straddles the camera plane: conservative bound
        min_x = 0.0;
        max_x = cam.width;
        min_y = 0.0;
        max_y = cam.height;
      } else {
        min_x -= 1.0;
        max_x += 1.0;
        min_y -= 1.0;
        max_y += 1.0;
      }
      const int x0 = std::max(0, static_cast<int>(std::floor(min_x)));
      const int x1 = std::min(cam.width, static_cast<int>(std::ceil(max_x)) + 1);
      const int y0 = std::max(0, static_cast<int>(std::floor(min_y)));
      const int y1 = std::min(cam.height, static_cast<int>(std::ceil(max_y)) + 1);
      if (x0 >= x1 || y0 >= y1) return;
      sc.tx0 = x0 / grid.tile;
      sc.tx1 = (x1 - 1) / grid.tile + 1;
      sc.ty0 = y0 / grid.tile;
      sc.ty1 = (y1 - 1) / grid.tile + 1;
    } else {
      // Unbounded support: every tile.
      sc.tx0 = 0;
      sc.tx1 = grid.tiles_x;
      sc.ty0 = 0;
      sc.ty1 = grid.tiles_y;
    }

    const Vec3 delta = def.p[i] - cc;
    sc.dir_len = delta.norm();
    sc.dir = sc.dir_len > 1e-15 ? Vec3(delta / sc.dir_len) : Vec3(0, 0, 1);
    sc.sh = sh_eval_full(scene.sh[i], sc.dir, opts.sh_degree_cap);
    sc.visible = true;
  });
  return out;
}

std::vector<std::vector<uint32_t>> bin_surfels(const std::vector<SurfelCam>& cams,
                                               const TileGrid& grid) {
  std::vector<std::vector<uint32_t>> bins(static_cast<std::size_t>(grid.tiles_x) *
                                          grid.tiles_y);
  for (std::size_t i = 0; i < cams.size(); ++i) {
    const SurfelCam& sc = cams[i];
    if (!sc.visible) continue;
    for (int ty = sc.ty0; ty < sc.ty1; ++ty)
      for (int tx = sc.tx0; tx < sc.tx1; ++tx)
        bins[static_cast<std::size_t>(ty) * grid.tiles_x + tx].push_back(
            static_cast<uint32_t>(i));
  }
  return bins;
}

struct TileOutput {
  std::vector<Fragment> fragments;
  std::vector<uint32_t> pixel;  // global pixel index per run
  std::vector<uint32_t> begin;  // offset into `fragments`
  std::vector<uint32_t> count;
};

}  // namespace

Image RenderBuffers::color_image() const {
  Image im(width, height, 3);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x)
      for (int c = 0; c < 3; ++c) im.at(x, y, c) = color[pixel(x, y)][c];
  return im;
}

Image RenderBuffers::alpha_image() const {
  Image im(width, height, 1);
  for (std::size_t i = 0; i < alpha.size(); ++i) im.data[i] = alpha[i];
  return im;
}

Image RenderBuffers::depth_image() const {
  Image im(width, height, 1);
  for (std::size_t i = 0; i < depth.size(); ++i) im.data[i] = depth[i];
  return im;
}

Image RenderBuffers::normal_image() const {
  Image im(width, height, 3);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x)
      for (int c = 0; c < 3; ++c) im.at(x, y, c) = normal[pixel(x, y)][c];
  return im;
}

RenderBuffers render(const SurfelScene& scene, const DeformedSurfels& deformed,
                     const Camera& cam, const RenderOptions& opts) {
  check(deformed.p.size() == scene.size(), "render: deformed size mismatch");
  cam.validate();
  check(opts.tile_size > 0, "render: tile_size must be positive");

  TileGrid grid;
  grid.tile = opts.tile_size;
  grid.tiles_x = (cam.width + grid.tile - 1) / grid.tile;
  grid.tiles_y = (cam.height + grid.tile - 1) / grid.tile;

  const std::vector<SurfelCam> cams = preprocess(scene, deformed, cam, opts, grid);
  const std::vector<std::vector<uint32_t>> bins = bin_surfels(cams, grid);

  RenderBuffers out;
  out.width = cam.width;
  out.height = cam.height;
  const std::size_t npx = static_cast<std::size_t>(cam.width) * cam.height;
  out.color.assign(npx, Vec3::Zero());
  out.alpha.assign(npx, 0.0);
  out.depth.assign(npx, 0.0);
  out.normal.assign(npx, Vec3::Zero());
  if (opts.keep_fragments) {
    out.frag_begin.assign(npx, 0);
    out.frag_count.assign(npx, 0);
  }

  const std::size_t n_tiles = bins.size();
  std::vector<TileOutput> tile_out(n_tiles);

  parallel_chunks(n_tiles, [&](std::size_t tile_id) {
    const std::vector<uint32_t>& bin = bins[tile_id];
    TileOutput& tout = tile_out[tile_id];
    if (bin.empty()) return;
    const int tx = static_cast<int>(tile_id % grid.tiles_x);
    const int ty = static_cast<int>(tile_id / grid.tiles_x);
    const int x0 = tx * grid.tile, x1 = std::min(cam.width, x0 + grid.tile);
    const int y0 = ty * grid.tile, y1 = std::min(cam.height, y0 + grid.tile);

    std::vector<Fragment> frags;
    frags.reserve(bin.size());
    for (int y = y0; y < y1; ++y) {
      for (int x = x0; x < x1; ++x) {
        frags.clear();
        const Vec3 d = cam.pixel_ray(x, y);
        for (uint32_t si : bin) {
          const SurfelCam& sc = cams[si];
          const double D = sc.nc.dot(d);
          if (std::abs(D) < 1e-12) continue;
          const double z = sc.nc.dot(sc.pc) / D;
          if (z < cam.near || z > cam.far) continue;
          const Vec3 r = z * d - sc.pc;
          const double u = r.dot(sc.uc) / sc.s[0];
          const double v = r.dot(sc.vc) / sc.s[1];
          const double rho = u * u + v * v;
          if (rho > opts.rho_cutoff) continue;
          const double g = std::exp(-0.5 * rho);
          const double a = deformed.alpha[si] * g;
          if (a < opts.alpha_skip || a <= 0.0) continue;
          Fragment f;
          f.surfel = si;
          f.z = z;
          f.a = std::min(a, 0.9999);  // keep transmittance strictly positive
          f.rgb = sc.sh.color;
          f.n = D > 0.0 ? Vec3(-sc.nc_unit) : sc.nc_unit;
          frags.push_back(f);
        }
        if (frags.empty()) continue;
        std::sort(frags.begin(), frags.end(), [](const Fragment& a, const Fragment& b) {
          return a.z != b.z ? a.z < b.z : a.surfel < b.surfel;
        });

        Vec3 color = Vec3::Zero();
        Vec3 nacc = Vec3::Zero();
        double acc_a = 0.0, acc_wz = 0.0, T = 1.0;
        std::size_t kept = 0;
        for (Fragment& f : frags) {
          f.omega = f.a * T;
          color += f.omega * f.rgb;
          nacc += f.omega * f.n;
          acc_a += f.omega;
          acc_wz += f.omega * f.z;
          T *= 1.0 - f.a;
          ++kept;
          if (opts.early_termination && T < opts.term_transmittance) break;
        }
        const std::size_t px = out.pixel(x, y);
        out.color[px] = color;
        out.alpha[px] = acc_a;
        out.depth[px] = acc_wz / (acc_a + kDepthEps);
        const double nn = nacc.norm();
        if (nn > 1e-15) out.normal[px] = nacc / nn;
        if (opts.keep_fragments) {
          tout.pixel.push_back(static_cast<uint32_t>(px));
          tout.begin.push_back(static_cast<uint32_t>(tout.fragments.size()));
          tout.count.push_back(static_cast<uint32_t>(kept));
          tout.fragments.insert(tout.fragments.end(), frags.begin(),
                                frags.begin() + kept);
        }
      }
    }
  });

  if (opts.keep_fragments) {
    std::size_t total = 0;
    for (const TileOutput& t : tile_out) total += t.fragments.size();
    out.fragments.reserve(total);
    for (const TileOutput& t : tile_out) {
      const uint32_t base = static_cast<uint32_t>(out.fragments.size());
      out.fragments.insert(out.fragments.end(), t.fragments.begin(), t.fragments.end());
      for (std::size_t k = 0; k < t.pixel.size(); ++k) {
        out.frag_begin[t.pixel[k]] = base + t.begin[k];
        out.frag_count[t.pixel[k]] = t.count[k];
      }
    }
  }
  return out;
}

RenderBuffers render(const SurfelScene& scene, const Camera& cam,
                     const RenderOptions& opts) {
  return render(scene, apply_deformation(scene, nullptr), cam, opts);
}

Image render_silhouette(const SurfelScene& scene, const DeformedSurfels& deformed,
                        const Camera& cam, const RenderOptions& opts) {
  RenderOptions o = opts;
  o.keep_fragments = false;
  return render(scene, deformed, cam, o).alpha_image();
}

namespace {

// Per-surfel gradient accumulator local to one tile.
struct SurfelGrad {
  Vec3 g_pc = Vec3::Zero();
  Vec3 g_uc = Vec3::Zero();
  Vec3 g_vc = Vec3::Zero();
  Vec3 g_nc = Vec3::Zero();
  Vec2 g_s = Vec2::Zero();
  double g_alpha = 0.0;
  Vec3 g_rgb = Vec3::Zero();

  void add(const SurfelGrad& o) {
    g_pc += o.g_pc;
    g_uc += o.g_uc;
    g_vc += o.g_vc;
    g_nc += o.g_nc;
    g_s += o.g_s;
    g_alpha += o.g_alpha;
    g_rgb += o.g_rgb;
  }
};

}  // namespace

DeformedGrads render_backward(const SurfelScene& scene, const DeformedSurfels& deformed,
                              const Camera& cam, const RenderBuffers& buffers,
                              const Image* grad_color, const Image* grad_alpha,
                              const Image* grad_depth, const FragmentGrads* frag_grads,
                              const RenderOptions& opts) {
  const std::size_t n = scene.size();
  check(deformed.p.size() == n, "render_backward: deformed size mismatch");
  check(buffers.width == cam.width && buffers.height == cam.height,
        "render_backward: buffer size mismatch");
  check(buffers.frag_begin.size() == buffers.alpha.size(),
        "render_backward: buffers were rendered without fragments");
  if (grad_color)
    check(grad_color->width == cam.width && grad_color->height == cam.height &&
              grad_color->channels == 3,
          "render_backward: grad_color shape");
  if (grad_alpha)
    check(grad_alpha->width == cam.width && grad_alpha->height == cam.height &&
              grad_alpha->channels == 1,
          "render_backward: grad_alpha shape");
  if (grad_depth)
    check(grad_depth->width == cam.width && grad_depth->height == cam.height &&
              grad_depth->channels == 1,
          "render_backward: grad_depth shape");
  const std::size_t nfrag = buffers.fragments.size();
  if (frag_grads) {
    check(frag_grads->d_omega.empty() || frag_grads->d_omega.size() == nfrag,
          "render_backward: d_omega size");
    check(frag_grads->d_z.empty() || frag_grads->d_z.size() == nfrag,
          "render_backward: d_z size");
    check(frag_grads->d_normal.empty() || frag_grads->d_normal.size() == nfrag,
          "render_backward: d_normal size");
  }

  TileGrid grid;
  grid.tile = opts.tile_size;
  grid.tiles_x = (cam.width + grid.tile - 1) / grid.tile;
  grid.tiles_y = (cam.height + grid.tile - 1) / grid.tile;
  const std::vector<SurfelCam> cams = preprocess(scene, deformed, cam, opts, grid);

  const std::size_t n_tiles = static_cast<std::size_t>(grid.tiles_x) * grid.tiles_y;
  std::vector<std::unordered_map<uint32_t, SurfelGrad>> tile_grads(n_tiles);

  parallel_chunks(n_tiles, [&](std::size_t tile_id) {
    std::unordered_map<uint32_t, SurfelGrad>& local = tile_grads[tile_id];
    const int tx = static_cast<int>(tile_id % grid.tiles_x);
    const int ty = static_cast<int>(tile_id / grid.tiles_x);
    const int x0 = tx * grid.tile, x1 = std::min(cam.width, x0 + grid.tile);
    const int y0 = ty * grid.tile, y1 = std::min(cam.height, y0 + grid.tile);

    std::vector<double> ghat;   // d(loss)/d(omega_i), all sources
    std::vector<double> tprev;  // transmittance in front of fragment i
    for (int y = y0; y < y1; ++y) {
      for (int x = x0; x < x1; ++x) {
        const std::size_t px = buffers.pixel(x, y);
        const uint32_t fb = buffers.frag_begin[px];
        const uint32_t fc = buffers.frag_count[px];
        if (fc == 0) continue;

        const Vec3 gc = grad_color ? Vec3(grad_color->at(x, y, 0), grad_color->at(x, y, 1),
                                          grad_color->at(x, y, 2))
                                   : Vec3::Zero();
        const double ga_img = grad_alpha ? grad_alpha->at(x, y, 0) : 0.0;
        const double gd_img = grad_depth ? grad_depth->at(x, y, 0) : 0.0;

        const double denom = buffers.alpha[px] + kDepthEps;
        double g_wz = 0.0, g_acc_a = ga_img;
        if (gd_img != 0.0) {
          g_wz = gd_img / denom;
          g_acc_a -= gd_img * buffers.depth[px] / denom;
        }
        if (gc.isZero(0.0) && g_wz == 0.0 && g_acc_a == 0.0 && !frag_grads) continue;

        ghat.assign(fc, 0.0);
        tprev.assign(fc, 1.0);
        double T = 1.0;
        for (uint32_t k = 0; k < fc; ++k) {
          const Fragment& f = buffers.fragments[fb + k];
          tprev[k] = T;
          T *= 1.0 - f.a;
          double g = gc.dot(f.rgb) + g_acc_a + g_wz * f.z;
          if (frag_grads && !frag_grads->d_omega.empty())
            g += frag_grads->d_omega[fb + k];
          ghat[k] = g;
        }

        // d(loss)/d(a_i) chains through omega_i = a_i * T_{i-1} and the
        // attenuation of every later omega via T.
        const Vec3 d = cam.pixel_ray(x, y);
        double suffix = 0.0;  // sum_{k > i} ghat_k * omega_k
        for (int k = static_cast<int>(fc) - 1; k >= 0; --k) {
          const Fragment& f = buffers.fragments[fb + k];
          double g_a = ghat[k] * tprev[k];
          const double one_minus = 1.0 - f.a;
          if (one_minus > 1e-12) g_a -= suffix / one_minus;
          suffix += ghat[k] * f.omega;

          const SurfelCam& sc = cams[f.surfel];
          SurfelGrad& sg = local[f.surfel];

          const Vec3 r = f.z * d - sc.pc;
          const double u = r.dot(sc.uc) / sc.s[0];
          const double v = r.dot(sc.vc) / sc.s[1];
          const double rho = u * u + v * v;
          const double G = std::exp(-0.5 * rho);
          const double alpha_p = deformed.alpha[f.surfel];
          if (alpha_p * G > 0.9999) g_a = 0.0;  // forward saturated a; flat region

          // a = alpha' * G, G = exp(-rho/2), rho = u^2 + v^2
          sg.g_alpha += g_a * G;
          const double g_G = g_a * alpha_p;
          const double g_rho = -0.5 * G * g_G;

          const double g_u = g_rho * 2.0 * u;
          const double g_v = g_rho * 2.0 * v;
          const double g_uhat = g_u / sc.s[0];
          const double g_vhat = g_v / sc.s[1];
          if (!sc.s_clamped[0]) sg.g_s[0] -= g_u * u / sc.s[0];
          if (!sc.s_clamped[1]) sg.g_s[1] -= g_v * v / sc.s[1];

          Vec3 g_r = g_uhat * sc.uc + g_vhat * sc.vc;
          sg.g_uc += g_uhat * r;
          sg.g_vc += g_vhat * r;

          // z = (nc . pc) / (nc . d); r = z d - pc
          double g_z = g_r.dot(d) + g_wz * f.omega;
          if (frag_grads && !frag_grads->d_z.empty()) g_z += frag_grads->d_z[fb + k];
          const double D = sc.nc.dot(d);
          const double g_num = g_z / D;
          const double g_den = -g_z * f.z / D;
          sg.g_nc += g_num * sc.pc + g_den * d;
          sg.g_pc += g_num * sc.nc - g_r;

          // color accumulates per surfel; the sh chain runs once at the end
          sg.g_rgb += f.omega * gc;

          if (frag_grads && !frag_grads->d_normal.empty()) {
            const Vec3 gn = frag_grads->d_normal[fb + k];
            if (!gn.isZero(0.0)) {
              const double sign = D > 0.0 ? -1.0 : 1.0;
              const Vec3& nu = sc.nc_unit;
              sg.g_nc += sign / sc.nc_norm * (gn - nu * nu.dot(gn));
            }
          }
        }
      }
    }
  });

  // Ordered reduction: tile order is fixed, so the result does not depend on
  // the number of threads.
  std::vector<SurfelGrad> acc(n);
  std::vector<std::vector<std::pair<uint32_t, const SurfelGrad*>>> sorted_tiles(n_tiles);
  parallel_chunks(n_tiles, [&](std::size_t t) {
    auto& v = sorted_tiles[t];
    v.reserve(tile_grads[t].size());
    for (const auto& kv : tile_grads[t]) v.emplace_back(kv.first, &kv.second);
    std::sort(v.begin(), v.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
  });
  for (const auto& v : sorted_tiles)
    for (const auto& [si, g] : v) acc[si].add(*g);

  DeformedGrads grads = DeformedGrads::zeros(n);
  const Mat3 Rt = cam.rotation.transpose();
  parallel_chunks(n, [&](std::size_t i) {
    const SurfelCam& sc = cams[i];
    if (!sc.visible) return;
    SurfelGrad g = acc[i];

    // nc = uc x vc
    g.g_uc += sc.vc.cross(g.g_nc);
    g.g_vc += g.g_nc.cross(sc.uc);

    // sh color with clamp masks; view direction feeds back into position
    Vec3 g_dir = Vec3::Zero();
    const int nb = sh_basis_count(opts.sh_degree_cap);
    for (int c = 0; c < 3; ++c) {
      if (sc.sh.clamped[c]) continue;
      const double gch = g.g_rgb[c];
      if (gch == 0.0) continue;
      for (int k = 0; k < nb; ++k) {
        grads.sh[i][static_cast<std::size_t>(k) * 3 + c] += gch * sc.sh.basis[k];
        g_dir += gch * scene.sh[i][static_cast<std::size_t>(k) * 3 + c] * sc.sh.dbasis[k];
      }
    }
    Vec3 g_p_world = Rt * g.g_pc;
    if (sc.dir_len > 1e-15)
      g_p_world += (g_dir - sc.dir * sc.dir.dot(g_dir)) / sc.dir_len;

    grads.p[i] = g_p_world;
    grads.tu[i] = Rt * g.g_uc;
    grads.tv[i] = Rt * g.g_vc;
    grads.s[i] = g.g_s;
    grads.alpha[i] = g.g_alpha;
  });
  return grads;
}

}  // namespace gsurf
