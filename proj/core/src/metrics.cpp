#include "gsurf/metrics.hpp"

#include "gsurf/types.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace gsurf {

double mse(const Image& a, const Image& b) {
  check(a.same_shape(b), "mse: image shapes differ");
  check(!a.data.empty(), "mse: empty image");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const double d = a.data[i] - b.data[i];
    acc += d * d;
  }
  return acc / static_cast<double>(a.data.size());
}

double psnr(const Image& a, const Image& b) {
  const double m = mse(a, b);
  if (m <= 0.0) return 99.0;
  return std::min(99.0, 10.0 * std::log10(1.0 / m));
}

namespace {

std::vector<double> gauss_kernel(int window, double sigma) {
  std::vector<double> k(window);
  const int r = window / 2;
  double sum = 0.0;
  for (int i = 0; i < window; ++i) {
    const double x = i - r;
    k[i] = std::exp(-0.5 * x * x / (sigma * sigma));
    sum += k[i];
  }
  for (double& v : k) v /= sum;
  return k;
}

// Separable correlation with zero padding. Callers restrict reads to pixels
// whose window never leaves the image, so padding never leaks in.
void gauss_filter(const std::vector<double>& src, int w, int h,
                  const std::vector<double>& k, std::vector<double>& tmp,
                  std::vector<double>& dst) {
  const int r = static_cast<int>(k.size()) / 2;
  tmp.assign(src.size(), 0.0);
  dst.assign(src.size(), 0.0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -r; i <= r; ++i) {
        const int xx = x + i;
        if (xx < 0 || xx >= w) continue;
        acc += k[i + r] * src[static_cast<std::size_t>(y) * w + xx];
      }
      tmp[static_cast<std::size_t>(y) * w + x] = acc;
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -r; i <= r; ++i) {
        const int yy = y + i;
        if (yy < 0 || yy >= h) continue;
        acc += k[i + r] * tmp[static_cast<std::size_t>(yy) * w + x];
      }
      dst[static_cast<std::size_t>(y) * w + x] = acc;
    }
  }
}

int effective_window(int requested, int w, int h) {
  int win = std::min(requested, std::min(w, h));
  if (win % 2 == 0) --win;
  return std::max(win, 1);
}

struct SsimTerms {
  double mean_ssim = 0.0;  // mean of l*s over valid windows
  double mean_cs = 0.0;    // mean of s alone (multi-scale interior term)
};

// Single channel plane. When grad != nullptr it receives d(mean ssim)/d(x)
// scaled by `grad_scale`.
SsimTerms ssim_plane(const std::vector<double>& x, const std::vector<double>& y,
                     int w, int h, const SsimOptions& opts, int window,
                     std::vector<double>* grad, double grad_scale) {
  const std::vector<double> k = gauss_kernel(window, opts.sigma);
  const int r = window / 2;
  const std::size_t n = x.size();

  std::vector<double> tmp, mu_x, mu_y, sxx, syy, sxy;
  std::vector<double> xx(n), yy(n), xy(n);
  for (std::size_t i = 0; i < n; ++i) {
    xx[i] = x[i] * x[i];
    yy[i] = y[i] * y[i];
    xy[i] = x[i] * y[i];
  }
  gauss_filter(x, w, h, k, tmp, mu_x);
  gauss_filter(y, w, h, k, tmp, mu_y);
  gauss_filter(xx, w, h, k, tmp, sxx);
  gauss_filter(yy, w, h, k, tmp, syy);
  gauss_filter(xy, w, h, k, tmp, sxy);

  // Adjoint seeds on valid centers: d(ssim_p)/d(mu_x), d(.)/d(Sxx), d(.)/d(Sxy).
  std::vector<double> g_mu, g_sxx, g_sxy;
  if (grad) {
    g_mu.assign(n, 0.0);
    g_sxx.assign(n, 0.0);
    g_sxy.assign(n, 0.0);
  }

  SsimTerms out;
  double acc_ssim = 0.0, acc_cs = 0.0;
  std::size_t count = 0;
  for (int py = r; py < h - r; ++py) {
    for (int px = r; px < w - r; ++px) {
      const std::size_t p = static_cast<std::size_t>(py) * w + px;
      const double mx = mu_x[p], my = mu_y[p];
      const double vx = sxx[p] - mx * mx;
      const double vy = syy[p] - my * my;
      const double cxy = sxy[p] - mx * my;
      const double a1 = 2.0 * mx * my + opts.c1;
      const double b1 = mx * mx + my * my + opts.c1;
      const double a2 = 2.0 * cxy + opts.c2;
      const double b2 = vx + vy + opts.c2;
      const double l = a1 / b1;
      const double s = a2 / b2;
      acc_ssim += l * s;
      acc_cs += s;
      ++count;
      if (grad) {
        const double dl_dmx = (2.0 * my - 2.0 * mx * l) / b1;
        const double ds_dsxx = -s / b2;      // via vx
        const double ds_dsxy = 2.0 / b2;
        // mu_x also shifts the central moments: d(vx)/d(mx) = -2 mx,
        // d(cxy)/d(mx) = -my.
        const double ds_dmx = ds_dsxx * (-2.0 * mx) + ds_dsxy * (-my);
        g_mu[p] = s * dl_dmx + l * ds_dmx;
        g_sxx[p] = l * ds_dsxx;
        g_sxy[p] = l * ds_dsxy;
      }
    }
  }
  check(count > 0, "ssim: image smaller than the window");
  const double inv = 1.0 / static_cast<double>(count);
  out.mean_ssim = acc_ssim * inv;
  out.mean_cs = acc_cs * inv;

  if (grad) {
    // Adjoint of the window gathers: symmetric kernel, so the scatter is the
    // same separable filter applied to the seed fields.
    std::vector<double> c_mu, c_sxx, c_sxy;
    gauss_filter(g_mu, w, h, k, tmp, c_mu);
    gauss_filter(g_sxx, w, h, k, tmp, c_sxx);
    gauss_filter(g_sxy, w, h, k, tmp, c_sxy);
    const double scale = inv * grad_scale;
    for (std::size_t q = 0; q < n; ++q)
      (*grad)[q] += scale * (c_mu[q] + 2.0 * x[q] * c_sxx[q] + y[q] * c_sxy[q]);
  }
  return out;
}

std::vector<double> channel_plane(const Image& im, int c) {
  std::vector<double> p(static_cast<std::size_t>(im.width) * im.height);
  for (int y = 0; y < im.height; ++y)
    for (int x = 0; x < im.width; ++x)
      p[static_cast<std::size_t>(y) * im.width + x] = im.at(x, y, c);
  return p;
}

Image downsample2(const Image& im) {
  const int w = im.width / 2, h = im.height / 2;
  Image out(w, h, im.channels);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < im.channels; ++c)
        out.at(x, y, c) = 0.25 * (im.at(2 * x, 2 * y, c) + im.at(2 * x + 1, 2 * y, c) +
                                  im.at(2 * x, 2 * y + 1, c) + im.at(2 * x + 1, 2 * y + 1, c));
  return out;
}

}  // namespace

double ssim(const Image& a, const Image& b, const SsimOptions& opts) {
  check(a.same_shape(b), "ssim: image shapes differ");
  const int window = effective_window(opts.window, a.width, a.height);
  double acc = 0.0;
  for (int c = 0; c < a.channels; ++c) {
    const std::vector<double> pa = channel_plane(a, c);
    const std::vector<double> pb = channel_plane(b, c);
    acc += ssim_plane(pa, pb, a.width, a.height, opts, window, nullptr, 0.0).mean_ssim;
  }
  return acc / a.channels;
}

SsimResult ssim_with_grad(const Image& a, const Image& b, const SsimOptions& opts) {
  check(a.same_shape(b), "ssim: image shapes differ");
  const int window = effective_window(opts.window, a.width, a.height);
  SsimResult res;
  res.grad = Image(a.width, a.height, a.channels);
  const double per_channel = 1.0 / a.channels;
  double acc = 0.0;
  for (int c = 0; c < a.channels; ++c) {
    const std::vector<double> pa = channel_plane(a, c);
    const std::vector<double> pb = channel_plane(b, c);
    std::vector<double> g(pa.size(), 0.0);
    acc += ssim_plane(pa, pb, a.width, a.height, opts, window, &g, per_channel).mean_ssim;
    for (int y = 0; y < a.height; ++y)
      for (int x = 0; x < a.width; ++x)
        res.grad.at(x, y, c) = g[static_cast<std::size_t>(y) * a.width + x];
  }
  res.value = acc * per_channel;
  return res;
}

double ms_ssim(const Image& a, const Image& b) {
  check(a.same_shape(b), "ms_ssim: image shapes differ");
  static const double kWeights[5] = {0.0448, 0.2856, 0.3001, 0.2363, 0.1333};
  const SsimOptions opts;

  // Number of scales the image can support with the full 11-tap window.
  int scales = 1;
  {
    int m = std::min(a.width, a.height);
    while (scales < 5 && m / 2 >= opts.window) {
      m /= 2;
      ++scales;
    }
  }
  double wsum = 0.0;
  for (int j = 0; j < scales; ++j) wsum += kWeights[j];

  Image ca = a, cb = b;
  double value = 1.0;
  for (int j = 0; j < scales; ++j) {
    const int window = effective_window(opts.window, ca.width, ca.height);
    double term = 0.0;
    for (int c = 0; c < ca.channels; ++c) {
      const std::vector<double> pa = channel_plane(ca, c);
      const std::vector<double> pb = channel_plane(cb, c);
      const SsimTerms t =
          ssim_plane(pa, pb, ca.width, ca.height, opts, window, nullptr, 0.0);
      term += (j == scales - 1) ? t.mean_ssim : t.mean_cs;
    }
    term = std::max(term / ca.channels, 0.0);
    value *= std::pow(term, kWeights[j] / wsum);
    if (j + 1 < scales) {
      ca = downsample2(ca);
      cb = downsample2(cb);
    }
  }
  return value;
}

}  // namespace gsurf
