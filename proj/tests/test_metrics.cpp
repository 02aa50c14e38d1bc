#include <gsurf/metrics.hpp>

#include <doctest.h>

#include "test_util.hpp"

#include <cmath>

using namespace gsurf;

TEST_CASE("mse and psnr basics") {
  Rng rng(601, 0);
  const Image a = gsurf::test::random_image(rng, 12, 9, 3);
  CHECK(mse(a, a) == 0.0);
  CHECK(psnr(a, a) == 99.0);

  Image half(8, 8, 1), zero(8, 8, 1);
  std::fill(half.data.begin(), half.data.end(), 0.5);
  std::fill(zero.data.begin(), zero.data.end(), 0.0);
  CHECK(mse(half, zero) == doctest::Approx(0.25).epsilon(1e-15));
  // 10 log10(1 / 0.25) = 20 log10 2
  CHECK(psnr(half, zero) == doctest::Approx(6.020599913279624).epsilon(1e-12));
  CHECK(psnr(zero, half) == psnr(half, zero));

  const Image b = gsurf::test::random_image(rng, 12, 9, 3);
  CHECK(mse(a, b) == mse(b, a));
  CHECK(mse(a, b) > 0.0);

  const Image wrong(12, 10, 3);
  CHECK_THROWS_AS(mse(a, wrong), Error);
}

TEST_CASE("ssim is one exactly on identical images") {
  Rng rng(602, 0);
  for (int size : {16, 11, 7}) {
    const Image a = gsurf::test::random_image(rng, size, size, 3);
    CHECK(ssim(a, a) == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("ssim of constant images has a closed form") {
  Image gray(16, 16, 1), black(16, 16, 1);
  std::fill(gray.data.begin(), gray.data.end(), 0.5);
  std::fill(black.data.begin(), black.data.end(), 0.0);
  // Zero variance: SSIM = C1 C2 / ((mu^2 + C1) C2) = C1 / (0.25 + C1).
  CHECK(ssim(gray, black) == doctest::Approx(1e-4 / 0.2501).epsilon(1e-13));
  CHECK(ssim(black, gray) == doctest::Approx(1e-4 / 0.2501).epsilon(1e-13));
}

TEST_CASE("ssim drops when one image is degraded and stays in (-1, 1]") {
  Rng rng(603, 0);
  const Image clean = gsurf::test::random_image(rng, 24, 24, 1);
  Image noisy = clean;
  for (double& v : noisy.data)
    v = std::min(1.0, std::max(0.0, v + 0.15 * rng.normal()));
  const double s = ssim(clean, noisy);
  CHECK(s < 0.999);
  CHECK(s > -1.0);
  CHECK(ssim(clean, clean) > s);

  // Anti-correlated pattern: clearly below 1, never below -1.
  Image pos(16, 16, 1), neg(16, 16, 1);
  for (int i = 0; i < 256; ++i) {
    const double v = (i % 2 == 0) ? 0.9 : 0.1;
    pos.data[i] = v;
    neg.data[i] = 1.0 - v;
  }
  const double anti = ssim(pos, neg);
  CHECK(anti < 0.2);
  CHECK(anti >= -1.0);
}

TEST_CASE("ssim gradient agrees with finite differences") {
  Rng rng(604, 0);
  Image x = gsurf::test::random_image(rng, 16, 16, 1);
  const Image t = gsurf::test::random_image(rng, 16, 16, 1);
  const SsimResult r = ssim_with_grad(x, t);
  CHECK(r.value == doctest::Approx(ssim(x, t)).epsilon(1e-14));
  REQUIRE(r.grad.width == 16);

  const double h = 1e-6;
  for (int probe = 0; probe < 12; ++probe) {
    const std::size_t i = rng.uniform_index(x.data.size());
    const double x0 = x.data[i];
    x.data[i] = x0 + h;
    const double fp = ssim(x, t);
    x.data[i] = x0 - h;
    const double fm = ssim(x, t);
    x.data[i] = x0;
    const double num = (fp - fm) / (2.0 * h);
    if (std::abs(num) < 1e-9) {
      CHECK(std::abs(r.grad.data[i] - num) < 1e-9);
    } else {
      CHECK(r.grad.data[i] == doctest::Approx(num).epsilon(1e-4));
    }
  }
}

TEST_CASE("ms-ssim is one on identical images at every size") {
  Rng rng(605, 0);
  for (int size : {64, 40, 16, 8, 5}) {
    const Image a = gsurf::test::random_image(rng, size, size, 3);
    CHECK(ms_ssim(a, a) == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("ms-ssim orders degradations like ssim") {
  Rng rng(606, 0);
  const Image clean = gsurf::test::random_image(rng, 64, 64, 1);
  Image mild = clean, harsh = clean;
  for (double& v : mild.data) v = std::min(1.0, std::max(0.0, v + 0.02 * rng.normal()));
  for (double& v : harsh.data) v = std::min(1.0, std::max(0.0, v + 0.3 * rng.normal()));
  const double m = ms_ssim(clean, mild);
  const double h = ms_ssim(clean, harsh);
  CHECK(m > h);
  CHECK(m < 1.0);
  CHECK(ms_ssim(clean, clean) > m);
}
