#include "gsurf/sh.hpp"

#include <algorithm>

namespace gsurf {

namespace {

constexpr double kC1 = 0.4886025119029199;
constexpr double kC2[5] = {1.0925484305920792, -1.0925484305920792, 0.31539156525252005,
                           -1.0925484305920792, 0.5462742152960396};
constexpr double kC3[7] = {-0.5900435899266435, 2.890611442640554, -0.4570457994644658,
                           0.3731763325901154, -0.4570457994644658, 1.445305721320277,
                           -0.5900435899266435};

}  // namespace

int sh_basis_count(int degree_cap) {
  check(degree_cap >= 0 && degree_cap <= 3, "sh degree cap must be in [0, 3]");
  return (degree_cap + 1) * (degree_cap + 1);
}

void sh_basis(const Vec3& dir, int degree_cap, std::array<double, kShBasisCount>& basis) {
  basis.fill(0.0);
  const double x = dir.x(), y = dir.y(), z = dir.z();
  basis[0] = kShC0;
  if (degree_cap < 1) return;
  basis[1] = -kC1 * y;
  basis[2] = kC1 * z;
  basis[3] = -kC1 * x;
  if (degree_cap < 2) return;
  const double xx = x * x, yy = y * y, zz = z * z;
  basis[4] = kC2[0] * x * y;
  basis[5] = kC2[1] * y * z;
  basis[6] = kC2[2] * (2.0 * zz - xx - yy);
  basis[7] = kC2[3] * x * z;
  basis[8] = kC2[4] * (xx - yy);
  if (degree_cap < 3) return;
  basis[9] = kC3[0] * y * (3.0 * xx - yy);
  basis[10] = kC3[1] * x * y * z;
  basis[11] = kC3[2] * y * (4.0 * zz - xx - yy);
  basis[12] = kC3[3] * z * (2.0 * zz - 3.0 * xx - 3.0 * yy);
  basis[13] = kC3[4] * x * (4.0 * zz - xx - yy);
  basis[14] = kC3[5] * z * (xx - yy);
  basis[15] = kC3[6] * x * (xx - 3.0 * yy);
}

void sh_basis_grad(const Vec3& dir, int degree_cap,
                   std::array<double, kShBasisCount>& basis,
                   std::array<Vec3, kShBasisCount>& dbasis) {
  sh_basis(dir, degree_cap, basis);
  dbasis.fill(Vec3::Zero());
  const double x = dir.x(), y = dir.y(), z = dir.z();
  if (degree_cap < 1) return;
  dbasis[1] = Vec3(0.0, -kC1, 0.0);
  dbasis[2] = Vec3(0.0, 0.0, kC1);
  dbasis[3] = Vec3(-kC1, 0.0, 0.0);
  if (degree_cap < 2) return;
  const double xx = x * x, yy = y * y, zz = z * z;
  dbasis[4] = kC2[0] * Vec3(y, x, 0.0);
  dbasis[5] = kC2[1] * Vec3(0.0, z, y);
  dbasis[6] = kC2[2] * Vec3(-2.0 * x, -2.0 * y, 4.0 * z);
  dbasis[7] = kC2[3] * Vec3(z, 0.0, x);
  dbasis[8] = kC2[4] * Vec3(2.0 * x, -2.0 * y, 0.0);
  if (degree_cap < 3) return;
  dbasis[9] = kC3[0] * Vec3(6.0 * x * y, 3.0 * xx - 3.0 * yy, 0.0);
  dbasis[10] = kC3[1] * Vec3(y * z, x * z, x * y);
  dbasis[11] = kC3[2] * Vec3(-2.0 * x * y, 4.0 * zz - xx - 3.0 * yy, 8.0 * y * z);
  dbasis[12] = kC3[3] * Vec3(-6.0 * x * z, -6.0 * y * z, 6.0 * zz - 3.0 * xx - 3.0 * yy);
  dbasis[13] = kC3[4] * Vec3(4.0 * zz - 3.0 * xx - yy, -2.0 * x * y, 8.0 * x * z);
  dbasis[14] = kC3[5] * Vec3(2.0 * x * z, -2.0 * y * z, xx - yy);
  dbasis[15] = kC3[6] * Vec3(3.0 * xx - 3.0 * yy, -6.0 * x * y, 0.0);
}

Vec3 sh_eval(const ShCoeffs& coeffs, const Vec3& dir, int degree_cap) {
  std::array<double, kShBasisCount> basis;
  sh_basis(dir, degree_cap, basis);
  const int n = sh_basis_count(degree_cap);
  Vec3 color = Vec3::Zero();
  for (int k = 0; k < n; ++k) {
    for (int c = 0; c < 3; ++c) color[c] += basis[k] * coeffs[k * 3 + c];
  }
  for (int c = 0; c < 3; ++c) color[c] = std::clamp(color[c], 0.0, 1.0);
  return color;
}

ShEval sh_eval_full(const ShCoeffs& coeffs, const Vec3& dir, int degree_cap) {
  ShEval out;
  sh_basis_grad(dir, degree_cap, out.basis, out.dbasis);
  const int n = sh_basis_count(degree_cap);
  for (int k = 0; k < n; ++k) {
    for (int c = 0; c < 3; ++c) out.color[c] += out.basis[k] * coeffs[k * 3 + c];
  }
  for (int c = 0; c < 3; ++c) {
    out.clamped[c] = out.color[c] < 0.0 || out.color[c] > 1.0;
    out.color[c] = std::clamp(out.color[c], 0.0, 1.0);
  }
  return out;
}

}  // namespace gsurf
