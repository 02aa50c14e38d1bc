#pragma once

#include "gsurf/types.hpp"

#include <array>

namespace gsurf {

// Real spherical harmonics, degrees 0..3 (16 basis functions). Surfel color
// uses 16 x 3 coefficients laid out basis-major: coeff[k * 3 + channel].
inline constexpr int kShBasisCount = 16;
inline constexpr int kShCoeffCount = 48;
inline constexpr double kShC0 = 0.28209479177387814;

using ShCoeffs = std::array<double, kShCoeffCount>;

int sh_basis_count(int degree_cap);  // degrees 0..3 -> 1, 4, 9, 16

// Basis values for a unit direction; entries beyond the cap are zeroed.
void sh_basis(const Vec3& dir, int degree_cap, std::array<double, kShBasisCount>& basis);

// Basis values plus per-entry gradients w.r.t. the (unnormalized) direction
// components. Direction must be unit length for the values to be the usual
// SH; gradients are of the polynomial forms themselves.
void sh_basis_grad(const Vec3& dir, int degree_cap,
                   std::array<double, kShBasisCount>& basis,
                   std::array<Vec3, kShBasisCount>& dbasis);

// Color = clamp(sum_k basis_k * coeff_k, 0, 1) per channel. No +0.5 offset.
Vec3 sh_eval(const ShCoeffs& coeffs, const Vec3& dir, int degree_cap);

// As sh_eval, also reporting per-channel clamp activity (gradient masks) and
// the basis used, so callers can chain gradients to coefficients and to the
// direction.
struct ShEval {
  Vec3 color = Vec3::Zero();
  std::array<bool, 3> clamped{};            // true where clamp was active
  std::array<double, kShBasisCount> basis{};
  std::array<Vec3, kShBasisCount> dbasis{};
};

ShEval sh_eval_full(const ShCoeffs& coeffs, const Vec3& dir, int degree_cap);

}  // namespace gsurf
