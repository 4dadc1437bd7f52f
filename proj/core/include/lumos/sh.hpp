// Copyright Contributors to the Lumos Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>

#include <lumos/errors.hpp>

namespace lumos {

inline constexpr int kMaxShDegree = 3;
inline constexpr int kMaxShCoeffs = 16;
inline constexpr double kSh0 = 0.28209479177387814;

/// Real SH basis values for a unit direction, layout matching the splat
/// f_dc/f_rest convention. basis must hold (degree+1)^2 entries.
template <typename T>
void sh_basis(int degree, const std::array<T, 3>& dir, T* basis);

/// Basis values plus d(basis_k)/d(dir) packed as dbasis[k*3 + axis].
template <typename T>
void sh_basis_grad(int degree, const std::array<T, 3>& dir, T* basis, T* dbasis);

/// rgb_c = max(sum_k basis_k * coeffs[c*K + k] + 0.5, 0).
/// coeffs is channel-major (3 x K), dir must be unit length.
/// Throws InvalidArgument for degree outside [0, 3].
template <typename T>
std::array<T, 3> eval_sh(int degree, const T* coeffs, const std::array<T, 3>& dir);

} // namespace lumos
