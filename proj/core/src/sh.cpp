// Copyright Contributors to the Lumos Project
// SPDX-License-Identifier: Apache-2.0

#include <lumos/sh.hpp>

#include <algorithm>

namespace lumos {

namespace {

constexpr double kC1 = 0.4886025119029199;
constexpr double kC2[5] = {1.0925484305920792, -1.0925484305920792, 0.31539156525252005,
                           -1.0925484305920792, 0.5462742152960396};
constexpr double kC3[7] = {-0.5900435899266435, 2.890611442640554,  -0.4570457994644658,
                           0.3731763325901154,  -0.4570457994644658, 1.445305721320277,
                           -0.5900435899266435};

void check_degree(int degree) {
    if (degree < 0 || degree > kMaxShDegree) {
        throw InvalidArgument("sh degree must be in [0, 3]");
    }
}

} // namespace

template <typename T>
void sh_basis(int degree, const std::array<T, 3>& dir, T* basis) {
    check_degree(degree);
    const T x = dir[0], y = dir[1], z = dir[2];
    basis[0] = T(kSh0);
    if (degree < 1) {
        return;
    }
    basis[1] = T(-kC1) * y;
    basis[2] = T(kC1) * z;
    basis[3] = T(-kC1) * x;
    if (degree < 2) {
        return;
    }
    const T xx = x * x, yy = y * y, zz = z * z;
    const T xy = x * y, yz = y * z, xz = x * z;
    basis[4] = T(kC2[0]) * xy;
    basis[5] = T(kC2[1]) * yz;
    basis[6] = T(kC2[2]) * (T(2) * zz - xx - yy);
    basis[7] = T(kC2[3]) * xz;
    basis[8] = T(kC2[4]) * (xx - yy);
    if (degree < 3) {
        return;
    }
    basis[9] = T(kC3[0]) * y * (T(3) * xx - yy);
    basis[10] = T(kC3[1]) * xy * z;
    basis[11] = T(kC3[2]) * y * (T(4) * zz - xx - yy);
    basis[12] = T(kC3[3]) * z * (T(2) * zz - T(3) * xx - T(3) * yy);
    basis[13] = T(kC3[4]) * x * (T(4) * zz - xx - yy);
    basis[14] = T(kC3[5]) * z * (xx - yy);
    basis[15] = T(kC3[6]) * x * (xx - T(3) * yy);
}

template <typename T>
void sh_basis_grad(int degree, const std::array<T, 3>& dir, T* basis, T* dbasis) {
    check_degree(degree);
    sh_basis(degree, dir, basis);
    const int k = (degree + 1) * (degree + 1);
    std::fill(dbasis, dbasis + 3 * k, T(0));
    if (degree < 1) {
        return;
    }
    const T x = dir[0], y = dir[1], z = dir[2];
    dbasis[1 * 3 + 1] = T(-kC1);
    dbasis[2 * 3 + 2] = T(kC1);
    dbasis[3 * 3 + 0] = T(-kC1);
    if (degree < 2) {
        return;
    }
    const T xx = x * x, yy = y * y, zz = z * z;
    dbasis[4 * 3 + 0] = T(kC2[0]) * y;
    dbasis[4 * 3 + 1] = T(kC2[0]) * x;
    dbasis[5 * 3 + 1] = T(kC2[1]) * z;
    dbasis[5 * 3 + 2] = T(kC2[1]) * y;
    dbasis[6 * 3 + 0] = T(kC2[2]) * T(-2) * x;
    dbasis[6 * 3 + 1] = T(kC2[2]) * T(-2) * y;
    dbasis[6 * 3 + 2] = T(kC2[2]) * T(4) * z;
    dbasis[7 * 3 + 0] = T(kC2[3]) * z;
    dbasis[7 * 3 + 2] = T(kC2[3]) * x;
    dbasis[8 * 3 + 0] = T(kC2[4]) * T(2) * x;
    dbasis[8 * 3 + 1] = T(kC2[4]) * T(-2) * y;
    if (degree < 3) {
        return;
    }
    dbasis[9 * 3 + 0] = T(kC3[0]) * T(6) * x * y;
    dbasis[9 * 3 + 1] = T(kC3[0]) * (T(3) * xx - T(3) * yy);
    dbasis[10 * 3 + 0] = T(kC3[1]) * y * z;
    dbasis[10 * 3 + 1] = T(kC3[1]) * x * z;
    dbasis[10 * 3 + 2] = T(kC3[1]) * x * y;
    dbasis[11 * 3 + 0] = T(kC3[2]) * T(-2) * x * y;
    dbasis[11 * 3 + 1] = T(kC3[2]) * (T(4) * zz - xx - T(3) * yy);
    dbasis[11 * 3 + 2] = T(kC3[2]) * T(8) * y * z;
    dbasis[12 * 3 + 0] = T(kC3[3]) * T(-6) * x * z;
    dbasis[12 * 3 + 1] = T(kC3[3]) * T(-6) * y * z;
    dbasis[12 * 3 + 2] = T(kC3[3]) * (T(6) * zz - T(3) * xx - T(3) * yy);
    dbasis[13 * 3 + 0] = T(kC3[4]) * (T(4) * zz - T(3) * xx - yy);
    dbasis[13 * 3 + 1] = T(kC3[4]) * T(-2) * x * y;
    dbasis[13 * 3 + 2] = T(kC3[4]) * T(8) * x * z;
    dbasis[14 * 3 + 0] = T(kC3[5]) * T(2) * x * z;
    dbasis[14 * 3 + 1] = T(kC3[5]) * T(-2) * y * z;
    dbasis[14 * 3 + 2] = T(kC3[5]) * (xx - yy);
    dbasis[15 * 3 + 0] = T(kC3[6]) * (T(3) * xx - T(3) * yy);
    dbasis[15 * 3 + 1] = T(kC3[6]) * T(-6) * x * y;
}

template <typename T>
std::array<T, 3> eval_sh(int degree, const T* coeffs, const std::array<T, 3>& dir) {
    check_degree(degree);
    T basis[kMaxShCoeffs];
    sh_basis(degree, dir, basis);
    const int k = (degree + 1) * (degree + 1);
    std::array<T, 3> rgb;
    for (int c = 0; c < 3; ++c) {
        T acc = T(0);
        for (int i = 0; i < k; ++i) {
            acc += basis[i] * coeffs[c * k + i];
        }
        rgb[c] = std::max(acc + T(0.5), T(0));
    }
    return rgb;
}

template void sh_basis(int, const std::array<float, 3>&, float*);
template void sh_basis(int, const std::array<double, 3>&, double*);
template void sh_basis_grad(int, const std::array<float, 3>&, float*, float*);
template void sh_basis_grad(int, const std::array<double, 3>&, double*, double*);
template std::array<float, 3> eval_sh(int, const float*, const std::array<float, 3>&);
template std::array<double, 3> eval_sh(int, const double*, const std::array<double, 3>&);

} // namespace lumos
