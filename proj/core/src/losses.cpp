// Copyright Contributors to the Lumos Project
// SPDX-License-Identifier: Apache-2.0

#include <lumos/losses.hpp>

#include <cmath>

namespace lumos {

namespace {

template <typename T>
std::size_t checked_total_elements(const std::vector<Image<T>>& a,
                                   const std::vector<Image<T>>& b) {
    if (a.size() != b.size() || a.empty()) {
        throw InvalidArgument("image stacks must be non-empty and view-count matched");
    }
    std::size_t n = 0;
    for (std::size_t s = 0; s < a.size(); ++s) {
        if (!a[s].same_shape(b[s])) {
            throw InvalidArgument("image stack shape mismatch at view " + std::to_string(s));
        }
        n += a[s].size();
    }
    if (n == 0) {
        throw InvalidArgument("image stacks are empty");
    }
    return n;
}

} // namespace

bool LossReport::consistent(const LumosWeights& lw, const ObjectiveWeights& ow,
                            double tol) const {
    const double lumos_expect =
        lw.lambda_c * content + lw.lambda_i * image + lw.lambda_v * voxel;
    const double total_expect = rec + ow.omega_distill * distill + ow.omega_lumos * lumos;
    return std::abs(lumos - lumos_expect) <= tol && std::abs(total - total_expect) <= tol;
}

bool LossReport::all_finite() const {
    for (double v : {rec, distill, content, image, voxel, lumos, total}) {
        if (!std::isfinite(v)) {
            return false;
        }
    }
    return true;
}

template <typename T>
StackLossResult<T> image_loss(const std::vector<Image<T>>& restored,
                              const std::vector<Image<T>>& reference, bool with_grad) {
    const std::size_t n = checked_total_elements(restored, reference);
    StackLossResult<T> out;
    const double inv_n = 1.0 / static_cast<double>(n);
    if (with_grad) {
        out.grad.reserve(restored.size());
        for (const Image<T>& img : restored) {
            out.grad.emplace_back(img.height, img.width, img.channels);
        }
    }
    double acc = 0.0;
    for (std::size_t s = 0; s < restored.size(); ++s) {
        const Image<T>& r = restored[s];
        const Image<T>& c = reference[s];
        for (std::size_t i = 0; i < r.data.size(); ++i) {
            const double d = static_cast<double>(r.data[i]) - static_cast<double>(c.data[i]);
            acc += std::abs(d);
            if (with_grad && d != 0.0) {
                out.grad[s].data[i] = static_cast<T>((d > 0.0 ? 1.0 : -1.0) * inv_n);
            }
        }
    }
    out.value = acc * inv_n;
    return out;
}

template <typename T>
StackLossResult<T> rec_loss(const std::vector<Image<T>>& rendered,
                            const std::vector<Image<T>>& target, bool l1, bool with_grad) {
    if (l1) {
        return image_loss(rendered, target, with_grad);
    }
    const std::size_t n = checked_total_elements(rendered, target);
    StackLossResult<T> out;
    const double inv_n = 1.0 / static_cast<double>(n);
    if (with_grad) {
        out.grad.reserve(rendered.size());
        for (const Image<T>& img : rendered) {
            out.grad.emplace_back(img.height, img.width, img.channels);
        }
    }
    double acc = 0.0;
    for (std::size_t s = 0; s < rendered.size(); ++s) {
        const Image<T>& r = rendered[s];
        const Image<T>& t = target[s];
        for (std::size_t i = 0; i < r.data.size(); ++i) {
            const double d = static_cast<double>(r.data[i]) - static_cast<double>(t.data[i]);
            acc += d * d;
            if (with_grad) {
                out.grad[s].data[i] = static_cast<T>(2.0 * d * inv_n);
            }
        }
    }
    out.value = acc * inv_n;
    return out;
}

double lumos_loss(double content, double image, double voxel, const LumosWeights& w) {
    if (w.lambda_c < 0.0 || w.lambda_i < 0.0 || w.lambda_v < 0.0) {
        throw InvalidArgument("lumos weights must be non-negative");
    }
    return w.lambda_c * content + w.lambda_i * image + w.lambda_v * voxel;
}

double total_loss(double rec, double distill, double lumos, const ObjectiveWeights& w) {
    if (w.omega_distill < 0.0 || w.omega_lumos < 0.0) {
        throw InvalidArgument("objective weights must be non-negative");
    }
    return rec + w.omega_distill * distill + w.omega_lumos * lumos;
}

template StackLossResult<float> image_loss(const std::vector<Image<float>>&,
                                           const std::vector<Image<float>>&, bool);
template StackLossResult<double> image_loss(const std::vector<Image<double>>&,
                                            const std::vector<Image<double>>&, bool);
template StackLossResult<float> rec_loss(const std::vector<Image<float>>&,
                                         const std::vector<Image<float>>&, bool, bool);
template StackLossResult<double> rec_loss(const std::vector<Image<double>>&,
                                          const std::vector<Image<double>>&, bool, bool);

} // namespace lumos
