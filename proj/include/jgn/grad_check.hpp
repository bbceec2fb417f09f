#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <vector>

#include "jgn/ops.hpp"
#include "jgn/tensor.hpp"

namespace jgn {

/// |analytic - numeric| / max(1e-8, |analytic| + |numeric|)
inline double relative_error(double analytic, double numeric) {
    return std::abs(analytic - numeric) / std::max(1e-8, std::abs(analytic) + std::abs(numeric));
}

/// Central difference (f(x+h) - f(x-h)) / 2h of a scalar-valued closure with
/// respect to one coordinate of a leaf tensor. The coordinate is restored.
///
/// Both probes are evaluated on the linear pieces of relu/TLU that f has at
/// x (see PieceLock). A difference taken across a kink does not estimate the
/// derivative at x, and shrinking h until no kink is crossed drowns small
/// gradients in rounding error.
template <typename Real>
double numeric_partial(const std::function<Tensor<Real>()>& f, Tensor<Real>& target, std::size_t index, double h) {
    auto values = target.mutable_data();
    const Real saved = values[index];
    const auto before = PieceLock::mode();
    PieceLock::set(PieceLock::Mode::record);
    f();
    PieceLock::set(PieceLock::Mode::replay);
    values[index] = static_cast<Real>(saved + h);
    const double up = f().item();
    PieceLock::set(PieceLock::Mode::replay);
    values[index] = static_cast<Real>(saved - h);
    const double down = f().item();
    values[index] = saved;
    PieceLock::set(before);
    return (up - down) / (2.0 * h);
}

/// Max relative error between reverse-mode and central-difference gradients
/// of f at x. Checks every coordinate unless `coords` is given.
template <typename Real>
double grad_check(const std::function<Tensor<Real>(const Tensor<Real>&)>& f, Tensor<Real> x, double h,
                  std::vector<std::size_t> coords = {}) {
    x.set_requires_grad(true);
    x.zero_grad();
    f(x).backward();
    std::vector<Real> analytic = x.has_grad() ? std::vector<Real>(x.grad().begin(), x.grad().end())
                                              : std::vector<Real>(x.numel(), Real(0));
    if (coords.empty()) {
        coords.resize(x.numel());
        std::iota(coords.begin(), coords.end(), std::size_t{0});
    }
    x.set_requires_grad(false);
    std::function<Tensor<Real>()> closure = [&] { return f(x); };
    double worst = 0;
    for (auto i : coords) worst = std::max(worst, relative_error(analytic[i], numeric_partial(closure, x, i, h)));
    x.set_requires_grad(true);
    return worst;
}

}  // namespace jgn
