#pragma once

#include <random>
#include <vector>

#include "jgn/ops.hpp"

namespace testutil {

using TD = jgn::Tensor<double>;
using TF = jgn::Tensor<float>;

inline TD random_tensor(jgn::Shape shape, std::mt19937_64& rng, double lo = -1, double hi = 1,
                        bool requires_grad = false) {
    std::uniform_real_distribution<double> dist(lo, hi);
    std::vector<double> v(jgn::shape_numel(shape));
    for (auto& x : v) x = dist(rng);
    return TD(std::move(shape), std::move(v), requires_grad);
}

template <typename Real>
std::vector<Real> values(const jgn::Tensor<Real>& t) {
    return {t.data().begin(), t.data().end()};
}

}  // namespace testutil
