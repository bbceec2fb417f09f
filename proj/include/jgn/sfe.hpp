#pragma once

#include <string>

#include "jgn/layers.hpp"

namespace jgn {

/// One stride-1, pooling-free residual layer:
///   out = relu(BN(conv2(relu(BN(conv1(x))))) + BN(shortcut1x1(x)))
template <typename Real>
struct Sfel {
    explicit Sfel(std::size_t channels = 30);

    Tensor<Real> forward(const Tensor<Real>& x, bool training);
    void collect(const std::string& prefix, ParamList<Real>& out);

    ConvBn<Real> conv1, conv2, shortcut;
};

/// Two SFELs in series; their outputs are concatenated and fused back to C
/// channels by a 1x1 conv + BN + ReLU.
template <typename Real>
struct Sfe {
    explicit Sfe(std::size_t channels = 30);

    Tensor<Real> forward(const Tensor<Real>& x, bool training);
    void collect(const std::string& prefix, ParamList<Real>& out);

    Sfel<Real> sfel_a, sfel_b;
    ConvBn<Real> fuse;
};

/// Closed-form trainable parameter counts.
std::size_t sfel_parameter_count(std::size_t channels);
std::size_t sfe_parameter_count(std::size_t channels);

extern template struct Sfel<float>;
extern template struct Sfel<double>;
extern template struct Sfe<float>;
extern template struct Sfe<double>;

}  // namespace jgn
