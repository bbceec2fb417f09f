#pragma once

#include <string>
#include <vector>

#include "jgn/ops.hpp"

namespace jgn {

/// How a named tensor takes part in optimization and initialization.
enum class ParamKind {
    weight,     // trainable, L2-regularized
    bias,       // trainable, never regularized
    bn_affine,  // trainable, never regularized
    buffer,     // checkpointed statistics, not trained
};

enum class InitRule { he_normal, srm, normal_001, const_02, one, zero };

template <typename Real>
struct NamedParam {
    std::string name;
    Tensor<Real> tensor;
    ParamKind kind;
    InitRule init;
    bool frozen = false;
};

template <typename Real>
using ParamList = std::vector<NamedParam<Real>>;

/// Trainable entries only (buffers excluded).
template <typename Real>
std::size_t parameter_count(const ParamList<Real>& params) {
    std::size_t n = 0;
    for (const auto& p : params)
        if (p.kind != ParamKind::buffer) n += p.tensor.numel();
    return n;
}

template <typename Real>
void collect_bn(const std::string& prefix, BnState<Real>& bn, ParamList<Real>& out) {
    out.push_back({prefix + ".gamma", bn.gamma, ParamKind::bn_affine, InitRule::one});
    out.push_back({prefix + ".beta", bn.beta, ParamKind::bn_affine, InitRule::zero});
    out.push_back({prefix + ".running_mean", bn.running_mean, ParamKind::buffer, InitRule::zero});
    out.push_back({prefix + ".running_var", bn.running_var, ParamKind::buffer, InitRule::one});
}

/// Convolution with bias followed by batch normalization.
template <typename Real>
struct ConvBn {
    Tensor<Real> weight;
    Tensor<Real> bias;
    BnState<Real> bn;
    std::size_t stride = 1;
    std::size_t pad = 0;

    ConvBn() = default;
    ConvBn(std::size_t c_in, std::size_t c_out, std::size_t k, std::size_t stride_ = 1)
        : weight(Tensor<Real>::zeros({c_out, c_in, k, k}, true)),
          bias(Tensor<Real>::zeros({c_out}, true)),
          bn(BnState<Real>::create(c_out)),
          stride(stride_),
          pad(k / 2) {}

    Tensor<Real> forward(const Tensor<Real>& x, bool training) {
        return batch_norm(conv2d(x, weight, bias, stride, pad), bn, training);
    }

    void collect(const std::string& prefix, ParamList<Real>& out) {
        out.push_back({prefix + ".weight", weight, ParamKind::weight, InitRule::he_normal});
        out.push_back({prefix + ".bias", bias, ParamKind::bias, InitRule::const_02});
        collect_bn(prefix + ".bn", bn, out);
    }
};

}  // namespace jgn
