#pragma once

#include <array>
#include <optional>
#include <string>

#include "jgn/layers.hpp"

namespace jgn {

/// Stride-2 reduction block in the SRNet "type3" style.
///   blocks 1-3: avg_pool3x3/2(BN(conv2(relu(BN(conv1(x)))))) + BN(conv1x1/2(x))
///   block 4:    global_avg_pool(BN(conv2(relu(BN(conv1(x)))))), no shortcut
template <typename Real>
struct CnnBlock {
    CnnBlock(std::size_t c_in, std::size_t c_out, bool global);

    Tensor<Real> forward(const Tensor<Real>& x, bool training);
    void collect(const std::string& prefix, ParamList<Real>& out);
    bool has_shortcut() const { return shortcut.has_value(); }

    ConvBn<Real> conv1, conv2;
    std::optional<ConvBn<Real>> shortcut;
    bool global;
};

using BackboneWidths = std::array<std::size_t, 4>;
inline constexpr BackboneWidths kDefaultWidths{32, 64, 128, 256};

template <typename Real>
struct Backbone {
    explicit Backbone(std::size_t c_in = 30, BackboneWidths widths = kDefaultWidths);

    /// [N,C,h,w] -> [N,2] logits.
    Tensor<Real> logits(const Tensor<Real>& x, bool training);
    /// [N,C,h,w] -> [N,2] probabilities [p_cover, p_stego].
    Tensor<Real> classify(const Tensor<Real>& x, bool training);
    void collect(const std::string& prefix, ParamList<Real>& out);

    std::vector<CnnBlock<Real>> blocks;
    Tensor<Real> fc;  // [2, widths[3]], no bias
};

std::size_t backbone_parameter_count(std::size_t c_in, BackboneWidths widths);

extern template struct CnnBlock<float>;
extern template struct CnnBlock<double>;
extern template struct Backbone<float>;
extern template struct Backbone<double>;

}  // namespace jgn
