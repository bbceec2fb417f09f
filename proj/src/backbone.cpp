#include "jgn/backbone.hpp"

namespace jgn {

template <typename Real>
CnnBlock<Real>::CnnBlock(std::size_t c_in, std::size_t c_out, bool global_pool)
    : conv1(c_in, c_out, 3), conv2(c_out, c_out, 3), global(global_pool) {
    if (!global) shortcut.emplace(c_in, c_out, 1, 2);
}

template <typename Real>
Tensor<Real> CnnBlock<Real>::forward(const Tensor<Real>& x, bool training) {
    if (x.rank() != 4) throw ShapeError("CNN block expects [N,C,H,W], got " + shape_str(x.shape()));
    const std::size_t h = x.dim(2), w = x.dim(3);
    if (h < 2 || w < 2 || h % 2 != 0 || w % 2 != 0)
        throw ShapeError("CNN block needs even spatial dims >= 2, got " + shape_str(x.shape()));
    auto main = conv2.forward(relu(conv1.forward(x, training)), training);
    if (global) return global_avg_pool(main);
    return add(avg_pool2d(main, 3, 2, 1), shortcut->forward(x, training));
}

template <typename Real>
void CnnBlock<Real>::collect(const std::string& prefix, ParamList<Real>& out) {
    conv1.collect(prefix + ".conv1", out);
    conv2.collect(prefix + ".conv2", out);
    if (shortcut) shortcut->collect(prefix + ".shortcut", out);
}

template <typename Real>
Backbone<Real>::Backbone(std::size_t c_in, BackboneWidths widths)
    : fc(Tensor<Real>::zeros({2, widths[3]}, true)) {
    std::size_t c = c_in;
    for (std::size_t i = 0; i < 4; ++i) {
        blocks.emplace_back(c, widths[i], i == 3);
        c = widths[i];
    }
}

template <typename Real>
Tensor<Real> Backbone<Real>::logits(const Tensor<Real>& x, bool training) {
    if (x.rank() != 4 || x.dim(2) % 16 != 0 || x.dim(3) % 16 != 0)
        throw ShapeError("classifier input must be [N,C,h,w] with h,w divisible by 16, got " + shape_str(x.shape()));
    auto y = x;
    for (auto& b : blocks) y = b.forward(y, training);
    return dense(y, fc);
}

template <typename Real>
Tensor<Real> Backbone<Real>::classify(const Tensor<Real>& x, bool training) {
    return softmax(logits(x, training));
}

template <typename Real>
void Backbone<Real>::collect(const std::string& prefix, ParamList<Real>& out) {
    for (std::size_t i = 0; i < blocks.size(); ++i) blocks[i].collect(prefix + ".block" + std::to_string(i + 1), out);
    out.push_back({prefix + ".fc.W", fc, ParamKind::weight, InitRule::normal_001});
}

std::size_t backbone_parameter_count(std::size_t c_in, BackboneWidths widths) {
    auto conv_bn = [](std::size_t ci, std::size_t co, std::size_t k) { return co * ci * k * k + 3 * co; };
    std::size_t total = 0, c = c_in;
    for (std::size_t i = 0; i < 4; ++i) {
        total += conv_bn(c, widths[i], 3) + conv_bn(widths[i], widths[i], 3);
        if (i < 3) total += conv_bn(c, widths[i], 1);
        c = widths[i];
    }
    return total + 2 * widths[3];
}

template struct CnnBlock<float>;
template struct CnnBlock<double>;
template struct Backbone<float>;
template struct Backbone<double>;

}  // namespace jgn
