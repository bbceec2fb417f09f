#include "jgn/gal.hpp"

#include <stdexcept>

namespace jgn {
namespace {

void require_blocks(std::size_t h, std::size_t w) {
    if (h == 0 || w == 0 || h % 8 != 0 || w % 8 != 0)
        throw ShapeError("GAL needs dimensions that are multiples of 8, got " + std::to_string(h) + "x" +
                         std::to_string(w));
}

std::vector<std::size_t> batched(const std::vector<std::size_t>& index, std::size_t n, std::size_t stride) {
    std::vector<std::size_t> out;
    out.reserve(index.size() * n);
    for (std::size_t b = 0; b < n; ++b)
        for (auto i : index) out.push_back(b * stride + i);
    return out;
}

}  // namespace

BlockGraph BlockGraph::complete(std::size_t h, std::size_t w) {
    require_blocks(h, w);
    BlockGraph g;
    g.feature_dim = (h / 8) * (w / 8);
    for (std::size_t i = 0; i < kNodes; ++i)
        for (std::size_t j = i + 1; j < kNodes; ++j) g.edges.emplace_back(i, j);
    if (g.edges.size() != kNodes * (kNodes - 1) / 2) throw std::logic_error("block graph is not complete");
    return g;
}

std::vector<std::size_t> fold_index(std::size_t h, std::size_t w) {
    require_blocks(h, w);
    const std::size_t bw = w / 8, feats = (h / 8) * bw;
    std::vector<std::size_t> index(h * w);
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
            const std::size_t node = 8 * (y % 8) + (x % 8);
            const std::size_t feat = (y / 8) * bw + (x / 8);
            index[node * feats + feat] = y * w + x;
        }
    return index;
}

template <typename Real>
Tensor<Real> fold_to_blocks(const Tensor<Real>& map) {
    const auto& s = map.shape();
    if (s.size() == 2) {
        auto idx = fold_index(s[0], s[1]);
        return gather(map, {64, s[0] * s[1] / 64}, idx);
    }
    if (s.size() != 4 || s[1] != 1) throw ShapeError("fold_to_blocks: expected [h,w] or [N,1,h,w], got " + shape_str(s));
    const std::size_t hw = s[2] * s[3];
    auto idx = batched(fold_index(s[2], s[3]), s[0], hw);
    return gather(map, {s[0], 64, hw / 64}, idx);
}

template <typename Real>
Tensor<Real> unfold_from_blocks(const Tensor<Real>& nodes, std::size_t h, std::size_t w) {
    const auto& s = nodes.shape();
    const auto fwd = fold_index(h, w);
    std::vector<std::size_t> inv(fwd.size());
    for (std::size_t slot = 0; slot < fwd.size(); ++slot) inv[fwd[slot]] = slot;
    const std::size_t feats = h * w / 64;
    if (s.size() == 2) {
        if (s[0] != 64 || s[1] != feats)
            throw ShapeError("unfold_from_blocks: expected [64," + std::to_string(feats) + "], got " + shape_str(s));
        return gather(nodes, {h, w}, inv);
    }
    if (s.size() != 3 || s[1] != 64 || s[2] != feats)
        throw ShapeError("unfold_from_blocks: expected [N,64," + std::to_string(feats) + "], got " + shape_str(s));
    return gather(nodes, {s[0], 1, h, w}, batched(inv, s[0], h * w));
}

template <typename Real>
GatLayer<Real>::GatLayer(std::size_t features)
    : W(Tensor<Real>::zeros({features, features}, true)), a(Tensor<Real>::zeros({2 * features}, true)) {}

template <typename Real>
GatOutput<Real> gat_layer(const Tensor<Real>& nodes, const GatLayer<Real>& layer, Activation act) {
    const bool batched_input = nodes.rank() == 3;
    if (!batched_input && nodes.rank() != 2) throw ShapeError("gat_layer: expected [M,F] or [N,M,F]");
    const std::size_t m = nodes.dim(nodes.rank() - 2), f = nodes.dim(nodes.rank() - 1);
    if (layer.W.dim(0) != f || layer.W.dim(1) != f || layer.a.numel() != 2 * f)
        throw ShapeError("gat_layer: parameters do not match feature size " + std::to_string(f));
    auto x = batched_input ? nodes : reshape(nodes, {1, m, f});

    auto wh = linear(x, layer.W);                        // [N,M,F], row i is W h_i
    auto scores = linear(wh, reshape(layer.a, {2, f}));  // [N,M,2]: a_left.Wh_i, a_right.Wh_i
    auto logits = activation(pairwise_logits(scores), Activation::leaky_relu, Real(0.2));
    auto alpha = softmax(logits);
    auto out = activation(bmm(alpha, wh), act);
    if (!batched_input) return {reshape(out, {m, f}), reshape(alpha, {m, m})};
    return {out, alpha};
}

template <typename Real>
Gal<Real>::Gal(std::size_t h, std::size_t w)
    : layer1((h / 8) * (w / 8)), layer2((h / 8) * (w / 8)), h_(h), w_(w), graph_(BlockGraph::complete(h, w)) {
    if (graph_.node_count() != 64 || graph_.edge_count() != 2016)
        throw std::logic_error("block graph must have 64 nodes and 2016 edges");
}

template <typename Real>
Tensor<Real> Gal<Real>::forward(const Tensor<Real>& residuals, bool /*training*/) {
    if (residuals.rank() != 4 || residuals.dim(2) != h_ || residuals.dim(3) != w_)
        throw ShapeError("GAL built for " + std::to_string(h_) + "x" + std::to_string(w_) + " input, got " +
                         shape_str(residuals.shape()));
    auto nodes = fold_to_blocks(channel_mean(residuals));
    auto g1 = gat_layer(nodes, layer1, Activation::elu);
    auto g2 = gat_layer(g1.out, layer2, Activation::identity);
    attention_ = {g1.attention, g2.attention};
    return repeat_channels(unfold_from_blocks(g2.out, h_, w_), residuals.dim(1));
}

template <typename Real>
void Gal<Real>::collect(const std::string& prefix, ParamList<Real>& out) {
    out.push_back({prefix + ".layer1.W", layer1.W, ParamKind::weight, InitRule::he_normal});
    out.push_back({prefix + ".layer1.a", layer1.a, ParamKind::weight, InitRule::normal_001});
    out.push_back({prefix + ".layer2.W", layer2.W, ParamKind::weight, InitRule::he_normal});
    out.push_back({prefix + ".layer2.a", layer2.a, ParamKind::weight, InitRule::normal_001});
}

template Tensor<float> fold_to_blocks(const Tensor<float>&);
template Tensor<double> fold_to_blocks(const Tensor<double>&);
template Tensor<float> unfold_from_blocks(const Tensor<float>&, std::size_t, std::size_t);
template Tensor<double> unfold_from_blocks(const Tensor<double>&, std::size_t, std::size_t);
template struct GatLayer<float>;
template struct GatLayer<double>;
template GatOutput<float> gat_layer(const Tensor<float>&, const GatLayer<float>&, Activation);
template GatOutput<double> gat_layer(const Tensor<double>&, const GatLayer<double>&, Activation);
template class Gal<float>;
template class Gal<double>;

}  // namespace jgn
