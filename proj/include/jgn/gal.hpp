#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "jgn/layers.hpp"

namespace jgn {

/// Complete graph over the 64 intra-block positions of an 8x8 DCT block.
/// Node k = 8*(y mod 8) + (x mod 8); each node carries one value per block,
/// so features have length B = (h/8)*(w/8).
struct BlockGraph {
    static constexpr std::size_t kNodes = 64;

    std::size_t feature_dim = 0;
    std::vector<std::pair<std::size_t, std::size_t>> edges;  // undirected, i < j

    static BlockGraph complete(std::size_t h, std::size_t w);
    std::size_t node_count() const { return kNodes; }
    std::size_t edge_count() const { return edges.size(); }
};

/// Source pixel of each [64,B] slot for an h x w map (row-major pixels).
std::vector<std::size_t> fold_index(std::size_t h, std::size_t w);

/// [N,1,h,w] (or [h,w]) -> [N,64,B] (or [64,B]).
template <typename Real>
Tensor<Real> fold_to_blocks(const Tensor<Real>& map);

/// Exact inverse of fold_to_blocks: [N,64,B] -> [N,1,h,w], [64,B] -> [h,w].
template <typename Real>
Tensor<Real> unfold_from_blocks(const Tensor<Real>& nodes, std::size_t h, std::size_t w);

/// Single-head graph attention over a complete graph with self-loops.
/// W is F x F (output dim equals input dim); a has length 2F.
template <typename Real>
struct GatLayer {
    Tensor<Real> W;
    Tensor<Real> a;

    explicit GatLayer(std::size_t features = 1);
};

template <typename Real>
struct GatOutput {
    Tensor<Real> out;        // [N,M,F]
    Tensor<Real> attention;  // [N,M,M], rows sum to 1
};

/// e_ij = leaky_relu(a . [W h_i || W h_j], 0.2); alpha_i = softmax_j(e_ij);
/// out_i = act(sum_j alpha_ij W h_j). nodes is [M,F] or [N,M,F].
template <typename Real>
GatOutput<Real> gat_layer(const Tensor<Real>& nodes, const GatLayer<Real>& layer, Activation act);

/// Channel mean of the residual stack -> fold -> GAT(elu) -> GAT(identity)
/// -> unfold -> replicate over the input's channel count.
template <typename Real>
class Gal {
public:
    Gal(std::size_t h, std::size_t w);

    Tensor<Real> forward(const Tensor<Real>& residuals, bool training);
    /// Attention matrices of the last forward pass, one per layer.
    const std::vector<Tensor<Real>>& last_attention() const { return attention_; }

    void collect(const std::string& prefix, ParamList<Real>& out);
    const BlockGraph& graph() const { return graph_; }

    GatLayer<Real> layer1, layer2;

private:
    std::size_t h_, w_;
    BlockGraph graph_;
    std::vector<Tensor<Real>> attention_;
};

extern template class Gal<float>;
extern template class Gal<double>;

}  // namespace jgn
