#include "jgn/network.hpp"

#include <cmath>
#include <stdexcept>

namespace jgn {

Ablation parse_ablation(const std::string& name) {
    if (name == "full") return Ablation::full;
    if (name == "no_sfe") return Ablation::no_sfe;
    if (name == "no_gal") return Ablation::no_gal;
    if (name == "neither") return Ablation::neither;
    throw std::invalid_argument("unknown ablation '" + name + "' (expected full, no_sfe, no_gal or neither)");
}

std::string to_string(Ablation a) {
    switch (a) {
    case Ablation::full: return "full";
    case Ablation::no_sfe: return "no_sfe";
    case Ablation::no_gal: return "no_gal";
    case Ablation::neither: return "neither";
    }
    return "?";
}

template <typename Real>
Network<Real>::Network(NetworkConfig cfg)
    : preprocess(cfg.preprocess), backbone(kResidualChannels, cfg.widths), cfg_(cfg) {
    if (cfg.height % 16 != 0 || cfg.width % 16 != 0 || cfg.height == 0 || cfg.width == 0)
        throw ShapeError("network input size must be a positive multiple of 16");
    const bool use_sfe = cfg.ablation == Ablation::full || cfg.ablation == Ablation::no_gal;
    const bool use_gal = cfg.ablation == Ablation::full || cfg.ablation == Ablation::no_sfe;
    if (use_sfe) {
        sfe1.emplace(kResidualChannels);
        sfe2.emplace(kResidualChannels);
    }
    if (use_gal) gal.emplace(cfg.height, cfg.width);

    preprocess.collect("pre", params_);
    if (sfe1) sfe1->collect("sfe1", params_);
    if (sfe2) sfe2->collect("sfe2", params_);
    if (gal) gal->collect("gal", params_);
    backbone.collect("backbone", params_);
}

template <typename Real>
Tensor<Real> Network<Real>::features(const Tensor<Real>& planes, bool training) {
    if (planes.rank() != 4 || planes.dim(1) != 1 || planes.dim(2) != cfg_.height || planes.dim(3) != cfg_.width)
        throw ShapeError("network expects [N,1," + std::to_string(cfg_.height) + "," + std::to_string(cfg_.width) +
                         "], got " + shape_str(planes.shape()));
    auto r = preprocess.forward(planes, training);
    auto fused = r;
    if (sfe1) fused = sfe2->forward(sfe1->forward(r, training), training);
    if (gal) fused = add(fused, gal->forward(r, training));
    return fused;
}

template <typename Real>
Tensor<Real> Network<Real>::logits(const Tensor<Real>& planes, bool training) {
    return backbone.logits(features(planes, training), training);
}

template <typename Real>
Tensor<Real> Network<Real>::probabilities(const Tensor<Real>& planes, bool training) {
    return softmax(logits(planes, training));
}

template <typename Real>
const NamedParam<Real>& Network<Real>::param(const std::string& name) const {
    for (const auto& p : params_)
        if (p.name == name) return p;
    throw std::out_of_range("no parameter named " + name);
}

template <typename Real>
void init_param_list(ParamList<Real>& params, Rng& rng) {
    const auto srm = srm_bank_init().weights();
    for (auto& p : params) {
        auto values = p.tensor.mutable_data();
        switch (p.init) {
        case InitRule::he_normal: {
            // fan_in: everything but the output axis (kh*kw*C_in for kernels,
            // input features for GAT maps)
            const double fan_in = static_cast<double>(p.tensor.numel() / p.tensor.dim(0));
            std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / fan_in));
            for (auto& v : values) v = static_cast<Real>(dist(rng));
            break;
        }
        case InitRule::normal_001: {
            std::normal_distribution<double> dist(0.0, 0.01);
            for (auto& v : values) v = static_cast<Real>(dist(rng));
            break;
        }
        case InitRule::srm:
            if (values.size() != srm.size()) throw ShapeError("SRM weight has the wrong size");
            for (std::size_t i = 0; i < values.size(); ++i) values[i] = static_cast<Real>(srm[i]);
            break;
        case InitRule::const_02:
            for (auto& v : values) v = Real(0.2);
            break;
        case InitRule::one:
            for (auto& v : values) v = Real(1);
            break;
        case InitRule::zero:
            for (auto& v : values) v = Real(0);
            break;
        }
    }
}

template <typename Real>
void init_params(Network<Real>& net, Rng& rng) {
    init_param_list(net.params(), rng);
}

template class Network<float>;
template class Network<double>;
template void init_param_list(ParamList<float>&, Rng&);
template void init_param_list(ParamList<double>&, Rng&);
template void init_params(Network<float>&, Rng&);
template void init_params(Network<double>&, Rng&);

}  // namespace jgn
