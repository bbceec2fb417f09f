#pragma once

#include <optional>
#include <string>

#include "jgn/backbone.hpp"
#include "jgn/gal.hpp"
#include "jgn/preprocess.hpp"
#include "jgn/sfe.hpp"

namespace jgn {

enum class Ablation { full, no_sfe, no_gal, neither };

Ablation parse_ablation(const std::string& name);
std::string to_string(Ablation a);

struct NetworkConfig {
    std::size_t height = 64;
    std::size_t width = 64;
    Ablation ablation = Ablation::full;
    PreprocessConfig preprocess;
    BackboneWidths widths = kDefaultWidths;
};

/// Preprocessing, two SFE modules in series plus the GAL branch, and the
/// classification backbone:
///   r = preprocess(x); fused = sfe2(sfe1(r)) + gal(r); logits = backbone(fused)
/// Ablations drop the SFE chain (fused = r + gal(r)), the GAL branch, or both.
template <typename Real>
class Network {
public:
    explicit Network(NetworkConfig cfg = {});
    Network(const Network&) = delete;
    Network& operator=(const Network&) = delete;

    /// [N,1,h,w] planes -> [N,2] logits.
    Tensor<Real> logits(const Tensor<Real>& planes, bool training);
    /// [N,1,h,w] planes -> [N,2] probabilities [p_cover, p_stego].
    Tensor<Real> probabilities(const Tensor<Real>& planes, bool training);
    /// Input to the backbone.
    Tensor<Real> features(const Tensor<Real>& planes, bool training);

    ParamList<Real>& params() { return params_; }
    const ParamList<Real>& params() const { return params_; }
    const NamedParam<Real>& param(const std::string& name) const;
    const NetworkConfig& config() const { return cfg_; }

    Preprocess<Real> preprocess;
    std::optional<Sfe<Real>> sfe1, sfe2;
    std::optional<Gal<Real>> gal;
    Backbone<Real> backbone;

private:
    NetworkConfig cfg_;
    ParamList<Real> params_;
};

/// Initialization: He-normal conv and GAT weights, SRM kernels for the
/// front end, N(0, 0.01) for the classifier and attention vectors, 0.2 for
/// conv biases, BN gamma=1 / beta=0.
template <typename Real>
void init_params(Network<Real>& net, Rng& rng);

/// The same rules applied entry by entry, following each entry's InitRule.
template <typename Real>
void init_param_list(ParamList<Real>& params, Rng& rng);

extern template class Network<float>;
extern template class Network<double>;

}  // namespace jgn
