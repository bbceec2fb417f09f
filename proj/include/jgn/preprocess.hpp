#pragma once

#include <array>
#include <string>
#include <vector>

#include "jgn/jpeg.hpp"
#include "jgn/layers.hpp"

namespace jgn {

inline constexpr std::size_t kResidualChannels = 30;

/// The 30 SRM high-pass kernels, each a 5x5 integer stencil with a divisor
/// equal to its max absolute coefficient. Integer numerators keep the
/// zero-sum property exact.
struct SrmBank {
    std::array<std::array<int, 25>, kResidualChannels> numerators{};
    std::array<int, kResidualChannels> divisors{};
    std::array<std::string, kResidualChannels> names;
    bool trainable = true;

    std::array<double, 25> kernel(std::size_t k) const;
    /// [30,1,5,5] row-major.
    std::vector<double> weights() const;
};

SrmBank srm_bank_init();

struct PreprocessConfig {
    double threshold = 3.0;  // TLU bound T
    bool freeze_srm = false;
};

/// Plain-double SRM filtering (stride 1, pad 2, constant bias) of one plane;
/// returns [30][h*w].
std::vector<std::vector<double>> extract_residuals(const LuminancePlane& plane, const SrmBank& bank,
                                                   double bias = 0.2);

/// SRM convolution -> TLU -> batch normalization on [N,1,h,w] planes.
template <typename Real>
class Preprocess {
public:
    explicit Preprocess(PreprocessConfig cfg = {});

    Tensor<Real> forward(const Tensor<Real>& planes, bool training);
    /// Output of the TLU, before normalization.
    Tensor<Real> residuals(const Tensor<Real>& planes);

    void collect(const std::string& prefix, ParamList<Real>& out);
    const PreprocessConfig& config() const { return cfg_; }

    Tensor<Real> srm_weight;
    Tensor<Real> srm_bias;
    BnState<Real> bn;

private:
    PreprocessConfig cfg_;
};

/// Builds an [N,1,h,w] input from decompressed planes.
template <typename Real>
Tensor<Real> planes_to_tensor(const std::vector<const LuminancePlane*>& planes);

extern template class Preprocess<float>;
extern template class Preprocess<double>;

}  // namespace jgn
