#include "jgn/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <stdexcept>

namespace jgn {
namespace {

using Stencil = std::array<int, 25>;

constexpr int kDirs[8][2] = {{0, 1}, {0, -1}, {1, 0}, {-1, 0}, {1, 1}, {-1, -1}, {1, -1}, {-1, 1}};

int& cell(Stencil& s, int r, int c) { return s[static_cast<std::size_t>(r * 5 + c)]; }

// Rotates the 5x5 stencil by 90 degrees clockwise.
Stencil rotate(const Stencil& s) {
    Stencil out{};
    for (int r = 0; r < 5; ++r)
        for (int c = 0; c < 5; ++c) out[static_cast<std::size_t>(c * 5 + (4 - r))] = s[static_cast<std::size_t>(r * 5 + c)];
    return out;
}

Stencil from_rows(std::initializer_list<std::initializer_list<int>> rows) {
    Stencil s{};
    const int size = static_cast<int>(rows.size());
    const int off = (5 - size) / 2;
    int r = 0;
    for (const auto& row : rows) {
        int c = 0;
        for (int v : row) cell(s, r + off, c++ + off) = v;
        ++r;
    }
    return s;
}

}  // namespace

SrmBank srm_bank_init() {
    std::vector<std::pair<std::string, Stencil>> set;
    for (int d = 0; d < 8; ++d) {
        Stencil s{};
        cell(s, 2, 2) = -1;
        cell(s, 2 + kDirs[d][0], 2 + kDirs[d][1]) = 1;
        set.emplace_back("first_order_" + std::to_string(d), s);
    }
    // Horizontal, vertical and the two diagonals.
    for (int d : {0, 2, 4, 6}) {
        Stencil s{};
        cell(s, 2, 2) = -2;
        cell(s, 2 + kDirs[d][0], 2 + kDirs[d][1]) = 1;
        cell(s, 2 - kDirs[d][0], 2 - kDirs[d][1]) = 1;
        set.emplace_back("second_order_" + std::to_string(d), s);
    }
    for (int d = 0; d < 8; ++d) {
        Stencil s{};
        const int dy = kDirs[d][0], dx = kDirs[d][1];
        cell(s, 2 - dy, 2 - dx) = 1;
        cell(s, 2, 2) = -3;
        cell(s, 2 + dy, 2 + dx) = 3;
        cell(s, 2 + 2 * dy, 2 + 2 * dx) = -1;
        set.emplace_back("third_order_" + std::to_string(d), s);
    }
    set.emplace_back("square3x3", from_rows({{-1, 2, -1}, {2, -4, 2}, {-1, 2, -1}}));
    set.emplace_back("square5x5", from_rows({{-1, 2, -2, 2, -1},
                                             {2, -6, 8, -6, 2},
                                             {-2, 8, -12, 8, -2},
                                             {2, -6, 8, -6, 2},
                                             {-1, 2, -2, 2, -1}}));
    Stencil edge3 = from_rows({{-1, 2, -1}, {2, -4, 2}, {0, 0, 0}});
    for (int k = 0; k < 4; ++k, edge3 = rotate(edge3)) set.emplace_back("edge3x3_" + std::to_string(k), edge3);
    Stencil edge5 = from_rows({{-1, 2, -2, 2, -1}, {2, -6, 8, -6, 2}, {-2, 8, -12, 8, -2}, {0, 0, 0, 0, 0}, {0, 0, 0, 0, 0}});
    for (int k = 0; k < 4; ++k, edge5 = rotate(edge5)) set.emplace_back("edge5x5_" + std::to_string(k), edge5);

    if (set.size() != kResidualChannels) throw std::logic_error("SRM bank must hold 30 kernels");
    SrmBank bank;
    for (std::size_t k = 0; k < set.size(); ++k) {
        bank.names[k] = set[k].first;
        bank.numerators[k] = set[k].second;
        int mx = 0;
        for (int v : set[k].second) mx = std::max(mx, std::abs(v));
        bank.divisors[k] = mx;
    }
    return bank;
}

std::array<double, 25> SrmBank::kernel(std::size_t k) const {
    std::array<double, 25> out{};
    for (std::size_t i = 0; i < 25; ++i) out[i] = static_cast<double>(numerators[k][i]) / divisors[k];
    return out;
}

std::vector<double> SrmBank::weights() const {
    std::vector<double> w;
    w.reserve(kResidualChannels * 25);
    for (std::size_t k = 0; k < kResidualChannels; ++k) {
        auto kern = kernel(k);
        w.insert(w.end(), kern.begin(), kern.end());
    }
    return w;
}

std::vector<std::vector<double>> extract_residuals(const LuminancePlane& plane, const SrmBank& bank, double bias) {
    if (plane.h < 5 || plane.w < 5) throw std::invalid_argument("extract_residuals: plane must be at least 5x5");
    std::vector<std::vector<double>> out(kResidualChannels, std::vector<double>(plane.h * plane.w, bias));
    for (std::size_t k = 0; k < kResidualChannels; ++k) {
        const auto kern = bank.kernel(k);
        auto& dst = out[k];
        for (std::size_t y = 0; y < plane.h; ++y)
            for (std::size_t x = 0; x < plane.w; ++x) {
                double acc = 0;
                for (int r = 0; r < 5; ++r)
                    for (int c = 0; c < 5; ++c) {
                        const long yy = static_cast<long>(y) + r - 2, xx = static_cast<long>(x) + c - 2;
                        if (yy < 0 || xx < 0 || yy >= static_cast<long>(plane.h) || xx >= static_cast<long>(plane.w))
                            continue;
                        acc += kern[static_cast<std::size_t>(r * 5 + c)] *
                               plane.at(static_cast<std::size_t>(yy), static_cast<std::size_t>(xx));
                    }
                dst[y * plane.w + x] += acc;
            }
    }
    return out;
}

template <typename Real>
Preprocess<Real>::Preprocess(PreprocessConfig cfg)
    : srm_weight(Tensor<Real>::zeros({kResidualChannels, 1, 5, 5}, true)),
      srm_bias(Tensor<Real>::zeros({kResidualChannels}, true)),
      bn(BnState<Real>::create(kResidualChannels)),
      cfg_(cfg) {
    if (!(cfg.threshold > 0)) throw std::invalid_argument("TLU threshold must be positive");
}

template <typename Real>
Tensor<Real> Preprocess<Real>::residuals(const Tensor<Real>& planes) {
    return tlu(conv2d(planes, srm_weight, srm_bias, 1, 2), static_cast<Real>(cfg_.threshold));
}

template <typename Real>
Tensor<Real> Preprocess<Real>::forward(const Tensor<Real>& planes, bool training) {
    return batch_norm(residuals(planes), bn, training);
}

template <typename Real>
void Preprocess<Real>::collect(const std::string& prefix, ParamList<Real>& out) {
    out.push_back({prefix + ".srm.weight", srm_weight, ParamKind::weight, InitRule::srm, cfg_.freeze_srm});
    out.push_back({prefix + ".srm.bias", srm_bias, ParamKind::bias, InitRule::const_02});
    collect_bn(prefix + ".bn", bn, out);
}

template <typename Real>
Tensor<Real> planes_to_tensor(const std::vector<const LuminancePlane*>& planes) {
    if (planes.empty()) throw ShapeError("planes_to_tensor: empty batch");
    const std::size_t h = planes[0]->h, w = planes[0]->w;
    std::vector<Real> data;
    data.reserve(planes.size() * h * w);
    for (const auto* p : planes) {
        if (p->h != h || p->w != w) throw ShapeError("planes_to_tensor: planes differ in size");
        for (double v : p->f) data.push_back(static_cast<Real>(v));
    }
    return Tensor<Real>({planes.size(), 1, h, w}, std::move(data));
}

template class Preprocess<float>;
template class Preprocess<double>;
template Tensor<float> planes_to_tensor(const std::vector<const LuminancePlane*>&);
template Tensor<double> planes_to_tensor(const std::vector<const LuminancePlane*>&);

}  // namespace jgn
