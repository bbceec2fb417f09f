#include "jgn/sfe.hpp"

namespace jgn {
namespace {

template <typename Real>
void require_same_spatial(const Tensor<Real>& a, const Tensor<Real>& b, const char* stage) {
    if (a.dim(a.rank() - 1) != b.dim(b.rank() - 1) || a.dim(a.rank() - 2) != b.dim(b.rank() - 2))
        throw ShapeError(std::string("SFE changed spatial size at ") + stage);
}

}  // namespace

template <typename Real>
Sfel<Real>::Sfel(std::size_t channels)
    : conv1(channels, channels, 3), conv2(channels, channels, 3), shortcut(channels, channels, 1) {}

template <typename Real>
Tensor<Real> Sfel<Real>::forward(const Tensor<Real>& x, bool training) {
    if (x.rank() != 4 || x.dim(1) != conv1.weight.dim(1))
        throw ShapeError("SFEL expects [N," + std::to_string(conv1.weight.dim(1)) + ",H,W], got " +
                         shape_str(x.shape()));
    auto main = conv2.forward(relu(conv1.forward(x, training)), training);
    auto side = shortcut.forward(x, training);
    auto out = relu(add(main, side));
    require_same_spatial(x, out, "SFEL output");
    return out;
}

template <typename Real>
void Sfel<Real>::collect(const std::string& prefix, ParamList<Real>& out) {
    conv1.collect(prefix + ".conv1", out);
    conv2.collect(prefix + ".conv2", out);
    shortcut.collect(prefix + ".shortcut", out);
}

template <typename Real>
Sfe<Real>::Sfe(std::size_t channels) : sfel_a(channels), sfel_b(channels), fuse(2 * channels, channels, 1) {}

template <typename Real>
Tensor<Real> Sfe<Real>::forward(const Tensor<Real>& x, bool training) {
    auto y1 = sfel_a.forward(x, training);
    auto y2 = sfel_b.forward(y1, training);
    auto out = relu(fuse.forward(concat_channels(y1, y2), training));
    require_same_spatial(x, out, "fusion");
    return out;
}

template <typename Real>
void Sfe<Real>::collect(const std::string& prefix, ParamList<Real>& out) {
    sfel_a.collect(prefix + ".sfel_a", out);
    sfel_b.collect(prefix + ".sfel_b", out);
    fuse.collect(prefix + ".fuse", out);
}

std::size_t sfel_parameter_count(std::size_t c) {
    // two 3x3 convs and one 1x1 shortcut, each with bias and BN gamma/beta
    return 2 * (c * c * 9 + 3 * c) + (c * c + 3 * c);
}

std::size_t sfe_parameter_count(std::size_t c) {
    return 2 * sfel_parameter_count(c) + (2 * c * c + 3 * c);
}

template struct Sfel<float>;
template struct Sfel<double>;
template struct Sfe<float>;
template struct Sfe<double>;

}  // namespace jgn
