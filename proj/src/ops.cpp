#include "jgn/ops.hpp"

#include <Eigen/Core>
#include <cblas.h>
#include <algorithm>
#include <cmath>
#include <type_traits>

namespace jgn {
namespace {

template <typename Real>
using MatR = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Real>
using CMap = Eigen::Map<const MatR<Real>>;
template <typename Real>
using MMap = Eigen::Map<MatR<Real>>;

void require(bool ok, const std::string& msg) {
    if (!ok) throw ShapeError(msg);
}

struct Spatial {
    std::size_t n, c, h, w;
    bool batched;
};

template <typename Real>
Spatial spatial_dims(const Tensor<Real>& x, const char* op) {
    const auto& s = x.shape();
    if (s.size() == 4) return {s[0], s[1], s[2], s[3], true};
    if (s.size() == 3) return {1, s[0], s[1], s[2], false};
    throw ShapeError(std::string(op) + ": expected [C,H,W] or [N,C,H,W], got " + shape_str(s));
}

Shape spatial_shape(const Spatial& d, std::size_t c, std::size_t h, std::size_t w) {
    if (d.batched) return {d.n, c, h, w};
    return {c, h, w};
}

// Valid output columns [lo, hi) for kernel offset k: 0 <= o*stride + k - pad < n.
inline void valid_range(std::size_t n, std::size_t k, std::size_t stride, std::size_t pad, std::size_t out,
                        std::size_t& lo, std::size_t& hi) {
    const long first = static_cast<long>(pad) - static_cast<long>(k);
    lo = first <= 0 ? 0 : static_cast<std::size_t>((first + static_cast<long>(stride) - 1) / static_cast<long>(stride));
    const long last = static_cast<long>(n) - 1 + static_cast<long>(pad) - static_cast<long>(k);
    hi = last < 0 ? 0 : std::min(out, static_cast<std::size_t>(last) / stride + 1);
    if (hi < lo) hi = lo;
}

template <typename Real>
void im2col(const Real* x, std::size_t c, std::size_t h, std::size_t w, std::size_t kh,
            std::size_t kw, std::size_t stride, std::size_t pad, std::size_t oh, std::size_t ow,
            Real* cols) {
    const std::size_t p = oh * ow;
    for (std::size_t ki = 0; ki < kh; ++ki) {
        std::size_t ylo, yhi;
        valid_range(h, ki, stride, pad, oh, ylo, yhi);
        for (std::size_t kj = 0; kj < kw; ++kj) {
            std::size_t xlo, xhi;
            valid_range(w, kj, stride, pad, ow, xlo, xhi);
            for (std::size_t ci = 0; ci < c; ++ci) {
                Real* row = cols + ((ci * kh + ki) * kw + kj) * p;
                std::fill(row, row + ylo * ow, Real(0));
                std::fill(row + yhi * ow, row + p, Real(0));
                for (std::size_t oy = ylo; oy < yhi; ++oy) {
                    const std::size_t iy = oy * stride + ki - pad;
                    Real* dst = row + oy * ow;
                    const Real* src = x + (ci * h + iy) * w;
                    std::fill(dst, dst + xlo, Real(0));
                    std::fill(dst + xhi, dst + ow, Real(0));
                    if (stride == 1) {
                        std::copy(src + (xlo + kj - pad), src + (xhi + kj - pad), dst + xlo);
                    } else {
                        for (std::size_t ox = xlo; ox < xhi; ++ox) dst[ox] = src[ox * stride + kj - pad];
                    }
                }
            }
        }
    }
}

template <typename Real>
void col2im(const Real* cols, std::size_t c, std::size_t h, std::size_t w, std::size_t kh,
            std::size_t kw, std::size_t stride, std::size_t pad, std::size_t oh, std::size_t ow,
            Real* x) {
    const std::size_t p = oh * ow;
    for (std::size_t ci = 0; ci < c; ++ci)
        for (std::size_t ki = 0; ki < kh; ++ki) {
            std::size_t ylo, yhi;
            valid_range(h, ki, stride, pad, oh, ylo, yhi);
            for (std::size_t kj = 0; kj < kw; ++kj) {
                std::size_t xlo, xhi;
                valid_range(w, kj, stride, pad, ow, xlo, xhi);
                const Real* row = cols + ((ci * kh + ki) * kw + kj) * p;
                for (std::size_t oy = ylo; oy < yhi; ++oy) {
                    const std::size_t iy = oy * stride + ki - pad;
                    Real* dst = x + (ci * h + iy) * w;
                    const Real* src = row + oy * ow;
                    for (std::size_t ox = xlo; ox < xhi; ++ox) dst[ox * stride + kj - pad] += src[ox];
                }
            }
        }
}

// Row-major C = op(A) B-style product, C (m x n) = beta*C + op(A) (m x k) * op(B) (k x n).
inline void gemm(bool ta, bool tb, std::size_t m, std::size_t n, std::size_t k, const float* a, const float* b,
                 float beta, float* c) {
    cblas_sgemm(CblasRowMajor, ta ? CblasTrans : CblasNoTrans, tb ? CblasTrans : CblasNoTrans, int(m), int(n),
                int(k), 1.0f, a, ta ? int(m) : int(k), b, tb ? int(k) : int(n), beta, c, int(n));
}

// Double products stay on Eigen's own kernels: the AVX-512 dgemm of the
// OpenBLAS 0.3.20 build shipped here returns wrong results for most shapes.
inline void gemm(bool ta, bool tb, std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
                 double beta, double* c) {
    using Mat = MatR<double>;
    Eigen::Map<const Mat> A(a, ta ? k : m, ta ? m : k), B(b, tb ? n : k, tb ? k : n);
    Eigen::Map<Mat> C(c, m, n);
    if (beta == 0) C.setZero();
    if (ta && tb) C.noalias() += A.transpose() * B.transpose();
    else if (ta) C.noalias() += A.transpose() * B;
    else if (tb) C.noalias() += A * B.transpose();
    else C.noalias() += A * B;
}

thread_local PieceLock::Mode g_piece_mode = PieceLock::Mode::off;
thread_local std::vector<std::uint8_t> g_pieces;
thread_local std::size_t g_piece_cursor = 0;

struct NoPieces {};

// `pieces` (when given) maps a value to its linear piece and evaluates a
// value on a given piece; see PieceLock.
template <typename Real, typename Fwd, typename Bwd, typename Pieces = NoPieces>
Tensor<Real> elementwise(const Tensor<Real>& x, Fwd fwd, Bwd dydx, Pieces pieces = {}) {
    auto in = x.data();
    std::vector<Real> out(in.size());
    if constexpr (!std::is_same_v<Pieces, NoPieces>) {
        if (g_piece_mode == PieceLock::Mode::replay) {
            if (g_piece_cursor + in.size() > g_pieces.size())
                throw std::logic_error("PieceLock replay ran past the recorded pass");
            for (std::size_t i = 0; i < in.size(); ++i) out[i] = pieces.eval(in[i], g_pieces[g_piece_cursor + i]);
            g_piece_cursor += in.size();
        } else {
            for (std::size_t i = 0; i < in.size(); ++i) out[i] = fwd(in[i]);
            if (g_piece_mode == PieceLock::Mode::record)
                for (auto v : in) g_pieces.push_back(pieces.of(v));
        }
    } else {
        for (std::size_t i = 0; i < in.size(); ++i) out[i] = fwd(in[i]);
    }
    return Tensor<Real>::make_result(x.shape(), std::move(out), {x},
                                     [x, dydx](std::span<const Real> g) {
                                         auto in = x.data();
                                         std::vector<Real> gx(in.size());
                                         for (std::size_t i = 0; i < in.size(); ++i) gx[i] = g[i] * dydx(in[i]);
                                         x.accumulate_grad(gx);
                                     });
}

template <typename Real>
struct SignPieces {
    Real negative_slope;
    std::uint8_t of(Real v) const { return v > 0; }
    Real eval(Real v, std::uint8_t piece) const { return piece ? v : negative_slope * v; }
};

template <typename Real>
struct ClampPieces {
    Real t;
    std::uint8_t of(Real v) const { return v < -t ? 0 : v <= t ? 1 : 2; }
    Real eval(Real v, std::uint8_t piece) const { return piece == 0 ? -t : piece == 1 ? v : t; }
};

}  // namespace

void PieceLock::set(Mode mode) {
    g_piece_mode = mode;
    g_piece_cursor = 0;
    if (mode == Mode::record) g_pieces.clear();
}
PieceLock::Mode PieceLock::mode() { return g_piece_mode; }

template <typename Real>
Tensor<Real> conv2d(const Tensor<Real>& x, const Tensor<Real>& kernel, const Tensor<Real>& bias,
                    std::size_t stride, std::size_t pad) {
    const auto d = spatial_dims(x, "conv2d");
    require(kernel.rank() == 4, "conv2d: kernel must be [C_out,C_in,kh,kw], got " + shape_str(kernel.shape()));
    const std::size_t co = kernel.dim(0), kh = kernel.dim(2), kw = kernel.dim(3);
    require(kernel.dim(1) == d.c, "conv2d: kernel expects " + std::to_string(kernel.dim(1)) +
                                      " input channels, input has " + std::to_string(d.c));
    require(kh % 2 == 1 && kw % 2 == 1, "conv2d: kernel sizes must be odd");
    require(stride >= 1, "conv2d: stride must be positive");
    require(d.h + 2 * pad >= kh && d.w + 2 * pad >= kw, "conv2d: kernel larger than padded input");
    if (bias.defined()) require(bias.numel() == co, "conv2d: bias length must equal C_out");

    const std::size_t oh = (d.h + 2 * pad - kh) / stride + 1;
    const std::size_t ow = (d.w + 2 * pad - kw) / stride + 1;
    const std::size_t kdim = d.c * kh * kw, p = oh * ow, in_sz = d.c * d.h * d.w;

    std::vector<Real> out(d.n * co * p);
    std::vector<Real> cols(kdim * p);
    for (std::size_t n = 0; n < d.n; ++n) {
        im2col(x.data().data() + n * in_sz, d.c, d.h, d.w, kh, kw, stride, pad, oh, ow, cols.data());
        Real* y = out.data() + n * co * p;
        if (bias.defined()) {
            auto b = bias.data();
            for (std::size_t o = 0; o < co; ++o) std::fill(y + o * p, y + (o + 1) * p, b[o]);
        }
        gemm(false, false, co, p, kdim, kernel.data().data(), cols.data(), bias.defined() ? Real(1) : Real(0), y);
    }

    auto backward = [x, kernel, bias, d, co, kh, kw, stride, pad, oh, ow, kdim, p,
                     in_sz](std::span<const Real> g) {
        std::vector<Real> cols(kdim * p);
        std::vector<Real> dcols;
        std::vector<Real> gx, gw, gb;
        if (x.requires_grad()) {
            gx.assign(x.numel(), Real(0));
            dcols.resize(kdim * p);
        }
        if (kernel.requires_grad()) gw.assign(kernel.numel(), Real(0));
        if (bias.defined() && bias.requires_grad()) gb.assign(co, Real(0));
        for (std::size_t n = 0; n < d.n; ++n) {
            const Real* gy = g.data() + n * co * p;
            if (!gw.empty()) {
                im2col(x.data().data() + n * in_sz, d.c, d.h, d.w, kh, kw, stride, pad, oh, ow, cols.data());
                gemm(false, true, co, kdim, p, gy, cols.data(), Real(1), gw.data());
            }
            if (!gx.empty()) {
                gemm(true, false, kdim, p, co, kernel.data().data(), gy, Real(0), dcols.data());
                col2im(dcols.data(), d.c, d.h, d.w, kh, kw, stride, pad, oh, ow, gx.data() + n * in_sz);
            }
            if (!gb.empty())
                for (std::size_t o = 0; o < co; ++o) {
                    double acc = 0;
                    for (std::size_t i = 0; i < p; ++i) acc += gy[o * p + i];
                    gb[o] += static_cast<Real>(acc);
                }
        }
        if (!gx.empty()) x.accumulate_grad(gx);
        if (!gw.empty()) kernel.accumulate_grad(gw);
        if (!gb.empty()) bias.accumulate_grad(gb);
    };
    std::vector<Tensor<Real>> parents{x, kernel};
    if (bias.defined()) parents.push_back(bias);
    return Tensor<Real>::make_result(spatial_shape(d, co, oh, ow), std::move(out), std::move(parents),
                                     std::move(backward));
}

template <typename Real>
Tensor<Real> avg_pool2d(const Tensor<Real>& x, std::size_t k, std::size_t stride, std::size_t pad) {
    const auto d = spatial_dims(x, "avg_pool2d");
    require(k >= 1 && stride >= 1, "avg_pool2d: k and stride must be positive");
    require(d.h + 2 * pad >= k && d.w + 2 * pad >= k, "avg_pool2d: window larger than padded input");
    const std::size_t oh = (d.h + 2 * pad - k) / stride + 1;
    const std::size_t ow = (d.w + 2 * pad - k) / stride + 1;
    const Real inv = Real(1) / static_cast<Real>(k * k);
    const std::size_t planes = d.n * d.c;

    // Visits every (output, input) pair of one plane.
    auto for_window = [=](auto&& fn) {
        for (std::size_t oy = 0; oy < oh; ++oy)
            for (std::size_t ox = 0; ox < ow; ++ox)
                for (std::size_t ki = 0; ki < k; ++ki) {
                    const long iy = static_cast<long>(oy * stride + ki) - static_cast<long>(pad);
                    if (iy < 0 || iy >= static_cast<long>(d.h)) continue;
                    for (std::size_t kj = 0; kj < k; ++kj) {
                        const long ix = static_cast<long>(ox * stride + kj) - static_cast<long>(pad);
                        if (ix < 0 || ix >= static_cast<long>(d.w)) continue;
                        fn(oy * ow + ox, static_cast<std::size_t>(iy) * d.w + static_cast<std::size_t>(ix));
                    }
                }
    };

    auto in = x.data();
    std::vector<Real> out(planes * oh * ow, Real(0));
    for (std::size_t pl = 0; pl < planes; ++pl) {
        const Real* src = in.data() + pl * d.h * d.w;
        Real* dst = out.data() + pl * oh * ow;
        for_window([&](std::size_t o, std::size_t i) { dst[o] += src[i]; });
        for (std::size_t o = 0; o < oh * ow; ++o) dst[o] *= inv;
    }
    return Tensor<Real>::make_result(
        spatial_shape(d, d.c, oh, ow), std::move(out), {x},
        [x, for_window, planes, d, oh, ow, inv](std::span<const Real> g) {
            std::vector<Real> gx(x.numel(), Real(0));
            for (std::size_t pl = 0; pl < planes; ++pl) {
                const Real* src = g.data() + pl * oh * ow;
                Real* dst = gx.data() + pl * d.h * d.w;
                for_window([&](std::size_t o, std::size_t i) { dst[i] += src[o] * inv; });
            }
            x.accumulate_grad(gx);
        });
}

template <typename Real>
Tensor<Real> global_avg_pool(const Tensor<Real>& x) {
    const auto d = spatial_dims(x, "global_avg_pool");
    const std::size_t s = d.h * d.w;
    auto in = x.data();
    std::vector<Real> out(d.n * d.c);
    for (std::size_t pl = 0; pl < out.size(); ++pl) {
        Real acc = 0;
        for (std::size_t i = 0; i < s; ++i) acc += in[pl * s + i];
        out[pl] = acc / static_cast<Real>(s);
    }
    Shape shape = d.batched ? Shape{d.n, d.c} : Shape{d.c};
    return Tensor<Real>::make_result(std::move(shape), std::move(out), {x}, [x, s](std::span<const Real> g) {
        std::vector<Real> gx(x.numel());
        for (std::size_t pl = 0; pl < g.size(); ++pl)
            for (std::size_t i = 0; i < s; ++i) gx[pl * s + i] = g[pl] / static_cast<Real>(s);
        x.accumulate_grad(gx);
    });
}

template <typename Real>
BnState<Real> BnState<Real>::create(std::size_t channels) {
    BnState st;
    st.gamma = Tensor<Real>::full({channels}, Real(1), true);
    st.beta = Tensor<Real>::zeros({channels}, true);
    st.running_mean = Tensor<Real>::zeros({channels});
    st.running_var = Tensor<Real>::full({channels}, Real(1));
    return st;
}

template <typename Real>
Tensor<Real> batch_norm(const Tensor<Real>& x, BnState<Real>& state, bool training) {
    const auto& s = x.shape();
    require(s.size() >= 2, "batch_norm: expected [N,C,...], got " + shape_str(s));
    const std::size_t n = s[0], c = s[1];
    require(c == state.channels(), "batch_norm: state has " + std::to_string(state.channels()) +
                                       " channels, input has " + std::to_string(c));
    if (training && n < 2) throw ShapeError("batch_norm: training mode needs a batch of at least 2");
    const std::size_t inner = x.numel() / (n * c);
    const std::size_t count = n * inner;
    auto in = x.data();
    auto gamma = state.gamma.data();
    auto beta = state.beta.data();

    std::vector<Real> mean(c), invstd(c);
    if (training) {
        auto rm = state.running_mean.mutable_data();
        auto rv = state.running_var.mutable_data();
        for (std::size_t ch = 0; ch < c; ++ch) {
            Real m = 0;
            for (std::size_t b = 0; b < n; ++b)
                for (std::size_t i = 0; i < inner; ++i) m += in[(b * c + ch) * inner + i];
            m /= static_cast<Real>(count);
            Real v = 0;
            for (std::size_t b = 0; b < n; ++b)
                for (std::size_t i = 0; i < inner; ++i) {
                    const Real dv = in[(b * c + ch) * inner + i] - m;
                    v += dv * dv;
                }
            v /= static_cast<Real>(count);
            mean[ch] = m;
            invstd[ch] = Real(1) / std::sqrt(v + state.eps);
            rm[ch] = state.decay * rm[ch] + (Real(1) - state.decay) * m;
            rv[ch] = state.decay * rv[ch] + (Real(1) - state.decay) * v;
        }
    } else {
        auto rm = state.running_mean.data();
        auto rv = state.running_var.data();
        for (std::size_t ch = 0; ch < c; ++ch) {
            mean[ch] = rm[ch];
            invstd[ch] = Real(1) / std::sqrt(rv[ch] + state.eps);
        }
    }

    std::vector<Real> xhat(x.numel()), out(x.numel());
    for (std::size_t b = 0; b < n; ++b)
        for (std::size_t ch = 0; ch < c; ++ch)
            for (std::size_t i = 0; i < inner; ++i) {
                const std::size_t k = (b * c + ch) * inner + i;
                xhat[k] = (in[k] - mean[ch]) * invstd[ch];
                out[k] = gamma[ch] * xhat[k] + beta[ch];
            }

    Tensor<Real> g_t = state.gamma, b_t = state.beta;
    return Tensor<Real>::make_result(
        s, std::move(out), {x, g_t, b_t},
        [x, g_t, b_t, xhat = std::move(xhat), invstd, n, c, inner, count, training](std::span<const Real> g) {
            auto gamma = g_t.data();
            std::vector<Real> sum_g(c, Real(0)), sum_gx(c, Real(0));
            for (std::size_t b = 0; b < n; ++b)
                for (std::size_t ch = 0; ch < c; ++ch)
                    for (std::size_t i = 0; i < inner; ++i) {
                        const std::size_t k = (b * c + ch) * inner + i;
                        sum_g[ch] += g[k];
                        sum_gx[ch] += g[k] * xhat[k];
                    }
            if (g_t.requires_grad()) g_t.accumulate_grad(sum_gx);
            if (b_t.requires_grad()) b_t.accumulate_grad(sum_g);
            if (!x.requires_grad()) return;
            std::vector<Real> gx(x.numel());
            const Real m = static_cast<Real>(count);
            for (std::size_t b = 0; b < n; ++b)
                for (std::size_t ch = 0; ch < c; ++ch)
                    for (std::size_t i = 0; i < inner; ++i) {
                        const std::size_t k = (b * c + ch) * inner + i;
                        if (training)
                            gx[k] = gamma[ch] * invstd[ch] *
                                    (g[k] - sum_g[ch] / m - xhat[k] * sum_gx[ch] / m);
                        else
                            gx[k] = gamma[ch] * invstd[ch] * g[k];
                    }
            x.accumulate_grad(gx);
        });
}

template <typename Real>
Tensor<Real> linear(const Tensor<Real>& x, const Tensor<Real>& weight, const Tensor<Real>& bias) {
    require(weight.rank() == 2, "linear: weight must be [O,F], got " + shape_str(weight.shape()));
    const std::size_t o = weight.dim(0), f = weight.dim(1);
    require(x.shape().back() == f, "linear: input feature size " + std::to_string(x.shape().back()) +
                                       " does not match weight " + shape_str(weight.shape()));
    if (bias.defined()) require(bias.numel() == o, "linear: bias length must equal output size");
    const std::size_t rows = x.numel() / f;
    std::vector<Real> out(rows * o);
    MMap<Real> y(out.data(), rows, o);
    y.noalias() = CMap<Real>(x.data().data(), rows, f) * CMap<Real>(weight.data().data(), o, f).transpose();
    if (bias.defined()) {
        auto b = bias.data();
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t j = 0; j < o; ++j) y(r, j) += b[j];
    }
    Shape shape = x.shape();
    shape.back() = o;
    std::vector<Tensor<Real>> parents{x, weight};
    if (bias.defined()) parents.push_back(bias);
    return Tensor<Real>::make_result(
        std::move(shape), std::move(out), std::move(parents), [x, weight, bias, rows, o, f](std::span<const Real> g) {
            CMap<Real> gy(g.data(), rows, o);
            if (x.requires_grad()) {
                std::vector<Real> gx(rows * f);
                MMap<Real>(gx.data(), rows, f).noalias() = gy * CMap<Real>(weight.data().data(), o, f);
                x.accumulate_grad(gx);
            }
            if (weight.requires_grad()) {
                std::vector<Real> gw(o * f);
                MMap<Real>(gw.data(), o, f).noalias() = gy.transpose() * CMap<Real>(x.data().data(), rows, f);
                weight.accumulate_grad(gw);
            }
            if (bias.defined() && bias.requires_grad()) {
                std::vector<Real> gb(o, Real(0));
                for (std::size_t r = 0; r < rows; ++r)
                    for (std::size_t j = 0; j < o; ++j) gb[j] += gy(r, j);
                bias.accumulate_grad(gb);
            }
        });
}

template <typename Real>
Tensor<Real> dense(const Tensor<Real>& x, const Tensor<Real>& weight, const Tensor<Real>& bias) {
    require(x.rank() == 1 || x.rank() == 2, "dense: expected [F] or [N,F], got " + shape_str(x.shape()));
    return linear(x, weight, bias);
}

template <typename Real>
Tensor<Real> bmm(const Tensor<Real>& a, const Tensor<Real>& b) {
    require(a.rank() == 3 && b.rank() == 3, "bmm: expected rank-3 operands");
    const std::size_t n = a.dim(0), m = a.dim(1), k = a.dim(2), nn = b.dim(2);
    require(b.dim(0) == n && b.dim(1) == k,
            "bmm: incompatible shapes " + shape_str(a.shape()) + " and " + shape_str(b.shape()));
    std::vector<Real> out(n * m * nn);
    for (std::size_t i = 0; i < n; ++i)
        MMap<Real>(out.data() + i * m * nn, m, nn).noalias() =
            CMap<Real>(a.data().data() + i * m * k, m, k) * CMap<Real>(b.data().data() + i * k * nn, k, nn);
    return Tensor<Real>::make_result({n, m, nn}, std::move(out), {a, b}, [a, b, n, m, k, nn](std::span<const Real> g) {
        std::vector<Real> ga, gb;
        if (a.requires_grad()) ga.resize(n * m * k);
        if (b.requires_grad()) gb.resize(n * k * nn);
        for (std::size_t i = 0; i < n; ++i) {
            CMap<Real> gy(g.data() + i * m * nn, m, nn);
            if (!ga.empty())
                MMap<Real>(ga.data() + i * m * k, m, k).noalias() =
                    gy * CMap<Real>(b.data().data() + i * k * nn, k, nn).transpose();
            if (!gb.empty())
                MMap<Real>(gb.data() + i * k * nn, k, nn).noalias() =
                    CMap<Real>(a.data().data() + i * m * k, m, k).transpose() * gy;
        }
        if (!ga.empty()) a.accumulate_grad(ga);
        if (!gb.empty()) b.accumulate_grad(gb);
    });
}

template <typename Real>
Tensor<Real> activation(const Tensor<Real>& x, Activation mode, Real leaky_slope) {
    switch (mode) {
    case Activation::relu:
        return elementwise(
            x, [](Real v) { return v > 0 ? v : Real(0); }, [](Real v) { return v > 0 ? Real(1) : Real(0); },
            SignPieces<Real>{Real(0)});
    case Activation::leaky_relu:
        return elementwise(
            x, [leaky_slope](Real v) { return v > 0 ? v : leaky_slope * v; },
            [leaky_slope](Real v) { return v > 0 ? Real(1) : leaky_slope; }, SignPieces<Real>{leaky_slope});
    case Activation::elu:
        return elementwise(
            x, [](Real v) { return v > 0 ? v : std::expm1(v); }, [](Real v) { return v > 0 ? Real(1) : std::exp(v); });
    case Activation::identity:
        return x;
    }
    throw std::logic_error("unknown activation");
}

template <typename Real>
Tensor<Real> tlu(const Tensor<Real>& x, Real threshold) {
    if (!(threshold > 0)) throw std::invalid_argument("tlu: threshold must be positive");
    return elementwise(
        x, [threshold](Real v) { return std::clamp(v, -threshold, threshold); },
        [threshold](Real v) { return std::abs(v) <= threshold ? Real(1) : Real(0); },
        ClampPieces<Real>{threshold});
}

template <typename Real>
Tensor<Real> add(const Tensor<Real>& a, const Tensor<Real>& b) {
    require(a.shape() == b.shape(), "add: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    auto da = a.data(), db = b.data();
    std::vector<Real> out(da.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = da[i] + db[i];
    return Tensor<Real>::make_result(a.shape(), std::move(out), {a, b}, [a, b](std::span<const Real> g) {
        if (a.requires_grad()) a.accumulate_grad(g);
        if (b.requires_grad()) b.accumulate_grad(g);
    });
}

template <typename Real>
Tensor<Real> mul(const Tensor<Real>& a, const Tensor<Real>& b) {
    require(a.shape() == b.shape(), "mul: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    auto da = a.data(), db = b.data();
    std::vector<Real> out(da.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = da[i] * db[i];
    return Tensor<Real>::make_result(a.shape(), std::move(out), {a, b}, [a, b](std::span<const Real> g) {
        auto da = a.data(), db = b.data();
        if (a.requires_grad()) {
            std::vector<Real> ga(g.size());
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] = g[i] * db[i];
            a.accumulate_grad(ga);
        }
        if (b.requires_grad()) {
            std::vector<Real> gb(g.size());
            for (std::size_t i = 0; i < g.size(); ++i) gb[i] = g[i] * da[i];
            b.accumulate_grad(gb);
        }
    });
}

template <typename Real>
Tensor<Real> scale(const Tensor<Real>& x, Real factor) {
    return elementwise(x, [factor](Real v) { return factor * v; }, [factor](Real) { return factor; });
}

template <typename Real>
Tensor<Real> sum(const Tensor<Real>& x) {
    double acc = 0;
    for (auto v : x.data()) acc += v;
    return Tensor<Real>::make_result({1}, {static_cast<Real>(acc)}, {x}, [x](std::span<const Real> g) {
        x.accumulate_grad(std::vector<Real>(x.numel(), g[0]));
    });
}

template <typename Real>
Tensor<Real> reshape(const Tensor<Real>& x, Shape shape) {
    require(shape_numel(shape) == x.numel(), "reshape: cannot view " + shape_str(x.shape()) + " as " + shape_str(shape));
    auto in = x.data();
    return Tensor<Real>::make_result(std::move(shape), std::vector<Real>(in.begin(), in.end()), {x},
                                     [x](std::span<const Real> g) { x.accumulate_grad(g); });
}

template <typename Real>
Tensor<Real> concat_channels(const Tensor<Real>& a, const Tensor<Real>& b) {
    const auto da = spatial_dims(a, "concat_channels");
    const auto db = spatial_dims(b, "concat_channels");
    require(da.batched == db.batched && da.n == db.n && da.h == db.h && da.w == db.w,
            "concat_channels: incompatible shapes " + shape_str(a.shape()) + " and " + shape_str(b.shape()));
    const std::size_t s = da.h * da.w, sa = da.c * s, sb = db.c * s;
    std::vector<Real> out(da.n * (sa + sb));
    auto pa = a.data(), pb = b.data();
    for (std::size_t n = 0; n < da.n; ++n) {
        std::copy_n(pa.data() + n * sa, sa, out.data() + n * (sa + sb));
        std::copy_n(pb.data() + n * sb, sb, out.data() + n * (sa + sb) + sa);
    }
    return Tensor<Real>::make_result(
        spatial_shape(da, da.c + db.c, da.h, da.w), std::move(out), {a, b},
        [a, b, nb = da.n, sa, sb](std::span<const Real> g) {
            if (a.requires_grad()) {
                std::vector<Real> ga(nb * sa);
                for (std::size_t n = 0; n < nb; ++n) std::copy_n(g.data() + n * (sa + sb), sa, ga.data() + n * sa);
                a.accumulate_grad(ga);
            }
            if (b.requires_grad()) {
                std::vector<Real> gb(nb * sb);
                for (std::size_t n = 0; n < nb; ++n)
                    std::copy_n(g.data() + n * (sa + sb) + sa, sb, gb.data() + n * sb);
                b.accumulate_grad(gb);
            }
        });
}

template <typename Real>
Tensor<Real> channel_mean(const Tensor<Real>& x) {
    require(x.rank() == 4, "channel_mean: expected [N,C,H,W]");
    const std::size_t n = x.dim(0), c = x.dim(1), s = x.dim(2) * x.dim(3);
    auto in = x.data();
    std::vector<Real> out(n * s, Real(0));
    for (std::size_t b = 0; b < n; ++b)
        for (std::size_t ch = 0; ch < c; ++ch)
            for (std::size_t i = 0; i < s; ++i) out[b * s + i] += in[(b * c + ch) * s + i];
    for (auto& v : out) v /= static_cast<Real>(c);
    return Tensor<Real>::make_result({n, 1, x.dim(2), x.dim(3)}, std::move(out), {x},
                                     [x, n, c, s](std::span<const Real> g) {
                                         std::vector<Real> gx(n * c * s);
                                         for (std::size_t b = 0; b < n; ++b)
                                             for (std::size_t ch = 0; ch < c; ++ch)
                                                 for (std::size_t i = 0; i < s; ++i)
                                                     gx[(b * c + ch) * s + i] = g[b * s + i] / static_cast<Real>(c);
                                         x.accumulate_grad(gx);
                                     });
}

template <typename Real>
Tensor<Real> repeat_channels(const Tensor<Real>& x, std::size_t channels) {
    require(x.rank() == 4 && x.dim(1) == 1, "repeat_channels: expected [N,1,H,W]");
    const std::size_t n = x.dim(0), s = x.dim(2) * x.dim(3);
    auto in = x.data();
    std::vector<Real> out(n * channels * s);
    for (std::size_t b = 0; b < n; ++b)
        for (std::size_t ch = 0; ch < channels; ++ch) std::copy_n(in.data() + b * s, s, out.data() + (b * channels + ch) * s);
    return Tensor<Real>::make_result({n, channels, x.dim(2), x.dim(3)}, std::move(out), {x},
                                     [x, n, channels, s](std::span<const Real> g) {
                                         std::vector<Real> gx(n * s, Real(0));
                                         for (std::size_t b = 0; b < n; ++b)
                                             for (std::size_t ch = 0; ch < channels; ++ch)
                                                 for (std::size_t i = 0; i < s; ++i)
                                                     gx[b * s + i] += g[(b * channels + ch) * s + i];
                                         x.accumulate_grad(gx);
                                     });
}

template <typename Real>
Tensor<Real> gather(const Tensor<Real>& x, Shape shape, std::span<const std::size_t> index) {
    require(shape_numel(shape) == index.size(), "gather: index length does not match output shape");
    auto in = x.data();
    std::vector<Real> out(index.size());
    for (std::size_t i = 0; i < index.size(); ++i) {
        require(index[i] < in.size(), "gather: index out of range");
        out[i] = in[index[i]];
    }
    return Tensor<Real>::make_result(std::move(shape), std::move(out), {x},
                                     [x, idx = std::vector<std::size_t>(index.begin(), index.end())](
                                         std::span<const Real> g) {
                                         std::vector<Real> gx(x.numel(), Real(0));
                                         for (std::size_t i = 0; i < idx.size(); ++i) gx[idx[i]] += g[i];
                                         x.accumulate_grad(gx);
                                     });
}

template <typename Real>
Tensor<Real> pairwise_logits(const Tensor<Real>& s) {
    require(s.rank() == 3 && s.dim(2) == 2, "pairwise_logits: expected [N,M,2], got " + shape_str(s.shape()));
    const std::size_t n = s.dim(0), m = s.dim(1);
    auto in = s.data();
    std::vector<Real> out(n * m * m);
    for (std::size_t b = 0; b < n; ++b)
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < m; ++j)
                out[(b * m + i) * m + j] = in[(b * m + i) * 2] + in[(b * m + j) * 2 + 1];
    return Tensor<Real>::make_result({n, m, m}, std::move(out), {s}, [s, n, m](std::span<const Real> g) {
        std::vector<Real> gs(n * m * 2, Real(0));
        for (std::size_t b = 0; b < n; ++b)
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < m; ++j) {
                    const Real v = g[(b * m + i) * m + j];
                    gs[(b * m + i) * 2] += v;
                    gs[(b * m + j) * 2 + 1] += v;
                }
        s.accumulate_grad(gs);
    });
}

template <typename Real>
Tensor<Real> softmax(const Tensor<Real>& x) {
    const std::size_t k = x.shape().back();
    const std::size_t rows = x.numel() / k;
    auto in = x.data();
    std::vector<Real> out(in.size());
    for (std::size_t r = 0; r < rows; ++r) {
        const Real* src = in.data() + r * k;
        Real* dst = out.data() + r * k;
        const Real mx = *std::max_element(src, src + k);
        Real z = 0;
        for (std::size_t j = 0; j < k; ++j) z += (dst[j] = std::exp(src[j] - mx));
        for (std::size_t j = 0; j < k; ++j) dst[j] /= z;
    }
    auto saved = out;
    return Tensor<Real>::make_result(x.shape(), std::move(out), {x},
                                     [x, y = std::move(saved), rows, k](std::span<const Real> g) {
                                         std::vector<Real> gx(y.size());
                                         for (std::size_t r = 0; r < rows; ++r) {
                                             Real dot = 0;
                                             for (std::size_t j = 0; j < k; ++j) dot += g[r * k + j] * y[r * k + j];
                                             for (std::size_t j = 0; j < k; ++j)
                                                 gx[r * k + j] = y[r * k + j] * (g[r * k + j] - dot);
                                         }
                                         x.accumulate_grad(gx);
                                     });
}

template <typename Real>
Tensor<Real> softmax_cross_entropy(const Tensor<Real>& logits, std::span<const int> labels) {
    require(logits.rank() == 2, "softmax_cross_entropy: expected [N,K] logits");
    const std::size_t n = logits.dim(0), k = logits.dim(1);
    require(labels.size() == n, "softmax_cross_entropy: one label per row required");
    auto in = logits.data();
    std::vector<Real> prob(n * k);
    Real loss = 0;
    for (std::size_t r = 0; r < n; ++r) {
        if (labels[r] < 0 || static_cast<std::size_t>(labels[r]) >= k)
            throw std::invalid_argument("softmax_cross_entropy: label out of range");
        const Real* z = in.data() + r * k;
        const Real mx = *std::max_element(z, z + k);
        Real se = 0;
        for (std::size_t j = 0; j < k; ++j) se += std::exp(z[j] - mx);
        const Real lse = mx + std::log(se);
        loss += lse - z[labels[r]];
        for (std::size_t j = 0; j < k; ++j) prob[r * k + j] = std::exp(z[j] - lse);
    }
    loss /= static_cast<Real>(n);
    return Tensor<Real>::make_result(
        {1}, {loss}, {logits},
        [logits, prob = std::move(prob), lab = std::vector<int>(labels.begin(), labels.end()), n,
         k](std::span<const Real> g) {
            std::vector<Real> gx(prob.size());
            const Real s = g[0] / static_cast<Real>(n);
            for (std::size_t r = 0; r < n; ++r)
                for (std::size_t j = 0; j < k; ++j)
                    gx[r * k + j] = s * (prob[r * k + j] - (static_cast<int>(j) == lab[r] ? Real(1) : Real(0)));
            logits.accumulate_grad(gx);
        });
}

#define JGN_INSTANTIATE(Real)                                                                                   \
    template Tensor<Real> conv2d(const Tensor<Real>&, const Tensor<Real>&, const Tensor<Real>&, std::size_t,    \
                                 std::size_t);                                                                  \
    template Tensor<Real> avg_pool2d(const Tensor<Real>&, std::size_t, std::size_t, std::size_t);              \
    template Tensor<Real> global_avg_pool(const Tensor<Real>&);                                                 \
    template struct BnState<Real>;                                                                              \
    template Tensor<Real> batch_norm(const Tensor<Real>&, BnState<Real>&, bool);                                \
    template Tensor<Real> linear(const Tensor<Real>&, const Tensor<Real>&, const Tensor<Real>&);                \
    template Tensor<Real> dense(const Tensor<Real>&, const Tensor<Real>&, const Tensor<Real>&);                 \
    template Tensor<Real> bmm(const Tensor<Real>&, const Tensor<Real>&);                                        \
    template Tensor<Real> activation(const Tensor<Real>&, Activation, Real);                                    \
    template Tensor<Real> tlu(const Tensor<Real>&, Real);                                                       \
    template Tensor<Real> add(const Tensor<Real>&, const Tensor<Real>&);                                        \
    template Tensor<Real> mul(const Tensor<Real>&, const Tensor<Real>&);                                        \
    template Tensor<Real> scale(const Tensor<Real>&, Real);                                                     \
    template Tensor<Real> sum(const Tensor<Real>&);                                                             \
    template Tensor<Real> reshape(const Tensor<Real>&, Shape);                                                  \
    template Tensor<Real> concat_channels(const Tensor<Real>&, const Tensor<Real>&);                            \
    template Tensor<Real> channel_mean(const Tensor<Real>&);                                                    \
    template Tensor<Real> repeat_channels(const Tensor<Real>&, std::size_t);                                    \
    template Tensor<Real> gather(const Tensor<Real>&, Shape, std::span<const std::size_t>);                     \
    template Tensor<Real> pairwise_logits(const Tensor<Real>&);                                                 \
    template Tensor<Real> softmax(const Tensor<Real>&);                                                         \
    template Tensor<Real> softmax_cross_entropy(const Tensor<Real>&, std::span<const int>);

JGN_INSTANTIATE(float)
JGN_INSTANTIATE(double)

}  // namespace jgn
