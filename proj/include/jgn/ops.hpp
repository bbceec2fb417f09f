#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "jgn/tensor.hpp"

namespace jgn {

// Convolutions use the cross-correlation convention (no kernel flip) with
// zero padding. Spatial ops accept [C,H,W] or [N,C,H,W]; a 3-d input yields a
// 3-d output.

template <typename Real>
Tensor<Real> conv2d(const Tensor<Real>& x, const Tensor<Real>& kernel, const Tensor<Real>& bias,
                    std::size_t stride, std::size_t pad);

/// Average pooling with a fixed k*k divisor, padded zeros included.
template <typename Real>
Tensor<Real> avg_pool2d(const Tensor<Real>& x, std::size_t k, std::size_t stride, std::size_t pad);

/// [C,H,W] -> [C] or [N,C,H,W] -> [N,C].
template <typename Real>
Tensor<Real> global_avg_pool(const Tensor<Real>& x);

/// Per-channel batch normalization state. gamma/beta are trainable leaves;
/// the running statistics are plain leaves updated in training mode.
template <typename Real>
struct BnState {
    Tensor<Real> gamma;
    Tensor<Real> beta;
    Tensor<Real> running_mean;
    Tensor<Real> running_var;
    Real decay = Real(0.9);
    Real eps = Real(1e-5);

    static BnState create(std::size_t channels);
    std::size_t channels() const { return gamma.numel(); }
};

/// x is [N,C,...]. Training mode normalizes with the (biased) batch
/// statistics over every non-channel axis and folds them into the running
/// statistics as running = decay*running + (1-decay)*batch.
template <typename Real>
Tensor<Real> batch_norm(const Tensor<Real>& x, BnState<Real>& state, bool training);

/// y = x W^T (+ bias) over the last axis; leading axes are batch axes.
template <typename Real>
Tensor<Real> linear(const Tensor<Real>& x, const Tensor<Real>& weight, const Tensor<Real>& bias = {});

/// [F] x [O,F] -> [O], or [N,F] -> [N,O].
template <typename Real>
Tensor<Real> dense(const Tensor<Real>& x, const Tensor<Real>& weight, const Tensor<Real>& bias = {});

/// [N,m,k] x [N,k,n] -> [N,m,n].
template <typename Real>
Tensor<Real> bmm(const Tensor<Real>& a, const Tensor<Real>& b);

/// Finite-difference support for the piecewise-linear ops (relu, leaky
/// relu, TLU). In record mode each element's linear piece is logged in call
/// order; in replay mode the same ops evaluate every element on its logged
/// piece, so probes around a point follow one smooth extension of the
/// function instead of jumping across kinks. Thread-local.
class PieceLock {
public:
    enum class Mode { off, record, replay };
    /// Rewinds the replay cursor; record mode also clears the log.
    static void set(Mode mode);
    static Mode mode();
};

enum class Activation { relu, leaky_relu, elu, identity };

template <typename Real>
Tensor<Real> activation(const Tensor<Real>& x, Activation mode, Real leaky_slope = Real(0.2));

template <typename Real>
Tensor<Real> relu(const Tensor<Real>& x) { return activation(x, Activation::relu); }

/// Hard clamp to [-T, T]; derivative 1 on the closed interval, 0 outside.
template <typename Real>
Tensor<Real> tlu(const Tensor<Real>& x, Real threshold);

template <typename Real>
Tensor<Real> add(const Tensor<Real>& a, const Tensor<Real>& b);

template <typename Real>
Tensor<Real> mul(const Tensor<Real>& a, const Tensor<Real>& b);

template <typename Real>
Tensor<Real> scale(const Tensor<Real>& x, Real factor);

template <typename Real>
Tensor<Real> sum(const Tensor<Real>& x);

template <typename Real>
Tensor<Real> reshape(const Tensor<Real>& x, Shape shape);

/// Stacks along the channel axis, a first. [C,H,W] or [N,C,H,W].
template <typename Real>
Tensor<Real> concat_channels(const Tensor<Real>& a, const Tensor<Real>& b);

/// [N,C,H,W] -> [N,1,H,W].
template <typename Real>
Tensor<Real> channel_mean(const Tensor<Real>& x);

/// [N,1,H,W] -> [N,C,H,W] by replication.
template <typename Real>
Tensor<Real> repeat_channels(const Tensor<Real>& x, std::size_t channels);

/// out[i] = x[index[i]]; the backward pass scatter-adds.
template <typename Real>
Tensor<Real> gather(const Tensor<Real>& x, Shape shape, std::span<const std::size_t> index);

/// s is [N,M,2]; returns e[n,i,j] = s[n,i,0] + s[n,j,1].
template <typename Real>
Tensor<Real> pairwise_logits(const Tensor<Real>& s);

/// Numerically stable softmax over the last axis.
template <typename Real>
Tensor<Real> softmax(const Tensor<Real>& x);

/// Mean cross-entropy of [N,K] logits against integer labels (log-sum-exp form).
template <typename Real>
Tensor<Real> softmax_cross_entropy(const Tensor<Real>& logits, std::span<const int> labels);

}  // namespace jgn
