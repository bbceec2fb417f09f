#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "jgn/checkpoint.hpp"
#include "jgn/dataset.hpp"
#include "jgn/network.hpp"

namespace jgn {

struct TrainConfig {
    std::size_t batch_pairs = 16;
    double r1 = 1e-3;
    double r2 = 1e-4;
    std::size_t phase1_epochs = 4;
    std::size_t phase2_epochs = 1;
    double l2 = 2e-4;
    std::uint64_t seed = 0;
    Precision precision = Precision::standard;
    Ablation ablation = Ablation::full;
    std::optional<std::filesystem::path> init_from;
    PreprocessConfig preprocess;

    /// Throws std::invalid_argument unless r1 > r2 > 0 and batch_pairs >= 1.
    void validate() const;
};

/// Adamax with beta1=0.9, beta2=0.999, eps=1e-8:
///   m = b1 m + (1-b1) g;  u = max(b2 u, |g|);  theta -= lr/(1-b1^t) * m/(u+eps)
template <typename Real>
struct AdamaxState {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::uint64_t t = 0;
    std::vector<std::vector<Real>> m, u;
};

/// One update of every trainable, non-frozen entry with a gradient. The L2
/// term 2*l2*theta is added to the gradient of `weight` entries only.
/// Throws NumericError on a non-finite gradient before changing anything.
template <typename Real>
void adamax_step(ParamList<Real>& params, AdamaxState<Real>& state, double lr, double l2);

struct EvalReport {
    double p_fa = 0, p_md = 0, p_e = 0;
    double accuracy = 0;          // decision p_stego > 0.5
    double threshold_at_min = 0;  // stego iff score >= threshold
};

/// Minimum of (P_FA + P_MD)/2 over thresholds at -inf, +inf and the midpoints
/// of adjacent distinct scores; ties go to the smallest threshold.
EvalReport evaluate_pe(std::span<const double> cover_scores, std::span<const double> stego_scores);

struct EpochRecord {
    std::size_t epoch = 0;  // 1-based
    int phase = 1;
    double lr = 0;
    double train_loss = 0;
    double train_acc = 0;
    double val_acc = 0;
    double val_pe = 0;
};

struct TrainResult {
    std::vector<EpochRecord> log;
    EvalReport initial_val;  // before the first update
    EvalReport best_val;
    std::size_t best_epoch = 0;
};

std::string epoch_log_csv(const std::vector<EpochRecord>& log);

/// Decompressed planes of a dataset, ordered cover0, stego0, cover1, ...
std::vector<LuminancePlane> decompress_pairs(const Dataset& ds);

/// p_stego for every cover and every stego of the dataset (inference mode).
template <typename Real>
void score_dataset(Network<Real>& net, const std::vector<LuminancePlane>& planes, std::vector<double>& cover_scores,
                   std::vector<double>& stego_scores, std::size_t chunk = 32);

template <typename Real>
EvalReport evaluate(Network<Real>& net, const std::vector<LuminancePlane>& planes);

/// One minibatch of cover/stego twins: image 2k is the cover and 2k+1 the
/// stego of pair k, labelled 0 and 1.
struct Minibatch {
    std::vector<std::size_t> pairs;
    std::vector<std::size_t> images;
    std::vector<int> labels;
};

/// Shuffles pair order and cuts it into batches of `batch_pairs` pairs (the
/// last batch may be smaller).
std::vector<Minibatch> make_minibatches(std::size_t pair_count, std::size_t batch_pairs, Rng& rng);

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Two-phase schedule (r1 then r2) over minibatches of cover/stego twins.
/// After the last epoch the network holds the parameters with the best
/// validation accuracy over the final 20% of epochs (ties -> later epoch).
template <typename Real>
TrainResult train(Network<Real>& net, const TrainConfig& cfg, const Dataset& train_set, const Dataset& val_set,
                  const EpochCallback& on_epoch = {});

/// Builds the network for a dataset shape, initializes it from the "init"
/// substream of cfg.seed, then overlays cfg.init_from when set.
template <typename Real>
void prepare_network(Network<Real>& net, const TrainConfig& cfg);

NetworkConfig network_config(const TrainConfig& cfg, std::size_t h, std::size_t w);

}  // namespace jgn
