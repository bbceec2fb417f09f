#include "jgn/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace jgn {

void TrainConfig::validate() const {
    if (batch_pairs < 1) throw std::invalid_argument("batch_pairs must be at least 1");
    if (!(r1 > r2 && r2 > 0)) throw std::invalid_argument("learning rates must satisfy r1 > r2 > 0");
    if (phase1_epochs + phase2_epochs == 0) throw std::invalid_argument("at least one epoch is required");
    if (!(l2 >= 0)) throw std::invalid_argument("l2 must be non-negative");
}

template <typename Real>
void adamax_step(ParamList<Real>& params, AdamaxState<Real>& state, double lr, double l2) {
    if (state.m.size() != params.size()) {
        state.m.assign(params.size(), {});
        state.u.assign(params.size(), {});
    }
    for (const auto& p : params)
        if (p.kind != ParamKind::buffer && p.tensor.has_grad()) check_finite<Real>(p.tensor.grad(), p.name.c_str());

    state.t += 1;
    const double step = lr / (1.0 - std::pow(state.beta1, static_cast<double>(state.t)));
    for (std::size_t k = 0; k < params.size(); ++k) {
        auto& p = params[k];
        if (p.kind == ParamKind::buffer || p.frozen || !p.tensor.has_grad()) continue;
        auto theta = p.tensor.mutable_data();
        auto grad = p.tensor.grad();
        auto& m = state.m[k];
        auto& u = state.u[k];
        if (m.size() != theta.size()) {
            m.assign(theta.size(), Real(0));
            u.assign(theta.size(), Real(0));
        }
        const double decay = p.kind == ParamKind::weight ? 2.0 * l2 : 0.0;
        for (std::size_t i = 0; i < theta.size(); ++i) {
            const double g = static_cast<double>(grad[i]) + decay * static_cast<double>(theta[i]);
            const double mi = state.beta1 * static_cast<double>(m[i]) + (1.0 - state.beta1) * g;
            const double ui = std::max(state.beta2 * static_cast<double>(u[i]), std::abs(g));
            m[i] = static_cast<Real>(mi);
            u[i] = static_cast<Real>(ui);
            theta[i] = static_cast<Real>(static_cast<double>(theta[i]) - step * mi / (ui + state.eps));
        }
    }
}

EvalReport evaluate_pe(std::span<const double> cover_scores, std::span<const double> stego_scores) {
    if (cover_scores.empty() || stego_scores.empty())
        throw std::invalid_argument("evaluate_pe needs at least one cover and one stego score");
    std::vector<double> covers(cover_scores.begin(), cover_scores.end());
    std::vector<double> stegos(stego_scores.begin(), stego_scores.end());
    std::sort(covers.begin(), covers.end());
    std::sort(stegos.begin(), stegos.end());
    std::vector<double> all(covers);
    all.insert(all.end(), stegos.begin(), stegos.end());
    std::sort(all.begin(), all.end());
    all.erase(std::unique(all.begin(), all.end()), all.end());

    std::vector<double> thresholds{-INFINITY};
    for (std::size_t i = 1; i < all.size(); ++i) thresholds.push_back(all[i - 1] + (all[i] - all[i - 1]) / 2);
    thresholds.push_back(INFINITY);

    const double nc = static_cast<double>(covers.size()), ns = static_cast<double>(stegos.size());
    EvalReport best;
    best.p_e = INFINITY;
    for (double t : thresholds) {
        // flagged = score >= t
        const auto fa = covers.end() - std::lower_bound(covers.begin(), covers.end(), t);
        const auto md = std::lower_bound(stegos.begin(), stegos.end(), t) - stegos.begin();
        const double p_fa = static_cast<double>(fa) / nc, p_md = static_cast<double>(md) / ns;
        const double pe = (p_fa + p_md) / 2;
        if (pe < best.p_e) {
            best.p_e = pe;
            best.p_fa = p_fa;
            best.p_md = p_md;
            best.threshold_at_min = t;
        }
    }
    std::size_t correct = 0;
    for (double s : covers) correct += s > 0.5 ? 0 : 1;
    for (double s : stegos) correct += s > 0.5 ? 1 : 0;
    best.accuracy = static_cast<double>(correct) / (nc + ns);
    return best;
}

std::string epoch_log_csv(const std::vector<EpochRecord>& log) {
    std::ostringstream out;
    out << "epoch,phase,lr,train_loss,train_acc,val_acc,val_pe\n";
    char line[256];
    for (const auto& r : log) {
        std::snprintf(line, sizeof line, "%zu,%d,%.6g,%.6f,%.6f,%.6f,%.6f\n", r.epoch, r.phase, r.lr, r.train_loss,
                      r.train_acc, r.val_acc, r.val_pe);
        out << line;
    }
    return out.str();
}

std::vector<LuminancePlane> decompress_pairs(const Dataset& ds) {
    std::vector<LuminancePlane> planes;
    planes.reserve(2 * ds.pairs.size());
    for (const auto& p : ds.pairs) {
        planes.push_back(decompress(p.cover));
        planes.push_back(decompress(p.stego));
    }
    return planes;
}

template <typename Real>
void score_dataset(Network<Real>& net, const std::vector<LuminancePlane>& planes, std::vector<double>& cover_scores,
                   std::vector<double>& stego_scores, std::size_t chunk) {
    cover_scores.clear();
    stego_scores.clear();
    chunk = std::max<std::size_t>(2, chunk - chunk % 2);
    for (std::size_t start = 0; start < planes.size(); start += chunk) {
        std::vector<const LuminancePlane*> batch;
        for (std::size_t i = start; i < std::min(planes.size(), start + chunk); ++i) batch.push_back(&planes[i]);
        auto probs = net.probabilities(planes_to_tensor<Real>(batch), false).data();
        for (std::size_t i = 0; i < batch.size(); ++i)
            ((start + i) % 2 == 0 ? cover_scores : stego_scores).push_back(static_cast<double>(probs[2 * i + 1]));
    }
}

template <typename Real>
EvalReport evaluate(Network<Real>& net, const std::vector<LuminancePlane>& planes) {
    std::vector<double> covers, stegos;
    score_dataset(net, planes, covers, stegos);
    return evaluate_pe(covers, stegos);
}

std::vector<Minibatch> make_minibatches(std::size_t pair_count, std::size_t batch_pairs, Rng& rng) {
    if (batch_pairs < 1) throw std::invalid_argument("batch_pairs must be at least 1");
    std::vector<std::size_t> order(pair_count);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<Minibatch> out;
    for (std::size_t start = 0; start < pair_count; start += batch_pairs) {
        Minibatch mb;
        for (std::size_t i = start; i < std::min(pair_count, start + batch_pairs); ++i) {
            mb.pairs.push_back(order[i]);
            mb.images.push_back(2 * order[i]);
            mb.images.push_back(2 * order[i] + 1);
            mb.labels.push_back(0);
            mb.labels.push_back(1);
        }
        out.push_back(std::move(mb));
    }
    return out;
}

NetworkConfig network_config(const TrainConfig& cfg, std::size_t h, std::size_t w) {
    NetworkConfig nc;
    nc.height = h;
    nc.width = w;
    nc.ablation = cfg.ablation;
    nc.preprocess = cfg.preprocess;
    return nc;
}

template <typename Real>
void prepare_network(Network<Real>& net, const TrainConfig& cfg) {
    Rng init_rng = substream(cfg.seed, "init");
    init_params(net, init_rng);
    if (cfg.init_from) apply_checkpoint(load_checkpoint(*cfg.init_from), net.params());
}

template <typename Real>
TrainResult train(Network<Real>& net, const TrainConfig& cfg, const Dataset& train_set, const Dataset& val_set,
                  const EpochCallback& on_epoch) {
    cfg.validate();
    if (train_set.pairs.empty() || val_set.pairs.empty()) throw std::invalid_argument("datasets must be nonempty");
    const auto& nc = net.config();
    for (const Dataset* ds : {&train_set, &val_set})
        if (ds->h != nc.height || ds->w != nc.width)
            throw ShapeError("dataset images are " + std::to_string(ds->h) + "x" + std::to_string(ds->w) +
                             " but the network expects " + std::to_string(nc.height) + "x" + std::to_string(nc.width));

    const auto train_planes = decompress_pairs(train_set);
    const auto val_planes = decompress_pairs(val_set);
    auto& params = net.params();
    AdamaxState<Real> opt;
    Rng shuffle_rng = substream(cfg.seed, "shuffle");

    TrainResult result;
    result.initial_val = evaluate(net, val_planes);

    const std::size_t total = cfg.phase1_epochs + cfg.phase2_epochs;
    // Model selection window: final 20% of epochs, at least one.
    const std::size_t window = std::max<std::size_t>(1, (total + 4) / 5);
    const std::size_t window_start = total - window + 1;
    std::vector<std::vector<Real>> best;
    double best_acc = -1;

    for (std::size_t epoch = 1; epoch <= total; ++epoch) {
        const int phase = epoch <= cfg.phase1_epochs ? 1 : 2;
        const double lr = phase == 1 ? cfg.r1 : cfg.r2;
        double loss_sum = 0;
        std::size_t correct = 0, seen = 0;
        for (const auto& mb : make_minibatches(train_set.pairs.size(), cfg.batch_pairs, shuffle_rng)) {
            std::vector<const LuminancePlane*> batch;
            for (auto i : mb.images) batch.push_back(&train_planes[i]);
            for (auto& p : params) p.tensor.zero_grad();
            auto logits = net.logits(planes_to_tensor<Real>(batch), true);
            auto loss = softmax_cross_entropy(logits, mb.labels);
            loss.backward();
            adamax_step(params, opt, lr, cfg.l2);

            auto z = logits.data();
            for (std::size_t i = 0; i < mb.labels.size(); ++i) {
                const int predicted = z[2 * i + 1] > z[2 * i] ? 1 : 0;
                correct += predicted == mb.labels[i] ? 1 : 0;
            }
            loss_sum += static_cast<double>(loss.item()) * static_cast<double>(mb.labels.size());
            seen += mb.labels.size();
        }
        const auto val = evaluate(net, val_planes);
        EpochRecord rec{epoch, phase, lr, loss_sum / static_cast<double>(seen),
                        static_cast<double>(correct) / static_cast<double>(seen), val.accuracy, val.p_e};
        result.log.push_back(rec);
        if (on_epoch) on_epoch(rec);

        if (epoch >= window_start && val.accuracy >= best_acc) {
            best_acc = val.accuracy;
            result.best_epoch = epoch;
            result.best_val = val;
            best.clear();
            for (const auto& p : params) best.emplace_back(p.tensor.data().begin(), p.tensor.data().end());
        }
    }
    for (std::size_t k = 0; k < params.size(); ++k) std::copy(best[k].begin(), best[k].end(), params[k].tensor.mutable_data().begin());
    return result;
}

template void adamax_step(ParamList<float>&, AdamaxState<float>&, double, double);
template void adamax_step(ParamList<double>&, AdamaxState<double>&, double, double);
template void score_dataset(Network<float>&, const std::vector<LuminancePlane>&, std::vector<double>&,
                            std::vector<double>&, std::size_t);
template void score_dataset(Network<double>&, const std::vector<LuminancePlane>&, std::vector<double>&,
                            std::vector<double>&, std::size_t);
template EvalReport evaluate(Network<float>&, const std::vector<LuminancePlane>&);
template EvalReport evaluate(Network<double>&, const std::vector<LuminancePlane>&);
template void prepare_network(Network<float>&, const TrainConfig&);
template void prepare_network(Network<double>&, const TrainConfig&);
template TrainResult train(Network<float>&, const TrainConfig&, const Dataset&, const Dataset&, const EpochCallback&);
template TrainResult train(Network<double>&, const TrainConfig&, const Dataset&, const Dataset&, const EpochCallback&);

}  // namespace jgn
