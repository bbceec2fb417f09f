#include "jgn/gradcheck_suite.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <stdexcept>

#include "jgn/dataset.hpp"
#include "jgn/grad_check.hpp"
#include "jgn/trainer.hpp"

namespace jgn {
namespace {

using T = Tensor<double>;

struct Leaf {
    std::string name;
    T tensor;
};

T random_tensor(Shape shape, Rng& rng, double lo = -1, double hi = 1) {
    auto t = T::zeros(std::move(shape));
    std::uniform_real_distribution<double> dist(lo, hi);
    for (auto& v : t.mutable_data()) v = dist(rng);
    return t;
}

// Values with |v| in [lo, hi] and random sign, away from the kink at 0.
T signed_away_from_zero(Shape shape, Rng& rng, double lo, double hi) {
    auto t = random_tensor(std::move(shape), rng, lo, hi);
    std::bernoulli_distribution sign(0.5);
    for (auto& v : t.mutable_data())
        if (sign(rng)) v = -v;
    return t;
}

// Random projection keeps the scalar loss sensitive to every output element
// (a plain sum of a normalized output has zero gradient).
T project(const T& out, Rng& rng) {
    if (out.rank() == 0) return out;
    const double norm = 1.0 / std::sqrt(static_cast<double>(out.numel()));
    return sum(mul(out, random_tensor(out.shape(), rng, -norm, norm)));
}

std::vector<std::size_t> pick_coords(std::size_t numel, std::size_t want, Rng& rng) {
    std::vector<std::size_t> all(numel);
    std::iota(all.begin(), all.end(), std::size_t{0});
    if (numel <= want) return all;
    std::shuffle(all.begin(), all.end(), rng);
    all.resize(want);
    std::sort(all.begin(), all.end());
    return all;
}

void check_leaves(const std::string& prefix, const std::function<T()>& loss, std::vector<Leaf> leaves,
                  const GradcheckOptions& opt, Rng& rng, std::vector<GroupError>& out) {
    for (auto& l : leaves) {
        l.tensor.set_requires_grad(true);
        l.tensor.zero_grad();
    }
    loss().backward();
    std::vector<std::vector<double>> analytic;
    for (auto& l : leaves) {
        analytic.emplace_back(l.tensor.numel(), 0.0);
        if (l.tensor.has_grad()) std::copy(l.tensor.grad().begin(), l.tensor.grad().end(), analytic.back().begin());
    }
    // probes need no tape
    for (auto& l : leaves) l.tensor.set_requires_grad(false);
    for (std::size_t k = 0; k < leaves.size(); ++k) {
        GroupError g{prefix.empty() ? leaves[k].name : prefix + "." + leaves[k].name, 0, 0};
        for (auto i : pick_coords(leaves[k].tensor.numel(), opt.coords_per_group, rng)) {
            const double numeric = numeric_partial(loss, leaves[k].tensor, i, opt.step);
            g.max_rel_error = std::max(g.max_rel_error, relative_error(analytic[k][i], numeric));
            ++g.coords;
        }
        out.push_back(g);
    }
    for (auto& l : leaves) {
        l.tensor.set_requires_grad(true);
        l.tensor.zero_grad();
    }
}

std::vector<Leaf> trainable(const ParamList<double>& params) {
    std::vector<Leaf> leaves;
    for (const auto& p : params)
        if (p.kind != ParamKind::buffer) leaves.push_back({p.name, p.tensor});
    return leaves;
}

void tensor_core(const GradcheckOptions& opt, Rng& rng, std::vector<GroupError>& out) {
    auto run = [&](const std::string& name, std::vector<Leaf> leaves, std::function<T()> f) {
        const Rng proj = substream(opt.seed, "project:" + name);
        check_leaves(
            name,
            [&] {
                Rng p = proj;
                return project(f(), p);
            },
            std::move(leaves), opt, rng, out);
    };

    {
        auto x = random_tensor({2, 3, 5, 5}, rng), k = random_tensor({4, 3, 3, 3}, rng), b = random_tensor({4}, rng);
        run("conv2d", {{"x", x}, {"kernel", k}, {"bias", b}}, [=] { return conv2d(x, k, b, 1, 1); });
        run("conv2d_stride2", {{"x", x}, {"kernel", k}}, [=] { return conv2d(x, k, T{}, 2, 1); });
    }
    {
        auto x = random_tensor({2, 2, 6, 6}, rng);
        run("avg_pool2d", {{"x", x}}, [=] { return avg_pool2d(x, 3, 2, 1); });
        run("global_avg_pool", {{"x", x}}, [=] { return global_avg_pool(x); });
    }
    {
        auto x = random_tensor({3, 2, 3, 3}, rng);
        auto bn = BnState<double>::create(2);
        std::copy_n(random_tensor({2}, rng, 0.5, 1.5).data().begin(), 2, bn.gamma.mutable_data().begin());
        std::copy_n(random_tensor({2}, rng).data().begin(), 2, bn.beta.mutable_data().begin());
        run("batch_norm", {{"x", x}, {"gamma", bn.gamma}, {"beta", bn.beta}},
            [x, bn]() mutable { return batch_norm(x, bn, true); });
        auto frozen = bn;
        std::copy_n(random_tensor({2}, rng, 0.5, 2).data().begin(), 2, frozen.running_var.mutable_data().begin());
        run("batch_norm_inference", {{"x", x}, {"gamma", frozen.gamma}},
            [x, frozen]() mutable { return batch_norm(x, frozen, false); });
    }
    {
        auto x = random_tensor({2, 3, 4}, rng), w = random_tensor({5, 4}, rng), b = random_tensor({5}, rng);
        run("linear", {{"x", x}, {"weight", w}, {"bias", b}}, [=] { return linear(x, w, b); });
        auto v = random_tensor({4}, rng);
        run("dense", {{"x", v}, {"weight", w}, {"bias", b}}, [=] { return dense(v, w, b); });
    }
    {
        auto a = random_tensor({2, 3, 4}, rng), b = random_tensor({2, 4, 5}, rng);
        run("bmm", {{"a", a}, {"b", b}}, [=] { return bmm(a, b); });
    }
    {
        auto x = signed_away_from_zero({24}, rng, 0.1, 2);
        run("relu", {{"x", x}}, [=] { return activation(x, Activation::relu); });
        run("leaky_relu", {{"x", x}}, [=] { return activation(x, Activation::leaky_relu); });
        run("elu", {{"x", x}}, [=] { return activation(x, Activation::elu); });
        // stay out of the band around the breakpoints +-3
        auto y = signed_away_from_zero({24}, rng, 0, 6);
        for (auto& v : y.mutable_data())
            if (std::abs(std::abs(v) - 3) < 0.1) v *= 0.5;
        run("tlu", {{"x", y}}, [=] { return tlu(y, 3.0); });
    }
    {
        auto a = random_tensor({2, 3, 2, 2}, rng), b = random_tensor({2, 3, 2, 2}, rng);
        run("add", {{"a", a}, {"b", b}}, [=] { return add(a, b); });
        run("mul", {{"a", a}, {"b", b}}, [=] { return mul(a, b); });
        run("scale", {{"x", a}}, [=] { return scale(a, 2.5); });
        run("reshape", {{"x", a}}, [=] { return reshape(a, {6, 4}); });
        auto c = random_tensor({2, 1, 2, 2}, rng);
        run("concat_channels", {{"a", a}, {"b", c}}, [=] { return concat_channels(a, c); });
        run("channel_mean", {{"x", a}}, [=] { return channel_mean(a); });
        run("repeat_channels", {{"x", c}}, [=] { return repeat_channels(c, 3); });
        std::vector<std::size_t> index{0, 5, 5, 11, 3, 3, 3, 7};
        run("gather", {{"x", a}}, [=] { return gather(a, {2, 4}, index); });
    }
    {
        auto s = random_tensor({2, 4, 2}, rng);
        run("pairwise_logits", {{"s", s}}, [=] { return pairwise_logits(s); });
        auto z = random_tensor({2, 3, 4}, rng, -3, 3);
        run("softmax", {{"x", z}}, [=] { return softmax(z); });
        auto logits = random_tensor({4, 2}, rng, -3, 3);
        std::vector<int> labels{0, 1, 1, 0};
        run("softmax_cross_entropy", {{"logits", logits}}, [=] { return softmax_cross_entropy(logits, labels); });
    }
}

T planes_batch(const GradcheckOptions& opt, std::vector<int>* labels) {
    SynthOptions so;
    so.pairs = opt.pairs;
    so.size = opt.size;
    so.rate = 0.5;
    so.seed = opt.seed;
    const auto ds = synthesize(so);
    const auto planes = decompress_pairs(ds);
    std::vector<const LuminancePlane*> ptrs;
    for (const auto& p : planes) ptrs.push_back(&p);
    if (labels) {
        labels->clear();
        for (std::size_t i = 0; i < planes.size(); ++i) labels->push_back(static_cast<int>(i % 2));
    }
    return planes_to_tensor<double>(ptrs);
}

// Module scopes: a fresh module with its normal initialization, driven in
// training mode by a random projection of its output.
template <typename Module>
void module_check(const std::string& prefix, Module& m, const T& x, bool check_input, const GradcheckOptions& opt,
                  Rng& rng, std::vector<GroupError>& out) {
    ParamList<double> params;
    m.collect(prefix, params);
    Rng init = substream(opt.seed, "init");
    init_param_list(params, init);
    auto leaves = trainable(params);
    if (check_input) leaves.push_back({prefix + ".input", x});
    Rng proj = substream(opt.seed, "project:" + prefix);
    check_leaves(
        "",
        [&] {
            Rng p = proj;
            return project(m.forward(x, true), p);
        },
        std::move(leaves), opt, rng, out);
}

void model_check(const GradcheckOptions& opt, Rng& rng, std::vector<GroupError>& out) {
    NetworkConfig nc;
    nc.height = nc.width = opt.size;
    nc.ablation = opt.ablation;
    Network<double> net(nc);
    Rng init = substream(opt.seed, "init");
    init_params(net, init);
    std::vector<int> labels;
    const auto x = planes_batch(opt, &labels);
    check_leaves(
        "", [&] { return softmax_cross_entropy(net.logits(x, true), labels); }, trainable(net.params()), opt, rng,
        out);
}

}  // namespace

const std::vector<std::string>& gradcheck_scopes() {
    static const std::vector<std::string> scopes{"tensor-core", "preprocess", "sfe", "gal", "backbone", "model"};
    return scopes;
}

std::vector<GroupError> run_gradcheck(const std::string& scope, const GradcheckOptions& opt) {
    std::vector<GroupError> out;
    if (scope == "all") {
        for (const auto& s : gradcheck_scopes()) {
            auto part = run_gradcheck(s, opt);
            out.insert(out.end(), part.begin(), part.end());
        }
        return out;
    }
    Rng rng = substream(opt.seed, "gradcheck:" + scope);
    if (scope == "tensor-core") {
        tensor_core(opt, rng, out);
    } else if (scope == "preprocess") {
        Preprocess<double> pre;
        const auto x = planes_batch(opt, nullptr);
        module_check("pre", pre, x, false, opt, rng, out);
    } else if (scope == "sfe") {
        Sfe<double> sfe(kResidualChannels);
        const auto x = random_tensor({2, kResidualChannels, 8, 8}, rng);
        module_check("sfe", sfe, x, true, opt, rng, out);
    } else if (scope == "gal") {
        Gal<double> gal(16, 16);
        const auto x = random_tensor({2, kResidualChannels, 16, 16}, rng);
        module_check("gal", gal, x, true, opt, rng, out);
    } else if (scope == "backbone") {
        Backbone<double> bb(kResidualChannels);
        const auto x = random_tensor({4, kResidualChannels, 16, 16}, rng);
        ParamList<double> params;
        bb.collect("backbone", params);
        Rng init = substream(opt.seed, "init");
        init_param_list(params, init);
        auto leaves = trainable(params);
        leaves.push_back({"backbone.input", x});
        const std::vector<int> labels{0, 1, 0, 1};
        check_leaves(
            "", [&] { return softmax_cross_entropy(bb.logits(x, true), labels); }, std::move(leaves), opt, rng, out);
    } else if (scope == "model") {
        model_check(opt, rng, out);
    } else {
        throw std::invalid_argument("unknown gradcheck scope '" + scope + "'");
    }
    return out;
}

double max_error(const std::vector<GroupError>& groups) {
    double worst = 0;
    for (const auto& g : groups) worst = std::max(worst, g.max_rel_error);
    return worst;
}

}  // namespace jgn
