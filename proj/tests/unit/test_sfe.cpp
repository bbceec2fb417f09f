#include <doctest.h>

#include "helpers.hpp"
#include "jgn/gradcheck_suite.hpp"
#include "jgn/network.hpp"
#include "jgn/sfe.hpp"

using namespace jgn;
using testutil::TD;

namespace {

template <typename M>
ParamList<double> init(M& module, std::uint64_t seed) {
    ParamList<double> params;
    module.collect("m", params);
    Rng rng(seed);
    init_param_list(params, rng);
    return params;
}

}  // namespace

TEST_CASE("SFEL") {
    std::mt19937_64 rng(1);
    SUBCASE("zero parameters give zero output") {
        Sfel<double> layer;
        CHECK(parameter_count<double>(init(layer, 1)) == sfel_parameter_count(30));
        for (auto* c : {&layer.conv1, &layer.conv2, &layer.shortcut}) {
            for (auto& v : c->weight.mutable_data()) v = 0;
            for (auto& v : c->bias.mutable_data()) v = 0;
        }
        auto y = layer.forward(testutil::random_tensor({2, 30, 8, 8}, rng), true);
        for (double v : y.data()) CHECK(v == 0);
    }
    SUBCASE("spatial size is preserved") {
        Sfel<double> layer;
        init(layer, 2);
        for (auto [h, w] : {std::pair{8, 8}, {5, 7}, {16, 4}})
            CHECK(layer.forward(testutil::random_tensor({2, 30, std::size_t(h), std::size_t(w)}, rng), true).shape() ==
                  Shape{2, 30, std::size_t(h), std::size_t(w)});
        CHECK_THROWS_AS(layer.forward(testutil::random_tensor({2, 29, 8, 8}, rng), true), ShapeError);
    }
    SUBCASE("gradient reaches the input through the shortcut alone") {
        Sfel<double> layer;
        init(layer, 3);
        for (auto& v : layer.conv1.weight.mutable_data()) v = 0;
        for (auto& v : layer.conv2.weight.mutable_data()) v = 0;
        auto x = testutil::random_tensor({2, 30, 4, 4}, rng, -1, 1, true);
        auto y = layer.forward(x, true);
        sum(mul(y, testutil::random_tensor(y.shape(), rng))).backward();
        double norm = 0;
        for (double g : x.grad()) norm += g * g;
        CHECK(norm > 0);
    }
}

TEST_CASE("SFE") {
    std::mt19937_64 rng(4);
    Sfe<double> sfe;
    CHECK(parameter_count<double>(init(sfe, 5)) == sfe_parameter_count(30));
    CHECK(sfe_parameter_count(30) == 2 * sfel_parameter_count(30) + 30 * 60 + 3 * 30);

    auto x = testutil::random_tensor({2, 30, 8, 8}, rng);
    CHECK(sfe.forward(x, true).shape() == Shape{2, 30, 8, 8});
    Sfe<double> second;
    init(second, 6);
    CHECK(second.forward(sfe.forward(x, true), true).shape() == Shape{2, 30, 8, 8});

    SUBCASE("fusion selecting the first SFEL reduces to relu(BN(y1))") {
        auto w = sfe.fuse.weight.mutable_data();
        std::fill(w.begin(), w.end(), 0.0);
        for (std::size_t c = 0; c < 30; ++c) w[c * 60 + c] = 1;
        for (auto& b : sfe.fuse.bias.mutable_data()) b = 0;
        auto out = sfe.forward(x, true);
        // same forward path, assembled by hand from the first SFEL
        Sfe<double> copy;
        init(copy, 5);
        auto y1 = copy.sfel_a.forward(x, true);
        auto bn = BnState<double>::create(30);
        auto expect = relu(batch_norm(y1, bn, true));
        for (std::size_t i = 0; i < out.numel(); ++i) CHECK(out.data()[i] == doctest::Approx(expect.data()[i]));
    }
}

TEST_CASE("SFE gradients") {
    for (const auto& g : run_gradcheck("sfe")) {
        INFO(g.group);
        CHECK(g.max_rel_error < 1e-3);
    }
}
