#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "helpers.hpp"
#include "jgn/gal.hpp"
#include "jgn/gradcheck_suite.hpp"
#include "jgn/network.hpp"

using namespace jgn;
using testutil::TD;

TEST_CASE("block graph cardinalities") {
    for (auto [h, w] : {std::pair{8, 8}, {16, 16}, {64, 64}, {256, 256}, {32, 64}}) {
        auto g = BlockGraph::complete(std::size_t(h), std::size_t(w));
        CHECK(g.node_count() == 64);
        CHECK(g.edge_count() == 2016);
        CHECK(g.feature_dim == std::size_t(h * w / 64));
    }
    CHECK(BlockGraph::complete(256, 256).feature_dim == 1024);
    auto g = BlockGraph::complete(16, 16);
    for (auto [i, j] : g.edges) CHECK(i < j);
    auto sorted = g.edges;
    std::sort(sorted.begin(), sorted.end());
    CHECK(std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end());
    CHECK_THROWS_AS(BlockGraph::complete(12, 16), ShapeError);
}

TEST_CASE("fold and unfold") {
    // pixel (y=9, x=3) of a 16x16 map is node 8*(9%8)+3%8 = 11, feature (9/8)*2+3/8 = 2
    std::vector<double> v(256, 0.0);
    v[9 * 16 + 3] = 1;
    auto nodes = fold_to_blocks(TD({16, 16}, v));
    CHECK(nodes.shape() == Shape{64, 4});
    for (std::size_t k = 0; k < 256; ++k) CHECK(nodes.data()[k] == (k == 11 * 4 + 2 ? 1.0 : 0.0));

    std::vector<double> nf(256, 0.0);
    nf[11 * 4 + 2] = 5;
    auto map = unfold_from_blocks(TD({64, 4}, nf), 16, 16);
    CHECK(map.shape() == Shape{16, 16});
    for (std::size_t k = 0; k < 256; ++k) CHECK(map.data()[k] == (k == 9 * 16 + 3 ? 5.0 : 0.0));

    for (double c : testutil::values(unfold_from_blocks(TD::full({64, 4}, 2.5), 16, 16))) CHECK(c == 2.5);

    std::mt19937_64 rng(1);
    auto m = testutil::random_tensor({3, 1, 24, 40}, rng);
    auto folded = fold_to_blocks(m);
    CHECK(folded.shape() == Shape{3, 64, 15});
    CHECK(testutil::values(unfold_from_blocks(folded, 24, 40)) == testutil::values(m));
    CHECK(fold_index(16, 16)[11 * 4 + 2] == 9 * 16 + 3);
    CHECK_THROWS_AS(unfold_from_blocks(folded, 24, 48), ShapeError);
    CHECK_THROWS_AS(fold_to_blocks(TD::zeros({12, 16})), ShapeError);
}

TEST_CASE("gat_layer") {
    SUBCASE("zero attention vector averages uniformly") {
        GatLayer<double> layer(1);
        layer.W.mutable_data()[0] = 1;
        auto r = gat_layer(TD({2, 1}, {2, 0}), layer, Activation::identity);
        CHECK(r.out.data()[0] == doctest::Approx(1.0));
        CHECK(r.out.data()[1] == doctest::Approx(1.0));
        for (double a : r.attention.data()) CHECK(a == doctest::Approx(0.5));

        std::mt19937_64 rng(2);
        GatLayer<double> wide(3);
        wide.W = testutil::random_tensor({3, 3}, rng);
        auto x = testutil::random_tensor({5, 3}, rng);
        auto y = gat_layer(x, wide, Activation::elu);
        auto wx = dense(x, wide.W);
        for (std::size_t f = 0; f < 3; ++f) {
            double mean = 0;
            for (std::size_t j = 0; j < 5; ++j) mean += wx.data()[j * 3 + f] / 5;
            const double expect = mean > 0 ? mean : std::expm1(mean);
            for (std::size_t i = 0; i < 5; ++i) CHECK(y.out.data()[i * 3 + f] == doctest::Approx(expect));
        }
    }
    SUBCASE("hand-evaluated attention") {
        // F=1, W=[1], a=[1,1]: e_ij = leaky(h_i + h_j)
        GatLayer<double> layer(1);
        layer.W.mutable_data()[0] = 1;
        layer.a.mutable_data()[0] = 1;
        layer.a.mutable_data()[1] = 1;
        auto r = gat_layer(TD({2, 1}, {1, -2}), layer, Activation::identity);
        // node 0: e = {2, leaky(-1) = -0.2}
        const double a00 = 1 / (1 + std::exp(-2.2));
        CHECK(r.attention.data()[0] == doctest::Approx(a00));
        CHECK(r.out.data()[0] == doctest::Approx(a00 * 1 + (1 - a00) * -2));
        // node 1: e = {-0.2, leaky(-4) = -0.8}
        const double a10 = 1 / (1 + std::exp(-0.6));
        CHECK(r.out.data()[1] == doctest::Approx(a10 * 1 + (1 - a10) * -2));
    }
    SUBCASE("identical nodes give identical outputs") {
        std::mt19937_64 rng(3);
        GatLayer<double> layer(4);
        layer.W = testutil::random_tensor({4, 4}, rng);
        layer.a = testutil::random_tensor({8}, rng);
        auto row = testutil::random_tensor({4}, rng);
        std::vector<double> v;
        for (int i = 0; i < 6; ++i) v.insert(v.end(), row.data().begin(), row.data().end());
        auto y = gat_layer(TD({6, 4}, v), layer, Activation::elu).out;
        for (std::size_t i = 1; i < 6; ++i)
            for (std::size_t f = 0; f < 4; ++f) CHECK(y.data()[i * 4 + f] == doctest::Approx(y.data()[f]));
    }
    SUBCASE("permutation equivariance and normalized rows") {
        std::mt19937_64 rng(4);
        GatLayer<double> layer(4);
        layer.W = testutil::random_tensor({4, 4}, rng);
        layer.a = testutil::random_tensor({8}, rng, -3, 3);
        auto x = testutil::random_tensor({64, 4}, rng, -5, 5);
        auto y = gat_layer(x, layer, Activation::elu);
        for (std::size_t i = 0; i < 64; ++i) {
            double total = 0;
            for (std::size_t j = 0; j < 64; ++j) total += y.attention.data()[i * 64 + j];
            CHECK(std::abs(total - 1) < 1e-6);
        }
        for (int trial = 0; trial < 5; ++trial) {
            std::vector<std::size_t> perm(64);
            std::iota(perm.begin(), perm.end(), std::size_t{0});
            std::shuffle(perm.begin(), perm.end(), rng);
            auto px = gather(x, {64, 4}, [&] {
                std::vector<std::size_t> idx;
                for (auto p : perm)
                    for (std::size_t f = 0; f < 4; ++f) idx.push_back(p * 4 + f);
                return idx;
            }());
            auto py = gat_layer(px, layer, Activation::elu).out;
            for (std::size_t i = 0; i < 64; ++i)
                for (std::size_t f = 0; f < 4; ++f)
                    CHECK(py.data()[i * 4 + f] == doctest::Approx(y.out.data()[perm[i] * 4 + f]));
        }
    }
}

TEST_CASE("GAL forward") {
    Gal<double> gal(16, 16);
    ParamList<double> params;
    gal.collect("gal", params);
    CHECK(params.size() == 4);
    CHECK(params[0].name == "gal.layer1.W");
    CHECK(gal.layer1.W.shape() == Shape{4, 4});
    CHECK(gal.layer1.a.shape() == Shape{8});
    Rng init(1);
    init_param_list(params, init);

    std::mt19937_64 rng(5);
    auto out = gal.forward(testutil::random_tensor({2, 30, 16, 16}, rng, -3, 3), true);
    CHECK(out.shape() == Shape{2, 30, 16, 16});
    for (std::size_t n = 0; n < 2; ++n)
        for (std::size_t c = 1; c < 30; ++c)
            for (std::size_t i = 0; i < 256; ++i)
                CHECK(out.data()[(n * 30 + c) * 256 + i] == out.data()[(n * 30) * 256 + i]);
    for (const auto& att : gal.last_attention()) {
        CHECK(att.shape() == Shape{2, 64, 64});
        for (std::size_t r = 0; r < 128; ++r) {
            double total = 0;
            for (std::size_t j = 0; j < 64; ++j) total += att.data()[r * 64 + j];
            CHECK(std::abs(total - 1) < 1e-6);
        }
    }
    for (double v : testutil::values(gal.forward(TD::zeros({2, 30, 16, 16}), true))) CHECK(v == 0);
    CHECK_THROWS_AS(gal.forward(TD::zeros({1, 30, 8, 16}), true), ShapeError);
}

TEST_CASE("GAL gradients") {
    for (const auto& g : run_gradcheck("gal")) {
        INFO(g.group);
        CHECK(g.max_rel_error < 1e-4);
    }
}
