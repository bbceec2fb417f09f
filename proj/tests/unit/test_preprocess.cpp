#include <doctest.h>

#include <cmath>
#include <numeric>

#include "helpers.hpp"
#include "jgn/gradcheck_suite.hpp"
#include "jgn/preprocess.hpp"

using namespace jgn;
using testutil::TD;

namespace {

LuminancePlane ramp(std::size_t h, std::size_t w, double sx, double sy, double c = 0) {
    LuminancePlane p(h, w);
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) p.at(y, x) = c + sx * static_cast<double>(x) + sy * static_cast<double>(y);
    return p;
}

}  // namespace

TEST_CASE("SRM bank") {
    auto bank = srm_bank_init();
    CHECK(bank.numerators.size() == 30);
    for (std::size_t k = 0; k < 30; ++k) {
        INFO(bank.names[k]);
        CHECK(std::accumulate(bank.numerators[k].begin(), bank.numerators[k].end(), 0) == 0);
        auto kern = bank.kernel(k);
        double mx = 0, total = 0;
        for (double v : kern) {
            mx = std::max(mx, std::abs(v));
            total += v;
        }
        CHECK(mx == 1.0);
        CHECK(total == doctest::Approx(0.0).scale(1));
        for (std::size_t j = 0; j < k; ++j) CHECK(bank.numerators[j] != bank.numerators[k]);
    }
    CHECK(bank.weights().size() == 30 * 25);

    // class sizes: 8 first, 4 second, 8 third, 1+1 squares, 4+4 edges
    auto count = [&](const std::string& prefix) {
        return std::count_if(bank.names.begin(), bank.names.end(),
                             [&](const std::string& n) { return n.rfind(prefix, 0) == 0; });
    };
    CHECK(count("first_order") == 8);
    CHECK(count("second_order") == 4);
    CHECK(count("third_order") == 8);
    CHECK(count("square") == 2);
    CHECK(count("edge3x3") == 4);
    CHECK(count("edge5x5") == 4);
}

TEST_CASE("first-order kernels on planes") {
    auto bank = srm_bank_init();
    auto res = extract_residuals(ramp(12, 12, 1, 0), bank, 0.0);
    for (std::size_t k = 0; k < 8; ++k) {
        // interior response of a first-order difference on f(x,y)=x is a constant
        const double v = res[k][5 * 12 + 5];
        for (std::size_t y = 2; y < 10; ++y)
            for (std::size_t x = 2; x < 10; ++x) CHECK(res[k][y * 12 + x] == doctest::Approx(v));
        CHECK(std::abs(v) <= 1.0);
    }
    auto flat = extract_residuals(ramp(12, 12, 0, 0, 7), bank, 0.0);
    for (std::size_t k = 0; k < 8; ++k) CHECK(flat[k][5 * 12 + 5] == 0);
}

TEST_CASE("extract_residuals") {
    auto bank = srm_bank_init();
    SUBCASE("constant plane gives the bias away from the border") {
        auto res = extract_residuals(ramp(16, 16, 0, 0, 100), bank);
        REQUIRE(res.size() == 30);
        for (const auto& ch : res) {
            CHECK(ch.size() == 16 * 16);
            for (std::size_t y = 2; y < 14; ++y)
                for (std::size_t x = 2; x < 14; ++x) CHECK(ch[y * 16 + x] == doctest::Approx(0.2));
        }
        auto zero = extract_residuals(LuminancePlane(8, 8), bank);
        for (const auto& ch : zero)
            for (double v : ch) CHECK(v == 0.2);
    }
    SUBCASE("linearity") {
        Rng rng(3);
        auto p1 = synth_cover(16, 16, rng), p2 = synth_cover(16, 16, rng);
        LuminancePlane sum(16, 16);
        for (std::size_t i = 0; i < sum.f.size(); ++i) sum.f[i] = p1.f[i] + p2.f[i];
        auto a = extract_residuals(p1, bank), b = extract_residuals(p2, bank), c = extract_residuals(sum, bank);
        for (std::size_t k = 0; k < 30; ++k)
            for (std::size_t i = 0; i < 256; ++i) CHECK(c[k][i] == doctest::Approx(a[k][i] + b[k][i] - 0.2));
    }
    SUBCASE("agrees with the tensor convolution") {
        Rng rng(9);
        auto p = synth_cover(16, 16, rng);
        auto res = extract_residuals(p, bank);
        auto t = conv2d(planes_to_tensor<double>({&p}), TD({30, 1, 5, 5}, bank.weights()), TD::full({30}, 0.2), 1, 2);
        for (std::size_t k = 0; k < 30; ++k)
            for (std::size_t i = 0; i < 256; ++i) CHECK(t.data()[k * 256 + i] == doctest::Approx(res[k][i]));
    }
    CHECK_THROWS_AS(extract_residuals(LuminancePlane(4, 8), bank), std::invalid_argument);
}

TEST_CASE("tlu") {
    CHECK(tlu(TD({1}, {5}), 3.0).item() == 3);
    CHECK(tlu(TD({1}, {-5}), 3.0).item() == -3);
    CHECK(tlu(TD({1}, {2}), 3.0).item() == 2);
    CHECK(tlu(TD({1}, {0}), 3.0).item() == 0);
    std::mt19937_64 rng(7);
    auto x = testutil::random_tensor({200}, rng, -1e30, 1e30);
    auto y = tlu(x, 3.0), z = tlu(scale(x, -1.0), 3.0);
    for (std::size_t i = 0; i < 200; ++i) {
        CHECK(std::abs(y.data()[i]) <= 3);
        CHECK(z.data()[i] == -y.data()[i]);
    }
    // derivative is 1 on the closed interval
    TD edge({3}, {3, -3, 3.5}, true);
    sum(tlu(edge, 3.0)).backward();
    CHECK(edge.grad()[0] == 1);
    CHECK(edge.grad()[1] == 1);
    CHECK(edge.grad()[2] == 0);
}

TEST_CASE("Preprocess forward") {
    Preprocess<double> pre;
    auto bank = srm_bank_init();
    auto w = bank.weights();
    std::copy(w.begin(), w.end(), pre.srm_weight.mutable_data().begin());
    for (auto& b : pre.srm_bias.mutable_data()) b = 0.2;

    Rng rng(2);
    auto p1 = synth_cover(16, 16, rng), p2 = synth_cover(16, 16, rng);
    auto input = planes_to_tensor<double>({&p1, &p2, &p1});
    CHECK(input.shape() == Shape{3, 1, 16, 16});
    auto r = pre.residuals(input);
    CHECK(r.shape() == Shape{3, 30, 16, 16});
    for (double v : r.data()) CHECK(std::abs(v) <= 3.0);
    auto out = pre.forward(input, true);
    CHECK(out.shape() == Shape{3, 30, 16, 16});
    for (std::size_t i = 0; i < 30 * 256; ++i) CHECK(out.data()[i] == out.data()[2 * 30 * 256 + i]);

    ParamList<double> params;
    pre.collect("pre", params);
    CHECK(params.size() == 6);
    CHECK(params[0].name == "pre.srm.weight");
    CHECK_FALSE(params[0].frozen);
    PreprocessConfig frozen;
    frozen.freeze_srm = true;
    Preprocess<double> fpre(frozen);
    ParamList<double> fparams;
    fpre.collect("pre", fparams);
    CHECK(fparams[0].frozen);
    CHECK_THROWS_AS(Preprocess<double>(PreprocessConfig{0.0, false}), std::invalid_argument);
}

TEST_CASE("preprocess gradients") {
    for (const auto& g : run_gradcheck("preprocess")) {
        INFO(g.group);
        CHECK(g.max_rel_error < 1e-4);
    }
}
