#include <doctest.h>

#include <cmath>
#include <numbers>
#include <set>

#include "jgn/binary_io.hpp"
#include "jgn/dataset.hpp"
#include "jgn/jpeg.hpp"

using namespace jgn;

namespace {

// Annex K luminance table, typed in independently of the library.
const int kBase[64] = {16, 11, 10, 16, 24,  40,  51,  61,  12, 12, 14, 19, 26,  58,  60,  55,
                       14, 13, 16, 24, 40,  57,  69,  56,  14, 17, 22, 29, 51,  87,  80,  62,
                       18, 22, 37, 56, 68,  109, 103, 77,  24, 35, 55, 64, 81,  104, 113, 92,
                       49, 64, 78, 87, 103, 121, 120, 101, 72, 92, 95, 98, 112, 100, 103, 99};

// Direct evaluation of the orthonormal 2-d DCT-II.
Block reference_dct(const Block& f) {
    Block d{};
    const double pi = std::numbers::pi;
    for (int u = 0; u < 8; ++u)
        for (int v = 0; v < 8; ++v) {
            double acc = 0;
            for (int x = 0; x < 8; ++x)
                for (int y = 0; y < 8; ++y)
                    acc += f[x * 8 + y] * std::cos((2 * x + 1) * u * pi / 16) * std::cos((2 * y + 1) * v * pi / 16);
            const double gu = u == 0 ? 1 / std::sqrt(2.0) : 1.0, gv = v == 0 ? 1 / std::sqrt(2.0) : 1.0;
            d[u * 8 + v] = 0.25 * gu * gv * acc;
        }
    return d;
}

Block random_block(Rng& rng, double lo, double hi) {
    std::uniform_real_distribution<double> dist(lo, hi);
    Block b;
    for (auto& x : b) x = dist(rng);
    return b;
}

CoefficientGrid random_grid(std::size_t h, std::size_t w, const QuantTable& t, Rng& rng, int lo, int hi,
                            double zero_fraction = 0) {
    CoefficientGrid g(h, w, t);
    std::uniform_int_distribution<int> dist(lo, hi);
    std::bernoulli_distribution zero(zero_fraction);
    for (auto& c : g.raw()) c = zero(rng) ? 0 : dist(rng);
    return g;
}

}  // namespace

TEST_CASE("quant_table") {
    auto q50 = quant_table(50);
    for (int k = 0; k < 64; ++k) CHECK(q50.q[k] == kBase[k]);
    for (auto v : quant_table(100).q) CHECK(v == 1);
    CHECK(quant_table(75).at(0, 0) == 8);
    // scale = 5000/qf below 50
    CHECK(quant_table(10).at(0, 0) == (16 * 500 + 50) / 100);
    for (auto v : quant_table(1).q) CHECK(v <= 255);
    CHECK_THROWS_AS(quant_table(0), std::invalid_argument);
    CHECK_THROWS_AS(quant_table(101), std::invalid_argument);
}

TEST_CASE("block_idct and block_dct examples") {
    Block d{};
    d[0] = 8;
    for (double v : block_idct(d)) CHECK(v == doctest::Approx(1.0).epsilon(1e-14));
    for (double v : block_idct(Block{})) CHECK(v == 0);

    Block ones;
    ones.fill(1.0);
    auto c = block_dct(ones);
    CHECK(c[0] == doctest::Approx(8.0));
    for (int k = 1; k < 64; ++k) CHECK(std::abs(c[k]) < 1e-12);
    for (double v : block_dct(Block{})) CHECK(v == 0);
}

TEST_CASE("DCT agrees with direct evaluation") {
    Rng rng(17);
    for (int trial = 0; trial < 20; ++trial) {
        auto f = random_block(rng, -128, 128);
        auto a = block_dct(f), b = reference_dct(f);
        for (int k = 0; k < 64; ++k) CHECK(a[k] == doctest::Approx(b[k]).epsilon(1e-12).scale(1));
    }
}

TEST_CASE("DCT roundtrip and Parseval over 1000 blocks") {
    Rng rng(1);
    double worst = 0, worst_parseval = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        auto d = random_block(rng, -1024, 1024);
        auto back = block_dct(block_idct(d));
        for (int k = 0; k < 64; ++k) worst = std::max(worst, std::abs(back[k] - d[k]));
        auto f = random_block(rng, -255, 255);
        auto c = block_dct(f);
        double ef = 0, ec = 0;
        for (int k = 0; k < 64; ++k) {
            ef += f[k] * f[k];
            ec += c[k] * c[k];
        }
        worst_parseval = std::max(worst_parseval, std::abs(ef - ec) / ef);
    }
    CHECK(worst < 1e-9);
    CHECK(worst_parseval < 1e-6);
}

TEST_CASE("decompress and compress") {
    auto t = quant_table(75);
    SUBCASE("zero grid") {
        auto p = decompress(CoefficientGrid(16, 24, t));
        CHECK(p.h == 16);
        CHECK(p.w == 24);
        for (double v : p.f) CHECK(v == 0);
        const auto back = compress(p, t);
        for (auto c : back.raw()) CHECK(c == 0);
    }
    SUBCASE("DC-only block") {
        CoefficientGrid g(8, 8, t);
        g.at(0, 0, 0, 0) = 1;
        for (double v : decompress(g).f) CHECK(v == doctest::Approx(1.0));
        LuminancePlane ones(8, 8);
        std::fill(ones.f.begin(), ones.f.end(), 1.0);
        auto c = compress(ones, t);
        CHECK(c.at(0, 0, 0, 0) == 1);
        CHECK(count_nzac(c) == 0);
    }
    SUBCASE("tiling") {
        CoefficientGrid g(16, 16, t);
        g.at(1, 0, 0, 0) = 2;  // block row 1, block col 0
        auto p = decompress(g);
        CHECK(p.at(12, 3) == doctest::Approx(2.0));
        CHECK(p.at(3, 3) == 0);
        CHECK(p.at(12, 11) == 0);
    }
    SUBCASE("rounding is symmetric around zero") {
        QuantTable two;
        two.q.fill(2);
        LuminancePlane p(8, 8);
        // DC of a constant plane c is 8c
        std::fill(p.f.begin(), p.f.end(), 0.4);
        CHECK(compress(p, two).at(0, 0, 0, 0) == 2);  // 1.6
        std::fill(p.f.begin(), p.f.end(), -0.4);
        CHECK(compress(p, two).at(0, 0, 0, 0) == -2);
        Rng rng(6);
        auto q = synth_cover(16, 16, rng);
        LuminancePlane neg(16, 16);
        for (std::size_t i = 0; i < q.f.size(); ++i) neg.f[i] = -q.f[i];
        auto pos = compress(q, t), mirrored = compress(neg, t);
        for (std::size_t k = 0; k < pos.raw().size(); ++k) CHECK(mirrored.raw()[k] == -pos.raw()[k]);
    }
    SUBCASE("compress of decompress is the identity") {
        Rng rng(4);
        for (int qf : {50, 75, 95})
            for (int trial = 0; trial < 10; ++trial) {
                auto g = random_grid(16, 24, quant_table(qf), rng, -64, 64);
                CHECK(compress(decompress(g), g.table()) == g);
            }
    }
    SUBCASE("smooth planes roundtrip within the quantization bound") {
        Rng rng(8);
        auto p = synth_cover(32, 32, rng, 3.0);
        auto back = decompress(compress(p, t));
        int qmax = 0;
        for (auto v : t.q) qmax = std::max<int>(qmax, v);
        double worst = 0;
        for (std::size_t i = 0; i < p.f.size(); ++i) worst = std::max(worst, std::abs(back.f[i] - p.f[i]));
        CHECK(worst < qmax * 8.0);
        CHECK(worst > 0);
    }
    CHECK_THROWS_AS(compress(LuminancePlane(12, 16), t), std::invalid_argument);
}

TEST_CASE("count_nzac") {
    auto t = quant_table(75);
    CoefficientGrid g(16, 16, t);
    for (std::size_t n = 0; n < 2; ++n)
        for (std::size_t m = 0; m < 2; ++m) g.at(n, m, 0, 0) = 5;
    CHECK(count_nzac(g) == 0);
    CoefficientGrid one(8, 8, t);
    one.at(0, 0, 0, 1) = 3;
    CHECK(count_nzac(one) == 1);

    Rng rng(12);
    for (int trial = 0; trial < 10; ++trial) {
        auto r = random_grid(24, 16, t, rng, -3, 3, 0.3);
        std::size_t brute = 0;
        for (std::size_t n = 0; n < 3; ++n)
            for (std::size_t m = 0; m < 2; ++m)
                for (std::size_t i = 0; i < 8; ++i)
                    for (std::size_t j = 0; j < 8; ++j)
                        if ((i || j) && r.at(n, m, i, j) != 0) ++brute;
        CHECK(count_nzac(r) == brute);
    }
}

TEST_CASE("embed_toy") {
    auto t = quant_table(75);
    Rng rng(5);
    SUBCASE("rate 0 and empty grids are untouched") {
        auto g = random_grid(16, 16, t, rng, -4, 4);
        CHECK(embed_toy(g, 0.0, rng) == g);
        CoefficientGrid dc(16, 16, t);
        dc.at(0, 1, 0, 0) = 9;
        CHECK(embed_toy(dc, 1.0, rng) == dc);
    }
    SUBCASE("exact change count") {
        // 100 nonzero AC coefficients, some equal to +-1
        CoefficientGrid g(16, 16, t);
        std::size_t placed = 0;
        for (std::size_t k = 0; k < g.raw().size() && placed < 100; ++k) {
            if (k % 64 == 0) continue;
            if (k % 3 == 0) {
                g.raw()[k] = placed % 2 ? 1 : -1;
                ++placed;
            } else if (k % 3 == 1) {
                g.raw()[k] = 7;
                ++placed;
            }
        }
        REQUIRE(count_nzac(g) == 100);
        const auto before = g;
        auto s = embed_toy(g, 0.5, rng);
        CHECK(g == before);
        std::size_t diffs = 0;
        for (std::size_t k = 0; k < g.raw().size(); ++k) {
            const int delta = s.raw()[k] - g.raw()[k];
            if (delta == 0) continue;
            ++diffs;
            CHECK(std::abs(delta) == 1);
            CHECK(g.raw()[k] != 0);
            CHECK(s.raw()[k] != 0);
            CHECK(k % 64 != 0);
        }
        CHECK(diffs == 25);
        CHECK(count_nzac(s) == 100);
    }
    SUBCASE("only nonzero AC positions change, DC preserved") {
        auto g = random_grid(32, 32, t, rng, -5, 5, 0.5);
        auto s = embed_toy(g, 1.0, rng);
        std::size_t diffs = 0;
        for (std::size_t k = 0; k < g.raw().size(); ++k) {
            if (k % 64 == 0) CHECK(s.raw()[k] == g.raw()[k]);
            if (g.raw()[k] == 0) CHECK(s.raw()[k] == 0);
            diffs += s.raw()[k] != g.raw()[k];
        }
        CHECK(diffs == static_cast<std::size_t>(std::llround(0.5 * count_nzac(g))));
    }
    CHECK_THROWS_AS(embed_toy(CoefficientGrid(8, 8, t), 1.5, rng), std::invalid_argument);
    CHECK_THROWS_AS(embed_toy(CoefficientGrid(8, 8, t), -0.1, rng), std::invalid_argument);
}

TEST_CASE("synth_cover") {
    Rng a(42), b(42);
    auto p = synth_cover(32, 40, a), q = synth_cover(32, 40, b);
    CHECK(p.f == q.f);
    CHECK(p.h == 32);
    CHECK(p.w == 40);
    for (double v : p.f) {
        CHECK(v >= 0);
        CHECK(v <= 255);
    }
    // variance of a raw U[0,255] field is 255^2/12
    double mean = 0;
    for (double v : p.f) mean += v;
    mean /= static_cast<double>(p.f.size());
    double var = 0;
    for (double v : p.f) var += (v - mean) * (v - mean);
    var /= static_cast<double>(p.f.size() - 1);
    Rng c(42);
    std::uniform_real_distribution<double> u(0, 255);
    std::vector<double> raw(p.f.size());
    for (auto& v : raw) v = u(c);
    double rm = 0;
    for (double v : raw) rm += v;
    rm /= static_cast<double>(raw.size());
    double rv = 0;
    for (double v : raw) rv += (v - rm) * (v - rm);
    rv /= static_cast<double>(raw.size() - 1);
    CHECK(var < rv);
}

TEST_CASE("synthesized corpus and SGDS container") {
    SynthOptions opt;
    opt.pairs = 3;
    opt.size = 16;
    opt.seed = 7;
    auto ds = synthesize(opt);
    CHECK(ds.pairs.size() == 3);
    CHECK(ds.h == 16);
    CHECK(ds.table == quant_table(75));
    for (const auto& p : ds.pairs) {
        CHECK(p.cover.table() == p.stego.table());
        for (std::size_t k = 0; k < p.cover.raw().size(); ++k) {
            const int d = p.stego.raw()[k] - p.cover.raw()[k];
            CHECK(std::abs(d) <= 1);
            if (d) CHECK(k % 64 != 0);
        }
    }
    // covers depend only on the seed, not on the rate
    auto other = opt;
    other.rate = 0.1;
    auto ds2 = synthesize(other);
    for (std::size_t k = 0; k < 3; ++k) CHECK(ds2.pairs[k].cover == ds.pairs[k].cover);

    auto bytes = encode_dataset(ds);
    CHECK(std::string(bytes.data(), 4) == "SGDS");
    CHECK(bytes.size() == 4 + 4 + 4 + 2 + 2 + 128 + 3 * (2 * 16 * 16 * 2 + 1));
    auto back = decode_dataset(bytes);
    CHECK(back.h == 16);
    CHECK(back.table == ds.table);
    for (std::size_t k = 0; k < 3; ++k) {
        CHECK(back.pairs[k].cover == ds.pairs[k].cover);
        CHECK(back.pairs[k].stego == ds.pairs[k].stego);
    }
    CHECK(encode_dataset(synthesize(opt)) == bytes);

    auto bad = bytes;
    bad[0] = 'X';
    CHECK_THROWS_AS(decode_dataset(bad), FormatError);
    bad = bytes;
    bad[4] = 2;
    CHECK_THROWS_AS(decode_dataset(bad), FormatError);
    bad.assign(bytes.begin(), bytes.begin() + static_cast<long>(bytes.size() / 2));
    CHECK_THROWS_AS(decode_dataset(bad), FormatError);
}
