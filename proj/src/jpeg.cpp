#include "jgn/jpeg.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace jgn {
namespace {

constexpr std::array<int, 64> kLuminanceBase = {
    16, 11, 10, 16, 24,  40,  51,  61,   //
    12, 12, 14, 19, 26,  58,  60,  55,   //
    14, 13, 16, 24, 40,  57,  69,  56,   //
    14, 17, 22, 29, 51,  87,  80,  62,   //
    18, 22, 37, 56, 68,  109, 103, 77,   //
    24, 35, 55, 64, 81,  104, 113, 92,   //
    49, 64, 78, 87, 103, 121, 120, 101,  //
    72, 92, 95, 98, 112, 100, 103, 99,
};

// basis[x][u] = g_u * cos((2x+1) u pi / 16) / 2, so that both transforms are
// a pair of orthonormal matrix products.
struct Basis {
    double m[8][8];
    Basis() {
        for (int x = 0; x < 8; ++x)
            for (int u = 0; u < 8; ++u) {
                const double g = u == 0 ? 1.0 / std::numbers::sqrt2 : 1.0;
                m[x][u] = 0.5 * g * std::cos((2 * x + 1) * u * std::numbers::pi / 16.0);
            }
    }
};

const Basis& basis() {
    static const Basis b;
    return b;
}

void require_multiple_of_8(std::size_t h, std::size_t w) {
    if (h == 0 || w == 0 || h % 8 != 0 || w % 8 != 0)
        throw std::invalid_argument("image dimensions must be positive multiples of 8, got " + std::to_string(h) +
                                    "x" + std::to_string(w));
}

}  // namespace

QuantTable quant_table(int qf) {
    if (qf < 1 || qf > 100) throw std::invalid_argument("quality factor must be in [1,100], got " + std::to_string(qf));
    const int scale = qf < 50 ? 5000 / qf : 200 - 2 * qf;
    QuantTable t;
    for (std::size_t k = 0; k < 64; ++k)
        t.q[k] = static_cast<std::uint16_t>(std::clamp((kLuminanceBase[k] * scale + 50) / 100, 1, 255));
    return t;
}

CoefficientGrid::CoefficientGrid(std::size_t h, std::size_t w, QuantTable table)
    : h_(h), w_(w), table_(table), c_(h * w, 0) {
    require_multiple_of_8(h, w);
    for (auto q : table_.q)
        if (q < 1 || q > 255) throw std::invalid_argument("quantization steps must lie in [1,255]");
}

Block block_idct(const Block& d) {
    const auto& b = basis().m;
    // f = B d B^T with B[x][u]
    double tmp[8][8];
    for (int x = 0; x < 8; ++x)
        for (int v = 0; v < 8; ++v) {
            double acc = 0;
            for (int u = 0; u < 8; ++u) acc += b[x][u] * d[u * 8 + v];
            tmp[x][v] = acc;
        }
    Block f{};
    for (int x = 0; x < 8; ++x)
        for (int y = 0; y < 8; ++y) {
            double acc = 0;
            for (int v = 0; v < 8; ++v) acc += tmp[x][v] * b[y][v];
            f[x * 8 + y] = acc;
        }
    return f;
}

Block block_dct(const Block& f) {
    const auto& b = basis().m;
    // d = B^T f B
    double tmp[8][8];
    for (int u = 0; u < 8; ++u)
        for (int y = 0; y < 8; ++y) {
            double acc = 0;
            for (int x = 0; x < 8; ++x) acc += b[x][u] * f[x * 8 + y];
            tmp[u][y] = acc;
        }
    Block d{};
    for (int u = 0; u < 8; ++u)
        for (int v = 0; v < 8; ++v) {
            double acc = 0;
            for (int y = 0; y < 8; ++y) acc += tmp[u][y] * b[y][v];
            d[u * 8 + v] = acc;
        }
    return d;
}

LuminancePlane decompress(const CoefficientGrid& grid) {
    LuminancePlane p(grid.height(), grid.width());
    const auto& t = grid.table();
    for (std::size_t n = 0; n < grid.block_rows(); ++n)
        for (std::size_t m = 0; m < grid.block_cols(); ++m) {
            Block d{};
            for (std::size_t k = 0; k < 64; ++k) d[k] = static_cast<double>(grid.at(n, m, k / 8, k % 8)) * t.q[k];
            const Block f = block_idct(d);
            for (std::size_t k = 0; k < 64; ++k) p.at(n * 8 + k / 8, m * 8 + k % 8) = f[k];
        }
    return p;
}

CoefficientGrid compress(const LuminancePlane& plane, const QuantTable& table) {
    require_multiple_of_8(plane.h, plane.w);
    CoefficientGrid g(plane.h, plane.w, table);
    for (std::size_t n = 0; n < g.block_rows(); ++n)
        for (std::size_t m = 0; m < g.block_cols(); ++m) {
            Block f{};
            for (std::size_t k = 0; k < 64; ++k) f[k] = plane.at(n * 8 + k / 8, m * 8 + k % 8);
            const Block d = block_dct(f);
            for (std::size_t k = 0; k < 64; ++k)
                g.at(n, m, k / 8, k % 8) = static_cast<std::int32_t>(std::round(d[k] / table.q[k]));
        }
    return g;
}

std::size_t count_nzac(const CoefficientGrid& grid) {
    std::size_t count = 0;
    const auto& c = grid.raw();
    for (std::size_t k = 0; k < c.size(); ++k)
        if (k % 64 != 0 && c[k] != 0) ++count;
    return count;
}

CoefficientGrid embed_toy(const CoefficientGrid& cover, double rate, Rng& rng) {
    if (!(rate >= 0.0 && rate <= 1.0)) throw std::invalid_argument("embedding rate must lie in [0,1]");
    CoefficientGrid stego = cover;
    auto& c = stego.raw();
    std::vector<std::size_t> usable;
    for (std::size_t k = 0; k < c.size(); ++k)
        if (k % 64 != 0 && c[k] != 0) usable.push_back(k);
    const auto changes = static_cast<std::size_t>(std::llround(0.5 * rate * static_cast<double>(usable.size())));

    // Partial Fisher-Yates: the first `changes` slots become a uniform sample
    // without replacement.
    for (std::size_t i = 0; i < changes; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, usable.size() - 1);
        std::swap(usable[i], usable[pick(rng)]);
        std::bernoulli_distribution up(0.5);
        int delta = up(rng) ? 1 : -1;
        auto& v = c[usable[i]];
        if (v + delta == 0) delta = -delta;
        v += delta;
    }
    return stego;
}

LuminancePlane synth_cover(std::size_t h, std::size_t w, Rng& rng, double smoothing) {
    if (!(smoothing > 0)) throw std::invalid_argument("smoothing must be positive");
    require_multiple_of_8(h, w);
    std::uniform_real_distribution<double> uniform(0.0, 255.0);
    std::vector<double> field(h * w);
    for (auto& v : field) v = uniform(rng);

    const int radius = static_cast<int>(std::ceil(2.0 * smoothing));
    std::vector<double> kernel(2 * radius + 1);
    double total = 0;
    for (int i = -radius; i <= radius; ++i)
        total += kernel[i + radius] = std::exp(-0.5 * i * i / (smoothing * smoothing));
    for (auto& k : kernel) k /= total;

    // Separable blur with mirrored borders.
    auto mirror = [](long i, long n) {
        if (n == 1) return 0L;
        while (i < 0 || i >= n) i = i < 0 ? -i : 2 * (n - 1) - i;
        return i;
    };
    std::vector<double> tmp(h * w, 0.0);
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
            double acc = 0;
            for (int i = -radius; i <= radius; ++i)
                acc += kernel[i + radius] * field[y * w + mirror(static_cast<long>(x) + i, static_cast<long>(w))];
            tmp[y * w + x] = acc;
        }
    LuminancePlane out(h, w);
    std::normal_distribution<double> noise(0.0, 2.0);
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
            double acc = 0;
            for (int i = -radius; i <= radius; ++i)
                acc += kernel[i + radius] * tmp[mirror(static_cast<long>(y) + i, static_cast<long>(h)) * w + x];
            out.at(y, x) = std::clamp(acc + noise(rng), 0.0, 255.0);
        }
    return out;
}

}  // namespace jgn
