#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "jgn/rng.hpp"

namespace jgn {

/// 8x8 luminance quantization steps, shared by every block of an image.
struct QuantTable {
    std::array<std::uint16_t, 64> q{};

    std::uint16_t at(std::size_t i, std::size_t j) const { return q[i * 8 + j]; }
    bool operator==(const QuantTable&) const = default;
};

/// IJG quality scaling of the Annex K luminance table. qf in [1,100].
QuantTable quant_table(int qf);

using Block = std::array<double, 64>;

/// Quantized DCT coefficients of one luminance plane.
/// Storage is blockwise: blocks in row-major order, each block's 64
/// coefficients row-major inside it.
class CoefficientGrid {
public:
    CoefficientGrid() = default;
    CoefficientGrid(std::size_t h, std::size_t w, QuantTable table);

    std::size_t height() const { return h_; }
    std::size_t width() const { return w_; }
    std::size_t block_rows() const { return h_ / 8; }
    std::size_t block_cols() const { return w_ / 8; }
    const QuantTable& table() const { return table_; }

    std::int32_t& at(std::size_t n, std::size_t m, std::size_t i, std::size_t j) {
        return c_[index(n, m, i, j)];
    }
    std::int32_t at(std::size_t n, std::size_t m, std::size_t i, std::size_t j) const {
        return c_[index(n, m, i, j)];
    }
    std::vector<std::int32_t>& raw() { return c_; }
    const std::vector<std::int32_t>& raw() const { return c_; }

    bool operator==(const CoefficientGrid&) const = default;

private:
    std::size_t index(std::size_t n, std::size_t m, std::size_t i, std::size_t j) const {
        return ((n * block_cols() + m) * 64) + i * 8 + j;
    }

    std::size_t h_ = 0, w_ = 0;
    QuantTable table_;
    std::vector<std::int32_t> c_;
};

/// Real-valued decompressed pixels, row-major, neither clamped nor rounded.
struct LuminancePlane {
    std::size_t h = 0, w = 0;
    std::vector<double> f;

    LuminancePlane() = default;
    LuminancePlane(std::size_t height, std::size_t width) : h(height), w(width), f(height * width, 0.0) {}
    double& at(std::size_t y, std::size_t x) { return f[y * w + x]; }
    double at(std::size_t y, std::size_t x) const { return f[y * w + x]; }
};

Block block_idct(const Block& d);
Block block_dct(const Block& f);

LuminancePlane decompress(const CoefficientGrid& grid);
CoefficientGrid compress(const LuminancePlane& plane, const QuantTable& table);

/// Nonzero coefficients outside the DC position, over all blocks.
std::size_t count_nzac(const CoefficientGrid& grid);

/// Toy +-1 embedder: round(0.5*rate*nzAC) distinct nonzero AC coefficients
/// change by +-1, never to zero. The input is left untouched.
CoefficientGrid embed_toy(const CoefficientGrid& cover, double rate, Rng& rng);

/// Smoothed uniform noise field plus small white noise, clamped to [0,255].
LuminancePlane synth_cover(std::size_t h, std::size_t w, Rng& rng, double smoothing = 1.5);

}  // namespace jgn
