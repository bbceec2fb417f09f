#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "jgn/jpeg.hpp"

namespace jgn {

struct StegoPair {
    CoefficientGrid cover;
    CoefficientGrid stego;
    double rate = 0.0;
    std::uint64_t seed = 0;
};

/// Cover/stego corpus sharing one image size and quantization table.
struct Dataset {
    std::size_t h = 0, w = 0;
    QuantTable table;
    std::vector<StegoPair> pairs;
};

struct SynthOptions {
    std::size_t pairs = 8;
    double rate = 0.5;
    int qf = 75;
    std::size_t size = 64;
    std::uint64_t seed = 0;
    double smoothing = 1.5;
};

/// Covers come from the ("cover", k) substream and embedding from
/// ("embed", k), so the same seed yields the same covers at any rate.
Dataset synthesize(const SynthOptions& opt);

// SGDS container, little-endian:
//   "SGDS" u32 version=1 u32 pair_count u16 h u16 w 64*u16 table
//   per pair: h*w i16 cover, h*w i16 stego (blockwise), u8 reserved
inline constexpr std::uint32_t kDatasetVersion = 1;

std::vector<char> encode_dataset(const Dataset& ds);
Dataset decode_dataset(std::vector<char> bytes);
void save_dataset(const Dataset& ds, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path);

}  // namespace jgn
