#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "jgn/binary_io.hpp"
#include "jgn/layers.hpp"

namespace jgn {

// SGCK checkpoint, little-endian:
//   "SGCK" u32 version=1 u32 tensor_count
//   per tensor: u16 name_len, name (UTF-8), u8 rank, rank*u32 dims, f32 data
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointEntry {
    std::string name;
    Shape shape;
    std::vector<float> values;
};

struct Checkpoint {
    std::vector<CheckpointEntry> entries;

    const CheckpointEntry* find(const std::string& name) const;
    std::vector<std::string> names() const;
};

template <typename Real>
Checkpoint snapshot(const ParamList<Real>& params);

std::vector<char> encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(std::vector<char> bytes);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Copies every parameter of `params` from the checkpoint. Extra names in
/// the checkpoint are ignored; a missing name or a shape conflict throws
/// FormatError.
template <typename Real>
void apply_checkpoint(const Checkpoint& ckpt, ParamList<Real>& params);

}  // namespace jgn
