#include "jgn/checkpoint.hpp"

namespace jgn {

const CheckpointEntry* Checkpoint::find(const std::string& name) const {
    for (const auto& e : entries)
        if (e.name == name) return &e;
    return nullptr;
}

std::vector<std::string> Checkpoint::names() const {
    std::vector<std::string> out;
    for (const auto& e : entries) out.push_back(e.name);
    return out;
}

template <typename Real>
Checkpoint snapshot(const ParamList<Real>& params) {
    Checkpoint ckpt;
    for (const auto& p : params) {
        CheckpointEntry e{p.name, p.tensor.shape(), {}};
        e.values.reserve(p.tensor.numel());
        for (auto v : p.tensor.data()) e.values.push_back(static_cast<float>(v));
        ckpt.entries.push_back(std::move(e));
    }
    return ckpt;
}

std::vector<char> encode_checkpoint(const Checkpoint& ckpt) {
    ByteWriter out;
    out.bytes("SGCK");
    out.u32(kCheckpointVersion);
    out.u32(static_cast<std::uint32_t>(ckpt.entries.size()));
    for (const auto& e : ckpt.entries) {
        if (e.name.size() > 0xffff) throw FormatError("parameter name too long: " + e.name);
        if (e.shape.size() > 0xff) throw FormatError("tensor rank too large: " + e.name);
        if (shape_numel(e.shape) != e.values.size()) throw FormatError("shape/value mismatch for " + e.name);
        out.u16(static_cast<std::uint16_t>(e.name.size()));
        out.bytes(e.name);
        out.u8(static_cast<std::uint8_t>(e.shape.size()));
        for (auto d : e.shape) out.u32(static_cast<std::uint32_t>(d));
        for (auto v : e.values) out.f32(v);
    }
    return out.buffer();
}

Checkpoint decode_checkpoint(std::vector<char> bytes) {
    ByteReader in(std::move(bytes), "SGCK checkpoint");
    if (in.bytes(4) != "SGCK") throw FormatError("SGCK checkpoint: bad magic");
    const auto version = in.u32();
    if (version != kCheckpointVersion)
        throw FormatError("SGCK checkpoint: unsupported version " + std::to_string(version));
    const auto count = in.u32();
    Checkpoint ckpt;
    for (std::uint32_t k = 0; k < count; ++k) {
        CheckpointEntry e;
        e.name = in.bytes(in.u16());
        const auto rank = in.u8();
        for (std::uint8_t r = 0; r < rank; ++r) e.shape.push_back(in.u32());
        const std::size_t n = shape_numel(e.shape);
        e.values.resize(n);
        for (auto& v : e.values) v = in.f32();
        ckpt.entries.push_back(std::move(e));
    }
    if (!in.at_end()) throw FormatError("SGCK checkpoint: trailing bytes after last tensor");
    return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
    write_file_atomic(path, encode_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    return decode_checkpoint(read_file(path));
}

template <typename Real>
void apply_checkpoint(const Checkpoint& ckpt, ParamList<Real>& params) {
    // Validate everything before touching any parameter.
    for (const auto& p : params) {
        const auto* e = ckpt.find(p.name);
        if (!e) throw FormatError("checkpoint is missing parameter " + p.name);
        if (e->shape != p.tensor.shape())
            throw FormatError("shape conflict for " + p.name + ": checkpoint " + shape_str(e->shape) + ", model " +
                              shape_str(p.tensor.shape()));
    }
    for (auto& p : params) {
        const auto* e = ckpt.find(p.name);
        auto dst = p.tensor.mutable_data();
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = static_cast<Real>(e->values[i]);
    }
}

template Checkpoint snapshot(const ParamList<float>&);
template Checkpoint snapshot(const ParamList<double>&);
template void apply_checkpoint(const Checkpoint&, ParamList<float>&);
template void apply_checkpoint(const Checkpoint&, ParamList<double>&);

}  // namespace jgn
