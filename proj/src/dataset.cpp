#include "jgn/dataset.hpp"

#include <limits>
#include <string>

#include "jgn/binary_io.hpp"

namespace jgn {

Dataset synthesize(const SynthOptions& opt) {
    Dataset ds;
    ds.h = ds.w = opt.size;
    ds.table = quant_table(opt.qf);
    ds.pairs.reserve(opt.pairs);
    for (std::size_t k = 0; k < opt.pairs; ++k) {
        Rng cover_rng = substream(opt.seed, "cover", k);
        Rng embed_rng = substream(opt.seed, "embed", k);
        StegoPair p;
        p.cover = compress(synth_cover(opt.size, opt.size, cover_rng, opt.smoothing), ds.table);
        p.stego = embed_toy(p.cover, opt.rate, embed_rng);
        p.rate = opt.rate;
        p.seed = opt.seed;
        ds.pairs.push_back(std::move(p));
    }
    return ds;
}

namespace {

void write_grid(ByteWriter& out, const CoefficientGrid& g) {
    for (auto v : g.raw()) {
        if (v < std::numeric_limits<std::int16_t>::min() || v > std::numeric_limits<std::int16_t>::max())
            throw FormatError("coefficient " + std::to_string(v) + " does not fit in i16");
        out.i16(static_cast<std::int16_t>(v));
    }
}

}  // namespace

std::vector<char> encode_dataset(const Dataset& ds) {
    if (ds.h > 0xffff || ds.w > 0xffff) throw FormatError("image dimensions exceed u16");
    ByteWriter out;
    out.bytes("SGDS");
    out.u32(kDatasetVersion);
    out.u32(static_cast<std::uint32_t>(ds.pairs.size()));
    out.u16(static_cast<std::uint16_t>(ds.h));
    out.u16(static_cast<std::uint16_t>(ds.w));
    for (auto q : ds.table.q) out.u16(q);
    for (const auto& p : ds.pairs) {
        if (p.cover.height() != ds.h || p.cover.width() != ds.w || p.stego.height() != ds.h ||
            p.stego.width() != ds.w)
            throw FormatError("pair dimensions differ from the dataset header");
        write_grid(out, p.cover);
        write_grid(out, p.stego);
        out.u8(0);
    }
    return out.buffer();
}

Dataset decode_dataset(std::vector<char> bytes) {
    ByteReader in(std::move(bytes), "SGDS dataset");
    if (in.bytes(4) != "SGDS") throw FormatError("SGDS dataset: bad magic");
    const auto version = in.u32();
    if (version != kDatasetVersion) throw FormatError("SGDS dataset: unsupported version " + std::to_string(version));
    const auto count = in.u32();
    Dataset ds;
    ds.h = in.u16();
    ds.w = in.u16();
    for (auto& q : ds.table.q) q = in.u16();
    for (std::uint32_t k = 0; k < count; ++k) {
        StegoPair p;
        p.cover = CoefficientGrid(ds.h, ds.w, ds.table);
        p.stego = CoefficientGrid(ds.h, ds.w, ds.table);
        for (auto& v : p.cover.raw()) v = in.i16();
        for (auto& v : p.stego.raw()) v = in.i16();
        in.u8();
        ds.pairs.push_back(std::move(p));
    }
    if (!in.at_end()) throw FormatError("SGDS dataset: trailing bytes after last pair");
    return ds;
}

void save_dataset(const Dataset& ds, const std::filesystem::path& path) {
    write_file_atomic(path, encode_dataset(ds));
}

Dataset load_dataset(const std::filesystem::path& path) {
    return decode_dataset(read_file(path));
}

}  // namespace jgn
