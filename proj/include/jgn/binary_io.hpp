#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace jgn {

class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Little-endian byte sink.
class ByteWriter {
public:
    void bytes(std::string_view s) { buf_.insert(buf_.end(), s.begin(), s.end()); }
    void u8(std::uint8_t v) { buf_.push_back(v); }
    void u16(std::uint16_t v) { put(v, 2); }
    void u32(std::uint32_t v) { put(v, 4); }
    void i16(std::int16_t v) { put(static_cast<std::uint16_t>(v), 2); }
    void f32(float v) {
        std::uint32_t bits;
        std::memcpy(&bits, &v, 4);
        put(bits, 4);
    }
    const std::vector<char>& buffer() const { return buf_; }

private:
    void put(std::uint64_t v, int n) {
        for (int i = 0; i < n; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    }
    std::vector<char> buf_;
};

/// Little-endian byte source over an in-memory file; every read is bounds
/// checked and reports truncation as FormatError.
class ByteReader {
public:
    ByteReader(std::vector<char> data, std::string what) : data_(std::move(data)), what_(std::move(what)) {}

    std::string bytes(std::size_t n) {
        need(n);
        std::string s(data_.data() + pos_, n);
        pos_ += n;
        return s;
    }
    std::uint8_t u8() { return static_cast<std::uint8_t>(get(1)); }
    std::uint16_t u16() { return static_cast<std::uint16_t>(get(2)); }
    std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
    std::int16_t i16() { return static_cast<std::int16_t>(static_cast<std::uint16_t>(get(2))); }
    float f32() {
        auto bits = static_cast<std::uint32_t>(get(4));
        float v;
        std::memcpy(&v, &bits, 4);
        return v;
    }
    bool at_end() const { return pos_ == data_.size(); }

private:
    void need(std::size_t n) const {
        if (pos_ + n > data_.size())
            throw FormatError(what_ + ": truncated file (needed " + std::to_string(n) + " bytes at offset " +
                              std::to_string(pos_) + ")");
    }
    std::uint64_t get(int n) {
        need(static_cast<std::size_t>(n));
        std::uint64_t v = 0;
        for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
        pos_ += static_cast<std::size_t>(n);
        return v;
    }

    std::vector<char> data_;
    std::size_t pos_ = 0;
    std::string what_;
};

std::vector<char> read_file(const std::filesystem::path& path);

/// Writes to a sibling temporary file and renames it over `path`, so a
/// failed write never leaves a partial file behind.
void write_file_atomic(const std::filesystem::path& path, const std::vector<char>& bytes);

}  // namespace jgn
