#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "metafilter/errors.hpp"

namespace metafilter::io {

/// Little-endian byte sink.
class ByteWriter {
public:
    void bytes(const void* data, std::size_t n) {
        const auto* p = static_cast<const std::uint8_t*>(data);
        buf_.insert(buf_.end(), p, p + n);
    }
    void u8(std::uint8_t v) { buf_.push_back(v); }
    void u16(std::uint16_t v) { put_le(v, 2); }
    void u32(std::uint32_t v) { put_le(v, 4); }
    void u64(std::uint64_t v) { put_le(v, 8); }
    void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }

    const std::vector<std::uint8_t>& data() const { return buf_; }

    void save(const std::string& path) const {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) throw FormatError("cannot open '" + path + "' for writing");
        out.write(reinterpret_cast<const char*>(buf_.data()), static_cast<std::streamsize>(buf_.size()));
        if (!out) throw FormatError("write to '" + path + "' failed");
    }

private:
    void put_le(std::uint64_t v, int n) {
        for (int i = 0; i < n; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    std::vector<std::uint8_t> buf_;
};

/// Little-endian byte source that reports the offset of any short read.
class ByteReader {
public:
    explicit ByteReader(std::vector<std::uint8_t> data, std::string source = "buffer")
        : buf_(std::move(data)), source_(std::move(source)) {}

    static ByteReader from_file(const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw FormatError("cannot open '" + path + "'");
        std::vector<std::uint8_t> data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        return ByteReader(std::move(data), path);
    }

    void bytes(void* out, std::size_t n, const std::string& what) {
        need(n, what);
        std::memcpy(out, buf_.data() + pos_, n);
        pos_ += n;
    }
    std::uint8_t u8(const std::string& what) { return static_cast<std::uint8_t>(get_le(1, what)); }
    std::uint16_t u16(const std::string& what) { return static_cast<std::uint16_t>(get_le(2, what)); }
    std::uint32_t u32(const std::string& what) { return static_cast<std::uint32_t>(get_le(4, what)); }
    std::uint64_t u64(const std::string& what) { return get_le(8, what); }
    float f32(const std::string& what) { return std::bit_cast<float>(u32(what)); }

    std::size_t offset() const { return pos_; }
    std::size_t remaining() const { return buf_.size() - pos_; }
    const std::string& source() const { return source_; }

private:
    void need(std::size_t n, const std::string& what) const {
        if (buf_.size() - pos_ < n)
            throw FormatError(source_ + ": truncated while reading " + what + " at byte offset " + std::to_string(pos_) +
                              " (need " + std::to_string(n) + ", have " + std::to_string(buf_.size() - pos_) + ")");
    }
    std::uint64_t get_le(int n, const std::string& what) {
        need(static_cast<std::size_t>(n), what);
        std::uint64_t v = 0;
        for (int i = 0; i < n; ++i) v |= std::uint64_t(buf_[pos_ + i]) << (8 * i);
        pos_ += static_cast<std::size_t>(n);
        return v;
    }

    std::vector<std::uint8_t> buf_;
    std::string source_;
    std::size_t pos_ = 0;
};

}  // namespace metafilter::io
