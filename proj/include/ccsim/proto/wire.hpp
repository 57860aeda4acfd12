/**
 * Little-endian primitive encoding. Every multi-byte field on the wire is
 * little-endian; floats are IEEE-754 binary32. docs/wire-protocol.md is
 * the byte-exact reference.
 */
#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace ccsim {

class ProtoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ByteWriter {
public:
    void put_u8(std::uint8_t v) { buf_.push_back(v); }
    void put_u16(std::uint16_t v) { put_le(v); }
    void put_u32(std::uint32_t v) { put_le(v); }
    void put_u64(std::uint64_t v) { put_le(v); }
    void put_f32(float v) { put_le(std::bit_cast<std::uint32_t>(v)); }

    void put_bytes(std::span<const std::uint8_t> b) { buf_.insert(buf_.end(), b.begin(), b.end()); }
    void put_zeros(size_t n) { buf_.insert(buf_.end(), n, 0); }

    // Length-prefixed (u8) short string.
    void put_string8(std::string_view s) {
        if (s.size() > 255) throw ProtoError("string8 too long");
        put_u8(static_cast<std::uint8_t>(s.size()));
        buf_.insert(buf_.end(), s.begin(), s.end());
    }

    const std::vector<std::uint8_t>& bytes() const { return buf_; }
    std::vector<std::uint8_t> take() { return std::move(buf_); }
    size_t size() const { return buf_.size(); }

private:
    template <typename T>
    void put_le(T v) {
        for (size_t i = 0; i < sizeof(T); ++i)
            buf_.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
    }

    std::vector<std::uint8_t> buf_;
};

class ByteReader {
public:
    explicit ByteReader(std::span<const std::uint8_t> data) : data_(data) {}

    std::uint8_t get_u8() { return get_le<std::uint8_t>(); }
    std::uint16_t get_u16() { return get_le<std::uint16_t>(); }
    std::uint32_t get_u32() { return get_le<std::uint32_t>(); }
    std::uint64_t get_u64() { return get_le<std::uint64_t>(); }
    float get_f32() { return std::bit_cast<float>(get_le<std::uint32_t>()); }

    std::string get_string8() {
        const size_t n = get_u8();
        need(n);
        std::string s(reinterpret_cast<const char*>(data_.data() + off_), n);
        off_ += n;
        return s;
    }

    std::span<const std::uint8_t> get_bytes(size_t n) {
        need(n);
        auto s = data_.subspan(off_, n);
        off_ += n;
        return s;
    }

    void skip(size_t n) { need(n), off_ += n; }
    size_t offset() const { return off_; }
    size_t remaining() const { return data_.size() - off_; }
    bool done() const { return off_ == data_.size(); }

    void expect_done() const {
        if (!done()) throw ProtoError("trailing bytes after message body");
    }

private:
    void need(size_t n) const {
        if (off_ + n > data_.size())
            throw ProtoError("short read at offset " + std::to_string(off_));
    }

    template <typename T>
    T get_le() {
        need(sizeof(T));
        T v = 0;
        for (size_t i = 0; i < sizeof(T); ++i)
            v |= static_cast<T>(static_cast<T>(data_[off_ + i]) << (8 * i));
        off_ += sizeof(T);
        return v;
    }

    std::span<const std::uint8_t> data_;
    size_t off_ = 0;
};

} // namespace ccsim
