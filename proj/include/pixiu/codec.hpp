#pragma once

#include <bit>
#include <cstring>
#include <stdexcept>
#include <string_view>

#include "pixiu/bytes.hpp"

namespace pixiu {

// Canonical byte encoding shared by digests and signatures: fields in declared
// order, integers big-endian fixed-width, strings UTF-8 with a 4-byte length
// prefix, lists with a 4-byte count prefix. Equal values encode to identical
// bytes.
class Encoder {
public:
    void u8(uint8_t v) { buf_.push_back(v); }

    void u32(uint32_t v) {
        buf_.push_back(static_cast<uint8_t>(v >> 24));
        buf_.push_back(static_cast<uint8_t>(v >> 16));
        buf_.push_back(static_cast<uint8_t>(v >> 8));
        buf_.push_back(static_cast<uint8_t>(v));
    }

    void u64(uint64_t v) {
        u32(static_cast<uint32_t>(v >> 32));
        u32(static_cast<uint32_t>(v));
    }

    void i64(int64_t v) { u64(static_cast<uint64_t>(v)); }

    void f64(double v) { u64(std::bit_cast<uint64_t>(v)); }

    void boolean(bool v) { u8(v ? 1 : 0); }

    // Raw bytes, no prefix. For fixed-width fields (digests, keys).
    void raw(BytesView data) { buf_.insert(buf_.end(), data.begin(), data.end()); }

    void bytes(BytesView data) {
        u32(static_cast<uint32_t>(data.size()));
        raw(data);
    }

    void str(std::string_view s) {
        u32(static_cast<uint32_t>(s.size()));
        buf_.insert(buf_.end(), s.begin(), s.end());
    }

    void list_count(size_t n) { u32(static_cast<uint32_t>(n)); }

    const Bytes& data() const { return buf_; }
    Bytes take() { return std::move(buf_); }

private:
    Bytes buf_;
};

struct DecodeError : std::runtime_error {
    explicit DecodeError(const std::string& what) : std::runtime_error(what) {}
};

class Decoder {
public:
    explicit Decoder(BytesView data) : data_(data) {}

    uint8_t u8() {
        need(1);
        return data_[pos_++];
    }

    uint32_t u32() {
        need(4);
        uint32_t v = (uint32_t(data_[pos_]) << 24) | (uint32_t(data_[pos_ + 1]) << 16) |
                     (uint32_t(data_[pos_ + 2]) << 8) | uint32_t(data_[pos_ + 3]);
        pos_ += 4;
        return v;
    }

    uint64_t u64() {
        uint64_t hi = u32();
        return (hi << 32) | u32();
    }

    int64_t i64() { return static_cast<int64_t>(u64()); }

    double f64() { return std::bit_cast<double>(u64()); }

    bool boolean() { return u8() != 0; }

    Bytes raw(size_t n) {
        need(n);
        Bytes out(data_.begin() + pos_, data_.begin() + pos_ + n);
        pos_ += n;
        return out;
    }

    Bytes bytes() { return raw(u32()); }

    std::string str() {
        Bytes b = bytes();
        return std::string(b.begin(), b.end());
    }

    size_t list_count() { return u32(); }

    bool done() const { return pos_ == data_.size(); }
    size_t remaining() const { return data_.size() - pos_; }

    void expect_done() const {
        if (!done()) throw DecodeError("trailing bytes after decode");
    }

private:
    void need(size_t n) const {
        if (data_.size() - pos_ < n) throw DecodeError("input truncated");
    }

    BytesView data_;
    size_t pos_ = 0;
};

}  // namespace pixiu
