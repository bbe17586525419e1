#pragma once

#include <cstdint>
#include <vector>

#include "avth/error.hpp"

namespace avth {

// MSB-first bit stream; the final partial byte is zero-padded.
class BitWriter {
public:
    void put_bit(int bit) {
        acc_ = static_cast<uint8_t>((acc_ << 1) | (bit & 1));
        if (++fill_ == 8) {
            bytes_.push_back(acc_);
            acc_ = 0;
            fill_ = 0;
        }
    }

    void put_bits(uint64_t value, int count) {
        for (int i = count - 1; i >= 0; --i) put_bit(static_cast<int>((value >> i) & 1));
    }

    // Unsigned exp-Golomb.
    void put_ue(uint64_t v) {
        uint64_t x = v + 1;
        int len = 0;
        for (uint64_t t = x; t > 1; t >>= 1) ++len;
        for (int i = 0; i < len; ++i) put_bit(0);
        put_bits(x, len + 1);
    }

    // Signed exp-Golomb: 0,1,-1,2,-2,... maps to 0,1,2,3,4,...
    void put_se(int64_t v) {
        uint64_t m = v > 0 ? static_cast<uint64_t>(2 * v - 1) : static_cast<uint64_t>(-2 * v);
        put_ue(m);
    }

    std::vector<uint8_t> finish() {
        std::vector<uint8_t> out = bytes_;
        if (fill_ > 0) out.push_back(static_cast<uint8_t>(acc_ << (8 - fill_)));
        return out;
    }

private:
    std::vector<uint8_t> bytes_;
    uint8_t acc_ = 0;
    int fill_ = 0;
};

class BitReader {
public:
    BitReader(const uint8_t* data, size_t len) : data_(data), len_(len) {}

    int get_bit() {
        size_t byte = pos_ >> 3;
        if (byte >= len_) throw CodecError("exp-Golomb overrun: bit stream exhausted");
        int bit = (data_[byte] >> (7 - (pos_ & 7))) & 1;
        ++pos_;
        return bit;
    }

    uint64_t get_bits(int count) {
        uint64_t v = 0;
        for (int i = 0; i < count; ++i) v = (v << 1) | static_cast<uint64_t>(get_bit());
        return v;
    }

    uint64_t get_ue() {
        int zeros = 0;
        while (get_bit() == 0) {
            if (++zeros > 63) throw CodecError("exp-Golomb overrun: prefix too long");
        }
        uint64_t x = (1ull << zeros) | get_bits(zeros);
        return x - 1;
    }

    int64_t get_se() {
        uint64_t m = get_ue();
        if (m & 1) return static_cast<int64_t>((m + 1) / 2);
        return -static_cast<int64_t>(m / 2);
    }

private:
    const uint8_t* data_;
    size_t len_;
    size_t pos_ = 0;
};

}  // namespace avth
