// random.hpp: Philox4x32-10 counter-based generator.
//
// A stream is identified by (key, stream index); the index occupies the two
// high counter words, so distinct indices never share a counter block.

#pragma once

#include <array>
#include <cstdint>
#include <limits>

namespace ctoqw {

class Philox4x32 {
public:
    using result_type = std::uint32_t;
    using Block = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    Philox4x32(std::uint64_t seed, std::uint64_t stream)
        : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
          stream_(stream)
    {
    }

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()()
    {
        if (pos_ == 4) {
            const Block ctr{static_cast<std::uint32_t>(block_), static_cast<std::uint32_t>(block_ >> 32),
                            static_cast<std::uint32_t>(stream_),
                            static_cast<std::uint32_t>(stream_ >> 32)};
            out_ = bijection(ctr, key_);
            ++block_;
            pos_ = 0;
        }
        return out_[pos_++];
    }

    // Uniform on the open interval (0, 1) with 53 random bits.
    double uniform()
    {
        const std::uint64_t hi = (*this)();
        const std::uint64_t lo = (*this)();
        const std::uint64_t bits = ((hi << 32) | lo) >> 11;
        return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
    }

    // The ten-round Philox4x32 bijection of one counter block.
    static Block bijection(Block ctr, Key key)
    {
        constexpr std::uint32_t kM0 = 0xD2511F53;
        constexpr std::uint32_t kM1 = 0xCD9E8D57;
        constexpr std::uint32_t kW0 = 0x9E3779B9;
        constexpr std::uint32_t kW1 = 0xBB67AE85;
        for (int round = 0; round < 10; ++round) {
            if (round > 0) {
                key[0] += kW0;
                key[1] += kW1;
            }
            const std::uint64_t p0 = static_cast<std::uint64_t>(kM0) * ctr[0];
            const std::uint64_t p1 = static_cast<std::uint64_t>(kM1) * ctr[2];
            ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0],
                   static_cast<std::uint32_t>(p1),
                   static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1],
                   static_cast<std::uint32_t>(p0)};
        }
        return ctr;
    }

private:
    Key key_;
    std::uint64_t stream_;
    std::uint64_t block_ = 0;
    Block out_{};
    int pos_ = 4;
};

} // namespace ctoqw
