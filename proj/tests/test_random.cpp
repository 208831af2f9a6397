#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <set>

#include "ctoqw/random.hpp"

using ctoqw::Philox4x32;

TEST_CASE("Philox4x32-10 known answers")
{
    using B = Philox4x32::Block;
    using K = Philox4x32::Key;
    CHECK(Philox4x32::bijection(B{0, 0, 0, 0}, K{0, 0}) ==
          B{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
    CHECK(Philox4x32::bijection(B{0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, K{0xffffffff, 0xffffffff}) ==
          B{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
    CHECK(Philox4x32::bijection(B{0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, K{0xa4093822, 0x299f31d0}) ==
          B{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("stream zero of seed zero starts at counter zero")
{
    Philox4x32 rng(0, 0);
    CHECK(rng() == 0x6627e8d5u);
    CHECK(rng() == 0xe169c58du);
    CHECK(rng() == 0xbc57ac4cu);
    CHECK(rng() == 0x9b00dbd8u);
}

TEST_CASE("streams are reproducible and distinct")
{
    Philox4x32 a(42, 7), b(42, 7), c(42, 8), e(43, 7);
    std::set<std::uint32_t> seen;
    bool differ_stream = false, differ_seed = false;
    for (int k = 0; k < 64; ++k) {
        const auto x = a();
        CHECK(x == b());
        differ_stream |= x != c();
        differ_seed |= x != e();
    }
    CHECK(differ_stream);
    CHECK(differ_seed);
}

TEST_CASE("uniform draws lie in the open unit interval with the right moments")
{
    Philox4x32 rng(123, 0);
    const int n = 200000;
    double sum = 0.0, sum2 = 0.0;
    for (int k = 0; k < n; ++k) {
        const double u = rng.uniform();
        REQUIRE(u > 0.0);
        REQUIRE(u < 1.0);
        sum += u;
        sum2 += u * u;
    }
    const double mean = sum / n;
    const double var = sum2 / n - mean * mean;
    CHECK(std::abs(mean - 0.5) < 5.0 * std::sqrt(1.0 / 12.0 / n));
    CHECK(std::abs(var - 1.0 / 12.0) < 2e-3);
}
