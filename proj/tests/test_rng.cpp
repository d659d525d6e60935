#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <vector>

#include "qrd/rng.hpp"

using namespace qrd;

TEST_CASE("philox4x32-10 known-answer vectors") {
    // Vectors from the Random123 reference test suite.
    auto r0 = PhiloxRng::block({0u, 0u, 0u, 0u}, {0u, 0u});
    CHECK(r0[0] == 0x6627e8d5u);
    CHECK(r0[1] == 0xe169c58du);
    CHECK(r0[2] == 0xbc57ac4cu);
    CHECK(r0[3] == 0x9b00dbd8u);

    auto r1 = PhiloxRng::block({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu},
                               {0xffffffffu, 0xffffffffu});
    CHECK(r1[0] == 0x408f276du);
    CHECK(r1[1] == 0x41c83b0eu);
    CHECK(r1[2] == 0xa20bc7c6u);
    CHECK(r1[3] == 0x6d5451fdu);

    auto r2 = PhiloxRng::block({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u},
                               {0xa4093822u, 0x299f31d0u});
    CHECK(r2[0] == 0xd16cfe09u);
    CHECK(r2[1] == 0x94fdccebu);
    CHECK(r2[2] == 0x5001e420u);
    CHECK(r2[3] == 0x24126ea1u);
}

TEST_CASE("streams are deterministic and independent") {
    PhiloxRng a(42, 7);
    PhiloxRng b(42, 7);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u32() == b.next_u32());

    PhiloxRng c(42, 8);
    PhiloxRng d(42, 7);
    bool all_equal = true;
    for (int i = 0; i < 16; ++i) all_equal &= (c.next_u32() == d.next_u32());
    CHECK_FALSE(all_equal);
}

TEST_CASE("uniform range and moments") {
    PhiloxRng rng(123, 0);
    double sum = 0.0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        const double u = rng.uniform();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
        sum += u;
    }
    // Mean of U(0,1): sd of the estimate is 1/sqrt(12 n) ~ 9.1e-4.
    CHECK(std::abs(sum / n - 0.5) < 5e-3);
}

TEST_CASE("normal moments") {
    PhiloxRng rng(9, 3);
    double sum = 0.0, sum2 = 0.0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        const double z = rng.normal();
        sum += z;
        sum2 += z * z;
    }
    CHECK(std::abs(sum / n) < 0.02);
    CHECK(std::abs(sum2 / n - 1.0) < 0.03);
}

TEST_CASE("exponential mean") {
    PhiloxRng rng(5, 11);
    double sum = 0.0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) sum += rng.exponential(2.5);
    CHECK(std::abs(sum / n - 2.5) < 0.05);
}

TEST_CASE("uniform_below is in range and deterministic") {
    PhiloxRng a(77, 1), b(77, 1);
    for (int i = 0; i < 1000; ++i) {
        const std::uint64_t va = a.uniform_below(13);
        CHECK(va < 13);
        CHECK(va == b.uniform_below(13));
    }
}

TEST_CASE("derive_seed separates subsystems") {
    CHECK(derive_seed(1, "sim") != derive_seed(1, "cluster"));
    CHECK(derive_seed(1, "sim") != derive_seed(2, "sim"));
    CHECK(derive_seed(1, "sim") == derive_seed(1, "sim"));
}
