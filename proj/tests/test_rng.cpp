#include "doctest.h"

#include <cmath>
#include <vector>

#include "bhc/rng.hpp"

using namespace bhc;

TEST_CASE("known answer, zero key and counter") {
    // Reference output of the 10-round 4x32 generator for an all-zero
    // counter and key, as published with the original generator suite.
    auto b = Philox::block(0, 0, 0, 0, 0, 0);
    CHECK(b.x[0] == 0x6627e8d5u);
    CHECK(b.x[1] == 0xe169c58du);
    CHECK(b.x[2] == 0xbc57ac4cu);
    CHECK(b.x[3] == 0x9b00dbd8u);
}

TEST_CASE("streams are deterministic and independent") {
    Philox a(1234, 7), b(1234, 7), c(1234, 8), d(4321, 7);
    bool same_cd = true;
    for (int i = 0; i < 256; ++i) {
        auto va = a.next_u32();
        CHECK(va == b.next_u32());
        same_cd = same_cd && (c.next_u32() == d.next_u32());
    }
    CHECK_FALSE(same_cd);
}

TEST_CASE("uniform moments") {
    Philox g(20260101, 0);
    const int n = 200000;
    double s1 = 0, s2 = 0;
    for (int i = 0; i < n; ++i) {
        double u = g.uniform();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        s1 += u;
        s2 += u * u;
    }
    double mean = s1 / n, var = s2 / n - mean * mean;
    // 5 sigma bands around 1/2 and 1/12.
    CHECK(std::abs(mean - 0.5) < 5.0 * std::sqrt(1.0 / 12.0 / n));
    CHECK(std::abs(var - 1.0 / 12.0) < 5e-3);
}

TEST_CASE("exponential deviates") {
    Philox g(99, 3);
    const int n = 100000;
    double s1 = 0;
    for (int i = 0; i < n; ++i) {
        double e = g.exponential();
        CHECK(e > 0.0);
        s1 += e;
    }
    CHECK(std::abs(s1 / n - 1.0) < 5.0 / std::sqrt(double(n)));
}
