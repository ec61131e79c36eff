#include "pspsim/rng.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

namespace {

using pspsim::Philox4x64;
using pspsim::RngStream;

// Known-answer vectors generated with numpy.random.Philox (4x64, 10 rounds),
// raw outputs in buffer order with a little-endian 256-bit counter.
TEST(Philox, KnownAnswers) {
    {
        Philox4x64::Key key{0, 0};
        auto b0 = Philox4x64::block({0, 0, 0, 0}, key);
        EXPECT_EQ(b0[0], 0x16554d9eca36314cull);
        EXPECT_EQ(b0[1], 0xdb20fe9d672d0fdcull);
        EXPECT_EQ(b0[2], 0xd7e772cee186176bull);
        EXPECT_EQ(b0[3], 0x7e68b68aec7ba23bull);
        auto b1 = Philox4x64::block({1, 0, 0, 0}, key);
        EXPECT_EQ(b1[0], 0x02f4ba6408e4d89bull);
        EXPECT_EQ(b1[1], 0x3dd62b0b9ca8c5b2ull);
        EXPECT_EQ(b1[2], 0x1c8667a55d902e79ull);
        EXPECT_EQ(b1[3], 0x907d7a052fd5b4dcull);
    }
    {
        Philox4x64::Key key{0xdeadbeef12345678ull, 0x0badc0ffee000001ull};
        auto b0 = Philox4x64::block({1, 2, 3, 4}, key);
        EXPECT_EQ(b0[0], 0x9cd30c942a3452aaull);
        EXPECT_EQ(b0[1], 0x1668111f113b2b4aull);
        EXPECT_EQ(b0[2], 0x3323146f6978bb4full);
        EXPECT_EQ(b0[3], 0x1cf9d127f61f67deull);
        auto b1 = Philox4x64::block({2, 2, 3, 4}, key);
        EXPECT_EQ(b1[0], 0xa0d59a1d13ac0134ull);
        EXPECT_EQ(b1[1], 0x8a9836de9f265258ull);
        EXPECT_EQ(b1[2], 0x347a4c935b6f39acull);
        EXPECT_EQ(b1[3], 0x42e209d0842ce7e1ull);
    }
    {
        Philox4x64::Key key{1, 2};
        auto b0 = Philox4x64::block({3, 4, 5, 6}, key);
        EXPECT_EQ(b0[0], 0x8fe589c1e3af7c9full);
        EXPECT_EQ(b0[1], 0x038145b0ab66e2b8ull);
        EXPECT_EQ(b0[2], 0x470dc167ada021e5ull);
        EXPECT_EQ(b0[3], 0xc747dda6a6db44d2ull);
    }
}

// The stream wrapper must consume blocks in counter order with carry.
TEST(Philox, StreamMatchesBlocks) {
    RngStream s(0, 0);
    EXPECT_EQ(s.next_u64(), 0x16554d9eca36314cull);
    EXPECT_EQ(s.next_u64(), 0xdb20fe9d672d0fdcull);
    EXPECT_EQ(s.next_u64(), 0xd7e772cee186176bull);
    EXPECT_EQ(s.next_u64(), 0x7e68b68aec7ba23bull);
    EXPECT_EQ(s.next_u64(), 0x02f4ba6408e4d89bull);
}

TEST(RngStream, Deterministic) {
    RngStream a(1234, 7);
    RngStream b(1234, 7);
    for (int i = 0; i < 1000; ++i) {
        ASSERT_EQ(a.next_u64(), b.next_u64());
    }
    RngStream c(1234, 7);
    RngStream d(1234, 7);
    for (int i = 0; i < 1000; ++i) {
        ASSERT_EQ(c.normal(), d.normal());
    }
}

TEST(RngStream, ChildIndependentOfParentPosition) {
    RngStream a(42);
    RngStream b(42);
    b.next_u64();  // advance the parent
    RngStream ca = a.child(5);
    RngStream cb = b.child(5);
    for (int i = 0; i < 100; ++i) ASSERT_EQ(ca.next_u64(), cb.next_u64());

    RngStream c1 = a.child(1);
    RngStream c2 = a.child(2);
    EXPECT_NE(c1.next_u64(), c2.next_u64());
}

TEST(RngStream, Uniform01Range) {
    RngStream s(99);
    for (int i = 0; i < 100000; ++i) {
        const double u = s.uniform01();
        ASSERT_GT(u, 0.0);
        ASSERT_LE(u, 1.0);
    }
}

TEST(RngStream, NormalMoments) {
    RngStream s(7);
    const int n = 1000000;
    double m1 = 0.0, m2 = 0.0, m4 = 0.0;
    for (int i = 0; i < n; ++i) {
        const double x = s.normal();
        m1 += x;
        m2 += x * x;
        m4 += x * x * x * x;
    }
    m1 /= n;
    m2 /= n;
    m4 /= n;
    EXPECT_NEAR(m1, 0.0, 4.0 / std::sqrt(static_cast<double>(n)));
    EXPECT_NEAR(m2, 1.0, 4.0 * std::sqrt(2.0 / n));
    EXPECT_NEAR(m4, 3.0, 0.05);
}

TEST(RngStream, ChildStreamsUncorrelated) {
    RngStream root(2024);
    RngStream a = root.child(1);
    RngStream b = root.child(2);
    const int n = 200000;
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (int i = 0; i < n; ++i) {
        const double x = a.normal();
        const double y = b.normal();
        sab += x * y;
        saa += x * x;
        sbb += y * y;
    }
    const double rho = sab / std::sqrt(saa * sbb);
    EXPECT_NEAR(rho, 0.0, 4.0 / std::sqrt(static_cast<double>(n)));
}

}  // namespace
