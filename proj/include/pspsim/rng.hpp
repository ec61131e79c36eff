#pragma once

// Counter-based random number generation (Philox4x64-10) with explicit
// stream derivation, so frames and noise sources can be sampled
// independently and reproducibly regardless of evaluation order.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace pspsim {

// Philox4x64 with 10 rounds. Output matches the reference implementation
// used by numpy.random.Philox (see rng_test.cpp for frozen vectors).
struct Philox4x64 {
    using Key = std::array<std::uint64_t, 2>;
    using Counter = std::array<std::uint64_t, 4>;

    static constexpr std::uint64_t kMul0 = 0xD2E7470EE14C6C93ull;
    static constexpr std::uint64_t kMul1 = 0xCA5A826395121157ull;
    static constexpr std::uint64_t kWeyl0 = 0x9E3779B97F4A7C15ull;
    static constexpr std::uint64_t kWeyl1 = 0xBB67AE8584CAA73Bull;

    static Counter block(Counter ctr, Key key) {
        for (int round = 0; round < 10; ++round) {
            ctr = round_fn(ctr, key);
            key[0] += kWeyl0;
            key[1] += kWeyl1;
        }
        return ctr;
    }

  private:
    static void mulhilo(std::uint64_t a, std::uint64_t b, std::uint64_t& hi,
                        std::uint64_t& lo) {
        const unsigned __int128 prod =
            static_cast<unsigned __int128>(a) * static_cast<unsigned __int128>(b);
        hi = static_cast<std::uint64_t>(prod >> 64);
        lo = static_cast<std::uint64_t>(prod);
    }

    static Counter round_fn(const Counter& c, const Key& k) {
        std::uint64_t hi0, lo0, hi1, lo1;
        mulhilo(kMul0, c[0], hi0, lo0);
        mulhilo(kMul1, c[2], hi1, lo1);
        return {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
    }
};

// One independent random stream. Streams are cheap value types; derive
// sub-streams with child(tag) — the derivation is position-independent,
// so concurrent frame processing cannot change any sequence.
class RngStream {
  public:
    RngStream() : RngStream(0, 0) {}
    explicit RngStream(std::uint64_t seed, std::uint64_t stream = 0)
        : key_{seed, stream} {}
    explicit RngStream(Philox4x64::Key key) : key_{key} {}

    // Derives an independent stream keyed by (this stream, tag). The child
    // key is a Philox block over a counter namespace never used for output.
    [[nodiscard]] RngStream child(std::uint64_t tag) const {
        const auto blk =
            Philox4x64::block({tag, kChildDomain, 0, 0}, key_);
        return RngStream(Philox4x64::Key{blk[0], blk[1]});
    }

    std::uint64_t next_u64() {
        if (pos_ == 4) {
            buf_ = Philox4x64::block(ctr_, key_);
            pos_ = 0;
            // 256-bit counter increment (little-endian words).
            for (auto& word : ctr_) {
                if (++word != 0) break;
            }
        }
        return buf_[pos_++];
    }

    // Uniform on (0, 1]; never returns 0 so log() is always defined.
    double uniform01() {
        return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) {
        return lo + (hi - lo) * uniform01();
    }

    // Standard normal via Box-Muller; the second deviate is cached.
    double normal() {
        if (have_cached_) {
            have_cached_ = false;
            return cached_;
        }
        const double u1 = uniform01();
        const double u2 = uniform01();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * std::numbers::pi * u2;
        cached_ = r * std::sin(a);
        have_cached_ = true;
        return r * std::cos(a);
    }

    double normal(double sigma) { return sigma * normal(); }

  private:
    static constexpr std::uint64_t kChildDomain = 0x5053502d4348494cull;

    Philox4x64::Key key_;
    Philox4x64::Counter ctr_{0, 0, 0, 0};
    std::array<std::uint64_t, 4> buf_{};
    int pos_ = 4;
    bool have_cached_ = false;
    double cached_ = 0.0;
};

}  // namespace pspsim
