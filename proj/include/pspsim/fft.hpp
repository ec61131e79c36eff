#pragma once

// In-place complex FFT: iterative radix-2 for power-of-two sizes and
// Bluestein's chirp-z algorithm for everything else, so frame lengths are
// unconstrained. Sizes here are modest (<= a few 2^21), which keeps this
// self-contained implementation comfortably fast for the whole test suite.

#include <complex>
#include <cstddef>
#include <numbers>
#include <vector>

namespace pspsim::fft {

using cd = std::complex<double>;

inline bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

inline std::size_t next_pow2(std::size_t n) {
    std::size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

inline void transform_radix2(std::vector<cd>& a, bool inverse) {
    const std::size_t n = a.size();
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang =
            (inverse ? 2.0 : -2.0) * std::numbers::pi / static_cast<double>(len);
        const cd wlen(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            cd w(1.0, 0.0);
            for (std::size_t j = 0; j < len / 2; ++j) {
                // resync the twiddle periodically to stop error accumulation
                if ((j & 63u) == 0)
                    w = cd(std::cos(ang * static_cast<double>(j)),
                           std::sin(ang * static_cast<double>(j)));
                const cd u = a[i + j];
                const cd v = a[i + j + len / 2] * w;
                a[i + j] = u + v;
                a[i + j + len / 2] = u - v;
                w *= wlen;
            }
        }
    }
    if (inverse) {
        const double inv = 1.0 / static_cast<double>(n);
        for (auto& x : a) x *= inv;
    }
}

// Forward DFT of arbitrary size via chirp-z. The chirp phase uses
// k^2 mod 2n to stay accurate for large k.
inline void transform_bluestein_forward(std::vector<cd>& a) {
    const std::size_t n = a.size();
    std::vector<cd> chirp(n);
    for (std::size_t k = 0; k < n; ++k) {
        const unsigned __int128 k2 =
            static_cast<unsigned __int128>(k) * static_cast<unsigned __int128>(k);
        const auto k2m = static_cast<std::uint64_t>(k2 % (2 * n));
        const double ang =
            -std::numbers::pi * static_cast<double>(k2m) / static_cast<double>(n);
        chirp[k] = cd(std::cos(ang), std::sin(ang));
    }
    const std::size_t m = next_pow2(2 * n - 1);
    std::vector<cd> fa(m), fb(m);
    for (std::size_t k = 0; k < n; ++k) fa[k] = a[k] * chirp[k];
    fb[0] = std::conj(chirp[0]);
    for (std::size_t k = 1; k < n; ++k)
        fb[k] = fb[m - k] = std::conj(chirp[k]);
    transform_radix2(fa, false);
    transform_radix2(fb, false);
    for (std::size_t i = 0; i < m; ++i) fa[i] *= fb[i];
    transform_radix2(fa, true);
    for (std::size_t k = 0; k < n; ++k) a[k] = fa[k] * chirp[k];
}

// In-place DFT, any size; inverse includes the 1/n scaling.
inline void transform(std::vector<cd>& a, bool inverse) {
    if (a.size() <= 1) return;
    if (is_pow2(a.size())) {
        transform_radix2(a, inverse);
        return;
    }
    if (!inverse) {
        transform_bluestein_forward(a);
    } else {
        for (auto& x : a) x = std::conj(x);
        transform_bluestein_forward(a);
        const double inv = 1.0 / static_cast<double>(a.size());
        for (auto& x : a) x = std::conj(x) * inv;
    }
}

// Frequency of FFT bin i for complex sampling at fs: bins [0, n/2] map to
// [0, fs/2] and the rest to negative frequencies.
inline double bin_frequency(std::size_t i, std::size_t n, double fs) {
    const double k = static_cast<double>(i);
    const double nn = static_cast<double>(n);
    return (k <= nn / 2.0 ? k : k - nn) * fs / nn;
}

// Nearest bin index for a frequency (wrapped into [0, n)).
inline std::size_t frequency_bin(double f, std::size_t n, double fs) {
    const double nn = static_cast<double>(n);
    double k = f / fs * nn;
    k = std::fmod(k, nn);
    if (k < 0) k += nn;
    auto i = static_cast<std::size_t>(std::llround(k));
    return i % n;
}

}  // namespace pspsim::fft
