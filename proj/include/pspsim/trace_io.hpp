#pragma once

// Binary baseband trace container shared by the simulator output and the
// analyzer input. Little-endian layout:
//   bytes 0..7   magic "PSPTRACE"
//   bytes 8..11  version (u32, currently 1)
//   bytes 12..15 reserved (u32, zero)
//   bytes 16..23 sample_rate_hz (f64)
//   bytes 24..31 sample count (u64)
//   then count interleaved (re, im) f64 pairs.
// The symbol rate is not part of the header; the analyzer takes it from its
// configuration.

#include <array>
#include <complex>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "pspsim/errors.hpp"

namespace pspsim {

struct BasebandTrace {
    std::vector<std::complex<double>> samples;
    double sample_rate_hz = 0.0;
    double symbol_rate_hz = 0.0;
};

namespace detail {
inline constexpr std::array<char, 8> kTraceMagic = {'P', 'S', 'P', 'T',
                                                    'R', 'A', 'C', 'E'};
inline constexpr std::uint32_t kTraceVersion = 1;
}  // namespace detail

inline void write_trace(const std::string& path, const BasebandTrace& trace) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open trace file for writing: " + path);
    out.write(detail::kTraceMagic.data(), detail::kTraceMagic.size());
    const std::uint32_t version = detail::kTraceVersion;
    const std::uint32_t reserved = 0;
    const double rate = trace.sample_rate_hz;
    const std::uint64_t count = trace.samples.size();
    out.write(reinterpret_cast<const char*>(&version), sizeof version);
    out.write(reinterpret_cast<const char*>(&reserved), sizeof reserved);
    out.write(reinterpret_cast<const char*>(&rate), sizeof rate);
    out.write(reinterpret_cast<const char*>(&count), sizeof count);
    for (const auto& s : trace.samples) {
        const double re = s.real();
        const double im = s.imag();
        out.write(reinterpret_cast<const char*>(&re), sizeof re);
        out.write(reinterpret_cast<const char*>(&im), sizeof im);
    }
    if (!out) throw Error("short write on trace file: " + path);
}

inline BasebandTrace read_trace(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open trace file: " + path);
    std::array<char, 8> magic{};
    in.read(magic.data(), magic.size());
    if (!in || magic != detail::kTraceMagic)
        throw FormatError("bad trace magic in " + path);
    std::uint32_t version = 0, reserved = 0;
    in.read(reinterpret_cast<char*>(&version), sizeof version);
    in.read(reinterpret_cast<char*>(&reserved), sizeof reserved);
    if (!in || version != detail::kTraceVersion)
        throw FormatError("unsupported trace version in " + path);
    double rate = 0.0;
    std::uint64_t count = 0;
    in.read(reinterpret_cast<char*>(&rate), sizeof rate);
    in.read(reinterpret_cast<char*>(&count), sizeof count);
    if (!in) throw FormatError("truncated trace header in " + path);
    if (count > (1ull << 32))
        throw FormatError("implausible sample count in " + path);
    BasebandTrace trace;
    trace.sample_rate_hz = rate;
    trace.samples.resize(count);
    for (auto& s : trace.samples) {
        double re = 0.0, im = 0.0;
        in.read(reinterpret_cast<char*>(&re), sizeof re);
        in.read(reinterpret_cast<char*>(&im), sizeof im);
        s = {re, im};
    }
    if (!in) throw FormatError("truncated trace payload in " + path);
    return trace;
}

}  // namespace pspsim
