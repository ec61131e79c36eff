#include "pspsim/trace_io.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "pspsim/rng.hpp"

namespace {

using namespace pspsim;

std::filesystem::path tmpfile(const char* name) {
    return std::filesystem::temp_directory_path() / name;
}

TEST(TraceIo, RoundTripIsExact) {
    BasebandTrace t;
    t.sample_rate_hz = 40e9;
    RngStream rng(71);
    t.samples.resize(1000);
    for (auto& s : t.samples) s = {rng.normal(), rng.normal()};
    const auto path = tmpfile("psp_trace_roundtrip.trace");
    write_trace(path.string(), t);
    auto r = read_trace(path.string());
    EXPECT_DOUBLE_EQ(r.sample_rate_hz, t.sample_rate_hz);
    ASSERT_EQ(r.samples.size(), t.samples.size());
    for (std::size_t i = 0; i < t.samples.size(); ++i)
        ASSERT_EQ(r.samples[i], t.samples[i]);  // bit-exact
    std::filesystem::remove(path);
}

TEST(TraceIo, CorruptedMagicIsRejected) {
    BasebandTrace t;
    t.sample_rate_hz = 1.0;
    t.samples = {{1.0, 2.0}};
    const auto path = tmpfile("psp_trace_badmagic.trace");
    write_trace(path.string(), t);
    {
        std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(0);
        f.write("XX", 2);
    }
    EXPECT_THROW(read_trace(path.string()), FormatError);
    std::filesystem::remove(path);
}

TEST(TraceIo, TruncatedPayloadIsRejected) {
    BasebandTrace t;
    t.sample_rate_hz = 1.0;
    t.samples.assign(16, {0.5, -0.5});
    const auto path = tmpfile("psp_trace_trunc.trace");
    write_trace(path.string(), t);
    std::filesystem::resize_file(path, std::filesystem::file_size(path) - 8);
    EXPECT_THROW(read_trace(path.string()), FormatError);
    std::filesystem::remove(path);
}

TEST(TraceIo, MissingFile) {
    EXPECT_THROW(read_trace("/nonexistent/psp.trace"), Error);
}

}  // namespace
