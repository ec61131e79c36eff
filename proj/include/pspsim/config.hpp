#pragma once

// JSON experiment configuration: schema, defaults (the Table-1 style
// profile ships in configs/), validation with field-path error messages,
// and assembly of the per-module parameter structs.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>

#include "json.hpp"
#include "pspsim/channel.hpp"
#include "pspsim/dsp.hpp"
#include "pspsim/errors.hpp"
#include "pspsim/quadrature.hpp"
#include "pspsim/security.hpp"
#include "pspsim/transmitter.hpp"

namespace pspsim {

using json = nlohmann::ordered_json;

struct ExperimentConfig {
    // source
    double n0 = 4971.572;
    std::uint64_t seed = 20250810;
    // transmitter
    double eta0 = 0.0299;
    double eta1 = 0.01;
    double eta3 = 0.01;
    DetectorParams alice_det{0.56, 0.34};
    double beacon_amplitude = 1000.0;
    // channel
    TurbulenceModel model;
    ChannelDynamics dynamics;
    double phase_linewidth_hz = 100.0;
    double excess_noise_snu = 0.0;
    // receiver
    DetectorParams bob_det{0.56, 0.38};
    double pilot_offset_hz = 14e9;
    double pilot_filter_bandwidth_hz = 4e7;
    double pilot_peak_threshold = 50.0;
    std::size_t phase_smoothing_window = 4096;
    std::size_t model_window = 129;
    std::size_t transmittance_smoothing_window = 4096;
    std::size_t edge_guard_symbols = 512;
    double raw_scale = 1.0;
    int samples_per_symbol = 2;
    // security
    double beta = 0.96;
    double fer = 0.3;
    double f_m_hz = 20e9;
    bool detector_trusted = true;
    double bin_width_db = 1.0;
    double bin_lo_db = -24.0;
    double bin_hi_db = -16.0;
    // run
    std::size_t frames = 25;
    std::size_t symbols_per_frame = 65536;
    double sync_fraction = 1.0;
    std::size_t sync_max_lag = 64;
    std::size_t budget_frames = 8;
    std::size_t calibration_frames = 256;
    std::string output_dir = "out";

    json echo;  // normalized configuration, for reports

    TransmitterParams transmitter_params() const {
        TransmitterParams p;
        p.eta0 = eta0;
        p.eta1 = eta1;
        p.eta3 = eta3;
        p.alice_det = alice_det;
        p.n0 = n0;
        p.beacon_amplitude = beacon_amplitude;
        return p;
    }

    SecurityConfig security_config() const {
        SecurityConfig c;
        c.beta = beta;
        c.fer = fer;
        c.f_m_hz = f_m_hz;
        c.detector_trusted = detector_trusted;
        c.bob_det = bob_det;
        return c;
    }

    ReceiverFrontend frontend() const {
        ReceiverFrontend fe;
        fe.det = bob_det;
        fe.pilot_offset_hz = pilot_offset_hz;
        fe.samples_per_symbol = samples_per_symbol;
        fe.raw_scale = raw_scale;
        return fe;
    }

    CompensationParams compensation_params() const {
        CompensationParams cp;
        cp.pilot_offset_hz = pilot_offset_hz;
        cp.samples_per_symbol = samples_per_symbol;
        cp.model_window = model_window;
        cp.edge_guard_symbols = edge_guard_symbols;
        return cp;
    }
};

namespace detail_cfg {

inline void fail(const std::string& path, const std::string& msg) {
    throw ConfigError(path + ": " + msg);
}

inline const json* find(const json& j, const char* key) {
    if (!j.is_object()) return nullptr;
    auto it = j.find(key);
    return it == j.end() ? nullptr : &*it;
}

inline double num(const json& j, const std::string& path, const char* key,
                  double def) {
    const json* v = find(j, key);
    if (!v) return def;
    if (!v->is_number()) fail(path + "." + key, "expected a number");
    return v->get<double>();
}

inline std::uint64_t uint(const json& j, const std::string& path,
                          const char* key, std::uint64_t def) {
    const json* v = find(j, key);
    if (!v) return def;
    if (!v->is_number_unsigned() && !v->is_number_integer())
        fail(path + "." + key, "expected a non-negative integer");
    if (v->is_number_integer() && v->get<std::int64_t>() < 0)
        fail(path + "." + key, "expected a non-negative integer");
    return v->get<std::uint64_t>();
}

inline bool flag(const json& j, const std::string& path, const char* key,
                 bool def) {
    const json* v = find(j, key);
    if (!v) return def;
    if (!v->is_boolean()) fail(path + "." + key, "expected a boolean");
    return v->get<bool>();
}

inline std::string str(const json& j, const std::string& path, const char* key,
                       const std::string& def) {
    const json* v = find(j, key);
    if (!v) return def;
    if (!v->is_string()) fail(path + "." + key, "expected a string");
    return v->get<std::string>();
}

inline void check_range(double v, double lo, double hi, const std::string& path) {
    if (!(v >= lo && v <= hi))
        fail(path, "must be in [" + std::to_string(lo) + ", " +
                       std::to_string(hi) + "]");
}

inline void check_nonneg(double v, const std::string& path) {
    if (!(v >= 0.0)) fail(path, "must be >= 0");
}

inline void check_pos(double v, const std::string& path) {
    if (!(v > 0.0)) fail(path, "must be > 0");
}

}  // namespace detail_cfg

// Parses and validates a configuration object. base_dir resolves relative
// histogram file references.
inline ExperimentConfig parse_config(const json& j,
                                     const std::string& base_dir = ".") {
    using namespace detail_cfg;
    if (!j.is_object()) throw ConfigError("config: expected a JSON object");
    ExperimentConfig c;

    const json src = j.contains("source") ? j["source"] : json::object();
    c.n0 = num(src, "source", "n0", c.n0);
    check_nonneg(c.n0, "source.n0");
    c.seed = uint(src, "source", "seed", c.seed);

    const json tx = j.contains("transmitter") ? j["transmitter"] : json::object();
    c.eta0 = num(tx, "transmitter", "eta0", c.eta0);
    c.eta1 = num(tx, "transmitter", "eta1", c.eta1);
    c.eta3 = num(tx, "transmitter", "eta3", c.eta3);
    check_range(c.eta0, 0.0, 1.0, "transmitter.eta0");
    check_range(c.eta1, 0.0, 1.0, "transmitter.eta1");
    check_range(c.eta3, 0.0, 1.0, "transmitter.eta3");
    c.beacon_amplitude = num(tx, "transmitter", "beacon_amplitude",
                             c.beacon_amplitude);
    check_nonneg(c.beacon_amplitude, "transmitter.beacon_amplitude");
    if (const json* det = find(tx, "alice_detector")) {
        c.alice_det.efficiency = num(*det, "transmitter.alice_detector",
                                     "efficiency", c.alice_det.efficiency);
        c.alice_det.electronic_noise =
            num(*det, "transmitter.alice_detector", "electronic_noise",
                c.alice_det.electronic_noise);
    }
    if (!(c.alice_det.efficiency > 0.0 && c.alice_det.efficiency <= 1.0))
        fail("transmitter.alice_detector.efficiency", "must be in (0, 1]");
    check_nonneg(c.alice_det.electronic_noise,
                 "transmitter.alice_detector.electronic_noise");

    const json ch = j.contains("channel") ? j["channel"] : json::object();
    const std::string kind = str(ch, "channel", "model", "static");
    if (kind == "static") {
        c.model.kind = TurbulenceKind::kStatic;
    } else if (kind == "lognormal") {
        c.model.kind = TurbulenceKind::kLogNormal;
    } else if (kind == "histogram") {
        c.model.kind = TurbulenceKind::kEmpiricalHistogram;
    } else {
        fail("channel.model", "must be one of static, lognormal, histogram");
    }
    c.model.mean_db = num(ch, "channel", "mean_db", -23.4);
    c.model.sigma = num(ch, "channel", "sigma_db", 0.0);
    check_nonneg(c.model.sigma, "channel.sigma_db");
    if (c.model.kind == TurbulenceKind::kStatic && c.model.sigma != 0.0)
        fail("channel.sigma_db", "must be 0 for the static model");
    c.model.bin_width_db = num(ch, "channel", "histogram_bin_width_db", 1.0);
    const std::string hist_file = str(ch, "channel", "histogram_file", "");
    if (c.model.kind == TurbulenceKind::kEmpiricalHistogram) {
        if (hist_file.empty())
            fail("channel.histogram_file", "required for the histogram model");
        const auto path = std::filesystem::path(base_dir) / hist_file;
        try {
            c.model = load_histogram(path.string(), c.model.bin_width_db);
        } catch (const Error& e) {
            fail("channel.histogram_file", e.what());
        }
    }
    c.dynamics.intra_frame_drift_db =
        num(ch, "channel", "intra_frame_drift_db", 0.0);
    check_nonneg(c.dynamics.intra_frame_drift_db, "channel.intra_frame_drift_db");
    if (c.dynamics.intra_frame_drift_db >= 1.0)
        fail("channel.intra_frame_drift_db", "must be < 1 dB");
    c.dynamics.freq_offset_hz = num(ch, "channel", "freq_offset_hz", 1.1e9);
    c.dynamics.freq_drift_hz_per_s =
        num(ch, "channel", "freq_drift_hz_per_s", 0.0);
    c.phase_linewidth_hz = num(ch, "channel", "phase_linewidth_hz", 100.0);
    check_nonneg(c.phase_linewidth_hz, "channel.phase_linewidth_hz");
    c.excess_noise_snu = num(ch, "channel", "excess_noise_snu", 0.0);
    check_nonneg(c.excess_noise_snu, "channel.excess_noise_snu");

    const json rx = j.contains("receiver") ? j["receiver"] : json::object();
    if (const json* det = find(rx, "bob_detector")) {
        c.bob_det.efficiency = num(*det, "receiver.bob_detector", "efficiency",
                                   c.bob_det.efficiency);
        c.bob_det.electronic_noise = num(*det, "receiver.bob_detector",
                                         "electronic_noise",
                                         c.bob_det.electronic_noise);
    }
    if (!(c.bob_det.efficiency > 0.0 && c.bob_det.efficiency <= 1.0))
        fail("receiver.bob_detector.efficiency", "must be in (0, 1]");
    check_nonneg(c.bob_det.electronic_noise,
                 "receiver.bob_detector.electronic_noise");
    c.pilot_offset_hz = num(rx, "receiver", "pilot_offset_hz", c.pilot_offset_hz);
    c.pilot_filter_bandwidth_hz =
        num(rx, "receiver", "pilot_filter_bandwidth_hz",
            c.pilot_filter_bandwidth_hz);
    check_pos(c.pilot_filter_bandwidth_hz, "receiver.pilot_filter_bandwidth_hz");
    c.pilot_peak_threshold =
        num(rx, "receiver", "pilot_peak_threshold", c.pilot_peak_threshold);
    check_pos(c.pilot_peak_threshold, "receiver.pilot_peak_threshold");
    c.phase_smoothing_window = uint(rx, "receiver", "phase_smoothing_window",
                                    c.phase_smoothing_window);
    c.model_window = uint(rx, "receiver", "model_window", c.model_window);
    c.transmittance_smoothing_window =
        uint(rx, "receiver", "transmittance_smoothing_window",
             c.transmittance_smoothing_window);
    c.edge_guard_symbols =
        uint(rx, "receiver", "edge_guard_symbols", c.edge_guard_symbols);
    c.raw_scale = num(rx, "receiver", "raw_scale", c.raw_scale);
    check_pos(c.raw_scale, "receiver.raw_scale");
    c.samples_per_symbol = static_cast<int>(
        uint(rx, "receiver", "samples_per_symbol",
             static_cast<std::uint64_t>(c.samples_per_symbol)));
    if (c.samples_per_symbol < 1)
        fail("receiver.samples_per_symbol", "must be >= 1");

    const json sec = j.contains("security") ? j["security"] : json::object();
    c.beta = num(sec, "security", "beta", c.beta);
    if (!(c.beta > 0.0 && c.beta <= 1.0)) fail("security.beta", "must be in (0, 1]");
    c.fer = num(sec, "security", "fer", c.fer);
    if (!(c.fer >= 0.0 && c.fer < 1.0)) fail("security.fer", "must be in [0, 1)");
    c.f_m_hz = num(sec, "security", "f_m_hz", c.f_m_hz);
    check_pos(c.f_m_hz, "security.f_m_hz");
    c.detector_trusted = flag(sec, "security", "detector_trusted", true);
    c.bin_width_db = num(sec, "security", "bin_width_db", c.bin_width_db);
    check_pos(c.bin_width_db, "security.bin_width_db");
    if (const json* range = find(sec, "bin_range_db")) {
        if (!range->is_array() || range->size() != 2 ||
            !(*range)[0].is_number() || !(*range)[1].is_number())
            fail("security.bin_range_db", "expected [lo_db, hi_db]");
        c.bin_lo_db = (*range)[0].get<double>();
        c.bin_hi_db = (*range)[1].get<double>();
        if (!(c.bin_hi_db > c.bin_lo_db))
            fail("security.bin_range_db", "range must be non-empty");
    }

    const json run = j.contains("run") ? j["run"] : json::object();
    c.frames = uint(run, "run", "frames", c.frames);
    c.symbols_per_frame = uint(run, "run", "symbols_per_frame",
                               c.symbols_per_frame);
    if (c.symbols_per_frame < 1024)
        fail("run.symbols_per_frame", "must be >= 1024");
    c.sync_fraction = num(run, "run", "sync_fraction", c.sync_fraction);
    if (!(c.sync_fraction > 0.0 && c.sync_fraction <= 1.0))
        fail("run.sync_fraction", "must be in (0, 1]");
    c.sync_max_lag = uint(run, "run", "sync_max_lag", c.sync_max_lag);
    c.budget_frames = uint(run, "run", "budget_frames", c.budget_frames);
    c.calibration_frames =
        uint(run, "run", "calibration_frames", c.calibration_frames);
    if (c.calibration_frames < 1)
        fail("run.calibration_frames", "must be >= 1");
    c.output_dir = str(run, "run", "output_dir", c.output_dir);

    // cross-field checks
    const double fs = c.f_m_hz * c.samples_per_symbol;
    if (std::abs(c.pilot_offset_hz) + c.pilot_filter_bandwidth_hz / 2.0 >=
        fs / 2.0)
        fail("receiver.pilot_offset_hz", "pilot band exceeds the Nyquist span");
    if (2 * c.edge_guard_symbols + 1024 > c.symbols_per_frame)
        fail("receiver.edge_guard_symbols",
             "guard leaves too few symbols per frame");

    c.echo = j;
    return c;
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }
    const auto base = std::filesystem::path(path).parent_path();
    return parse_config(j, base.empty() ? "." : base.string());
}

}  // namespace pspsim
