#pragma once

// Free-space fading channel: per-symbol transmittance, carrier phase and
// frequency-offset trajectories, fading excess noise, and transmittance
// histograms.
//
// The phase trajectory lumps the channel phase and the differential laser
// phase into one Wiener process whose per-symbol increment variance is
// 2*pi*linewidth/symbol_rate. The frequency offset (LO minus signal
// carrier) travels with the realization so the receiver model can apply
// one consistent rotation to signal and pilot.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "pspsim/errors.hpp"
#include "pspsim/quadrature.hpp"
#include "pspsim/rng.hpp"

namespace pspsim {

enum class TurbulenceKind { kStatic, kLogNormal, kEmpiricalHistogram };

struct HistogramBin {
    double bin_lower_db = 0.0;
    double probability = 0.0;
};

struct TurbulenceModel {
    TurbulenceKind kind = TurbulenceKind::kStatic;
    double mean_db = 0.0;  // frame-mean transmittance in dB (<= 0)
    double sigma = 0.0;    // dB standard deviation for the log-normal kind
    std::vector<HistogramBin> histogram;
    double bin_width_db = 1.0;
};

inline void validate(const TurbulenceModel& m) {
    if (m.kind == TurbulenceKind::kStatic && m.sigma != 0.0)
        throw DomainError("static turbulence model requires sigma = 0");
    if (!(m.sigma >= 0.0)) throw DomainError("turbulence sigma must be >= 0");
    if (m.kind == TurbulenceKind::kEmpiricalHistogram) {
        if (m.histogram.empty())
            throw DomainError("empirical histogram model has no bins");
        if (!(m.bin_width_db > 0.0))
            throw DomainError("histogram bin width must be > 0");
        double sum = 0.0;
        for (const auto& b : m.histogram) {
            if (b.probability < 0.0)
                throw DomainError("histogram probabilities must be >= 0");
            sum += b.probability;
        }
        if (std::abs(sum - 1.0) > 1e-9)
            throw DomainError("histogram probabilities must sum to 1");
    }
}

struct ChannelRealization {
    std::vector<double> transmittance;  // T(t), linear, in (0, 1]
    std::vector<double> phase;          // theta_c(t), radians
    std::vector<double> freq_offset;    // (w_LO - w_s)/2pi, Hz
    double symbol_rate_hz = 0.0;
};

inline void validate(const ChannelRealization& r) {
    if (r.transmittance.size() != r.phase.size() ||
        r.phase.size() != r.freq_offset.size())
        throw LengthMismatchError("channel realization sequences differ in length");
    if (!(r.symbol_rate_hz > 0.0))
        throw DomainError("channel realization symbol rate must be > 0");
}

// Knobs beyond the turbulence model itself; all default to "off".
struct ChannelDynamics {
    double intra_frame_drift_db = 0.0;  // max-min transmittance span per frame
    double freq_offset_hz = 0.0;        // LO-signal carrier offset
    double freq_drift_hz_per_s = 0.0;   // slow offset drift
};

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
inline double linear_to_db(double lin) { return 10.0 * std::log10(lin); }

// Draws one frame: a single transmittance level per frame (static value,
// log-normal draw, or histogram bin) with an optional linear intra-frame
// drift, a Wiener phase, and the configured frequency offset ramp.
inline ChannelRealization sample_channel(const TurbulenceModel& model,
                                         double phase_linewidth_hz,
                                         double symbol_rate_hz,
                                         std::size_t frame_len, RngStream& rng,
                                         const ChannelDynamics& dyn = {}) {
    validate(model);
    if (frame_len == 0) throw EmptyRequestError("requested zero-length frame");
    if (!(symbol_rate_hz > 0.0)) throw DomainError("symbol rate must be > 0");
    if (!(phase_linewidth_hz >= 0.0)) throw DomainError("linewidth must be >= 0");
    if (!(dyn.intra_frame_drift_db >= 0.0))
        throw DomainError("intra-frame drift must be >= 0");

    double mean_db = model.mean_db;
    double drift_db = 0.0;
    switch (model.kind) {
        case TurbulenceKind::kStatic:
            break;  // exactly constant
        case TurbulenceKind::kLogNormal:
            mean_db = model.mean_db + model.sigma * rng.normal();
            drift_db = rng.uniform(-dyn.intra_frame_drift_db, dyn.intra_frame_drift_db);
            break;
        case TurbulenceKind::kEmpiricalHistogram: {
            double u = rng.uniform01();
            double acc = 0.0;
            const HistogramBin* chosen = &model.histogram.back();
            for (const auto& b : model.histogram) {
                acc += b.probability;
                if (u <= acc) {
                    chosen = &b;
                    break;
                }
            }
            mean_db = chosen->bin_lower_db + model.bin_width_db * rng.uniform01();
            drift_db = rng.uniform(-dyn.intra_frame_drift_db, dyn.intra_frame_drift_db);
            break;
        }
    }

    ChannelRealization out;
    out.symbol_rate_hz = symbol_rate_hz;
    out.transmittance.resize(frame_len);
    out.phase.resize(frame_len);
    out.freq_offset.resize(frame_len);

    const double n = static_cast<double>(frame_len);
    const double sigma_inc =
        std::sqrt(2.0 * std::numbers::pi * phase_linewidth_hz / symbol_rate_hz);
    double theta = rng.uniform(-std::numbers::pi, std::numbers::pi);
    for (std::size_t k = 0; k < frame_len; ++k) {
        const double frac = frame_len > 1 ? static_cast<double>(k) / (n - 1.0) : 0.0;
        const double level_db = mean_db + drift_db * (frac - 0.5);
        out.transmittance[k] = std::min(1.0, db_to_linear(level_db));
        out.phase[k] = theta;
        theta += sigma_inc * rng.normal();
        const double t = static_cast<double>(k) / symbol_rate_hz;
        out.freq_offset[k] = dyn.freq_offset_hz + dyn.freq_drift_hz_per_s * t;
    }
    return out;
}

// Total rotation (channel phase + frequency-offset ramp) at symbol k.
inline double symbol_rotation(const ChannelRealization& r, std::size_t k) {
    const double t = static_cast<double>(k) / r.symbol_rate_hz;
    return r.phase[k] + 2.0 * std::numbers::pi * r.freq_offset[k] * t;
}

// Applies the channel to one frame: each quadrature pair is rotated by the
// total phase, scaled by sqrt(T), and mixed with fresh vacuum; optional
// extra Gaussian noise of channel-input-referred variance excess_noise_snu
// models residual channel instability. The pilot amplitude is classical:
// scaled and rotated, no vacuum.
inline std::pair<std::vector<QuadraturePair>, std::vector<std::complex<double>>>
apply_channel(std::span<const QuadraturePair> signal, double pilot_amp,
              const ChannelRealization& real, RngStream& rng,
              double excess_noise_snu = 0.0) {
    validate(real);
    if (signal.size() != real.transmittance.size())
        throw LengthMismatchError("signal length does not match realization");
    if (!(excess_noise_snu >= 0.0))
        throw DomainError("channel excess noise must be >= 0");

    std::vector<QuadraturePair> out(signal.size());
    std::vector<std::complex<double>> pilot(signal.size());
    for (std::size_t k = 0; k < signal.size(); ++k) {
        const double T = real.transmittance[k];
        const double rot = symbol_rotation(real, k);
        const std::complex<double> phasor(std::cos(rot), std::sin(rot));
        const std::complex<double> s =
            std::complex<double>(signal[k].x, signal[k].p) * phasor;
        const double ct = std::sqrt(T);
        const double cv = std::sqrt(1.0 - T);
        const double cx = std::sqrt(T * excess_noise_snu);
        out[k].x = ct * s.real() + cv * rng.normal() + cx * rng.normal();
        out[k].p = ct * s.imag() + cv * rng.normal() + cx * rng.normal();
        pilot[k] = ct * pilot_amp * phasor;
    }
    return {std::move(out), std::move(pilot)};
}

// Fading excess noise Var(sqrt(eta)) * (V_A - 1) over the provided
// per-subframe transmittance samples (population variance).
inline double fading_noise(std::span<const double> transmittances, double v_a) {
    if (transmittances.empty())
        throw EmptyRequestError("fading noise needs at least one transmittance");
    if (!(v_a >= 0.0)) throw DomainError("V_A must be >= 0");
    double m1 = 0.0, m2 = 0.0;
    for (double t : transmittances) {
        const double r = std::sqrt(t);
        m1 += r;
        m2 += r * r;
    }
    const double n = static_cast<double>(transmittances.size());
    m1 /= n;
    m2 /= n;
    return (m2 - m1 * m1) * (v_a - 1.0);
}

struct HistogramResult {
    TurbulenceModel model;       // empirical histogram, probabilities sum to 1
    std::size_t excluded = 0;    // frames outside the requested range
    std::size_t total = 0;       // all frames seen
};

// Builds a normalized histogram of frame-mean transmittances over
// (range.first, range.second] dB; out-of-range frames are excluded from the
// normalization but counted.
inline HistogramResult transmittance_histogram(
    std::span<const double> frame_means_db, double bin_width_db,
    std::pair<double, double> range) {
    if (frame_means_db.empty())
        throw EmptyRequestError("histogram needs at least one frame mean");
    if (!(bin_width_db > 0.0)) throw DomainError("bin width must be > 0");
    const double lo = range.first;
    const double hi = range.second;
    if (!(hi > lo)) throw DomainError("histogram range must be non-empty");

    const auto nbins = static_cast<std::size_t>(
        std::ceil((hi - lo) / bin_width_db - 1e-12));
    std::vector<std::size_t> counts(nbins, 0);
    std::size_t excluded = 0;
    for (double v : frame_means_db) {
        if (v <= lo || v > hi) {
            ++excluded;
            continue;
        }
        auto idx = static_cast<std::size_t>(std::ceil((v - lo) / bin_width_db)) - 1;
        idx = std::min(idx, nbins - 1);
        ++counts[idx];
    }
    const std::size_t in_range = frame_means_db.size() - excluded;
    if (in_range == 0)
        throw DegenerateInputError("all frames fall outside the histogram range");

    HistogramResult res;
    res.total = frame_means_db.size();
    res.excluded = excluded;
    res.model.kind = TurbulenceKind::kEmpiricalHistogram;
    res.model.bin_width_db = bin_width_db;
    res.model.mean_db = 0.0;
    res.model.histogram.reserve(nbins);
    for (std::size_t i = 0; i < nbins; ++i) {
        res.model.histogram.push_back(
            {lo + static_cast<double>(i) * bin_width_db,
             static_cast<double>(counts[i]) / static_cast<double>(in_range)});
    }
    double mean = 0.0;
    for (std::size_t i = 0; i < nbins; ++i)
        mean += res.model.histogram[i].probability *
                (res.model.histogram[i].bin_lower_db + 0.5 * bin_width_db);
    res.model.mean_db = mean;
    return res;
}

// Histogram file format: one "bin_lower_dB,probability" pair per line.
inline void save_histogram(const TurbulenceModel& model, const std::string& path) {
    validate(model);
    if (model.kind != TurbulenceKind::kEmpiricalHistogram)
        throw DomainError("only empirical histogram models can be saved");
    std::ofstream out(path);
    if (!out) throw Error("cannot open histogram file for writing: " + path);
    out.precision(17);
    for (const auto& b : model.histogram)
        out << b.bin_lower_db << "," << b.probability << "\n";
}

inline TurbulenceModel load_histogram(const std::string& path,
                                      double bin_width_db = 1.0) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open histogram file: " + path);
    TurbulenceModel model;
    model.kind = TurbulenceKind::kEmpiricalHistogram;
    model.bin_width_db = bin_width_db;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ss(line);
        double lower, prob;
        char comma;
        if (!(ss >> lower >> comma >> prob) || comma != ',')
            throw FormatError("bad histogram line " + std::to_string(lineno) +
                              " in " + path);
        model.histogram.push_back({lower, prob});
    }
    double mean = 0.0;
    for (const auto& b : model.histogram)
        mean += b.probability * (b.bin_lower_db + 0.5 * bin_width_db);
    model.mean_db = mean;
    validate(model);
    return model;
}

}  // namespace pspsim
