#pragma once

// Bob's receiver model and the self-referenced pilot DSP chain:
//   bob_detect          heterodyne trace synthesis (quantum band + pilot tone)
//   extract_pilot       pilot isolation and beat-frequency estimation
//   normalize_pilot     amplitude normalization -> unit rotor + phase
//   compensate          tone removal, counter-rotation, symbol decimation
//   estimate_transmittance   |pilot|^2 against a back-to-back reference
//   calibrate_shot_noise     raw-units -> SNU scale
//   frame_synchronize        integer-lag alignment via cross-correlation
//
// Layout of the complex baseband: the quantum band (one symbol held over
// samples_per_symbol samples) is centered at DC plus the uncompensated
// frequency offset; the pilot tone sits at pilot_offset_hz from the quantum
// band center, outside it by construction, so removing the tone takes no
// signal with it. Tone removal is a local moving-average model subtraction
// (see compensate); the exact fractions of white and held noise it removes
// are reported so parameter estimation can keep its shot-noise bookkeeping
// straight even at 20+ dB channel loss.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <span>
#include <vector>

#include "pspsim/channel.hpp"
#include "pspsim/errors.hpp"
#include "pspsim/fft.hpp"
#include "pspsim/quadrature.hpp"
#include "pspsim/rng.hpp"
#include "pspsim/trace_io.hpp"

namespace pspsim {

struct ReceiverFrontend {
    DetectorParams det{0.56, 0.38};
    double pilot_offset_hz = 0.0;  // pilot placement relative to band center
    int samples_per_symbol = 2;
    double raw_scale = 1.0;  // trace units per sqrt(SNU), recovered by calibration
};

inline void validate(const ReceiverFrontend& fe) {
    validate(fe.det);
    if (fe.samples_per_symbol < 1)
        throw DomainError("samples_per_symbol must be >= 1");
    if (!(fe.raw_scale > 0.0)) throw DomainError("raw_scale must be > 0");
}

// Synthesizes Bob's heterodyne trace from channel output. Quantum symbols
// are held over samples_per_symbol samples; the pilot tone phase advances
// continuously at sample resolution. Per-sample detection model per
// quadrature: z = sqrt(eta/2)(u + v2) - sqrt(1-eta) vb + E.
inline BasebandTrace bob_detect(std::span<const QuadraturePair> quantum,
                                std::span<const std::complex<double>> pilot,
                                const ChannelRealization& real,
                                const ReceiverFrontend& fe, RngStream& rng) {
    validate(fe);
    validate(real);
    if (quantum.size() != pilot.size() ||
        quantum.size() != real.transmittance.size())
        throw LengthMismatchError("bob_detect input lengths differ");

    const auto sps = static_cast<std::size_t>(fe.samples_per_symbol);
    const double fs = real.symbol_rate_hz * static_cast<double>(sps);
    const double ch = std::sqrt(fe.det.efficiency / 2.0);
    const double cl = std::sqrt(1.0 - fe.det.efficiency);
    const double se = std::sqrt(fe.det.electronic_noise);

    BasebandTrace trace;
    trace.sample_rate_hz = fs;
    trace.symbol_rate_hz = real.symbol_rate_hz;
    trace.samples.resize(quantum.size() * sps);

    for (std::size_t k = 0; k < quantum.size(); ++k) {
        const std::complex<double> sym(quantum[k].x, quantum[k].p);
        const double t_sym = static_cast<double>(k * sps) / fs;
        for (std::size_t l = 0; l < sps; ++l) {
            const std::size_t m = k * sps + l;
            const double t = static_cast<double>(m) / fs;
            // pilot phase continues the offset ramp between symbol instants
            const double ramp = 2.0 * std::numbers::pi *
                                (real.freq_offset[k] * (t - t_sym) +
                                 fe.pilot_offset_hz * t);
            const std::complex<double> tone =
                pilot[k] * std::complex<double>(std::cos(ramp), std::sin(ramp));
            const std::complex<double> u = sym + tone;
            const double zx = ch * (u.real() + rng.normal()) - cl * rng.normal() +
                              se * rng.normal();
            const double zp = ch * (u.imag() + rng.normal()) - cl * rng.normal() +
                              se * rng.normal();
            trace.samples[m] = fe.raw_scale * std::complex<double>(zx, zp);
        }
    }
    return trace;
}

struct PilotRecovery {
    double beat_freq_hz = 0.0;  // estimated tone frequency in the trace
    std::vector<double> phase_traj;                    // unwrapped, radians
    std::vector<std::complex<double>> pilot_envelope;  // mu_q1, sample rate
    std::vector<std::complex<double>> unit_rotor;      // mu_q2, |.| = 1
    double filter_bandwidth_hz = 0.0;
    double noise_floor_power = 0.0;  // in-band noise power per sample
    double sample_rate_hz = 0.0;
};

struct CalibrationRecord {
    double sigma_cal = 0.0;        // raw units per sqrt(SNU)
    double pilot_ref_power = 0.0;  // |mu_q3|^2 from the back-to-back run
    double electronic_floor_snu = 0.0;  // LO-off floor, SNU (diagnostic)
};

namespace detail {

// Direct DFT power at an arbitrary frequency (cycles/sample).
inline double dft_power(std::span<const std::complex<double>> x, double nu) {
    const double w = -2.0 * std::numbers::pi * nu;
    // Recurrence phasor with periodic resync.
    std::complex<double> acc(0.0, 0.0);
    std::complex<double> ph(1.0, 0.0);
    const std::complex<double> step(std::cos(w), std::sin(w));
    for (std::size_t m = 0; m < x.size(); ++m) {
        if ((m & 1023u) == 0)
            ph = std::complex<double>(std::cos(w * static_cast<double>(m)),
                                      std::sin(w * static_cast<double>(m)));
        acc += x[m] * ph;
        ph *= step;
    }
    return std::norm(acc);
}

// Centered moving average with clamped edges.
inline std::vector<std::complex<double>> moving_average(
    std::span<const std::complex<double>> x, std::size_t window) {
    const std::size_t n = x.size();
    std::vector<std::complex<double>> out(n);
    if (window <= 1 || n == 0) {
        std::copy(x.begin(), x.end(), out.begin());
        return out;
    }
    std::vector<std::complex<double>> prefix(n + 1, {0.0, 0.0});
    for (std::size_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + x[i];
    const std::ptrdiff_t half = static_cast<std::ptrdiff_t>(window) / 2;
    for (std::size_t i = 0; i < n; ++i) {
        const auto si = static_cast<std::ptrdiff_t>(i);
        const std::size_t lo = static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, si - half));
        const std::size_t hi = std::min(n, i + static_cast<std::size_t>(half) + 1);
        out[i] = (prefix[hi] - prefix[lo]) / static_cast<double>(hi - lo);
    }
    return out;
}

// Variance reduction factor of a boxcar average applied to ideal
// band-limited (brick) noise of bandwidth bw at rate fs.
inline double boxcar_bandlimited_factor(std::size_t window, double bw, double fs) {
    if (window <= 1) return 1.0;
    const double n = static_cast<double>(window);
    double sum = 0.0;
    for (std::size_t d = 1; d < window; ++d) {
        const double x = std::numbers::pi * bw * static_cast<double>(d) / fs;
        const double k = x == 0.0 ? 1.0 : std::sin(x) / x;
        sum += 2.0 * (n - static_cast<double>(d)) * k;
    }
    return (n + sum) / (n * n);
}

}  // namespace detail

struct PilotSearchOptions {
    double search_span_hz = 0.0;   // 0 = whole spectrum
    double peak_threshold = 50.0;  // peak power over median power
    int refine_iterations = 40;
};

// Isolates the pilot: FFT peak search (quadratic interpolation seeded,
// then refined by direct DFT maximization), brick-wall band-pass of
// bandwidth_hz around the estimated tone, and down-conversion to the
// complex envelope. center_hz is a search hint; pass NaN to search the
// whole spectrum.
inline PilotRecovery extract_pilot(const BasebandTrace& trace, double center_hz,
                                   double bandwidth_hz,
                                   const PilotSearchOptions& opt = {}) {
    const std::size_t n = trace.samples.size();
    if (n < 16) throw EmptyRequestError("trace too short for pilot extraction");
    const double fs = trace.sample_rate_hz;
    if (!(fs > 0.0)) throw DomainError("trace sample rate must be > 0");
    if (!(bandwidth_hz > 0.0) || bandwidth_hz >= fs)
        throw DomainError("pilot filter bandwidth must be in (0, fs)");
    if (std::isfinite(center_hz) &&
        (std::abs(center_hz) + bandwidth_hz / 2.0 > fs / 2.0))
        throw DomainError("pilot band must lie within the Nyquist span");

    std::vector<std::complex<double>> spec(trace.samples.begin(),
                                           trace.samples.end());
    fft::transform(spec, false);
    std::vector<double> power(n);
    for (std::size_t i = 0; i < n; ++i) power[i] = std::norm(spec[i]);

    // candidate bins
    std::vector<std::size_t> bins;
    if (std::isfinite(center_hz) && opt.search_span_hz > 0.0) {
        bins.reserve(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double f = fft::bin_frequency(i, n, fs);
            if (std::abs(f - center_hz) <= opt.search_span_hz / 2.0)
                bins.push_back(i);
        }
    } else {
        bins.resize(n);
        for (std::size_t i = 0; i < n; ++i) bins[i] = i;
    }
    if (bins.empty()) throw DomainError("empty pilot search span");

    std::size_t peak = bins.front();
    for (std::size_t i : bins)
        if (power[i] > power[peak]) peak = i;

    std::vector<double> sorted;
    sorted.reserve(bins.size());
    for (std::size_t i : bins) sorted.push_back(power[i]);
    std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2,
                     sorted.end());
    const double median = sorted[sorted.size() / 2];
    if (!(power[peak] > opt.peak_threshold * std::max(median, 1e-300)))
        throw PilotNotFoundError("no pilot tone above the spectral noise floor");

    // quadratic interpolation on log power over the three bins around peak
    const std::size_t km = (peak + n - 1) % n;
    const std::size_t kp = (peak + 1) % n;
    const double lm = std::log(std::max(power[km], 1e-300));
    const double l0 = std::log(std::max(power[peak], 1e-300));
    const double lp = std::log(std::max(power[kp], 1e-300));
    double delta = 0.0;
    const double denom = lm - 2.0 * l0 + lp;
    if (denom < 0.0) delta = 0.5 * (lm - lp) / denom;
    delta = std::clamp(delta, -0.5, 0.5);
    double nu = (static_cast<double>(peak) + delta) / static_cast<double>(n);

    // golden-section refinement of |DFT|^2 within +-0.6 bin
    {
        const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
        double a = nu - 0.6 / static_cast<double>(n);
        double b = nu + 0.6 / static_cast<double>(n);
        double c = b - gr * (b - a);
        double d = a + gr * (b - a);
        double fc = detail::dft_power(trace.samples, c);
        double fd = detail::dft_power(trace.samples, d);
        for (int it = 0; it < opt.refine_iterations; ++it) {
            if (fc > fd) {
                b = d;
                d = c;
                fd = fc;
                c = b - gr * (b - a);
                fc = detail::dft_power(trace.samples, c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + gr * (b - a);
                fd = detail::dft_power(trace.samples, d);
            }
        }
        nu = 0.5 * (a + b);
    }

    PilotRecovery rec;
    rec.sample_rate_hz = fs;
    rec.filter_bandwidth_hz = bandwidth_hz;
    double f_est = nu * fs;
    if (f_est > fs / 2.0) f_est -= fs;  // map to (-fs/2, fs/2]
    rec.beat_freq_hz = f_est;

    // brick-wall band-pass around the estimated tone
    std::vector<std::complex<double>> band(n, {0.0, 0.0});
    std::size_t kept = 0;
    for (std::size_t i = 0; i < n; ++i) {
        double df = fft::bin_frequency(i, n, fs) - f_est;
        if (df > fs / 2.0) df -= fs;
        if (df < -fs / 2.0) df += fs;
        if (std::abs(df) <= bandwidth_hz / 2.0) {
            band[i] = spec[i];
            ++kept;
        }
    }
    // noise floor from the annulus (bw, 3 bw] on both sides of the tone
    {
        std::vector<double> ann;
        for (std::size_t i = 0; i < n; ++i) {
            double df = fft::bin_frequency(i, n, fs) - f_est;
            if (df > fs / 2.0) df -= fs;
            if (df < -fs / 2.0) df += fs;
            const double ad = std::abs(df);
            if (ad > bandwidth_hz && ad <= 3.0 * bandwidth_hz)
                ann.push_back(power[i]);
        }
        if (!ann.empty()) {
            std::nth_element(ann.begin(), ann.begin() + ann.size() / 2, ann.end());
            const double med_bin = ann[ann.size() / 2];
            // median of exponential = ln 2 * mean
            const double mean_bin = med_bin / std::numbers::ln2;
            rec.noise_floor_power = mean_bin * static_cast<double>(kept) /
                                    (static_cast<double>(n) * static_cast<double>(n));
        }
    }

    fft::transform(band, true);
    rec.pilot_envelope.resize(n);
    const double w = -2.0 * std::numbers::pi * nu;
    for (std::size_t m = 0; m < n; ++m) {
        const double ang = w * static_cast<double>(m);
        rec.pilot_envelope[m] =
            band[m] * std::complex<double>(std::cos(ang), std::sin(ang));
    }
    return rec;
}

// Amplitude normalization: smooths the envelope over `window` samples
// (centered) and divides out the magnitude, leaving the unit rotor and the
// unwrapped phase trajectory.
inline PilotRecovery normalize_pilot(PilotRecovery rec, std::size_t window = 4096,
                                     double min_envelope = 1e-9) {
    if (rec.pilot_envelope.empty())
        throw EmptyRequestError("normalize_pilot: empty envelope");
    const auto sm = detail::moving_average(rec.pilot_envelope, window);
    const std::size_t n = sm.size();
    rec.unit_rotor.resize(n);
    rec.phase_traj.resize(n);
    for (std::size_t m = 0; m < n; ++m) {
        const double mag = std::abs(sm[m]);
        if (!(mag > min_envelope))
            throw LowPilotPowerError("pilot envelope magnitude below threshold");
        rec.unit_rotor[m] = sm[m] / mag;
    }
    double prev = std::arg(rec.unit_rotor[0]);
    double acc = prev;
    rec.phase_traj[0] = acc;
    for (std::size_t m = 1; m < n; ++m) {
        const double cur = std::arg(rec.unit_rotor[m]);
        double d = cur - prev;
        while (d > std::numbers::pi) d -= 2.0 * std::numbers::pi;
        while (d < -std::numbers::pi) d += 2.0 * std::numbers::pi;
        acc += d;
        prev = cur;
        rec.phase_traj[m] = acc;
    }
    return rec;
}

struct CompensationParams {
    double pilot_offset_hz = 0.0;  // known pilot placement f_p
    int samples_per_symbol = 2;
    std::size_t model_window = 129;  // tone-model smoothing, samples
    std::size_t edge_guard_symbols = 512;
};

struct CompensationResult {
    std::vector<QuadraturePair> symbols;  // all symbols, guard not removed
    double notched_white_fraction = 0.0;  // white noise power removed
    double notched_held_fraction = 0.0;   // symbol-held noise power removed
    std::size_t edge_guard_symbols = 0;
};

// Removes the pilot tone and counter-rotates the quantum band, then
// decimates to one quadrature pair per symbol.
//
// The tone model is a centered moving average of the trace down-converted
// at the estimated beat: a purely local time-domain operation, so a tone
// whose frequency falls between FFT bins produces no frame-edge leakage.
// Subtracting a length-W moving average removes exactly 1/W of any white
// noise and hold_response(beat)/W of symbol-held noise; both fractions are
// reported so parameter estimation can correct its shot-noise bookkeeping
// (the correction is per mille, but the channel referral at 20+ dB loss
// amplifies Bob-side bookkeeping errors by ~2/(eta T)).
inline CompensationResult compensate(const BasebandTrace& trace,
                                     const PilotRecovery& rec,
                                     const CompensationParams& par) {
    const std::size_t n = trace.samples.size();
    if (rec.unit_rotor.size() != n)
        throw LengthMismatchError("rotor span does not match trace");
    if (par.samples_per_symbol < 1)
        throw DomainError("samples_per_symbol must be >= 1");
    if (par.model_window < 2) throw DomainError("model window must be >= 2");
    const auto sps = static_cast<std::size_t>(par.samples_per_symbol);
    const double fs = trace.sample_rate_hz;

    // 1. local tone model: down-convert, smooth, re-modulate, subtract
    const double wtone = 2.0 * std::numbers::pi * rec.beat_freq_hz / fs;
    std::vector<std::complex<double>> env(n);
    for (std::size_t m = 0; m < n; ++m) {
        const double ang = -wtone * static_cast<double>(m);
        env[m] = trace.samples[m] *
                 std::complex<double>(std::cos(ang), std::sin(ang));
    }
    const auto model = detail::moving_average(env, par.model_window);
    std::vector<std::complex<double>> work(n);
    for (std::size_t m = 0; m < n; ++m) {
        const double ang = wtone * static_cast<double>(m);
        work[m] = trace.samples[m] -
                  model[m] * std::complex<double>(std::cos(ang), std::sin(ang));
    }

    CompensationResult res;
    res.edge_guard_symbols = par.edge_guard_symbols;
    // interior moving-average length (odd, clamped at edges covered by guard)
    const double weff = static_cast<double>(2 * (par.model_window / 2) + 1);
    res.notched_white_fraction = 1.0 / weff;
    // hold-filter power response at the tone frequency, mean-normalized
    {
        const double om = wtone;
        const double den = std::sin(om / 2.0);
        double hr;
        if (std::abs(den) < 1e-15) {
            hr = static_cast<double>(sps);
        } else {
            const double num = std::sin(om * static_cast<double>(sps) / 2.0);
            hr = (num * num) / (static_cast<double>(sps) * den * den);
        }
        res.notched_held_fraction = hr / weff;
    }

    // 2. counter-rotate and decimate. The rotor carries the residual phase
    // after down-conversion at the estimated beat; the remaining known ramp
    // is beat - pilot_offset (the uncompensated frequency offset).
    const std::size_t nsym = n / sps;
    res.symbols.resize(nsym);
    const double wp = -2.0 * std::numbers::pi *
                      (rec.beat_freq_hz - par.pilot_offset_hz) / fs;
    for (std::size_t k = 0; k < nsym; ++k) {
        const std::size_t m = k * sps;
        const double ang = wp * static_cast<double>(m);
        const std::complex<double> z =
            work[m] * std::conj(rec.unit_rotor[m]) *
            std::complex<double>(std::cos(ang), std::sin(ang));
        res.symbols[k] = {z.real(), z.imag()};
    }
    return res;
}

// Time-varying transmittance from the pilot power against the back-to-back
// reference, with the in-band noise floor removed.
inline std::vector<double> estimate_transmittance(const PilotRecovery& rec,
                                                  const CalibrationRecord& cal,
                                                  std::size_t window = 4096) {
    if (!(cal.pilot_ref_power > 0.0))
        throw CalibrationRequiredError("pilot reference power missing");
    if (rec.pilot_envelope.empty())
        throw EmptyRequestError("estimate_transmittance: empty envelope");
    const auto sm = detail::moving_average(rec.pilot_envelope, window);
    const double reduction = detail::boxcar_bandlimited_factor(
        window, rec.filter_bandwidth_hz, rec.sample_rate_hz);
    const double floor = rec.noise_floor_power * reduction;
    std::vector<double> that(sm.size());
    for (std::size_t m = 0; m < sm.size(); ++m)
        that[m] = std::max(std::norm(sm[m]) - floor, 1e-15) / cal.pilot_ref_power;
    return that;
}

// Mean pilot power of a (smoothed, floor-subtracted) recovery; this is the
// quantity stored as pilot_ref_power by the back-to-back calibration.
inline double mean_pilot_power(const PilotRecovery& rec, std::size_t window = 4096,
                               std::size_t edge_guard_samples = 1024) {
    const auto sm = detail::moving_average(rec.pilot_envelope, window);
    const double reduction = detail::boxcar_bandlimited_factor(
        window, rec.filter_bandwidth_hz, rec.sample_rate_hz);
    const double floor = rec.noise_floor_power * reduction;
    const std::size_t n = sm.size();
    const std::size_t g = std::min(edge_guard_samples, n / 4);
    double acc = 0.0;
    std::size_t cnt = 0;
    for (std::size_t m = g; m + g < n; ++m) {
        acc += std::norm(sm[m]) - floor;
        ++cnt;
    }
    if (cnt == 0) throw EmptyRequestError("pilot power window is empty");
    return acc / static_cast<double>(cnt);
}

// Shot-noise scale from a vacuum trace (signal blocked, LO on). The LO-off
// electronic floor, in the same raw units, is subtracted when provided.
inline CalibrationRecord calibrate_shot_noise(const BasebandTrace& vacuum_trace,
                                              double electronic_floor_raw = 0.0) {
    const std::size_t n = vacuum_trace.samples.size();
    if (n < 2) throw EmptyRequestError("vacuum trace too short");
    if (!(electronic_floor_raw >= 0.0))
        throw DomainError("electronic floor must be >= 0");
    std::complex<double> mean(0.0, 0.0);
    for (const auto& s : vacuum_trace.samples) mean += s;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (const auto& s : vacuum_trace.samples) var += std::norm(s - mean);
    var /= 2.0 * static_cast<double>(n);  // per quadrature
    if (!(var > electronic_floor_raw))
        throw InconsistentCalibrationError(
            "vacuum variance does not exceed the electronic floor");
    CalibrationRecord cal;
    cal.sigma_cal = std::sqrt(var - electronic_floor_raw);
    cal.electronic_floor_snu = electronic_floor_raw / (var - electronic_floor_raw);
    return cal;
}

inline BasebandTrace to_snu(BasebandTrace trace, const CalibrationRecord& cal) {
    if (!(cal.sigma_cal > 0.0))
        throw CalibrationRequiredError("shot-noise scale missing");
    const double inv = 1.0 / cal.sigma_cal;
    for (auto& s : trace.samples) s *= inv;
    return trace;
}

struct SyncResult {
    std::ptrdiff_t lag = 0;
    double peak = 0.0;
};

// Lag of b relative to a (positive lag: b delayed) maximizing the
// normalized cross-correlation. Threshold 0 selects an automatic
// significance level of 5/sqrt(overlap).
inline SyncResult frame_synchronize(std::span<const double> a,
                                    std::span<const double> b,
                                    std::size_t max_lag, double threshold = 0.0) {
    if (a.size() <= max_lag || b.size() <= max_lag)
        throw EmptyRequestError("sequences shorter than the maximum lag");
    SyncResult best;
    double best_abs = -1.0;
    const auto ml = static_cast<std::ptrdiff_t>(max_lag);
    for (std::ptrdiff_t lag = -ml; lag <= ml; ++lag) {
        const std::size_t off_a = lag < 0 ? static_cast<std::size_t>(-lag) : 0;
        const std::size_t off_b = lag > 0 ? static_cast<std::size_t>(lag) : 0;
        const std::size_t len =
            std::min(a.size() - off_a, b.size() - off_b);
        double saa = 0.0, sbb = 0.0, sab = 0.0, sa = 0.0, sb = 0.0;
        for (std::size_t i = 0; i < len; ++i) {
            const double va = a[off_a + i];
            const double vb = b[off_b + i];
            sa += va;
            sb += vb;
            saa += va * va;
            sbb += vb * vb;
            sab += va * vb;
        }
        const double nl = static_cast<double>(len);
        const double cov = sab / nl - (sa / nl) * (sb / nl);
        const double va = saa / nl - (sa / nl) * (sa / nl);
        const double vb = sbb / nl - (sb / nl) * (sb / nl);
        if (!(va > 0.0) || !(vb > 0.0)) continue;
        const double rho = cov / std::sqrt(va * vb);
        if (std::abs(rho) > best_abs) {
            best_abs = std::abs(rho);
            best.lag = lag;
            best.peak = rho;
        }
    }
    const std::size_t overlap = std::min(a.size(), b.size()) - max_lag;
    const double thr =
        threshold > 0.0 ? threshold : 5.0 / std::sqrt(static_cast<double>(overlap));
    if (!(best.peak > thr))
        throw SyncFailureError("cross-correlation peak below significance threshold");
    return best;
}

// Segment-averaged power spectral density in dB (arbitrary reference);
// used for the figure-data emission.
inline std::vector<std::pair<double, double>> psd_db(
    std::span<const std::complex<double>> x, double fs,
    std::size_t nfft = 4096) {
    nfft = std::min(nfft, fft::next_pow2(x.size() / 2 + 1));
    if (nfft < 8) nfft = 8;
    std::vector<double> acc(nfft, 0.0);
    std::size_t segments = 0;
    for (std::size_t start = 0; start + nfft <= x.size(); start += nfft) {
        std::vector<std::complex<double>> seg(x.begin() + static_cast<std::ptrdiff_t>(start),
                                              x.begin() + static_cast<std::ptrdiff_t>(start + nfft));
        fft::transform(seg, false);
        for (std::size_t i = 0; i < nfft; ++i) acc[i] += std::norm(seg[i]);
        ++segments;
    }
    if (segments == 0) throw EmptyRequestError("trace too short for a PSD");
    std::vector<std::pair<double, double>> out;
    out.reserve(nfft);
    for (std::size_t h = 0; h < nfft; ++h) {
        const std::size_t i = (h + nfft / 2) % nfft;  // order by frequency
        const double f = fft::bin_frequency(i, nfft, fs);
        const double p = acc[i] / static_cast<double>(segments);
        out.emplace_back(f, 10.0 * std::log10(std::max(p, 1e-300)));
    }
    return out;
}

}  // namespace pspsim
