#pragma once

// End-to-end experiment orchestration: per-frame simulation
// (transmitter -> channel -> receiver), the shared DSP + estimation path
// used by both the simulator and the trace analyzer, shot-noise/pilot
// calibration runs, noise-budget ablations, report assembly, and the
// deterministic CSV/JSON/figure-data writers.
//
// Determinism: every frame draws from RNG streams derived from
// (seed, frame index), so results are bit-identical regardless of worker
// count or scheduling; outputs are merged in frame order and all numbers
// are printed with round-trip precision.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "pspsim/channel.hpp"
#include "pspsim/config.hpp"
#include "pspsim/dsp.hpp"
#include "pspsim/errors.hpp"
#include "pspsim/quadrature.hpp"
#include "pspsim/rng.hpp"
#include "pspsim/security.hpp"
#include "pspsim/trace_io.hpp"
#include "pspsim/transmitter.hpp"
#include "pspsim/version.hpp"

namespace pspsim {

struct FrameRecord {
    std::size_t frame_index = 0;
    double t_true_mean_db = std::nan("");  // simulator ground truth
    double beat_freq_hz = std::nan("");
    double freq_offset_est_hz = std::nan("");
    double t_pilot_mean_db = std::nan("");
    double t_pilot_spread_db = std::nan("");
    double t_hat = std::nan("");  // slope-based, linear
    double v_a = std::nan("");
    double eps_raw = std::nan("");
    double eps = std::nan("");
    double eps_fad = std::nan("");
    double skr_bps = std::nan("");
    long sync_lag = 0;
    double sync_peak = std::nan("");
    bool sync_ok = false;
    bool ok = false;
    std::string error;
    std::vector<std::pair<double, double>> t_traj;  // (time s, T dB), decimated
};

struct RunReport {
    std::string version = kVersion;
    std::uint64_t seed = 0;
    json config_echo;
    CalibrationRecord calibration;
    std::vector<FrameRecord> frames;
    double mean_t_pilot_db = std::nan("");
    double mean_v_a = std::nan("");
    double mean_eps_raw = std::nan("");
    double mean_eps = std::nan("");
    double mean_eps_fad = std::nan("");
    double mean_skr_bps = std::nan("");
    NoiseBudget budget;
    bool budget_valid = false;
    KeyRateReport rates;
};

struct RunOptions {
    std::string out_dir;  // empty: no files written
    int workers = 1;
    bool emit_traces = false;
    std::optional<std::uint64_t> seed_override;
    std::string calibration_file;  // analyze: required
    std::string traces_dir;        // analyze input
};

namespace detail_pipe {

inline std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline void parallel_frames(std::size_t n, int workers,
                            const std::function<void(std::size_t)>& fn) {
    const int w = std::max(1, std::min<int>(workers, static_cast<int>(n)));
    if (w <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex err_mutex;
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(w));
    for (int t = 0; t < w; ++t) {
        pool.emplace_back([&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= n) return;
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lk(err_mutex);
                    if (!first_error) first_error = std::current_exception();
                    return;
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
}

inline double mean_over(std::span<const FrameRecord> frames,
                        double FrameRecord::*field) {
    double acc = 0.0;
    std::size_t cnt = 0;
    for (const auto& f : frames) {
        if (!f.ok) continue;
        acc += f.*field;
        ++cnt;
    }
    return cnt == 0 ? std::nan("") : acc / static_cast<double>(cnt);
}

}  // namespace detail_pipe

// ---------------------------------------------------------------------------
// Calibration
// ---------------------------------------------------------------------------

inline json calibration_to_json(const CalibrationRecord& cal) {
    json j;
    j["sigma_cal"] = cal.sigma_cal;
    j["pilot_ref_power"] = cal.pilot_ref_power;
    j["electronic_floor_snu"] = cal.electronic_floor_snu;
    return j;
}

inline CalibrationRecord calibration_from_json(const json& j) {
    CalibrationRecord cal;
    cal.sigma_cal = j.value("sigma_cal", 0.0);
    cal.pilot_ref_power = j.value("pilot_ref_power", 0.0);
    cal.electronic_floor_snu = j.value("electronic_floor_snu", 0.0);
    if (!(cal.sigma_cal > 0.0) || !(cal.pilot_ref_power > 0.0))
        throw CalibrationRequiredError("calibration record is incomplete");
    return cal;
}

inline void save_calibration(const CalibrationRecord& cal,
                             const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write calibration file: " + path);
    out << calibration_to_json(cal).dump(2) << "\n";
}

inline CalibrationRecord load_calibration(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw CalibrationRequiredError("cannot open calibration file: " + path);
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw FormatError(std::string("calibration parse error: ") + e.what());
    }
    return calibration_from_json(j);
}

// Back-to-back calibration: a vacuum acquisition for the shot-noise scale,
// an LO-off acquisition for the electronic floor, and a full transmitter
// frame at T = 1 for the pilot power reference.
//
// The vacuum acquisition spans calibration_frames frames and is streamed
// (never materialized): the relative error u of sigma_cal^2 shifts every
// excess-noise estimate of the run by about u * Var(z|m) * 2/(eta T), so
// at 20+ dB loss the calibration length, not the frame length, limits the
// epsilon accuracy.
inline CalibrationRecord run_calibration(const ExperimentConfig& cfg,
                                         std::uint64_t seed) {
    RngStream root(seed);
    RngStream cr = root.child(0x43414cull);  // calibration namespace
    const std::size_t n = cfg.symbols_per_frame;
    const ReceiverFrontend fe = cfg.frontend();

    ChannelRealization flat;
    flat.symbol_rate_hz = cfg.f_m_hz;
    flat.transmittance.assign(n, 1.0);
    flat.phase.assign(n, 0.0);
    flat.freq_offset.assign(n, 0.0);

    const std::size_t cal_samples =
        std::max<std::size_t>(1, cfg.calibration_frames) * n *
        static_cast<std::size_t>(cfg.samples_per_symbol);

    // signal blocked, LO on: same per-sample detection model as bob_detect
    RngStream vrng = cr.child(1);
    const double ch = std::sqrt(fe.det.efficiency / 2.0);
    const double cl = std::sqrt(1.0 - fe.det.efficiency);
    const double se = std::sqrt(fe.det.electronic_noise);
    double vac_acc = 0.0;
    for (std::size_t i = 0; i < cal_samples; ++i) {
        for (int q = 0; q < 2; ++q) {
            const double z = fe.raw_scale * (ch * (vrng.normal() + vrng.normal()) -
                                             cl * vrng.normal() + se * vrng.normal());
            vac_acc += z * z;
        }
    }
    const double vac_var = vac_acc / (2.0 * static_cast<double>(cal_samples));

    // LO off: electronic noise only, in raw units
    RngStream erng = cr.child(3);
    double floor_acc = 0.0;
    for (std::size_t i = 0; i < 2 * cal_samples; ++i) {
        const double z = fe.raw_scale * se * erng.normal();
        floor_acc += z * z;
    }
    const double floor_raw = floor_acc / (2.0 * static_cast<double>(cal_samples));

    if (!(vac_var > floor_raw))
        throw InconsistentCalibrationError(
            "vacuum variance does not exceed the electronic floor");
    CalibrationRecord cal;
    cal.sigma_cal = std::sqrt(vac_var - floor_raw);
    cal.electronic_floor_snu = floor_raw / (vac_var - floor_raw);

    // pilot reference frame (T = 1, configured linewidth and offset)
    RngStream txr = cr.child(4);
    auto tx = alice_station(cfg.transmitter_params(), n, txr);
    RngStream chr = cr.child(5);
    TurbulenceModel b2b;  // static, 0 dB
    auto real = sample_channel(b2b, cfg.phase_linewidth_hz, cfg.f_m_hz, n, chr,
                               cfg.dynamics);
    RngStream cvr = cr.child(6);
    auto [q, pilot] = apply_channel(tx.channel_bound, tx.pilot_amplitude_sent,
                                    real, cvr, 0.0);
    RngStream bor = cr.child(7);
    auto trace = bob_detect(q, pilot, real, fe, bor);
    auto snu = to_snu(trace, cal);
    auto rec = extract_pilot(snu, std::nan(""), cfg.pilot_filter_bandwidth_hz,
                             {.peak_threshold = cfg.pilot_peak_threshold});
    cal.pilot_ref_power = mean_pilot_power(
        rec, cfg.transmittance_smoothing_window,
        cfg.edge_guard_symbols * static_cast<std::size_t>(cfg.samples_per_symbol));
    return cal;
}

// ---------------------------------------------------------------------------
// Shared per-frame DSP + estimation path
// ---------------------------------------------------------------------------

inline FrameRecord analyze_frame(const ExperimentConfig& cfg,
                                 const CalibrationRecord& cal,
                                 const BasebandTrace& raw_trace,
                                 std::span<const QuadraturePair> alice,
                                 std::size_t frame_index, double t_true_db) {
    FrameRecord rec;
    rec.frame_index = frame_index;
    rec.t_true_mean_db = t_true_db;
    try {
        auto snu = to_snu(raw_trace, cal);
        snu.symbol_rate_hz = cfg.f_m_hz;
        auto pil = extract_pilot(snu, std::nan(""),
                                 cfg.pilot_filter_bandwidth_hz,
                                 {.peak_threshold = cfg.pilot_peak_threshold});
        pil = normalize_pilot(pil, cfg.phase_smoothing_window);
        rec.beat_freq_hz = pil.beat_freq_hz;
        rec.freq_offset_est_hz = pil.beat_freq_hz - cfg.pilot_offset_hz;

        const auto sps = static_cast<std::size_t>(cfg.samples_per_symbol);
        const std::size_t gsamp = cfg.edge_guard_symbols * sps;
        auto that = estimate_transmittance(pil, cal,
                                           cfg.transmittance_smoothing_window);
        double acc = 0.0, lo = 1e300, hi = -1e300;
        std::size_t cnt = 0;
        for (std::size_t m = gsamp; m + gsamp < that.size(); ++m) {
            acc += that[m];
            lo = std::min(lo, that[m]);
            hi = std::max(hi, that[m]);
            ++cnt;
        }
        const double t_mean = acc / static_cast<double>(cnt);
        rec.t_pilot_mean_db = linear_to_db(t_mean);
        rec.t_pilot_spread_db = linear_to_db(hi) - linear_to_db(lo);
        // decimated trajectory for figure data
        const std::size_t step = std::max<std::size_t>(1, that.size() / 128);
        for (std::size_t m = gsamp; m + gsamp < that.size(); m += step)
            rec.t_traj.emplace_back(
                static_cast<double>(m) / snu.sample_rate_hz,
                linear_to_db(that[m]));

        auto comp = compensate(snu, pil, cfg.compensation_params());
        const std::size_t nsym = comp.symbols.size();
        const std::size_t g = cfg.edge_guard_symbols;
        if (alice.size() != nsym)
            throw LengthMismatchError("alice stream does not match trace symbols");
        if (nsym < 2 * g + 1024)
            throw EstimationDegenerateError("frame too short after guard removal");
        std::vector<QuadraturePair> a(alice.begin() + static_cast<std::ptrdiff_t>(g),
                                      alice.end() - static_cast<std::ptrdiff_t>(g));
        std::vector<QuadraturePair> b(comp.symbols.begin() + static_cast<std::ptrdiff_t>(g),
                                      comp.symbols.end() - static_cast<std::ptrdiff_t>(g));

        // frame synchronization on a disclosed prefix of the X stream
        const std::size_t nsync = std::min(
            a.size(), std::max<std::size_t>(
                          1024, static_cast<std::size_t>(
                                    cfg.sync_fraction *
                                    static_cast<double>(a.size()))));
        std::vector<double> ax(nsync), bx(nsync);
        for (std::size_t i = 0; i < nsync; ++i) {
            ax[i] = a[i].x;
            bx[i] = b[i].x;
        }
        const auto sync = frame_synchronize(ax, bx, cfg.sync_max_lag);
        rec.sync_lag = static_cast<long>(sync.lag);
        rec.sync_peak = sync.peak;
        rec.sync_ok = true;
        if (sync.lag != 0) {
            // align: positive lag means bob delayed relative to alice
            if (sync.lag > 0) {
                b.erase(b.begin(), b.begin() + sync.lag);
                a.resize(b.size());
            } else {
                a.erase(a.begin(), a.begin() - sync.lag);
                b.resize(a.size());
            }
        }

        const auto est = estimate_channel_params(
            a, b, cfg.transmitter_params(), cfg.security_config(),
            {comp.notched_white_fraction, comp.notched_held_fraction});
        rec.t_hat = est.t_hat;
        rec.v_a = est.v_a;
        rec.eps_raw = est.epsilon_hat_raw;
        rec.eps = est.epsilon_hat;

        // fading noise over 16 sub-frame means of the pilot trajectory
        std::vector<double> sub(16, 0.0);
        const std::size_t span_len = cnt / sub.size();
        if (span_len > 0) {
            for (std::size_t s = 0; s < sub.size(); ++s) {
                double sacc = 0.0;
                for (std::size_t m = 0; m < span_len; ++m)
                    sacc += that[gsamp + s * span_len + m];
                sub[s] = sacc / static_cast<double>(span_len);
            }
            rec.eps_fad = fading_noise(sub, est.v_a);
        }

        const auto sec = cfg.security_config();
        const double i_ab =
            mutual_information(est.v_a, est.t_hat, est.epsilon_hat, sec);
        const double k_be = holevo_bound(est.v_a, est.t_hat, est.epsilon_hat, sec);
        rec.skr_bps = secret_key_rate(i_ab, k_be, sec);
        rec.ok = true;
    } catch (const SyncFailureError& e) {
        rec.error = std::string("sync: ") + e.what();
    } catch (const PilotNotFoundError& e) {
        rec.error = std::string("pilot: ") + e.what();
    } catch (const LowPilotPowerError& e) {
        rec.error = std::string("pilot: ") + e.what();
    } catch (const EstimationDegenerateError& e) {
        rec.error = std::string("estimation: ") + e.what();
    }
    return rec;
}

// ---------------------------------------------------------------------------
// Frame simulation
// ---------------------------------------------------------------------------

struct SimFrame {
    BasebandTrace trace;  // raw units
    std::vector<QuadraturePair> alice;
    double t_true_mean_db = std::nan("");
};

inline SimFrame simulate_frame_data(const ExperimentConfig& cfg,
                                    std::size_t frame_index,
                                    std::uint64_t seed) {
    RngStream root(seed);
    RngStream fr = root.child(0x4652414d45ull).child(frame_index);
    RngStream tx_rng = fr.child(1);
    RngStream ch_rng = fr.child(2);
    RngStream cv_rng = fr.child(3);
    RngStream bob_rng = fr.child(4);

    const std::size_t n = cfg.symbols_per_frame;
    auto tx = alice_station(cfg.transmitter_params(), n, tx_rng);
    auto real = sample_channel(cfg.model, cfg.phase_linewidth_hz, cfg.f_m_hz, n,
                               ch_rng, cfg.dynamics);
    auto [q, pilot] = apply_channel(tx.channel_bound, tx.pilot_amplitude_sent,
                                    real, cv_rng, cfg.excess_noise_snu);
    SimFrame sf;
    sf.trace = bob_detect(q, pilot, real, cfg.frontend(), bob_rng);
    sf.alice = std::move(tx.alice_measured);
    double acc = 0.0;
    for (double t : real.transmittance) acc += linear_to_db(t);
    sf.t_true_mean_db = acc / static_cast<double>(n);
    return sf;
}

// ---------------------------------------------------------------------------
// Report assembly and output
// ---------------------------------------------------------------------------

namespace detail_pipe {

inline void finalize_aggregates(RunReport& rep, const ExperimentConfig& cfg) {
    rep.mean_t_pilot_db = mean_over(rep.frames, &FrameRecord::t_pilot_mean_db);
    rep.mean_v_a = mean_over(rep.frames, &FrameRecord::v_a);
    rep.mean_eps_raw = mean_over(rep.frames, &FrameRecord::eps_raw);
    rep.mean_eps = mean_over(rep.frames, &FrameRecord::eps);
    rep.mean_eps_fad = mean_over(rep.frames, &FrameRecord::eps_fad);
    rep.mean_skr_bps = mean_over(rep.frames, &FrameRecord::skr_bps);

    // transmittance-binned key rates over the configured range
    const auto nbins = static_cast<std::size_t>(std::ceil(
        (cfg.bin_hi_db - cfg.bin_lo_db) / cfg.bin_width_db - 1e-12));
    std::vector<KeyRateBin> bins(nbins);
    std::vector<std::size_t> counts(nbins, 0);
    std::vector<double> skr_acc(nbins, 0.0);
    for (std::size_t i = 0; i < nbins; ++i) {
        bins[i].t_low_db = cfg.bin_lo_db + static_cast<double>(i) * cfg.bin_width_db;
        bins[i].t_high_db = bins[i].t_low_db + cfg.bin_width_db;
    }
    const std::size_t total = rep.frames.size();
    for (const auto& f : rep.frames) {
        if (!f.ok) continue;
        const double v = f.t_pilot_mean_db;
        if (v <= cfg.bin_lo_db || v > cfg.bin_hi_db) continue;
        auto idx = static_cast<std::size_t>(
                       std::ceil((v - cfg.bin_lo_db) / cfg.bin_width_db)) -
                   1;
        idx = std::min(idx, nbins - 1);
        ++counts[idx];
        skr_acc[idx] += f.skr_bps;
    }
    if (total > 0) {
        for (std::size_t i = 0; i < nbins; ++i) {
            bins[i].probability =
                static_cast<double>(counts[i]) / static_cast<double>(total);
            bins[i].skr_bps =
                counts[i] ? skr_acc[i] / static_cast<double>(counts[i]) : 0.0;
        }
    }
    rep.rates = total_key_rate(bins);
}

inline const char* kCsvHeader =
    "frame,t_true_db,beat_freq_hz,freq_offset_est_hz,t_pilot_db,"
    "t_pilot_spread_db,t_hat,v_a,eps_raw,eps,eps_fad,skr_bps,sync_lag,"
    "sync_peak,sync_ok\n";

inline void write_frames_csv(const RunReport& rep, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write per-frame CSV: " + path);
    out << kCsvHeader;
    for (const auto& f : rep.frames) {
        out << f.frame_index << ',' << fmt(f.t_true_mean_db) << ','
            << fmt(f.beat_freq_hz) << ',' << fmt(f.freq_offset_est_hz) << ','
            << fmt(f.t_pilot_mean_db) << ',' << fmt(f.t_pilot_spread_db) << ','
            << fmt(f.t_hat) << ',' << fmt(f.v_a) << ',' << fmt(f.eps_raw) << ','
            << fmt(f.eps) << ',' << fmt(f.eps_fad) << ',' << fmt(f.skr_bps)
            << ',' << f.sync_lag << ',' << fmt(f.sync_peak) << ','
            << (f.sync_ok ? 1 : 0) << '\n';
    }
    if (!out) throw Error("short write on per-frame CSV: " + path);
}

inline json report_to_json(const RunReport& rep) {
    json j;
    j["version"] = rep.version;
    j["seed"] = rep.seed;
    j["frames_total"] = rep.frames.size();
    std::size_t failed = 0;
    json failed_list = json::array();
    for (const auto& f : rep.frames) {
        if (!f.ok) {
            ++failed;
            json e;
            e["frame"] = f.frame_index;
            e["error"] = f.error;
            failed_list.push_back(e);
        }
    }
    j["frames_failed"] = failed;
    j["failed_frames"] = failed_list;
    j["calibration"] = calibration_to_json(rep.calibration);
    json agg;
    agg["mean_t_pilot_db"] = rep.mean_t_pilot_db;
    agg["mean_v_a"] = rep.mean_v_a;
    agg["mean_eps_raw"] = rep.mean_eps_raw;
    agg["mean_eps"] = rep.mean_eps;
    agg["mean_eps_fad"] = rep.mean_eps_fad;
    agg["mean_skr_bps"] = rep.mean_skr_bps;
    j["aggregates"] = agg;
    if (rep.budget_valid) {
        json b;
        b["eps_psp"] = rep.budget.eps_psp;
        b["eps_freq"] = rep.budget.eps_freq;
        b["eps_phase"] = rep.budget.eps_phase;
        b["eps_chan"] = rep.budget.eps_chan;
        b["eps_fad"] = rep.budget.eps_fad;
        b["eps_total"] = rep.budget.eps_total;
        b["eps_freq_raw"] = rep.budget.eps_freq_raw;
        b["eps_phase_raw"] = rep.budget.eps_phase_raw;
        b["eps_chan_raw"] = rep.budget.eps_chan_raw;
        j["noise_budget"] = b;
    }
    json rates;
    rates["total_bps"] = rep.rates.total_bps;
    json bins = json::array();
    for (const auto& b : rep.rates.bins) {
        json bj;
        bj["t_low_db"] = b.t_low_db;
        bj["t_high_db"] = b.t_high_db;
        bj["probability"] = b.probability;
        bj["skr_bps"] = b.skr_bps;
        bins.push_back(bj);
    }
    rates["bins"] = bins;
    j["key_rates"] = rates;
    j["config"] = rep.config_echo;
    return j;
}

inline void write_figure_data(const RunReport& rep, const ExperimentConfig& cfg,
                              const SimFrame* frame0,
                              const std::vector<QuadraturePair>* recovered0,
                              const std::string& dir) {
    std::filesystem::create_directories(dir);
    // per-frame summary panel
    {
        std::ofstream out(dir + "/fig6b_frames.csv");
        out << "frame,v_a,t_pilot_db,eps,skr_bps\n";
        for (const auto& f : rep.frames) {
            if (!f.ok) continue;
            out << f.frame_index << ',' << fmt(f.v_a) << ','
                << fmt(f.t_pilot_mean_db) << ',' << fmt(f.eps) << ','
                << fmt(f.skr_bps) << '\n';
        }
    }
    // transmittance trajectories
    {
        std::ofstream out(dir + "/fig6a_transmittance.csv");
        out << "frame,time_s,t_db\n";
        std::size_t emitted = 0;
        for (const auto& f : rep.frames) {
            if (!f.ok || emitted >= 25) continue;
            for (const auto& [t, db] : f.t_traj)
                out << f.frame_index << ',' << fmt(t) << ',' << fmt(db) << '\n';
            ++emitted;
        }
    }
    // binned panel + histogram
    {
        std::ofstream out(dir + "/fig7a_bins.csv");
        out << "t_low_db,probability,skr_bps\n";
        for (const auto& b : rep.rates.bins)
            out << fmt(b.t_low_db) << ',' << fmt(b.probability) << ','
                << fmt(b.skr_bps) << '\n';
        std::ofstream hist(dir + "/fig7b_histogram.csv");
        hist << "t_low_db,probability\n";
        for (const auto& b : rep.rates.bins)
            hist << fmt(b.t_low_db) << ',' << fmt(b.probability) << '\n';
    }
    // spectra before/after recovery for frame 0
    if (frame0 != nullptr) {
        auto snu = to_snu(frame0->trace, rep.calibration);
        const auto before = psd_db(snu.samples, snu.sample_rate_hz, 4096);
        std::ofstream out(dir + "/fig5b_detected_spectrum.csv");
        out << "freq_hz,psd_db\n";
        for (const auto& [f, p] : before)
            out << fmt(f) << ',' << fmt(p) << '\n';
    }
    if (recovered0 != nullptr && !recovered0->empty()) {
        std::vector<std::complex<double>> sym(recovered0->size());
        for (std::size_t i = 0; i < sym.size(); ++i)
            sym[i] = {(*recovered0)[i].x, (*recovered0)[i].p};
        const auto after = psd_db(sym, cfg.f_m_hz, 4096);
        std::ofstream out(dir + "/fig5c_recovered_spectrum.csv");
        out << "freq_hz,psd_db\n";
        for (const auto& [f, p] : after)
            out << fmt(f) << ',' << fmt(p) << '\n';
    }
}

}  // namespace detail_pipe

// Pooled (mean over frames) raw excess-noise estimate for one ablation
// variant; frames reuse the main seed so differences are common-random.
inline double pooled_eps_raw(const ExperimentConfig& cfg,
                             const CalibrationRecord& cal, std::uint64_t seed,
                             std::size_t frames) {
    double acc = 0.0;
    std::size_t cnt = 0;
    for (std::size_t i = 0; i < frames; ++i) {
        auto sf = simulate_frame_data(cfg, i, seed);
        auto rec = analyze_frame(cfg, cal, sf.trace, sf.alice, i,
                                 sf.t_true_mean_db);
        if (!rec.ok) continue;
        acc += rec.eps_raw;
        ++cnt;
    }
    if (cnt == 0)
        throw EstimationDegenerateError("no usable ablation frames");
    return acc / static_cast<double>(cnt);
}

inline NoiseBudget run_noise_budget(const ExperimentConfig& cfg,
                                    const CalibrationRecord& cal,
                                    std::uint64_t seed, double eps_fad_mean) {
    ExperimentConfig base = cfg;
    base.phase_linewidth_hz = 0.0;
    base.dynamics.freq_offset_hz = 0.0;
    base.dynamics.freq_drift_hz_per_s = 0.0;
    base.dynamics.intra_frame_drift_db = 0.0;
    base.excess_noise_snu = 0.0;
    base.model.kind = TurbulenceKind::kStatic;
    base.model.sigma = 0.0;
    base.model.histogram.clear();
    base.model.mean_db = cfg.model.mean_db;

    ExperimentConfig with_freq = base;
    with_freq.dynamics.freq_offset_hz = cfg.dynamics.freq_offset_hz;
    with_freq.dynamics.freq_drift_hz_per_s = cfg.dynamics.freq_drift_hz_per_s;

    ExperimentConfig with_phase = base;
    with_phase.phase_linewidth_hz = cfg.phase_linewidth_hz;

    const std::size_t nf = std::max<std::size_t>(1, cfg.budget_frames);
    std::map<AblationRun, ChannelEstimate> runs;
    ChannelEstimate e;
    e.epsilon_hat_raw = pooled_eps_raw(base, cal, seed, nf);
    runs[AblationRun::kBaseline] = e;
    e.epsilon_hat_raw = pooled_eps_raw(with_freq, cal, seed, nf);
    runs[AblationRun::kWithFreq] = e;
    e.epsilon_hat_raw = pooled_eps_raw(with_phase, cal, seed, nf);
    runs[AblationRun::kWithPhase] = e;
    e.epsilon_hat_raw = pooled_eps_raw(cfg, cal, seed, nf);
    runs[AblationRun::kFull] = e;

    const auto tx = cfg.transmitter_params();
    const double eps_psp = epsilon_psp(
        tx, equivalent_modulation_variance(tx.eta0, tx.n0));
    return assemble_noise_budget(runs, eps_psp, eps_fad_mean);
}

inline std::string frame_trace_path(const std::string& dir, std::size_t index) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "frame_%05zu.trace", index);
    return dir + "/" + buf;
}

inline std::string frame_alice_path(const std::string& dir, std::size_t index) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "frame_%05zu.alice", index);
    return dir + "/" + buf;
}

inline void write_alice_symbols(const std::string& path,
                                std::span<const QuadraturePair> alice,
                                double symbol_rate_hz) {
    BasebandTrace t;
    t.sample_rate_hz = symbol_rate_hz;
    t.samples.resize(alice.size());
    for (std::size_t i = 0; i < alice.size(); ++i)
        t.samples[i] = {alice[i].x, alice[i].p};
    write_trace(path, t);
}

inline std::vector<QuadraturePair> read_alice_symbols(const std::string& path) {
    const auto t = read_trace(path);
    std::vector<QuadraturePair> out(t.samples.size());
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = {t.samples[i].real(), t.samples[i].imag()};
    return out;
}

// Full simulation run: transmitter -> channel -> receiver DSP -> security
// per frame, with optional trace emission and deterministic reports.
inline RunReport run_simulate(const ExperimentConfig& cfg,
                              const RunOptions& opts) {
    RunReport rep;
    rep.seed = opts.seed_override.value_or(cfg.seed);
    rep.config_echo = cfg.echo;
    if (!opts.out_dir.empty())
        std::filesystem::create_directories(opts.out_dir);

    if (cfg.frames == 0) {
        if (!opts.out_dir.empty()) {
            detail_pipe::write_frames_csv(rep, opts.out_dir + "/frames.csv");
            std::ofstream out(opts.out_dir + "/summary.json");
            out << detail_pipe::report_to_json(rep).dump(2) << "\n";
        }
        return rep;
    }

    rep.calibration = opts.calibration_file.empty()
                          ? run_calibration(cfg, rep.seed)
                          : load_calibration(opts.calibration_file);

    const std::string trace_dir = opts.out_dir.empty()
                                      ? std::string("traces")
                                      : opts.out_dir + "/traces";
    if (opts.emit_traces) std::filesystem::create_directories(trace_dir);

    rep.frames.resize(cfg.frames);
    detail_pipe::parallel_frames(
        cfg.frames, opts.workers, [&](std::size_t i) {
            try {
                auto sf = simulate_frame_data(cfg, i, rep.seed);
                if (opts.emit_traces) {
                    write_trace(frame_trace_path(trace_dir, i), sf.trace);
                    write_alice_symbols(frame_alice_path(trace_dir, i),
                                        sf.alice, cfg.f_m_hz);
                }
                rep.frames[i] = analyze_frame(cfg, rep.calibration, sf.trace,
                                              sf.alice, i, sf.t_true_mean_db);
            } catch (const Error& e) {
                throw Error("frame " + std::to_string(i) + ": " + e.what());
            }
        });

    detail_pipe::finalize_aggregates(rep, cfg);
    const double eps_fad_mean =
        std::isnan(rep.mean_eps_fad) ? 0.0 : rep.mean_eps_fad;
    if (cfg.budget_frames > 0) {
        rep.budget = run_noise_budget(cfg, rep.calibration, rep.seed,
                                      eps_fad_mean);
        rep.budget_valid = true;
    }

    if (!opts.out_dir.empty()) {
        detail_pipe::write_frames_csv(rep, opts.out_dir + "/frames.csv");
        std::ofstream out(opts.out_dir + "/summary.json");
        out << detail_pipe::report_to_json(rep).dump(2) << "\n";
        save_calibration(rep.calibration, opts.out_dir + "/calibration.json");
        // regenerate frame 0 for the spectra (deterministic)
        auto sf0 = simulate_frame_data(cfg, 0, rep.seed);
        auto snu0 = to_snu(sf0.trace, rep.calibration);
        snu0.symbol_rate_hz = cfg.f_m_hz;
        std::vector<QuadraturePair> rec0;
        try {
            auto pil = normalize_pilot(
                extract_pilot(snu0, std::nan(""), cfg.pilot_filter_bandwidth_hz,
                              {.peak_threshold = cfg.pilot_peak_threshold}),
                cfg.phase_smoothing_window);
            rec0 = compensate(snu0, pil, cfg.compensation_params()).symbols;
        } catch (const Error&) {
            // spectra are best-effort diagnostics
        }
        detail_pipe::write_figure_data(rep, cfg, &sf0, &rec0,
                                       opts.out_dir + "/figdata");
    }
    return rep;
}

// Analysis of pre-recorded traces (simulator-produced or external).
inline RunReport run_analyze(const ExperimentConfig& cfg,
                             const RunOptions& opts) {
    if (opts.calibration_file.empty())
        throw CalibrationRequiredError("analyze requires --calibration");
    RunReport rep;
    rep.seed = opts.seed_override.value_or(cfg.seed);
    rep.config_echo = cfg.echo;
    rep.calibration = load_calibration(opts.calibration_file);

    std::vector<std::size_t> indices;
    for (std::size_t i = 0;; ++i) {
        if (!std::filesystem::exists(frame_trace_path(opts.traces_dir, i))) break;
        indices.push_back(i);
    }
    if (indices.empty())
        throw Error("no frame_*.trace files found in " + opts.traces_dir);

    rep.frames.resize(indices.size());
    detail_pipe::parallel_frames(
        indices.size(), opts.workers, [&](std::size_t k) {
            const std::size_t i = indices[k];
            try {
                auto trace = read_trace(frame_trace_path(opts.traces_dir, i));
                auto alice = read_alice_symbols(frame_alice_path(opts.traces_dir, i));
                rep.frames[k] = analyze_frame(cfg, rep.calibration, trace, alice,
                                              i, std::nan(""));
            } catch (const FormatError&) {
                throw;
            } catch (const Error& e) {
                throw Error("frame " + std::to_string(i) + ": " + e.what());
            }
        });

    detail_pipe::finalize_aggregates(rep, cfg);
    if (!opts.out_dir.empty()) {
        std::filesystem::create_directories(opts.out_dir);
        detail_pipe::write_frames_csv(rep, opts.out_dir + "/frames.csv");
        std::ofstream out(opts.out_dir + "/summary.json");
        out << detail_pipe::report_to_json(rep).dump(2) << "\n";
        detail_pipe::write_figure_data(rep, cfg, nullptr, nullptr,
                                       opts.out_dir + "/figdata");
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Parameter sweep (analytic evaluation per config point)
// ---------------------------------------------------------------------------

struct SweepRow {
    double value = 0.0;
    double v_a = 0.0;
    double eps_psp = 0.0;
    double eps_total = 0.0;
    double i_ab = 0.0;
    double kappa = 0.0;
    double skr_bps = 0.0;
};

struct SweepResult {
    std::string axis;
    std::vector<SweepRow> rows;
    std::string monotonicity;  // "nonincreasing", "nondecreasing", "mixed"
    std::size_t argmax = 0;
};

inline SweepResult run_sweep(const json& base_config, const std::string& axis,
                             std::span<const double> values,
                             const std::string& base_dir = ".") {
    if (values.empty()) throw ConfigError("sweep: empty value list");
    std::string pointer = "/" + axis;
    for (auto& ch : pointer)
        if (ch == '.') ch = '/';
    const json::json_pointer ptr(pointer);
    json probe = base_config;
    if (!probe.contains(ptr))
        throw ConfigError("sweep axis not found in config: " + axis);

    SweepResult res;
    res.axis = axis;
    bool inc = true, dec = true;
    for (double v : values) {
        json patched = base_config;
        patched[ptr] = v;
        const ExperimentConfig cfg = parse_config(patched, base_dir);
        const auto tx = cfg.transmitter_params();
        const auto pred = predicted_channel(tx);
        const double eps_total = pred.eps_psp + cfg.excess_noise_snu;
        const double t_lin = db_to_linear(cfg.model.mean_db);
        const auto sec = cfg.security_config();
        SweepRow row;
        row.value = v;
        row.v_a = pred.v_a;
        row.eps_psp = pred.eps_psp;
        row.eps_total = eps_total;
        row.i_ab = mutual_information(pred.v_a, t_lin, eps_total, sec);
        row.kappa = holevo_bound(pred.v_a, t_lin, eps_total, sec);
        row.skr_bps = secret_key_rate(row.i_ab, row.kappa, sec);
        if (!res.rows.empty()) {
            if (row.skr_bps > res.rows.back().skr_bps + 1e-12) dec = false;
            if (row.skr_bps < res.rows.back().skr_bps - 1e-12) inc = false;
        }
        res.rows.push_back(row);
    }
    for (std::size_t i = 1; i < res.rows.size(); ++i)
        if (res.rows[i].skr_bps > res.rows[res.argmax].skr_bps) res.argmax = i;
    res.monotonicity = inc && dec ? "constant"
                       : inc     ? "nondecreasing"
                       : dec     ? "nonincreasing"
                                 : "mixed";
    return res;
}

inline void write_sweep_csv(const SweepResult& res, std::ostream& out) {
    out << "value,v_a,eps_psp,eps_total,i_ab,kappa,skr_bps\n";
    for (const auto& r : res.rows) {
        out << detail_pipe::fmt(r.value) << ',' << detail_pipe::fmt(r.v_a) << ','
            << detail_pipe::fmt(r.eps_psp) << ',' << detail_pipe::fmt(r.eps_total)
            << ',' << detail_pipe::fmt(r.i_ab) << ',' << detail_pipe::fmt(r.kappa)
            << ',' << detail_pipe::fmt(r.skr_bps) << '\n';
    }
}

}  // namespace pspsim
