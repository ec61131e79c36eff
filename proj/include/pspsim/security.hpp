#pragma once

// Parameter estimation, noise-budget assembly, and the asymptotic Gaussian
// security computation: Shannon mutual information, Holevo bound via
// symplectic eigenvalues of the equivalent entanglement-based state, secret
// key rate, and transmittance-weighted totals.
//
// Conventions (documented in the README): reverse reconciliation,
// heterodyne detection on both sides, Gaussian optimal attacks, asymptotic
// regime. Bob's detector loss and electronic noise are TRUSTED by default
// (modeled by a beam splitter fed with one arm of an EPR state that Eve
// does not hold); the untrusted alternative folds them into the channel.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <utility>
#include <vector>

#include "pspsim/channel.hpp"
#include "pspsim/errors.hpp"
#include "pspsim/quadrature.hpp"
#include "pspsim/transmitter.hpp"

namespace pspsim {

struct SecurityConfig {
    double beta = 0.96;    // reconciliation efficiency
    double fer = 0.3;      // frame error rate
    double f_m_hz = 20e9;  // repetition rate
    bool detector_trusted = true;
    DetectorParams bob_det{0.56, 0.38};
};

inline void validate(const SecurityConfig& c) {
    if (!(c.beta > 0.0) || c.beta > 1.0)
        throw DomainError("beta must be in (0, 1]");
    if (!(c.fer >= 0.0) || c.fer >= 1.0)
        throw DomainError("FER must be in [0, 1)");
    if (!(c.f_m_hz > 0.0)) throw DomainError("repetition rate must be > 0");
    validate(c.bob_det);
}

struct ChannelEstimate {
    double t_hat = 0.0;         // power transmittance, clamped to (0, 1]
    double t_hat_raw = 0.0;     // before clamping
    double epsilon_hat = 0.0;   // channel-input-referred excess noise, >= 0
    double epsilon_hat_raw = 0.0;  // before clamping (diagnostic)
    double v_a = 0.0;           // channel-input modulation variance
    std::int64_t n_frames = 1;
    double slope = 0.0;                 // regression slope (diagnostic)
    double conditional_variance = 0.0;  // Bob residual variance (diagnostic)
};

// ---------------------------------------------------------------------------
// Gaussian-state helpers
// ---------------------------------------------------------------------------

namespace gstate {

using Matrix = Eigen::MatrixXd;

inline Matrix omega(int nmodes) {
    Matrix o = Matrix::Zero(2 * nmodes, 2 * nmodes);
    for (int i = 0; i < nmodes; ++i) {
        o(2 * i, 2 * i + 1) = 1.0;
        o(2 * i + 1, 2 * i) = -1.0;
    }
    return o;
}

// Von Neumann entropy contribution of one symplectic eigenvalue, in bits.
inline double g_entropy(double lam) {
    if (lam <= 1.0 + 1e-9) return 0.0;
    const double ap = (lam + 1.0) / 2.0;
    const double am = (lam - 1.0) / 2.0;
    return ap * std::log2(ap) - am * std::log2(am);
}

// Closed form for a two-mode covariance [[a I, c Z], [c Z, b I]].
inline std::pair<double, double> symplectic_eigenvalues_2mode(double a, double b,
                                                              double c) {
    const double delta = a * a + b * b - 2.0 * c * c;
    const double det = a * b - c * c;
    const double s = std::sqrt(std::max(delta * delta - 4.0 * det * det, 0.0));
    return {std::sqrt(std::max((delta + s) / 2.0, 0.0)),
            std::sqrt(std::max((delta - s) / 2.0, 0.0))};
}

// General route: S = cov^{1/2} Omega cov^{1/2} is real antisymmetric with
// eigenvalues +-i lambda, so S^T S is symmetric positive semidefinite with
// the squared symplectic eigenvalues, each doubly degenerate. Both solves
// are self-adjoint, which keeps the pairing numerically clean.
inline std::vector<double> symplectic_eigenvalues(const Matrix& cov) {
    const int n = static_cast<int>(cov.rows()) / 2;
    Eigen::SelfAdjointEigenSolver<Matrix> half(cov);
    const Matrix root = half.operatorSqrt();
    const Matrix s = root * omega(n) * root;
    const Matrix k = s.transpose() * s;
    Eigen::SelfAdjointEigenSolver<Matrix> es(k);
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        // eigenvalues come back ascending; collapse the degenerate pairs
        const double sq = 0.5 * (es.eigenvalues()[2 * n - 1 - 2 * i] +
                                 es.eigenvalues()[2 * n - 2 - 2 * i]);
        out.push_back(std::sqrt(std::max(sq, 0.0)));
    }
    return out;
}

// Conditional covariance of the remaining modes after an ideal heterodyne
// measurement of `mode`: gamma_N - s (gamma_M + I)^{-1} s^T.
inline Matrix heterodyne_condition(const Matrix& cov, int mode) {
    const int n2 = static_cast<int>(cov.rows());
    std::vector<int> keep;
    for (int i = 0; i < n2; ++i)
        if (i != 2 * mode && i != 2 * mode + 1) keep.push_back(i);
    Matrix gnn(n2 - 2, n2 - 2), gnb(n2 - 2, 2), gbb(2, 2);
    for (int r = 0; r < n2 - 2; ++r) {
        for (int c = 0; c < n2 - 2; ++c) gnn(r, c) = cov(keep[r], keep[c]);
        gnb(r, 0) = cov(keep[r], 2 * mode);
        gnb(r, 1) = cov(keep[r], 2 * mode + 1);
    }
    gbb << cov(2 * mode, 2 * mode), cov(2 * mode, 2 * mode + 1),
        cov(2 * mode + 1, 2 * mode), cov(2 * mode + 1, 2 * mode + 1);
    const Matrix inv = (gbb + Matrix::Identity(2, 2)).inverse();
    return gnn - gnb * inv * gnb.transpose();
}

// Beam splitter symplectic acting on modes i and j.
inline Matrix beam_splitter(int nmodes, int i, int j, double eta) {
    Matrix s = Matrix::Identity(2 * nmodes, 2 * nmodes);
    const double t = std::sqrt(eta);
    const double r = std::sqrt(1.0 - eta);
    for (int q = 0; q < 2; ++q) {
        s(2 * i + q, 2 * i + q) = t;
        s(2 * i + q, 2 * j + q) = r;
        s(2 * j + q, 2 * i + q) = r;
        s(2 * j + q, 2 * j + q) = -t;
    }
    return s;
}

}  // namespace gstate

// ---------------------------------------------------------------------------
// Information quantities
// ---------------------------------------------------------------------------

namespace detail {
inline void validate_point(double v_a, double t, double eps) {
    if (!(v_a >= 0.0)) throw DomainError("V_A must be >= 0");
    if (!(t >= 0.0 && t <= 1.0)) throw DomainError("T must be in [0, 1]");
    if (!(eps >= 0.0)) throw DomainError("excess noise must be >= 0");
}
}  // namespace detail

// Shannon mutual information of the heterodyne channel, both quadratures,
// bits per symbol. Detector parameters enter physically whether trusted or
// not; the trusted flag matters only for the Holevo bound.
inline double mutual_information(double v_a, double t, double eps,
                                 const SecurityConfig& cfg) {
    detail::validate_point(v_a, t, eps);
    validate(cfg);
    if (t == 0.0 || v_a == 0.0) return 0.0;
    const double eta = cfg.bob_det.efficiency;
    const double nu = cfg.bob_det.electronic_noise;
    const double chi_het = (1.0 + (1.0 - eta) + 2.0 * nu) / eta;
    const double snr = t * v_a / (1.0 + t * eps + chi_het);
    return std::log2(1.0 + snr);
}

// Holevo bound kappa_BE for reverse reconciliation, bits per symbol.
inline double holevo_bound(double v_a, double t, double eps,
                           const SecurityConfig& cfg) {
    detail::validate_point(v_a, t, eps);
    validate(cfg);
    if (t == 0.0) return 0.0;  // Eve's state is independent of Bob's data
    const double v = v_a + 1.0;

    double se = 0.0, seb = 0.0;
    if (cfg.detector_trusted) {
        const double a = v;
        const double b = t * (v_a + eps) + 1.0;
        const double c = std::sqrt(t * (v * v - 1.0));
        const auto [l1, l2] = gstate::symplectic_eigenvalues_2mode(a, b, c);
        if (l2 < 1.0 - 1e-6) throw DomainError("unphysical covariance matrix");
        se = gstate::g_entropy(l1) + gstate::g_entropy(l2);

        // Detector model: BS(eta) on (B, G0) with (G0, G1) an EPR pair of
        // variance 1 + 2*nu/(1-eta); heterodyne conditioning on the
        // measured output leaves the pure-state complement (A, B4, G1).
        double eta = cfg.bob_det.efficiency;
        const double nu = cfg.bob_det.electronic_noise;
        if (eta >= 1.0 && nu > 0.0) eta = 1.0 - 1e-9;
        using gstate::Matrix;
        if (eta >= 1.0) {
            // ideal detector: heterodyne directly on mode B of (A, B)
            Matrix gam = Matrix::Identity(4, 4);
            gam(0, 0) = gam(1, 1) = a;
            gam(2, 2) = gam(3, 3) = b;
            gam(0, 2) = gam(2, 0) = c;
            gam(1, 3) = gam(3, 1) = -c;
            const Matrix cond = gstate::heterodyne_condition(gam, 1);
            for (double lam : gstate::symplectic_eigenvalues(cond))
                seb += gstate::g_entropy(lam);
        } else {
            const double vg = 1.0 + 2.0 * nu / (1.0 - eta);
            const double cg = std::sqrt(std::max(vg * vg - 1.0, 0.0));
            Matrix gam = Matrix::Identity(8, 8);  // modes A, B, G0, G1
            gam(0, 0) = gam(1, 1) = a;
            gam(2, 2) = gam(3, 3) = b;
            gam(0, 2) = gam(2, 0) = c;
            gam(1, 3) = gam(3, 1) = -c;
            gam(4, 4) = gam(5, 5) = vg;
            gam(6, 6) = gam(7, 7) = vg;
            gam(4, 6) = gam(6, 4) = cg;
            gam(5, 7) = gam(7, 5) = -cg;
            const Matrix s = gstate::beam_splitter(4, 1, 2, eta);
            const Matrix mixed = s * gam * s.transpose();
            const Matrix cond = gstate::heterodyne_condition(mixed, 1);
            for (double lam : gstate::symplectic_eigenvalues(cond))
                seb += gstate::g_entropy(lam);
        }
    } else {
        // detector folded into the channel
        const double eta = cfg.bob_det.efficiency;
        const double nu = cfg.bob_det.electronic_noise;
        const double tu = t * eta;
        const double epsu = eps + 2.0 * nu / tu;
        const double a = v;
        const double b = tu * (v_a + epsu) + 1.0;
        const double c = std::sqrt(tu * (v * v - 1.0));
        const auto [l1, l2] = gstate::symplectic_eigenvalues_2mode(a, b, c);
        if (l2 < 1.0 - 1e-6) throw DomainError("unphysical covariance matrix");
        se = gstate::g_entropy(l1) + gstate::g_entropy(l2);
        const double acond = a - c * c / (b + 1.0);
        seb = gstate::g_entropy(acond);
    }
    return std::max(0.0, se - seb);
}

// SKR = F_m (1 - FER) max(0, beta I_AB - kappa_BE), bits per second.
inline double secret_key_rate(double i_ab, double k_be,
                              const SecurityConfig& cfg) {
    validate(cfg);
    if (!std::isfinite(i_ab) || !std::isfinite(k_be))
        throw DomainError("key rate inputs must be finite");
    return cfg.f_m_hz * (1.0 - cfg.fer) *
           std::max(0.0, cfg.beta * i_ab - k_be);
}

struct KeyRateBin {
    double t_low_db = 0.0;
    double t_high_db = 0.0;
    double probability = 0.0;
    double skr_bps = 0.0;
};

struct KeyRateReport {
    std::vector<KeyRateBin> bins;
    double total_bps = 0.0;
};

// Exact transmittance-weighted total; probabilities may sum to less than 1
// when out-of-range frames were excluded.
inline KeyRateReport total_key_rate(std::span<const KeyRateBin> bins) {
    double psum = 0.0;
    KeyRateReport rep;
    rep.bins.assign(bins.begin(), bins.end());
    for (const auto& b : bins) {
        if (!(b.probability >= 0.0))
            throw DomainError("bin probabilities must be >= 0");
        psum += b.probability;
        rep.total_bps += b.probability * b.skr_bps;
    }
    if (psum > 1.0 + 1e-9)
        throw DomainError("bin probabilities must sum to at most 1");
    return rep;
}

// ---------------------------------------------------------------------------
// Parameter estimation
// ---------------------------------------------------------------------------

// Spectral bookkeeping handed over by the DSP chain (fractions of white and
// symbol-held noise removed by the pilot notch). Zero when the data never
// went through a trace.
struct DspSideInfo {
    double notched_white_fraction = 0.0;
    double notched_held_fraction = 0.0;
};

// Estimates (T, epsilon, V_A) from paired Alice/Bob symbols. X and P are
// pooled. t_hat comes from the regression slope normalized by the known
// back-to-back scaling sqrt(eta/2) * alpha; epsilon_hat from Bob's
// conditional variance after subtracting shot noise and (trusted case)
// electronic noise, referred to the channel input.
inline ChannelEstimate estimate_channel_params(
    std::span<const QuadraturePair> alice, std::span<const QuadraturePair> bob,
    const TransmitterParams& tx, const SecurityConfig& cfg,
    const DspSideInfo& dsp = {}) {
    validate(tx);
    validate(cfg);
    if (alice.size() != bob.size())
        throw LengthMismatchError("alice/bob sequences differ in length");
    if (alice.size() < 10000)
        throw EstimationDegenerateError("need at least 1e4 disclosed pairs");

    const double n = 2.0 * static_cast<double>(alice.size());
    double sm = 0.0, sz = 0.0, smm = 0.0, szz = 0.0, smz = 0.0;
    for (std::size_t i = 0; i < alice.size(); ++i) {
        const double m[2] = {alice[i].x, alice[i].p};
        const double z[2] = {bob[i].x, bob[i].p};
        for (int c = 0; c < 2; ++c) {
            sm += m[c];
            sz += z[c];
            smm += m[c] * m[c];
            szz += z[c] * z[c];
            smz += m[c] * z[c];
        }
    }
    const double mean_m = sm / n;
    const double mean_z = sz / n;
    const double var_m = smm / n - mean_m * mean_m;
    const double var_z = szz / n - mean_z * mean_z;
    const double cov = smz / n - mean_m * mean_z;
    if (!(var_m > 0.0))
        throw EstimationDegenerateError("Alice variance is not positive");

    const double alpha = optimal_estimator_alpha(tx);
    const double eta = cfg.bob_det.efficiency;
    const double nu = cfg.bob_det.electronic_noise;
    // Pilot-removal bookkeeping: the tone-model subtraction scales the
    // held signal's covariance with Alice by h and its power by h, and
    // scales white noise power by w. Residual model:
    //   slope = sqrt(eta T / 2) h alpha
    //   Var(z|m) = (eta/2) h (1 + T (eps + v_a f_h)) + white w
    const double f_h = dsp.notched_held_fraction;
    const double h = 1.0 - f_h;
    const double w = 1.0 - dsp.notched_white_fraction;
    const double s0 = std::sqrt(0.5 * eta) * alpha * h;
    if (!(s0 > 1e-15))
        throw EstimationDegenerateError("undefined back-to-back slope (V_A = 0?)");

    ChannelEstimate est;
    est.slope = cov / var_m;
    est.t_hat_raw = (est.slope / s0) * (est.slope / s0);
    if (!(est.t_hat_raw > 0.0))
        throw EstimationDegenerateError("non-positive transmittance estimate");
    est.t_hat = std::min(est.t_hat_raw, 1.0);
    est.v_a = alpha * alpha * var_m;
    if (est.v_a < 1e-4)
        throw EstimationDegenerateError("modulation variance too small to estimate");
    est.conditional_variance = var_z - est.slope * est.slope * var_m;
    if (!(est.conditional_variance > 0.0))
        throw EstimationDegenerateError("non-positive conditional variance");

    const double white = cfg.detector_trusted ? (1.0 - 0.5 * eta + nu)
                                              : (1.0 - 0.5 * eta);
    est.epsilon_hat_raw = (est.conditional_variance - 0.5 * eta * h - white * w) /
                              (0.5 * eta * h * est.t_hat_raw) -
                          est.v_a * f_h;
    est.epsilon_hat = std::max(0.0, est.epsilon_hat_raw);
    return est;
}

// ---------------------------------------------------------------------------
// Noise budget
// ---------------------------------------------------------------------------

struct NoiseBudget {
    double eps_psp = 0.0;
    double eps_freq = 0.0;
    double eps_phase = 0.0;
    double eps_chan = 0.0;  // residual, clamped at 0
    double eps_fad = 0.0;
    double eps_total = 0.0;
    // raw (unclamped) attributions, so components + residual = total exactly
    double eps_freq_raw = 0.0;
    double eps_phase_raw = 0.0;
    double eps_chan_raw = 0.0;
};

enum class AblationRun { kBaseline, kWithFreq, kWithPhase, kFull };

// Attributes noise components by differencing ablation runs: frequency and
// phase contributions against the baseline, the analytic PSP term, the
// fading formula value, and everything unexplained as the channel residual.
inline NoiseBudget assemble_noise_budget(
    const std::map<AblationRun, ChannelEstimate>& runs, double eps_psp_analytic,
    double eps_fad) {
    const auto base_it = runs.find(AblationRun::kBaseline);
    const auto full_it = runs.find(AblationRun::kFull);
    if (base_it == runs.end())
        throw EstimationDegenerateError("noise budget requires a baseline run");
    if (full_it == runs.end())
        throw EstimationDegenerateError("noise budget requires a full run");
    const double base = base_it->second.epsilon_hat_raw;
    const double total = full_it->second.epsilon_hat_raw;

    NoiseBudget nb;
    nb.eps_psp = eps_psp_analytic;
    nb.eps_fad = eps_fad;
    if (auto it = runs.find(AblationRun::kWithFreq); it != runs.end())
        nb.eps_freq_raw = it->second.epsilon_hat_raw - base;
    if (auto it = runs.find(AblationRun::kWithPhase); it != runs.end())
        nb.eps_phase_raw = it->second.epsilon_hat_raw - base;
    nb.eps_freq = std::max(0.0, nb.eps_freq_raw);
    nb.eps_phase = std::max(0.0, nb.eps_phase_raw);
    nb.eps_chan_raw = total - (eps_psp_analytic + nb.eps_freq_raw +
                               nb.eps_phase_raw + eps_fad);
    nb.eps_chan = std::max(0.0, nb.eps_chan_raw);
    nb.eps_total = std::max(0.0, total);
    return nb;
}

// ---------------------------------------------------------------------------
// Source-parameter optimization
// ---------------------------------------------------------------------------

struct SourceOptimum {
    double eta0 = 0.0;
    double eta1 = 0.0;
    double skr_bps = 0.0;
    double eps_psp = 0.0;
};

// Grid search over (eta0, eta1) maximizing the SKR at a fixed operating
// point, with epsilon_psp recomputed per grid point. Ties break toward the
// smaller eta1, then the smaller eta0.
inline SourceOptimum optimize_source_params(std::span<const double> eta0_grid,
                                            std::span<const double> eta1_grid,
                                            const TransmitterParams& base,
                                            double v_a, double t,
                                            double extra_excess,
                                            const SecurityConfig& cfg) {
    if (eta0_grid.empty() || eta1_grid.empty())
        throw EmptyRequestError("empty optimization grid");
    detail::validate_point(v_a, t, extra_excess);
    SourceOptimum best;
    bool first = true;
    for (double e0 : eta0_grid) {
        for (double e1 : eta1_grid) {
            TransmitterParams p = base;
            p.eta0 = e0;
            p.eta1 = e1;
            const double eps = epsilon_psp(p, v_a);
            const double i_ab =
                mutual_information(v_a, t, eps + extra_excess, cfg);
            const double k_be = holevo_bound(v_a, t, eps + extra_excess, cfg);
            const double skr = secret_key_rate(i_ab, k_be, cfg);
            const bool better =
                first || skr > best.skr_bps ||
                (skr == best.skr_bps &&
                 (e1 < best.eta1 || (e1 == best.eta1 && e0 < best.eta0)));
            if (better) {
                best = {e0, e1, skr, eps};
                first = false;
            }
        }
    }
    return best;
}

}  // namespace pspsim
