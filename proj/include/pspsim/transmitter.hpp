#pragma once

// Alice's station: thermal-source splitting, Alice's own heterodyne tap,
// beacon bookkeeping, attenuation, and the closed-form analysis of the
// passive-state-preparation (PSP) excess noise.
//
// The channel-bound quadrature x1 and Alice's detected quadrature x2 share
// the same thermal and vacuum noise realizations; keeping that correlation
// straight is the whole point of this module. The linear model is
//
//   x1 = sqrt(eta0 eta1) x_in - sqrt(eta0 (1-eta1)) v1
//        - sqrt(eta0 eta3) v3 - sqrt(1-eta0) v4
//   x2 = sqrt(eta_a (1-eta1)/2) x_in - sqrt(eta_a eta1/2) v1
//        + sqrt(eta_a/2) v2 + sqrt(eta_a (1-eta3)/2) v3
//        - sqrt(1-eta_a) va + E_a
//
// with <x_in^2> = 2*n0 + 1, unit vacua and <E_a^2> = nu_a. P is identical
// in distribution with independent noises.

#include <cmath>
#include <cstdint>
#include <vector>

#include "pspsim/errors.hpp"
#include "pspsim/quadrature.hpp"
#include "pspsim/rng.hpp"

namespace pspsim {

struct TransmitterParams {
    double eta0 = 0.0299;  // output attenuator transmittance
    double eta1 = 0.01;    // splitter toward the channel (1-eta1 to Alice)
    double eta3 = 0.01;    // beacon combiner vacuum coupling
    DetectorParams alice_det{0.56, 0.34};
    double n0 = 0.0;               // source mean photon number
    double beacon_amplitude = 0.0;  // pilot coherent amplitude before the
                                    // attenuator, SNU amplitude units
};

inline void validate(const TransmitterParams& p) {
    for (double eta : {p.eta0, p.eta1, p.eta3}) {
        if (!(eta >= 0.0 && eta <= 1.0))
            throw DomainError("transmitter transmittances must be in [0, 1]");
    }
    if (!(p.n0 >= 0.0)) throw DomainError("source mean photon number must be >= 0");
    if (!(p.beacon_amplitude >= 0.0))
        throw DomainError("beacon amplitude must be >= 0");
    validate(p.alice_det);
}

struct TransmitterOutput {
    std::vector<QuadraturePair> channel_bound;   // x1/p1
    std::vector<QuadraturePair> alice_measured;  // x2/p2
    double pilot_amplitude_sent = 0.0;           // sqrt(eta0) * gamma_L1
};

// Second moments of the (x1, x2) linear model; x and p are identical in
// distribution, so these describe either quadrature.
struct AliceMoments {
    double var_channel = 0.0;  // <x1^2>
    double var_alice = 0.0;    // <x2^2>
    double cov = 0.0;          // <x1 x2>
};

inline AliceMoments second_moments(const TransmitterParams& p) {
    validate(p);
    const double s = 2.0 * p.n0 + 1.0;
    const double ea = p.alice_det.efficiency;
    const double nu = p.alice_det.electronic_noise;
    AliceMoments m;
    m.var_channel = p.eta0 * p.eta1 * s + p.eta0 * (1.0 - p.eta1) +
                    p.eta0 * p.eta3 + (1.0 - p.eta0);
    m.var_alice = 0.5 * ea * (1.0 - p.eta1) * s + 0.5 * ea * p.eta1 +
                  0.5 * ea + 0.5 * ea * (1.0 - p.eta3) + (1.0 - ea) + nu;
    m.cov = std::sqrt(0.5 * p.eta0 * p.eta1 * ea * (1.0 - p.eta1)) * (s + 1.0) -
            std::sqrt(0.5 * p.eta0 * p.eta3 * ea * (1.0 - p.eta3));
    return m;
}

// Channel view implied by the moments: the modulation variance Bob can
// explain from Alice's data and the PSP residual above shot noise. By
// construction v_a + eps_psp + 1 = Var(x1).
struct PredictedChannel {
    double v_a = 0.0;
    double eps_psp = 0.0;
};

inline PredictedChannel predicted_channel(const TransmitterParams& p) {
    const auto m = second_moments(p);
    PredictedChannel out;
    out.v_a = m.var_alice > 0.0 ? m.cov * m.cov / m.var_alice : 0.0;
    out.eps_psp = m.var_channel - 1.0 - out.v_a;
    return out;
}

// Equivalent modulation variance V_A = eta0 * n0.
inline double equivalent_modulation_variance(double eta0, double n0) {
    if (!(eta0 >= 0.0 && eta0 <= 1.0))
        throw DomainError("eta0 must be in [0, 1]");
    if (!(n0 >= 0.0)) throw DomainError("n0 must be >= 0");
    return eta0 * n0;
}

// Alice's optimal linear estimate coefficient alpha_{1,2} = <x1 x2>/<x2^2>.
inline double optimal_estimator_alpha(const TransmitterParams& p) {
    validate(p);
    const double ea = p.alice_det.efficiency;
    const double nu = p.alice_det.electronic_noise;
    const double num =
        2.0 * (p.n0 + 1.0) *
            std::sqrt(2.0 * p.eta0 * p.eta1 * ea * (1.0 - p.eta1)) -
        std::sqrt(2.0 * p.eta0 * p.eta3 * ea * (1.0 - p.eta3));
    const double den =
        2.0 * p.n0 * ea * (1.0 - p.eta1) + ea * (1.0 - p.eta3) + 2.0 * nu + 2.0;
    if (!(den > 0.0)) throw DomainError("alpha denominator must be positive");
    return num / den;
}

// Closed-form PSP excess noise as a function of V_A = eta0*n0. Equals the
// residual variance <(x1 - alpha x2)^2> of the linear model minus the 1 SNU
// shot-noise baseline carried by x1 (see transmitter_test.cpp for the
// Monte Carlo equivalence check).
inline double epsilon_psp(const TransmitterParams& p, double v_a) {
    validate(p);
    if (!(v_a >= 0.0)) throw DomainError("V_A must be >= 0");
    const double ea = p.alice_det.efficiency;
    const double nu = p.alice_det.electronic_noise;
    const double brac =
        2.0 * (v_a + p.eta0) * std::sqrt(p.eta1 * (1.0 - p.eta1)) -
        p.eta0 * std::sqrt(p.eta3 * (1.0 - p.eta3));
    const double den = 2.0 * v_a * ea * (1.0 - p.eta1) +
                       p.eta0 * ea * (1.0 - p.eta3) +
                       2.0 * p.eta0 * (nu + 1.0);
    const double additive = 2.0 * v_a * p.eta1 + p.eta0 * p.eta3;
    if (brac == 0.0) return additive;
    if (!(den > 0.0)) throw DomainError("epsilon_psp denominator must be positive");
    return -ea * brac * brac / den + additive;
}

// Generates `count` correlated (x1, x2) pairs for both quadratures. X and P
// use independent noise realizations drawn in a fixed order per sample.
inline TransmitterOutput alice_station(const TransmitterParams& p,
                                       std::size_t count, RngStream& rng) {
    validate(p);
    if (count == 0) throw EmptyRequestError("requested zero transmitter samples");

    const double s_th = std::sqrt(2.0 * p.n0 + 1.0);
    const double ea = p.alice_det.efficiency;
    const double se = std::sqrt(p.alice_det.electronic_noise);

    const double c1_in = std::sqrt(p.eta0 * p.eta1);
    const double c1_v1 = std::sqrt(p.eta0 * (1.0 - p.eta1));
    const double c1_v3 = std::sqrt(p.eta0 * p.eta3);
    const double c1_v4 = std::sqrt(1.0 - p.eta0);
    const double c2_in = std::sqrt(0.5 * ea * (1.0 - p.eta1));
    const double c2_v1 = std::sqrt(0.5 * ea * p.eta1);
    const double c2_v2 = std::sqrt(0.5 * ea);
    const double c2_v3 = std::sqrt(0.5 * ea * (1.0 - p.eta3));
    const double c2_va = std::sqrt(1.0 - ea);

    TransmitterOutput out;
    out.channel_bound.resize(count);
    out.alice_measured.resize(count);
    out.pilot_amplitude_sent = std::sqrt(p.eta0) * p.beacon_amplitude;

    for (std::size_t i = 0; i < count; ++i) {
        double q1[2], q2[2];
        for (int c = 0; c < 2; ++c) {  // c = 0: x, c = 1: p
            const double in = rng.normal(s_th);
            const double v1 = rng.normal();
            const double v2 = rng.normal();
            const double v3 = rng.normal();
            const double v4 = rng.normal();
            const double va = rng.normal();
            const double el = rng.normal(se);
            q1[c] = c1_in * in - c1_v1 * v1 - c1_v3 * v3 - c1_v4 * v4;
            q2[c] = c2_in * in - c2_v1 * v1 + c2_v2 * v2 + c2_v3 * v3 -
                    c2_va * va + el;
        }
        out.channel_bound[i] = {q1[0], q1[1]};
        out.alice_measured[i] = {q2[0], q2[1]};
    }
    return out;
}

}  // namespace pspsim
