#pragma once

// Gaussian quadrature primitives in shot-noise units (SNU): thermal state
// sampling, linear optics (beam splitter / attenuator), heterodyne
// detection, and intensity statistics.
//
// Conventions used throughout the library:
//   * vacuum quadrature variance = 1 SNU per component,
//   * a thermal state with mean photon number n0 has Var(x) = Var(p) = 2*n0+1,
//   * all transforms are affine in the quadratures, so covariances propagate
//     linearly.

#include <cmath>
#include <complex>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "pspsim/errors.hpp"
#include "pspsim/rng.hpp"

namespace pspsim {

struct QuadraturePair {
    double x = 0.0;
    double p = 0.0;
};

struct ThermalSourceConfig {
    double n0 = 0.0;         // mean photon number
    std::uint64_t seed = 0;  // stream seed for the standalone sampler
};

struct DetectorParams {
    double efficiency = 1.0;        // quantum efficiency, in (0, 1]
    double electronic_noise = 0.0;  // electronic noise variance, SNU
};

inline void validate(const DetectorParams& det) {
    if (!(det.efficiency > 0.0) || det.efficiency > 1.0)
        throw DomainError("detector efficiency must be in (0, 1]");
    if (!(det.electronic_noise >= 0.0))
        throw DomainError("detector electronic noise must be >= 0");
}

// Draws one thermal quadrature pair: x, p ~ N(0, 2*n0 + 1), independent.
inline QuadraturePair sample_thermal_pair(double n0, RngStream& rng) {
    const double sigma = std::sqrt(2.0 * n0 + 1.0);
    return {rng.normal(sigma), rng.normal(sigma)};
}

inline QuadraturePair sample_vacuum_pair(RngStream& rng) {
    return {rng.normal(), rng.normal()};
}

inline std::vector<QuadraturePair> sample_thermal_quadratures(
    double n0, std::size_t count, RngStream& rng) {
    if (n0 < 0.0) throw DomainError("thermal mean photon number must be >= 0");
    if (count == 0) throw EmptyRequestError("requested zero thermal samples");
    std::vector<QuadraturePair> out(count);
    for (auto& q : out) q = sample_thermal_pair(n0, rng);
    return out;
}

inline std::vector<QuadraturePair> sample_thermal_quadratures(
    const ThermalSourceConfig& cfg, std::size_t count) {
    RngStream rng(cfg.seed);
    return sample_thermal_quadratures(cfg.n0, count, rng);
}

// Beam splitter of transmittance t on quadrature amplitudes:
//   out1 = sqrt(t) a + sqrt(1-t) b
//   out2 = sqrt(1-t) a - sqrt(t) b
// The 2x2 map is orthogonal, so total variance is preserved.
inline std::pair<QuadraturePair, QuadraturePair> apply_beam_splitter(
    const QuadraturePair& a, const QuadraturePair& b, double t) {
    if (!(t >= 0.0 && t <= 1.0))
        throw DomainError("beam splitter transmittance must be in [0, 1]");
    const double ct = std::sqrt(t);
    const double cr = std::sqrt(1.0 - t);
    QuadraturePair out1{ct * a.x + cr * b.x, ct * a.p + cr * b.p};
    QuadraturePair out2{cr * a.x - ct * b.x, cr * a.p - ct * b.p};
    return {out1, out2};
}

// Attenuator modeled as a beam splitter with a fresh vacuum mode.
inline QuadraturePair apply_attenuator(const QuadraturePair& a, double eta0,
                                       RngStream& rng) {
    if (!(eta0 >= 0.0 && eta0 <= 1.0))
        throw DomainError("attenuator transmittance must be in [0, 1]");
    if (eta0 == 1.0) return a;  // no vacuum admixture
    const QuadraturePair vac = sample_vacuum_pair(rng);
    return apply_beam_splitter(a, vac, eta0).first;
}

// Heterodyne measurement of both quadratures:
//   x_out = sqrt(eta/2) (x + x_v2) - sqrt(1-eta) x_va + E
// with independent fresh vacua and Gaussian electronic noise per component.
// Vacuum input with an ideal detector gives exactly 1 SNU per component.
inline QuadraturePair heterodyne_measure(const QuadraturePair& a,
                                         const DetectorParams& det,
                                         RngStream& rng) {
    validate(det);
    const double ch = std::sqrt(det.efficiency / 2.0);
    const double cl = std::sqrt(1.0 - det.efficiency);
    const double se = std::sqrt(det.electronic_noise);
    const double x = ch * (a.x + rng.normal()) - cl * rng.normal() + se * rng.normal();
    const double p = ch * (a.p + rng.normal()) - cl * rng.normal() + se * rng.normal();
    return {x, p};
}

// Normalized second-order intensity correlation <I^2>/<I>^2.
// 2 for thermal light, 1 for coherent light.
inline double g2_zero(std::span<const double> intensity) {
    if (intensity.size() < 2)
        throw DegenerateInputError("g2(0) needs at least two intensity samples");
    double m1 = 0.0, m2 = 0.0;
    for (double v : intensity) {
        m1 += v;
        m2 += v * v;
    }
    m1 /= static_cast<double>(intensity.size());
    m2 /= static_cast<double>(intensity.size());
    if (!(m1 > 0.0))
        throw DegenerateInputError("g2(0) undefined for zero mean intensity");
    return m2 / (m1 * m1);
}

// Instantaneous intensity |x + jp|^2 / 2 of a quadrature sequence.
inline std::vector<double> intensity_sequence(
    std::span<const QuadraturePair> quads) {
    std::vector<double> out(quads.size());
    for (std::size_t i = 0; i < quads.size(); ++i)
        out[i] = 0.5 * (quads[i].x * quads[i].x + quads[i].p * quads[i].p);
    return out;
}

}  // namespace pspsim
