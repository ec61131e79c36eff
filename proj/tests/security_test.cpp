#include "pspsim/security.hpp"

#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>
#include <cmath>
#include <complex>
#include <map>
#include <vector>

#include "pspsim/channel.hpp"
#include "pspsim/rng.hpp"
#include "pspsim/transmitter.hpp"
#include "test_util.hpp"

namespace {

using namespace pspsim;

SecurityConfig table1_security() {
    SecurityConfig c;
    c.beta = 0.96;
    c.fer = 0.3;
    c.f_m_hz = 20e9;
    c.detector_trusted = true;
    c.bob_det = {0.56, 0.38};
    return c;
}

// Independent brute-force oracle: |eigenvalues| of i*Omega*cov via a complex
// eigen-decomposition (a different matrix and solver than the production
// route, which uses the closed form / -(Omega cov)^2).
std::vector<double> brute_force_symplectic(const gstate::Matrix& cov) {
    const int n = static_cast<int>(cov.rows()) / 2;
    Eigen::MatrixXcd m =
        std::complex<double>(0.0, 1.0) * (gstate::omega(n) * cov);
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(m, false);
    std::vector<double> mags(static_cast<std::size_t>(2 * n));
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i)
        mags[static_cast<std::size_t>(i)] = std::abs(es.eigenvalues()[i]);
    std::sort(mags.begin(), mags.end(), std::greater<>());
    std::vector<double> out;
    for (int i = 0; i < n; ++i) out.push_back(mags[static_cast<std::size_t>(2 * i)]);
    return out;
}

// Random physical two-mode covariance of the [[aI, cZ], [cZ, bI]] family:
// a TMSV arm sent through a lossy channel with added classical noise.
gstate::Matrix random_two_mode(RngStream& rng, double& a, double& b, double& c) {
    const double v = 1.0 + 20.0 * rng.uniform01();
    const double t = 0.05 + 0.95 * rng.uniform01();
    const double u = 5.0 * rng.uniform01();
    a = v;
    b = t * v + (1.0 - t) + u;
    c = (rng.uniform01() < 0.5 ? -1.0 : 1.0) * std::sqrt(t * (v * v - 1.0));
    gstate::Matrix g = gstate::Matrix::Identity(4, 4);
    g(0, 0) = g(1, 1) = a;
    g(2, 2) = g(3, 3) = b;
    g(0, 2) = g(2, 0) = c;
    g(1, 3) = g(3, 1) = -c;
    return g;
}

// Random physical multimode covariance: start pure-ish (symplectic rotation
// and squeezing of vacuum) and add positive noise.
gstate::Matrix random_multimode(int nmodes, RngStream& rng) {
    const int d = 2 * nmodes;
    gstate::Matrix s = gstate::Matrix::Identity(d, d);
    for (int i = 0; i < nmodes; ++i) {
        const double r = 0.8 * (2.0 * rng.uniform01() - 1.0);
        s(2 * i, 2 * i) = std::exp(r);
        s(2 * i + 1, 2 * i + 1) = std::exp(-r);
    }
    for (int i = 0; i + 1 < nmodes; ++i) {
        const double eta = rng.uniform01();
        s = gstate::beam_splitter(nmodes, i, i + 1, eta) * s;
    }
    gstate::Matrix g = s * s.transpose();
    gstate::Matrix noise = gstate::Matrix::Random(d, d);
    g += 0.5 * (noise * noise.transpose());
    return g;
}

TEST(Symplectic, TwoModeClosedFormMatchesBruteForce) {
    RngStream rng(121);
    for (int trial = 0; trial < 200; ++trial) {
        double a, b, c;
        auto g = random_two_mode(rng, a, b, c);
        auto [l1, l2] = gstate::symplectic_eigenvalues_2mode(a, b, c);
        auto bf = brute_force_symplectic(g);
        ASSERT_NEAR(l1, bf[0], 1e-9 * bf[0]);
        ASSERT_NEAR(l2, bf[1], 1e-9 * std::max(bf[1], 1.0));
    }
}

TEST(Symplectic, GeneralRouteMatchesBruteForce) {
    RngStream rng(122);
    for (int trial = 0; trial < 100; ++trial) {
        auto g = random_multimode(3, rng);
        auto prod = gstate::symplectic_eigenvalues(g);
        auto bf = brute_force_symplectic(g);
        ASSERT_EQ(prod.size(), bf.size());
        for (std::size_t i = 0; i < prod.size(); ++i)
            ASSERT_NEAR(prod[i], bf[i], 1e-9 * std::max(bf[i], 1.0));
    }
}

TEST(Symplectic, TwoModeSqueezedVacuumIsPure) {
    // V = 1: both eigenvalues 1, entropy 0
    auto [l1, l2] = gstate::symplectic_eigenvalues_2mode(1.0, 1.0, 0.0);
    EXPECT_DOUBLE_EQ(l1, 1.0);
    EXPECT_DOUBLE_EQ(l2, 1.0);
    EXPECT_DOUBLE_EQ(gstate::g_entropy(l1) + gstate::g_entropy(l2), 0.0);
}

TEST(MutualInformation, ZeroAtZeroTransmittance) {
    EXPECT_DOUBLE_EQ(mutual_information(2.973, 0.0, 0.0, table1_security()), 0.0);
}

TEST(MutualInformation, LosslessIdealHeterodyne) {
    SecurityConfig c = table1_security();
    c.bob_det = {1.0, 0.0};
    const double got = mutual_information(2.973, 1.0, 0.0, c);
    EXPECT_NEAR(got, std::log2(1.0 + 2.973 / 2.0), 1e-12);
}

TEST(HolevoBound, ZeroForLosslessNoiselessChannel) {
    EXPECT_DOUBLE_EQ(holevo_bound(2.973, 1.0, 0.0, table1_security()), 0.0);
    SecurityConfig u = table1_security();
    u.detector_trusted = false;
    u.bob_det = {1.0, 0.0};
    EXPECT_DOUBLE_EQ(holevo_bound(2.973, 1.0, 0.0, u), 0.0);
}

TEST(HolevoBound, NonNegativeOnRandomPhysicalPoints) {
    RngStream rng(123);
    for (int i = 0; i < 50; ++i) {
        const double v_a = 0.1 + 10.0 * rng.uniform01();
        const double t = 0.001 + 0.999 * rng.uniform01();
        const double eps = 0.2 * rng.uniform01();
        for (bool trusted : {true, false}) {
            SecurityConfig c = table1_security();
            c.detector_trusted = trusted;
            const double k = holevo_bound(v_a, t, eps, c);
            ASSERT_GE(k, 0.0);
            ASSERT_TRUE(std::isfinite(k));
        }
    }
}

TEST(HolevoBound, ReferencePointTrustedValue) {
    // frozen from an independent implementation of the same conventions
    const double k =
        holevo_bound(2.973, std::pow(10.0, -2.34), 0.0393, table1_security());
    EXPECT_NEAR(k, 0.003538129709, 2e-9);
}

TEST(SecretKeyRate, Arithmetic) {
    SecurityConfig c = table1_security();
    const double skr = secret_key_rate(1.0, 0.5, c);
    EXPECT_NEAR(skr, 20e9 * 0.7 * (0.96 * 1.0 - 0.5), 1e-3);
    EXPECT_DOUBLE_EQ(secret_key_rate(0.1, 0.2, c), 0.0);  // clamp
}

TEST(SecretKeyRate, ReferencePointWithinSoftTarget) {
    SecurityConfig c = table1_security();
    const double t = std::pow(10.0, -2.34);
    const double i_ab = mutual_information(2.973, t, 0.0393, c);
    const double k = holevo_bound(2.973, t, 0.0393, c);
    const double skr = secret_key_rate(i_ab, k, c);
    EXPECT_NEAR(skr, 3852974.9, 50.0);  // frozen cross-implementation value
    EXPECT_GT(skr, 3.3492e6 * 0.7);
    EXPECT_LT(skr, 3.3492e6 * 1.3);
}

TEST(SecretKeyRate, MonotoneInNoiseAndBeta) {
    SecurityConfig c = table1_security();
    const double t = std::pow(10.0, -2.0);
    double prev = 1e18;
    for (double eps : {0.0, 0.01, 0.02, 0.05, 0.1}) {
        const double skr = secret_key_rate(mutual_information(2.973, t, eps, c),
                                           holevo_bound(2.973, t, eps, c), c);
        ASSERT_LE(skr, prev + 1e-9);
        prev = skr;
    }
    SecurityConfig lo = c, hi = c;
    lo.beta = 0.90;
    hi.beta = 0.98;
    const double i_ab = mutual_information(2.973, t, 0.02, c);
    const double k = holevo_bound(2.973, t, 0.02, c);
    EXPECT_LE(secret_key_rate(i_ab, k, lo), secret_key_rate(i_ab, k, hi));
}

TEST(TotalKeyRate, SingleBin) {
    std::vector<KeyRateBin> bins{{-24.0, -23.0, 1.0, 5e6}};
    EXPECT_DOUBLE_EQ(total_key_rate(bins).total_bps, 5e6);
}

TEST(TotalKeyRate, TwoBinExact) {
    std::vector<KeyRateBin> bins{{-20.0, -19.0, 0.5, 2e6}, {-19.0, -18.0, 0.5, 4e6}};
    EXPECT_DOUBLE_EQ(total_key_rate(bins).total_bps, 3e6);
}

TEST(TotalKeyRate, ConvexCombinationBounds) {
    RngStream rng(124);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<KeyRateBin> bins(8);
        double psum = 0.0;
        double lo = 1e18, hi = -1e18;
        for (int i = 0; i < 8; ++i) {
            bins[static_cast<std::size_t>(i)].probability = rng.uniform01();
            psum += bins[static_cast<std::size_t>(i)].probability;
        }
        for (auto& b : bins) {
            b.probability /= psum;
            b.skr_bps = 30e6 * rng.uniform01();
            lo = std::min(lo, b.skr_bps);
            hi = std::max(hi, b.skr_bps);
        }
        const double total = total_key_rate(bins).total_bps;
        ASSERT_GE(total, lo - 1e-9);
        ASSERT_LE(total, hi + 1e-9);
    }
}

TEST(TotalKeyRate, RejectsBadProbabilities) {
    std::vector<KeyRateBin> bins{{-20.0, -19.0, 0.7, 1e6}, {-19.0, -18.0, 0.7, 1e6}};
    EXPECT_THROW(total_key_rate(bins), DomainError);
}

TransmitterParams table1_tx(double n0) {
    TransmitterParams p;
    p.eta0 = 0.0299;
    p.eta1 = 0.01;
    p.eta3 = 0.01;
    p.alice_det = {0.56, 0.34};
    p.n0 = n0;
    return p;
}

// Direct linear-model frames (no trace/DSP in the loop): Bob sees
// z = sqrt(eta/2) (sqrt(T) x1 + sqrt(1-T) v + sqrt(T eps) w + v2) - ... + E.
std::pair<std::vector<QuadraturePair>, std::vector<QuadraturePair>> direct_frames(
    const TransmitterParams& tx, const SecurityConfig& sec, double t_lin,
    double eps, std::size_t n, std::uint64_t seed) {
    RngStream rng(seed);
    auto out = alice_station(tx, n, rng);
    TurbulenceModel m;
    m.mean_db = linear_to_db(t_lin);
    auto real = sample_channel(m, 0.0, 20e9, n, rng);
    for (auto& ph : real.phase) ph = 0.0;
    auto [chan, pilot] = apply_channel(out.channel_bound, 0.0, real, rng, eps);
    std::vector<QuadraturePair> bob(n);
    const double ch = std::sqrt(sec.bob_det.efficiency / 2.0);
    const double cl = std::sqrt(1.0 - sec.bob_det.efficiency);
    const double se = std::sqrt(sec.bob_det.electronic_noise);
    for (std::size_t i = 0; i < n; ++i) {
        bob[i].x = ch * (chan[i].x + rng.normal()) - cl * rng.normal() +
                   se * rng.normal();
        bob[i].p = ch * (chan[i].p + rng.normal()) - cl * rng.normal() +
                   se * rng.normal();
    }
    return {out.alice_measured, bob};
}

TEST(EstimateChannel, RecoversKnownTransmittance) {
    auto tx = table1_tx(4971.572);
    auto sec = table1_security();
    const double t_true = 0.01;
    auto [alice, bob] = direct_frames(tx, sec, t_true, 0.0, 1 << 20, 131);
    auto est = estimate_channel_params(alice, bob, tx, sec);
    EXPECT_NEAR(est.t_hat / t_true, 1.0, 0.03);
    EXPECT_NEAR(est.v_a, 2.973, 0.05);
    // epsilon is unbiased: tolerance from the conditional-variance stderr
    // referred to the channel input
    const double se_eps = 3.0 * est.conditional_variance *
                          std::sqrt(2.0 / (2.0 * double(1 << 20))) /
                          (0.5 * sec.bob_det.efficiency * t_true);
    EXPECT_NEAR(est.epsilon_hat_raw, 0.0, se_eps);
}

TEST(EstimateChannel, RecoversInjectedExcessNoise) {
    auto tx = table1_tx(4971.572);
    auto sec = table1_security();
    const double t_true = 0.25;
    const double eps_true = 0.05;
    auto [alice, bob] = direct_frames(tx, sec, t_true, eps_true, 1 << 20, 132);
    auto est = estimate_channel_params(alice, bob, tx, sec);
    const double eps_psp_true =
        epsilon_psp(tx, equivalent_modulation_variance(tx.eta0, tx.n0));
    const double se_eps = 3.0 * est.conditional_variance *
                          std::sqrt(2.0 / (2.0 * double(1 << 20))) /
                          (0.5 * sec.bob_det.efficiency * t_true);
    EXPECT_NEAR(est.epsilon_hat, eps_true + eps_psp_true, se_eps);
    EXPECT_NEAR(est.t_hat / t_true, 1.0, 0.02);
}

TEST(EstimateChannel, UntrustedConventionShiftsElectronicNoise) {
    auto tx = table1_tx(4971.572);
    auto sec = table1_security();
    const double t_true = 0.5;
    auto [alice, bob] = direct_frames(tx, sec, t_true, 0.0, 1 << 19, 133);
    auto trusted = estimate_channel_params(alice, bob, tx, sec);
    sec.detector_trusted = false;
    auto untrusted = estimate_channel_params(alice, bob, tx, sec);
    const double want_shift = sec.bob_det.electronic_noise /
                              (0.5 * sec.bob_det.efficiency * trusted.t_hat_raw);
    EXPECT_NEAR(untrusted.epsilon_hat_raw - trusted.epsilon_hat_raw, want_shift,
                0.02 * want_shift);
}

TEST(EstimateChannel, DegenerateInputs) {
    auto tx = table1_tx(0.0);
    tx.eta1 = 0.0;
    tx.eta3 = 0.0;  // alpha = 0: no usable modulation
    auto sec = table1_security();
    std::vector<QuadraturePair> alice(20000, {0.1, 0.1});
    std::vector<QuadraturePair> bob(20000, {0.1, 0.1});
    EXPECT_THROW(estimate_channel_params(alice, bob, tx, sec),
                 EstimationDegenerateError);
    auto tx2 = table1_tx(100.0);
    std::vector<QuadraturePair> small(100);
    EXPECT_THROW(estimate_channel_params(small, small, tx2, sec),
                 EstimationDegenerateError);
}

TEST(NoiseBudget, SumIdentityAndClamping) {
    std::map<AblationRun, ChannelEstimate> runs;
    ChannelEstimate base, freq, phase, full;
    base.epsilon_hat_raw = 0.0015;
    freq.epsilon_hat_raw = 0.0035;
    phase.epsilon_hat_raw = 0.0013;  // slightly below baseline -> clamped
    full.epsilon_hat_raw = 0.041;
    runs[AblationRun::kBaseline] = base;
    runs[AblationRun::kWithFreq] = freq;
    runs[AblationRun::kWithPhase] = phase;
    runs[AblationRun::kFull] = full;
    auto nb = assemble_noise_budget(runs, 0.0014, 0.003);
    EXPECT_DOUBLE_EQ(nb.eps_psp, 0.0014);
    EXPECT_DOUBLE_EQ(nb.eps_fad, 0.003);
    EXPECT_NEAR(nb.eps_freq, 0.002, 1e-12);
    EXPECT_DOUBLE_EQ(nb.eps_phase, 0.0);     // clamped
    EXPECT_LT(nb.eps_phase_raw, 0.0);        // raw retained
    // identity on the raw attributions
    EXPECT_NEAR(nb.eps_psp + nb.eps_freq_raw + nb.eps_phase_raw + nb.eps_fad +
                    nb.eps_chan_raw,
                full.epsilon_hat_raw, 1e-15);
    EXPECT_GE(nb.eps_chan, 0.0);
}

TEST(NoiseBudget, MissingBaseline) {
    std::map<AblationRun, ChannelEstimate> runs;
    runs[AblationRun::kFull] = ChannelEstimate{};
    EXPECT_THROW(assemble_noise_budget(runs, 0.0, 0.0),
                 EstimationDegenerateError);
}

TEST(Optimizer, SinglePointGrid) {
    auto tx = table1_tx(100.0);
    std::vector<double> e0{0.0299}, e1{0.01};
    auto opt = optimize_source_params(e0, e1, tx, 2.973, 0.01, 0.0,
                                      table1_security());
    EXPECT_DOUBLE_EQ(opt.eta0, 0.0299);
    EXPECT_DOUBLE_EQ(opt.eta1, 0.01);
}

TEST(Optimizer, PrefersSmallTapAtTable1Point) {
    auto tx = table1_tx(100.0);
    // direct evaluation oracle: eps_psp(0.01) < eps_psp(0.5)
    TransmitterParams a = tx, b = tx;
    a.eta1 = 0.01;
    b.eta1 = 0.5;
    EXPECT_LT(epsilon_psp(a, 2.973), epsilon_psp(b, 2.973));
    std::vector<double> e0{0.0299};
    std::vector<double> e1{0.01, 0.5};
    auto opt = optimize_source_params(e0, e1, tx, 2.973, std::pow(10.0, -2.34),
                                      0.03, table1_security());
    EXPECT_DOUBLE_EQ(opt.eta1, 0.01);
}

TEST(Optimizer, OptimumDominatesGrid) {
    auto tx = table1_tx(100.0);
    std::vector<double> e0{0.01, 0.0299, 0.1};
    std::vector<double> e1{0.005, 0.01, 0.1, 0.3};
    const double t = std::pow(10.0, -2.0);
    auto sec = table1_security();
    auto opt = optimize_source_params(e0, e1, tx, 2.973, t, 0.02, sec);
    for (double x0 : e0) {
        for (double x1 : e1) {
            TransmitterParams p = tx;
            p.eta0 = x0;
            p.eta1 = x1;
            const double eps = epsilon_psp(p, 2.973) + 0.02;
            const double skr = secret_key_rate(
                mutual_information(2.973, t, eps, sec),
                holevo_bound(2.973, t, eps, sec), sec);
            ASSERT_GE(opt.skr_bps + 1e-9, skr);
        }
    }
    std::vector<double> empty;
    EXPECT_THROW(
        optimize_source_params(empty, e1, tx, 2.973, t, 0.0, sec),
        EmptyRequestError);
}

}  // namespace
