#include "pspsim/transmitter.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "pspsim/rng.hpp"
#include "test_util.hpp"

namespace {

using namespace pspsim;
using testutil::variance;
using testutil::variance_stderr;

TransmitterParams table1(double n0) {
    TransmitterParams p;
    p.eta0 = 0.0299;
    p.eta1 = 0.01;
    p.eta3 = 0.01;
    p.alice_det = {0.56, 0.34};
    p.n0 = n0;
    return p;
}

// Monte Carlo of the raw residual <(x1 - alpha x2)^2> with the empirical
// least-squares alpha; the oracle for the closed-form checks.
struct McResidual {
    double alpha = 0.0;
    double residual = 0.0;
    double stderr_residual = 0.0;
};

McResidual mc_residual(const TransmitterParams& p, std::size_t n,
                       std::uint64_t seed) {
    RngStream rng(seed);
    auto out = alice_station(p, n, rng);
    double s12 = 0.0, s22 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        s12 += out.channel_bound[i].x * out.alice_measured[i].x;
        s22 += out.alice_measured[i].x * out.alice_measured[i].x;
    }
    McResidual r;
    r.alpha = s12 / s22;
    double acc = 0.0, acc2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = out.channel_bound[i].x - r.alpha * out.alice_measured[i].x;
        acc += d * d;
        acc2 += d * d * d * d;
    }
    r.residual = acc / static_cast<double>(n);
    const double var_of_sq =
        acc2 / static_cast<double>(n) - r.residual * r.residual;
    r.stderr_residual = std::sqrt(var_of_sq / static_cast<double>(n));
    return r;
}

TEST(AliceStation, DegenerateSplitKeepsSourceInChannelArm) {
    TransmitterParams p;
    p.eta0 = 1.0;
    p.eta1 = 1.0;
    p.eta3 = 0.0;
    p.alice_det = {1.0, 0.0};
    p.n0 = 4.0;
    RngStream rng(21);
    auto out = alice_station(p, 200000, rng);
    // x1 = x_in exactly: thermal variance, and x2 carries no x_in term
    const double v1 = variance(testutil::xs(out.channel_bound));
    EXPECT_NEAR(v1, 9.0, 3.0 * variance_stderr(9.0, 200000));
    const double rho = testutil::correlation(testutil::xs(out.channel_bound),
                                             testutil::xs(out.alice_measured));
    EXPECT_NEAR(rho, 0.0, 4.0 / std::sqrt(200000.0));
}

TEST(AliceStation, ChannelVarianceMatchesMomentOracle) {
    // Table 1 with n0 = V_A/eta0, V_A = 2.973. Variance propagation oracle:
    // Var(x1) = 2 V_A eta1 + eta0 eta3 + 1.
    const double v_a = 2.973;
    auto p = table1(v_a / 0.0299);
    const auto m = second_moments(p);
    const double oracle = 2.0 * v_a * p.eta1 + p.eta0 * p.eta3 + 1.0;
    EXPECT_NEAR(m.var_channel, oracle, 1e-9);
    RngStream rng(22);
    const std::size_t n = 1000000;
    auto out = alice_station(p, n, rng);
    const double v1 = variance(testutil::xs(out.channel_bound));
    EXPECT_NEAR(v1, oracle, 3.0 * variance_stderr(oracle, n));
    const double v2 = variance(testutil::ps(out.alice_measured));
    EXPECT_NEAR(v2, m.var_alice, 3.0 * variance_stderr(m.var_alice, n));
}

TEST(AliceStation, EmpiricalSlopeMatchesAlpha) {
    auto p = table1(2.973 / 0.0299);
    const auto r = mc_residual(p, 1000000, 23);
    const double alpha = optimal_estimator_alpha(p);
    // slope standard error ~ sqrt(resid / (N var(x2)))
    const auto m = second_moments(p);
    const double se =
        std::sqrt((m.var_channel - m.cov * m.cov / m.var_alice) /
                  (1000000.0 * m.var_alice));
    EXPECT_NEAR(r.alpha, alpha, 3.0 * se);
}

TEST(AliceStation, PilotAmplitudeBookkeeping) {
    auto p = table1(10.0);
    p.beacon_amplitude = 1000.0;
    RngStream rng(24);
    auto out = alice_station(p, 10, rng);
    EXPECT_NEAR(out.pilot_amplitude_sent, std::sqrt(0.0299) * 1000.0, 1e-12);
}

TEST(AliceStation, XAndPIdenticallyDistributed) {
    auto p = table1(2.973 / 0.0299);
    RngStream rng(25);
    const std::size_t n = 500000;
    auto out = alice_station(p, n, rng);
    const double vx = variance(testutil::xs(out.alice_measured));
    const double vp = variance(testutil::ps(out.alice_measured));
    EXPECT_NEAR(vx, vp, 6.0 * variance_stderr(vx, n));
    // x and p of the same mode are independent
    const double rho = testutil::correlation(testutil::xs(out.channel_bound),
                                             testutil::ps(out.channel_bound));
    EXPECT_NEAR(rho, 0.0, 4.0 / std::sqrt(static_cast<double>(n)));
}

TEST(AliceStation, Errors) {
    auto p = table1(1.0);
    RngStream rng(26);
    EXPECT_THROW(alice_station(p, 0, rng), EmptyRequestError);
    p.eta1 = 1.5;
    EXPECT_THROW(alice_station(p, 10, rng), DomainError);
}

TEST(Alpha, NoiseDominatedLimitVanishes) {
    auto p = table1(10.0);
    p.alice_det.electronic_noise = 1e12;
    EXPECT_NEAR(optimal_estimator_alpha(p), 0.0, 1e-9);
}

TEST(Alpha, NoTapMeansZero) {
    auto p = table1(10.0);
    p.eta1 = 0.0;
    p.eta3 = 0.0;
    EXPECT_DOUBLE_EQ(optimal_estimator_alpha(p), 0.0);
}

TEST(EpsilonPsp, VanishesWithoutSplitters) {
    auto p = table1(10.0);
    p.eta1 = 0.0;
    p.eta3 = 0.0;
    EXPECT_DOUBLE_EQ(epsilon_psp(p, 2.973), 0.0);
}

TEST(EpsilonPsp, ReferencePointIsAboutFourteenTenThousandths) {
    auto p = table1(2.973 / 0.0299);
    const double eps = epsilon_psp(p, 2.973);
    EXPECT_GT(eps, 5e-4);
    EXPECT_LT(eps, 5e-3);
    EXPECT_NEAR(eps, 0.0014, 2e-4);
}

TEST(EpsilonPsp, ClosedFormEqualsMonteCarloResidual) {
    // epsilon_psp == <(x1 - alpha x2)^2> - 1 within MC tolerance
    struct Draw {
        double n0, eta0, eta1, eta3, eta, nu;
    };
    const Draw draws[] = {
        {99.431, 0.0299, 0.01, 0.01, 0.56, 0.34},
        {40.0, 0.25, 0.1, 0.02, 0.7, 0.1},
        {5.0, 0.8, 0.45, 0.3, 0.9, 0.8},
    };
    std::uint64_t seed = 31;
    for (const auto& d : draws) {
        TransmitterParams p;
        p.eta0 = d.eta0;
        p.eta1 = d.eta1;
        p.eta3 = d.eta3;
        p.alice_det = {d.eta, d.nu};
        p.n0 = d.n0;
        const double closed = epsilon_psp(p, equivalent_modulation_variance(
                                                 p.eta0, p.n0));
        const auto r = mc_residual(p, 500000, seed++);
        EXPECT_NEAR(closed, r.residual - 1.0, 3.0 * r.stderr_residual)
            << "draw with n0=" << d.n0;
    }
}

TEST(EpsilonPsp, MonotoneInEta1NearZero) {
    auto p = table1(2.973 / 0.0299);
    double prev = -1.0;
    for (double eta1 : {0.0, 0.005, 0.01, 0.02, 0.05}) {
        p.eta1 = eta1;
        const double eps = epsilon_psp(p, 2.973);
        EXPECT_GE(eps, prev);
        prev = eps;
    }
}

TEST(EpsilonPsp, LeastSquaresAlphaIsOptimal) {
    // residual at alpha +- delta is strictly larger than at alpha
    auto p = table1(2.973 / 0.0299);
    const auto m = second_moments(p);
    const double alpha = optimal_estimator_alpha(p);
    auto resid_at = [&](double a) {
        return m.var_channel - 2.0 * a * m.cov + a * a * m.var_alice;
    };
    EXPECT_LT(resid_at(alpha), resid_at(alpha + 0.01));
    EXPECT_LT(resid_at(alpha), resid_at(alpha - 0.01));
    EXPECT_NEAR(alpha, m.cov / m.var_alice, 1e-12);
}

TEST(ModulationVariance, Arithmetic) {
    EXPECT_DOUBLE_EQ(equivalent_modulation_variance(1.0, 0.0), 0.0);
    EXPECT_DOUBLE_EQ(equivalent_modulation_variance(0.0, 42.0), 0.0);
    EXPECT_NEAR(equivalent_modulation_variance(0.0299, 2.973 / 0.0299), 2.973,
                1e-12);
    EXPECT_THROW(equivalent_modulation_variance(1.2, 1.0), DomainError);
    EXPECT_THROW(equivalent_modulation_variance(0.5, -1.0), DomainError);
}

TEST(Moments, PredictedChannelViewIsConsistent) {
    // v_a + eps_psp + 1 must reproduce Var(x1) exactly
    auto p = table1(4971.572);
    const auto m = second_moments(p);
    const double v_a_pred = m.cov * m.cov / m.var_alice;
    const double eps = epsilon_psp(p, equivalent_modulation_variance(p.eta0, p.n0));
    EXPECT_NEAR(m.var_channel, v_a_pred + eps + 1.0, 1e-9);
    EXPECT_NEAR(v_a_pred, 2.973, 2e-3);
}

}  // namespace
