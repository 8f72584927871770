#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

#include <gtest/gtest.h>

#include "risfl/core/stats.hpp"
#include "risfl/phy/phy.hpp"

using namespace risfl;

namespace {

struct MseCase {
    PowerAllocation alloc;
    ComplexVec estimated;
    std::vector<double> variances;
    double sic_residual = 0.0;
    double noise = 0.0;
    std::size_t num_airfl = 0;
};

MseCase random_case(RngStream& rng, std::size_t airfl, std::size_t noma) {
    MseCase c;
    c.num_airfl = airfl;
    const std::size_t users = airfl + noma;
    c.alloc.eta = rng.uniform(0.2, 2.0);
    for (std::size_t i = 0; i < users; ++i) {
        c.estimated.push_back(rng.cscg(1.0));
        c.variances.push_back(rng.uniform(0.0, 0.2));
        // AirFL users near inversion so misalignment does not swamp the other terms.
        const double inv = c.alloc.eta / std::norm(c.estimated.back());
        c.alloc.power.push_back(i < airfl ? inv * rng.uniform(0.5, 1.5) : rng.uniform(0.0, 1.0));
    }
    c.sic_residual = rng.uniform(0.0, 0.3);
    c.noise = rng.uniform(0.01, 0.5);
    return c;
}

// SINR with every other user interfering at full power.
double no_sic_sinr(const PowerAllocation& alloc, const std::vector<double>& gains, std::size_t user, double noise) {
    double interference = 0.0;
    for (std::size_t i = 0; i < gains.size(); ++i)
        if (i != user) interference += alloc.power[i] * gains[i];
    return alloc.power[user] * gains[user] / (interference + noise);
}

}  // namespace

TEST(SicOrder, Examples) {
    const std::vector<double> gains{4, 1, 9};
    EXPECT_EQ(sic_order(gains), (std::vector<std::size_t>{1, 0, 2}));
    const std::vector<double> equal{2, 2, 2, 2};
    EXPECT_EQ(sic_order(equal), (std::vector<std::size_t>{0, 1, 2, 3}));
}

TEST(SicOrder, AgreesWithReferenceSort) {
    auto rng = seeded_rng(1);
    for (int t = 0; t < 200; ++t) {
        std::vector<double> gains(7);
        // Coarse values force ties.
        for (auto& g : gains) g = static_cast<double>(rng.uniform_index(4));
        std::vector<std::pair<double, std::size_t>> ref;
        for (std::size_t i = 0; i < gains.size(); ++i) ref.emplace_back(gains[i], i);
        std::sort(ref.begin(), ref.end());
        const auto order = sic_order(gains);
        for (std::size_t i = 0; i < gains.size(); ++i) EXPECT_EQ(order[i], ref[i].second);
    }
}

TEST(Sinr, TwoUserExample) {
    PowerAllocation alloc{{1.0, 1.0}, 1.0};
    const std::vector<double> gains{1.0, 4.0};
    const auto order = sic_order(gains);
    const auto g = noma_sinrs(alloc, gains, order, 0, 0.1, 1.0);
    EXPECT_NEAR(g[1], 2.0, 1e-12);
    EXPECT_NEAR(g[0], 1.0 / 1.4, 1e-12);
    EXPECT_NEAR(sinr_noma(alloc, gains, order, 1, 0, 0.1, 1.0), 2.0, 1e-12);
    EXPECT_NEAR(sinr_noma(alloc, gains, order, 0, 0, 0.1, 1.0), 1.0 / 1.4, 1e-12);
}

TEST(Sinr, SingleUserPerfectSic) {
    PowerAllocation alloc{{0.3}, 1.0};
    const std::vector<double> gains{2.5};
    const std::vector<std::size_t> order{0};
    EXPECT_NEAR(noma_sinrs(alloc, gains, order, 0, 0.0, 0.5)[0], 0.3 * 2.5 / 0.5, 1e-12);
}

TEST(Sinr, FullResidualEqualsNoSic) {
    auto rng = seeded_rng(2);
    for (int t = 0; t < 50; ++t) {
        const std::size_t airfl = 3, noma = 4;
        PowerAllocation alloc;
        std::vector<double> gains;
        for (std::size_t i = 0; i < airfl + noma; ++i) {
            alloc.power.push_back(rng.uniform());
            gains.push_back(rng.uniform(0.1, 3.0));
        }
        const std::vector<double> noma_gains(gains.begin() + airfl, gains.end());
        const auto order = sic_order(noma_gains);
        const auto g = noma_sinrs(alloc, gains, order, airfl, 1.0, 0.2);
        for (std::size_t n = 0; n < noma; ++n)
            EXPECT_NEAR(g[n], no_sic_sinr(alloc, gains, airfl + n, 0.2), 1e-12 * g[n]);
    }
}

TEST(Sinr, NonPositiveNoiseRejected) {
    PowerAllocation alloc{{1.0}, 1.0};
    const std::vector<double> gains{1.0};
    const std::vector<std::size_t> order{0};
    EXPECT_THROW(noma_sinrs(alloc, gains, order, 0, 0.1, 0.0), std::invalid_argument);
    EXPECT_THROW(noma_sinrs(alloc, gains, order, 0, 0.1, -1.0), std::invalid_argument);
}

TEST(Sinr, NonIncreasingInResidual) {
    auto rng = seeded_rng(3);
    PowerAllocation alloc;
    std::vector<double> gains;
    for (int i = 0; i < 6; ++i) {
        alloc.power.push_back(rng.uniform());
        gains.push_back(rng.uniform(0.1, 3.0));
    }
    const std::vector<double> noma_gains(gains.begin() + 2, gains.end());
    const auto order = sic_order(noma_gains);
    std::vector<double> prev;
    double prev_total = std::numeric_limits<double>::infinity();
    for (double eb : {0.0, 0.04, 0.2, 1.0}) {
        const auto g = noma_sinrs(alloc, gains, order, 2, eb, 0.1);
        for (std::size_t n = 0; n < prev.size(); ++n) EXPECT_LE(g[n], prev[n]);
        prev = g;
        const double total = rates(alloc, gains, order, 2, eb, 0.1, 1e6).total;
        EXPECT_LE(total, prev_total);
        prev_total = total;
    }
}

TEST(Rates, Examples) {
    PowerAllocation zero{{0.0}, 1.0};
    const std::vector<double> gains{1.0};
    const std::vector<std::size_t> order{0};
    EXPECT_EQ(rates(zero, gains, order, 0, 0.0, 1.0, 1e6).per_user[0], 0.0);
    PowerAllocation three{{3.0}, 1.0};
    const auto r = rates(three, gains, order, 0, 0.0, 1.0, 1e6);
    EXPECT_NEAR(r.per_user[0], 2e6, 1e-6);
    EXPECT_NEAR(r.total, 2e6, 1e-6);
}

TEST(Rates, PositiveWhenPowerAndGainPositive) {
    auto rng = seeded_rng(4);
    PowerAllocation alloc;
    std::vector<double> gains;
    for (int i = 0; i < 8; ++i) {
        alloc.power.push_back(rng.uniform(1e-6, 1.0));
        gains.push_back(rng.uniform(1e-6, 1.0));
    }
    const std::vector<double> noma_gains(gains.begin() + 4, gains.end());
    for (double r : rates(alloc, gains, sic_order(noma_gains), 4, 0.5, 1.0, 1e6).per_user) EXPECT_GT(r, 0.0);
}

TEST(ReceivedSignal, SingleUserNoiseless) {
    auto rng = seeded_rng(5);
    const ComplexVec symbols{Complex(0.6, -0.8)};
    const ComplexVec channels{Complex(1.5, 0.5)};
    PowerAllocation alloc{{0.25}, 1.0};
    const Complex y = received_signal(rng, symbols, channels, alloc, 1, 0.0, 0.0, false);
    EXPECT_NEAR(std::abs(y - channels[0] * 0.5 * symbols[0]), 0.0, 1e-15);
}

TEST(ReceivedSignal, PerfectSicRemovesNoma) {
    auto rng = seeded_rng(6);
    const ComplexVec symbols{Complex(1.0, 0.0), Complex(0.3, 0.7), Complex(-1.0, 0.2)};
    const ComplexVec channels{Complex(1.0, 0.0), Complex(5.0, -3.0), Complex(2.0, 2.0)};
    PowerAllocation alloc{{1.0, 0.8, 0.6}, 1.0};
    EXPECT_EQ(received_signal(rng, symbols, channels, alloc, 1, 0.0, 0.0, true), Complex(1.0, 0.0));
}

TEST(ReceivedSignal, SecondMomentPerMode) {
    const ComplexVec channels{Complex(1.0, 0.5), Complex(-0.3, 0.9), Complex(0.4, -1.1)};
    PowerAllocation alloc{{0.7, 0.5, 0.9}, 1.0};
    const double eb = 0.2, noise = 0.3;
    for (bool residual : {false, true}) {
        double expected = noise;
        for (std::size_t i = 0; i < 3; ++i)
            expected += (i < 1 || !residual ? 1.0 : eb) * alloc.power[i] * std::norm(channels[i]);
        auto rng = seeded_rng(7);
        RunningStats power;
        for (int t = 0; t < 100000; ++t) {
            const ComplexVec symbols{rng.cscg(1.0), rng.cscg(1.0), rng.cscg(1.0)};
            power.add(std::norm(received_signal(rng, symbols, channels, alloc, 1, eb, noise, residual)));
        }
        const auto r = power.result();
        EXPECT_LT(std::abs(r.mean - expected), 3.0 * r.std_error()) << "residual=" << residual;
    }
}

TEST(AnalyticMse, NoiseOnlyExample) {
    PowerAllocation alloc{{1.0, 1.0}, 1.0};
    const ComplexVec est{Complex(1.0, 0.0), Complex(1.0, 0.0)};
    const std::vector<double> var{0.0, 0.0};
    const auto m = analytic_mse(alloc, est, var, 0.0, 0.04, 2, 1);
    EXPECT_NEAR(m.total, 0.01, 1e-15);
    EXPECT_EQ(m.misalignment, 0.0);
    EXPECT_NEAR(m.noise_error, 0.01, 1e-15);
}

TEST(AnalyticMse, ZeroPowerIsPureMisalignment) {
    const std::size_t k = 5;
    PowerAllocation alloc{std::vector<double>(k + 2, 0.0), 0.3};
    ComplexVec est(k + 2, Complex(0.4, 0.1));
    const std::vector<double> var(k + 2, 0.01);
    const auto m = analytic_mse(alloc, est, var, 0.5, 0.0, k, 1);
    EXPECT_NEAR(m.total, 1.0 / k, 1e-15);
}

TEST(AnalyticMse, TermsAreNonNegativeAndSum) {
    auto rng = seeded_rng(8);
    for (int t = 0; t < 100; ++t) {
        const auto c = random_case(rng, 4, 3);
        const auto m = analytic_mse(c.alloc, c.estimated, c.variances, c.sic_residual, c.noise, c.num_airfl, 10);
        for (double v : {m.misalignment, m.sic_error, m.csi_error, m.sic_csi_error, m.noise_error}) EXPECT_GE(v, 0.0);
        EXPECT_EQ(m.total, m.misalignment + m.sic_error + m.csi_error + m.sic_csi_error + m.noise_error);
    }
}

TEST(AnalyticMse, NoiseTermCarriesGradientDimension) {
    PowerAllocation alloc{{1.0, 1.0}, 1.0};
    const ComplexVec est{Complex(1.0, 0.0), Complex(1.0, 0.0)};
    const std::vector<double> var{0.0, 0.0};
    EXPECT_NEAR(analytic_mse(alloc, est, var, 0.0, 0.04, 2, 3).noise_error, 0.03, 1e-15);
}

TEST(AnalyticMse, NonPositiveEtaRejected) {
    PowerAllocation alloc{{1.0}, 0.0};
    const ComplexVec est{Complex(1.0, 0.0)};
    const std::vector<double> var{0.0};
    EXPECT_THROW(analytic_mse(alloc, est, var, 0.0, 0.1, 1, 1), std::invalid_argument);
    auto rng = seeded_rng(9);
    EXPECT_THROW(monte_carlo_mse(rng, alloc, est, var, 0.0, 0.1, 1, 1000), std::invalid_argument);
}

TEST(AnalyticMse, PerfectSicZeroesSicTerms) {
    auto rng = seeded_rng(10);
    for (int t = 0; t < 20; ++t) {
        const auto c = random_case(rng, 3, 3);
        const auto m = analytic_mse(c.alloc, c.estimated, c.variances, 0.0, c.noise, c.num_airfl, 1);
        EXPECT_EQ(m.sic_error, 0.0);
        EXPECT_EQ(m.sic_csi_error, 0.0);
    }
}

TEST(AnalyticMse, MonotoneInResidualAndCsiVariance) {
    auto rng = seeded_rng(11);
    for (int t = 0; t < 50; ++t) {
        auto c = random_case(rng, 3, 2);
        double prev = -1.0;
        for (double eb : {0.0, 0.04, 0.2, 1.0}) {
            const double total = analytic_mse(c.alloc, c.estimated, c.variances, eb, c.noise, 3, 1).total;
            EXPECT_GE(total, prev);
            prev = total;
        }
        for (std::size_t i = 0; i < c.variances.size(); ++i) {
            const double before = analytic_mse(c.alloc, c.estimated, c.variances, 0.1, c.noise, 3, 1).total;
            c.variances[i] += 0.05;
            EXPECT_GE(analytic_mse(c.alloc, c.estimated, c.variances, 0.1, c.noise, 3, 1).total, before);
        }
    }
}

TEST(AnalyticMse, InvariantToAirflRelabelling) {
    auto rng = seeded_rng(12);
    auto c = random_case(rng, 5, 2);
    const double total = analytic_mse(c.alloc, c.estimated, c.variances, 0.1, c.noise, 5, 2).total;
    std::vector<std::size_t> perm{3, 0, 4, 1, 2, 5, 6};
    MseCase p = c;
    for (std::size_t i = 0; i < perm.size(); ++i) {
        p.estimated[i] = c.estimated[perm[i]];
        p.variances[i] = c.variances[perm[i]];
        p.alloc.power[i] = c.alloc.power[perm[i]];
    }
    EXPECT_NEAR(analytic_mse(p.alloc, p.estimated, p.variances, 0.1, p.noise, 5, 2).total, total, 1e-14 * total);
}

TEST(AnalyticMse, JsonHasFiveNamedTerms) {
    MseBreakdown m{0.1, 0.2, 0.3, 0.4, 0.5, 1.5};
    const auto j = to_json(m);
    for (const char* key : {"misalignment", "sic_error", "csi_error", "sic_csi_error", "noise_error", "total"})
        EXPECT_TRUE(j.contains(key)) << key;
    EXPECT_DOUBLE_EQ(j.at("sic_csi_error").get<double>(), 0.4);
}

TEST(MonteCarloMse, PerfectInversionNoiselessIsZero) {
    auto rng = seeded_rng(13);
    const ComplexVec est{Complex(0.5, 0.0), Complex(2.0, 0.0), Complex(1.3, 0.0)};
    const double eta = 0.7;
    PowerAllocation alloc{{eta / 0.25, eta / 4.0, eta / (1.3 * 1.3)}, eta};
    const std::vector<double> var(3, 0.0);
    const auto mc = monte_carlo_mse(rng, alloc, est, var, 0.0, 0.0, 3, 1000);
    EXPECT_LT(mc.estimate, 1e-28);
}

TEST(MonteCarloMse, MatchesAnalyticOnRandomConfigurations) {
    auto rng = seeded_rng(14);
    for (int t = 0; t < 10; ++t) {
        const auto c = random_case(rng, 3, 2);
        const auto a = analytic_mse(c.alloc, c.estimated, c.variances, c.sic_residual, c.noise, c.num_airfl, 1);
        const auto mc = monte_carlo_mse(rng, c.alloc, c.estimated, c.variances, c.sic_residual, c.noise,
                                        c.num_airfl, 200000);
        EXPECT_LT(std::abs(a.total - mc.estimate), 3.0 * mc.std_error)
            << "config " << t << " analytic " << a.total << " mc " << mc.estimate;
    }
}

TEST(MonteCarloMse, StdErrorScalesAsInverseRootSamples) {
    auto rng = seeded_rng(15);
    const auto c = random_case(rng, 3, 2);
    const auto small = monte_carlo_mse(rng, c.alloc, c.estimated, c.variances, c.sic_residual, c.noise, 3, 10000);
    const auto large = monte_carlo_mse(rng, c.alloc, c.estimated, c.variances, c.sic_residual, c.noise, 3, 1000000);
    EXPECT_NEAR(small.std_error / large.std_error, 10.0, 2.0);
}

TEST(MonteCarloMse, TooFewSamplesRejected) {
    auto rng = seeded_rng(16);
    const auto c = random_case(rng, 2, 1);
    EXPECT_THROW(monte_carlo_mse(rng, c.alloc, c.estimated, c.variances, 0.1, 0.1, 2, 999), std::invalid_argument);
}
