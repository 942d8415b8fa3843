#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "gerber_shiu/error.hpp"
#include "gerber_shiu/quadrature.hpp"
#include "gerber_shiu/risk_model.hpp"

using namespace gerber_shiu;

namespace {

std::vector<ClaimDistribution> standard_claims() {
    return {ClaimDistribution::exponential(1.0), ClaimDistribution::erlang(2, 2.0), ClaimDistribution::combination()};
}

std::vector<PenaltyCase> named_cases() {
    return {PenaltyCase::ruin_probability(), PenaltyCase::laplace_ruin_time(), PenaltyCase::claim_causing_ruin(),
            PenaltyCase::deficit_at_ruin()};
}

RiskModel model_with(const ClaimDistribution& claim) {
    RiskModel m;
    m.claim = claim;
    return m;
}

}  // namespace

TEST(ClaimDistribution, DensityAtZero) {
    EXPECT_DOUBLE_EQ(density(ClaimDistribution::exponential(1.0), 0.0), 1.0);
    EXPECT_DOUBLE_EQ(density(ClaimDistribution::erlang(2, 2.0), 0.0), 0.0);
    EXPECT_NEAR(density(ClaimDistribution::combination(), 0.0), 0.0, 1e-15);
    EXPECT_THROW(density(ClaimDistribution::exponential(1.0), -1.0), Error);
}

TEST(ClaimDistribution, DensityMatchesClosedForm) {
    const auto comb = ClaimDistribution::combination();
    const auto erl = ClaimDistribution::erlang(2, 2.0);
    for (double x : {0.1, 0.5, 1.0, 2.5, 7.0}) {
        EXPECT_NEAR(density(comb, x), 3.0 * std::exp(-1.5 * x) - 3.0 * std::exp(-3.0 * x), 1e-15);
        EXPECT_NEAR(density(erl, x), 4.0 * x * std::exp(-2.0 * x), 1e-15);
    }
}

TEST(ClaimDistribution, Survival) {
    const auto e = ClaimDistribution::exponential(1.0);
    EXPECT_DOUBLE_EQ(survival(e, 0.0), 1.0);
    EXPECT_NEAR(survival(e, 1.0), 0.36787944117144233, 1e-15);
    for (const auto& d : standard_claims()) {
        EXPECT_NEAR(survival(d, 0.0), 1.0, 1e-15);
        EXPECT_LT(survival(d, 50.0 * mean(d)), 1e-10);
        double prev = 1.0;
        for (int i = 0; i <= 400; ++i) {
            const double s = survival(d, 0.05 * i);
            EXPECT_LE(s, prev + 1e-15);
            prev = s;
        }
    }
}

TEST(ClaimDistribution, Moments) {
    EXPECT_DOUBLE_EQ(mean(ClaimDistribution::exponential(1.0)), 1.0);
    EXPECT_DOUBLE_EQ(second_moment(ClaimDistribution::exponential(1.0)), 2.0);
    EXPECT_DOUBLE_EQ(mean(ClaimDistribution::erlang(2, 2.0)), 1.0);
    EXPECT_DOUBLE_EQ(second_moment(ClaimDistribution::erlang(2, 2.0)), 1.5);
    EXPECT_NEAR(mean(ClaimDistribution::combination()), 1.0, 1e-15);
}

TEST(ClaimDistribution, DensityIntegratesToOne) {
    for (const auto& d : standard_claims()) {
        const double mass = integrate_composite([&](double x) { return density(d, x); }, 0.0, 50.0 * mean(d), 50, 16);
        EXPECT_NEAR(mass, 1.0, 1e-8);
    }
}

TEST(ClaimDistribution, Validation) {
    EXPECT_THROW(ClaimDistribution({{0.5, 1, 1.0}}), Error);               // mass 0.5
    EXPECT_THROW(ClaimDistribution({{1.0, 0, 1.0}}), Error);               // shape 0
    EXPECT_THROW(ClaimDistribution({{1.0, 1, -1.0}}), Error);              // negative rate
    EXPECT_THROW(ClaimDistribution({{-1.0, 1, 1.5}, {2.0, 1, 3.0}}), Error);  // negative near 0
    EXPECT_NO_THROW(ClaimDistribution({{2.0, 1, 1.5}, {-1.0, 1, 3.0}}));
}

TEST(ClaimDistribution, Laplace) {
    EXPECT_DOUBLE_EQ(laplace(ClaimDistribution::exponential(1.0), 0.0), 1.0);
    EXPECT_DOUBLE_EQ(laplace(ClaimDistribution::exponential(1.0), 1.0), 0.5);
    EXPECT_DOUBLE_EQ(laplace(ClaimDistribution::erlang(2, 2.0), 2.0), 0.25);
}

TEST(ClaimDistribution, EquilibriumLaplace) {
    for (const auto& d : standard_claims()) {
        EXPECT_DOUBLE_EQ(equilibrium_laplace(d, 0.0), 1.0);
        double prev = 1.0;
        for (int i = 0; i <= 200; ++i) {
            const double v = equilibrium_laplace(d, 0.05 * i);
            EXPECT_GT(v, 0.0);
            EXPECT_LE(v, prev + 1e-15);
            prev = v;
        }
        // against (1 - f~(s)) / (mu s) and a direct integral of the tail
        for (double s : {0.3, 1.0, 4.0}) {
            EXPECT_NEAR(equilibrium_laplace(d, s), (1.0 - laplace(d, s)) / (mean(d) * s), 1e-14);
            const double direct = integrate_composite([&](double x) { return std::exp(-s * x) * survival(d, x); }, 0.0,
                                                      50.0 * mean(d), 50, 16) / mean(d);
            EXPECT_NEAR(equilibrium_laplace(d, s), direct, 1e-10);
        }
    }
    EXPECT_NEAR(equilibrium_laplace(ClaimDistribution::exponential(1.0), 2.0), 1.0 / 3.0, 1e-15);
    EXPECT_NEAR(equilibrium_laplace(ClaimDistribution::erlang(2, 2.0), 2.0), 0.375, 1e-15);
}

TEST(Penalty, WeightsOfNamedCases) {
    EXPECT_EQ(PenaltyCase::ruin_probability().weight(2.0, 3.0), 1.0);
    EXPECT_EQ(PenaltyCase::laplace_ruin_time().weight(2.0, 3.0), 1.0);
    EXPECT_EQ(PenaltyCase::claim_causing_ruin().weight(2.0, 3.0), 5.0);
    EXPECT_EQ(PenaltyCase::deficit_at_ruin().weight(2.0, 3.0), 3.0);
}

TEST(Penalty, AExamples) {
    const RiskModel m = model_with(ClaimDistribution::exponential(1.0));
    EXPECT_NEAR(penalty_A(m, PenaltyCase::ruin_probability(), 1.0), std::exp(-1.0), 1e-15);
    EXPECT_NEAR(penalty_A(m, PenaltyCase::deficit_at_ruin(), 0.0), 1.0, 1e-15);
    EXPECT_NEAR(penalty_A(m, PenaltyCase::claim_causing_ruin(), 0.0), 1.0, 1e-15);
    const double oracle = integrate_semi_infinite([](double y) { return y * std::exp(-y); }, 1e-13);
    EXPECT_NEAR(penalty_A(m, PenaltyCase::claim_causing_ruin(), 0.0), oracle, 1e-10);
}

TEST(Penalty, RuinProbabilityAIsSurvival) {
    for (const auto& d : standard_claims()) {
        const RiskModel m = model_with(d);
        for (int i = 0; i <= 100; ++i) {
            const double u = 0.13 * i;
            EXPECT_EQ(penalty_A(m, PenaltyCase::ruin_probability(), u), survival(d, u));
        }
    }
}

TEST(Penalty, AMatchesDefinitionByQuadrature) {
    for (const auto& d : standard_claims()) {
        const RiskModel m = model_with(d);
        for (const auto& pc : named_cases()) {
            for (double u : {0.0, 0.7, 3.0}) {
                const double numeric = integrate_composite(
                    [&](double y) { return pc.weight(u, y - u) * density(d, y); }, u, u + 50.0 * mean(d), 100, 16);
                EXPECT_NEAR(penalty_A(m, pc, u), numeric, 1e-10);
            }
        }
    }
}

TEST(Penalty, MuA) {
    EXPECT_NEAR(mu_A(model_with(ClaimDistribution::exponential(1.0)), PenaltyCase::ruin_probability()), 1.0, 1e-14);
    EXPECT_NEAR(mu_A(model_with(ClaimDistribution::exponential(1.0)), PenaltyCase::deficit_at_ruin()), 1.0, 1e-14);
    EXPECT_NEAR(mu_A(model_with(ClaimDistribution::erlang(2, 2.0)), PenaltyCase::claim_causing_ruin()), 1.5, 1e-14);
    for (const auto& d : standard_claims()) {
        const RiskModel m = model_with(d);
        for (const auto& pc : named_cases()) {
            const double numeric =
                integrate_composite([&](double u) { return penalty_A(m, pc, u); }, 0.0, 50.0 * mean(d), 100, 16);
            EXPECT_NEAR(mu_A(m, pc), numeric, 1e-8);
        }
    }
}

TEST(Penalty, A1Laplace) {
    const RiskModel e = model_with(ClaimDistribution::exponential(1.0));
    EXPECT_NEAR(a1_laplace(e, PenaltyCase::ruin_probability(), 1.0), 0.5, 1e-15);
    EXPECT_NEAR(a1_laplace(e, PenaltyCase::deficit_at_ruin(), 1.0), 0.5, 1e-15);
    for (const auto& d : standard_claims()) {
        const RiskModel m = model_with(d);
        for (const auto& pc : named_cases()) {
            EXPECT_NEAR(a1_laplace(m, pc, 0.0), 1.0, 1e-14);
            const double s = 0.4;
            const double numeric = integrate_composite([&](double u) { return std::exp(-s * u) * penalty_A(m, pc, u); }, 0.0,
                                                       50.0 * mean(d), 100, 16) / mu_A(m, pc);
            EXPECT_NEAR(a1_laplace(m, pc, s), numeric, 1e-10);
        }
    }
}

TEST(Penalty, CustomPenaltyMatchesNamedCase) {
    const RiskModel m = model_with(ClaimDistribution::erlang(2, 2.0));
    const auto custom = PenaltyCase::make_custom([](double, double y) { return y; });
    for (double u : {0.0, 1.0, 4.0}) {
        EXPECT_NEAR(penalty_A(m, custom, u), penalty_A(m, PenaltyCase::deficit_at_ruin(), u), 1e-9);
    }
    EXPECT_NEAR(mu_A(m, custom), mu_A(m, PenaltyCase::deficit_at_ruin()), 1e-8);
    const auto zero = PenaltyCase::make_custom([](double, double) { return 0.0; });
    EXPECT_EQ(mu_A(m, zero), 0.0);
}

TEST(RiskModel, ValidationAndDiagnostics) {
    RiskModel m;
    EXPECT_NO_THROW(validate(m));
    m.c = 0.0;
    EXPECT_THROW(validate(m), Error);
    m = RiskModel{};
    m.r = -0.1;
    EXPECT_THROW(validate(m), Error);
    m = RiskModel{};
    m.c = 0.9;
    m.alpha = 0.0;
    EXPECT_EQ(diagnostics(m, false).size(), 1u);
    EXPECT_TRUE(diagnostics(m, true).empty());
}

TEST(RiskModel, AdjustmentCoefficientExponential) {
    // exponential(beta): R = beta - lambda / c
    EXPECT_NEAR(adjustment_coefficient(ClaimDistribution::exponential(1.0), 1.5, 1.0), 1.0 / 3.0, 1e-13);
}
