#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "gerber_shiu/error.hpp"
#include "gerber_shiu/initial_value.hpp"
#include "gerber_shiu/montecarlo.hpp"
#include "gerber_shiu/quadrature.hpp"

using namespace gerber_shiu;

namespace {

std::vector<ClaimDistribution> standard_claims() {
    return {ClaimDistribution::exponential(1.0), ClaimDistribution::erlang(2, 2.0), ClaimDistribution::combination()};
}

RiskModel model_with(const ClaimDistribution& claim, double r, double alpha) {
    RiskModel m;
    m.claim = claim;
    m.r = r;
    m.alpha = alpha;
    return m;
}

// kappa by composite Simpson on [0, 120], the inner integral by 8-point panels.
double kappa_simpson(const RiskModel& m) {
    const double h = 0.005;
    const int n = 24000;
    const double mu = mean(m.claim);
    double inner = 0.0;
    double sum = 0.0;
    for (int i = 0; i <= n; ++i) {
        const double v = i * h;
        if (i > 0) {
            inner += integrate([&](double s) { return m.lambda * mu * equilibrium_laplace(m.claim, m.r * s); }, v - h, v, 8);
        }
        const double g = std::pow(v, m.alpha / m.r) * std::exp(-m.c * v + inner);
        const double w = (i == 0 || i == n) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
        sum += w * g;
    }
    return m.c * sum * h / 3.0;
}

}  // namespace

TEST(Kappa, SmallLambdaGammaLimit) {
    RiskModel m = model_with(ClaimDistribution::exponential(1.0), 0.01, 0.01);
    m.lambda = 1e-12;
    const double p = m.alpha / m.r;
    const double expected = m.c * std::tgamma(1.0 + p) / std::pow(m.c, 1.0 + p);
    EXPECT_NEAR(kappa(m), expected, 1e-10 * expected);
}

TEST(Kappa, IndependentQuadrature) {
    for (double alpha : {0.0, 0.01}) {
        const RiskModel m = model_with(ClaimDistribution::exponential(1.0), 0.01, alpha);
        const double k = kappa(m);
        EXPECT_GT(k, 0.0);
        EXPECT_NEAR(k, kappa_simpson(m), 1e-7 * k) << "alpha=" << alpha;
    }
}

TEST(Kappa, ToleranceStability) {
    for (const auto& d : standard_claims()) {
        const RiskModel m = model_with(d, 0.01, 0.01);
        const double a = kappa(m, 1e-12);
        const double b = kappa(m, 1e-10);
        EXPECT_NEAR(a, b, 1e-8 * a);
    }
}

TEST(Kappa, RequiresPositiveInterest) {
    const RiskModel m = model_with(ClaimDistribution::exponential(1.0), 0.0, 0.0);
    try {
        kappa(m);
        FAIL() << "expected an error";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::unsupported);
    }
}

TEST(Kappa, InnerTableIsNondecreasing) {
    const auto res = compute_initial_value(model_with(ClaimDistribution::combination(), 0.01, 0.0),
                                           PenaltyCase::ruin_probability());
    ASSERT_GT(res.inner_grid.v.size(), 2u);
    for (std::size_t i = 1; i < res.inner_grid.value.size(); ++i) {
        EXPECT_GE(res.inner_grid.value[i], res.inner_grid.value[i - 1]);
    }
}

TEST(PhiInfinityAtZero, ClassicalLimitAtSmallInterest) {
    for (const auto& d : standard_claims()) {
        const RiskModel m = model_with(d, 1e-4, 0.0);
        const double v = phi_infinity_at_zero(m, PenaltyCase::ruin_probability());
        const double classical = m.lambda * mean(d) / m.c;
        EXPECT_NEAR(v, classical, 1e-3 * classical);
        EXPECT_GT(v, 0.0);
        EXPECT_LT(v, 1.0);
    }
}

TEST(PhiInfinityAtZero, ZeroPenalty) {
    const RiskModel m = model_with(ClaimDistribution::exponential(1.0), 0.01, 0.0);
    EXPECT_EQ(phi_infinity_at_zero(m, PenaltyCase::make_custom([](double, double) { return 0.0; })), 0.0);
}

TEST(PhiInfinityAtZero, MonotoneInDiscount) {
    for (const auto& d : standard_claims()) {
        double prev = 2.0;
        for (double alpha : {0.0, 0.005, 0.01, 0.02}) {
            const double v = phi_infinity_at_zero(model_with(d, 0.01, alpha), PenaltyCase::laplace_ruin_time());
            EXPECT_LE(v, prev);
            EXPECT_GE(v, 0.0);
            EXPECT_LE(v, 1.0);
            prev = v;
        }
    }
}

TEST(PhiInfinityAtZero, MonteCarloAtDefaultSettings) {
    const RiskModel m = model_with(ClaimDistribution::exponential(1.0), 0.01, 0.01);
    const auto pc = PenaltyCase::laplace_ruin_time();
    SimConfig sc;
    sc.paths = 200000;
    sc.seed = 11;
    const auto est = estimate(m, pc, 0.0, sc);
    EXPECT_NEAR(phi_infinity_at_zero(m, pc), est.value, 3.0 * est.std_error);
}

TEST(ClassicalZeroValue, Examples) {
    const RiskModel e = model_with(ClaimDistribution::exponential(1.0), 0.0, 0.0);
    EXPECT_NEAR(classical_zero_value(e, PenaltyCase::ruin_probability()), 2.0 / 3.0, 1e-15);
    EXPECT_NEAR(classical_zero_value(e, PenaltyCase::deficit_at_ruin()), 2.0 / 3.0, 1e-15);
    const RiskModel erl = model_with(ClaimDistribution::erlang(2, 2.0), 0.0, 0.0);
    EXPECT_NEAR(classical_zero_value(erl, PenaltyCase::claim_causing_ruin()), 1.0, 1e-15);
    EXPECT_THROW(classical_zero_value(model_with(ClaimDistribution::exponential(1.0), 0.01, 0.0),
                                      PenaltyCase::ruin_probability()),
                 Error);
}

TEST(InitialValue, Dispatch) {
    EXPECT_NEAR(initial_value(model_with(ClaimDistribution::exponential(1.0), 0.0, 0.0), PenaltyCase::ruin_probability()),
                2.0 / 3.0, 1e-15);
    EXPECT_THROW(initial_value(model_with(ClaimDistribution::exponential(1.0), 0.0, 0.01), PenaltyCase::laplace_ruin_time()),
                 Error);
}
