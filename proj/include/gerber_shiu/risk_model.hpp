#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gerber_shiu/error.hpp"
#include "gerber_shiu/quadrature.hpp"

namespace gerber_shiu {

/// One Erlang component a * beta^k x^(k-1) e^(-beta x) / (k-1)!.
struct ErlangTerm {
    double weight = 1.0;
    int shape = 1;
    double rate = 1.0;
};

namespace detail {

/// Finite sum of coef * x^power * e^(-rate x). Every closed form in this
/// header is expressed in this family, which is closed under x-multiplication,
/// tail integration and Laplace transformation.
class ExpPolynomial {
public:
    struct Term {
        double coef;
        int power;
        double rate;
    };

    void add(double coef, int power, double rate) {
        for (auto& t : terms_) {
            if (t.power == power && t.rate == rate) {
                t.coef += coef;
                return;
            }
        }
        terms_.push_back({coef, power, rate});
    }

    double operator()(double x) const {
        double sum = 0.0;
        for (const auto& t : terms_) sum += t.coef * std::pow(x, t.power) * std::exp(-t.rate * x);
        return sum;
    }

    /// x * p(x)
    ExpPolynomial times_x() const {
        ExpPolynomial out;
        for (const auto& t : terms_) out.add(t.coef, t.power + 1, t.rate);
        return out;
    }

    /// x -> integral of p over [x, inf)
    ExpPolynomial tail_integral() const {
        // int_x^inf t^m e^(-b t) dt = e^(-b x) sum_{l=0}^m m!/l! x^l / b^(m-l+1)
        ExpPolynomial out;
        for (const auto& t : terms_) {
            double ratio = 1.0;  // m!/l!
            for (int l = t.power; l >= 0; --l) {
                out.add(t.coef * ratio / std::pow(t.rate, t.power - l + 1), l, t.rate);
                ratio *= l;
            }
        }
        return out;
    }

    /// integral of e^(-s x) p(x) over [0, inf)
    double laplace(double s) const {
        double sum = 0.0;
        for (const auto& t : terms_) {
            sum += t.coef * std::tgamma(t.power + 1.0) / std::pow(t.rate + s, t.power + 1);
        }
        return sum;
    }

    double total_integral() const { return laplace(0.0); }

    std::span<const Term> terms() const { return terms_; }

private:
    std::vector<Term> terms_;
};

inline double factorial(int n) {
    double f = 1.0;
    for (int i = 2; i <= n; ++i) f *= i;
    return f;
}

}  // namespace detail

/// Claim-size law as a signed, unit-mass combination of Erlang densities.
/// Covers the exponential, Erlang(k) and combination-of-exponentials laws.
class ClaimDistribution {
public:
    ClaimDistribution() : ClaimDistribution(std::vector<ErlangTerm>{{1.0, 1, 1.0}}) {}

    explicit ClaimDistribution(std::vector<ErlangTerm> terms) : terms_(std::move(terms)) { validate(); }

    static ClaimDistribution exponential(double rate) { return ClaimDistribution({{1.0, 1, rate}}); }
    static ClaimDistribution erlang(int shape, double rate) { return ClaimDistribution({{1.0, shape, rate}}); }

    /// 3e^(-1.5x) - 3e^(-3x), mean 1.
    static ClaimDistribution combination() { return ClaimDistribution({{2.0, 1, 1.5}, {-1.0, 1, 3.0}}); }

    std::span<const ErlangTerm> terms() const { return terms_; }

    double min_rate() const {
        double m = terms_.front().rate;
        for (const auto& t : terms_) m = std::min(m, t.rate);
        return m;
    }

    /// Density as an exponential polynomial.
    detail::ExpPolynomial density_poly() const {
        detail::ExpPolynomial p;
        for (const auto& t : terms_) {
            p.add(t.weight * std::pow(t.rate, t.shape) / detail::factorial(t.shape - 1), t.shape - 1, t.rate);
        }
        return p;
    }

    detail::ExpPolynomial survival_poly() const {
        detail::ExpPolynomial p;
        for (const auto& t : terms_) {
            for (int i = 0; i < t.shape; ++i) {
                p.add(t.weight * std::pow(t.rate, i) / detail::factorial(i), i, t.rate);
            }
        }
        return p;
    }

private:
    void validate() const;

    std::vector<ErlangTerm> terms_;
};

inline double density(const ClaimDistribution& dist, double x) {
    if (!(x >= 0.0)) fail(ErrorKind::domain, "density: x must be nonnegative");
    double sum = 0.0;
    for (const auto& t : dist.terms()) {
        const double bx = t.rate * x;
        sum += t.weight * t.rate * std::pow(bx, t.shape - 1) / detail::factorial(t.shape - 1) * std::exp(-bx);
    }
    return sum;
}

inline double survival(const ClaimDistribution& dist, double x) {
    if (!(x >= 0.0)) fail(ErrorKind::domain, "survival: x must be nonnegative");
    double sum = 0.0;
    for (const auto& t : dist.terms()) {
        const double bx = t.rate * x;
        double partial = 0.0;
        double power = 1.0;
        for (int i = 0; i < t.shape; ++i) {
            partial += power;
            power *= bx / (i + 1);
        }
        sum += t.weight * std::exp(-bx) * partial;
    }
    return sum;
}

inline double cdf(const ClaimDistribution& dist, double x) { return 1.0 - survival(dist, x); }

inline double mean(const ClaimDistribution& dist) {
    double m = 0.0;
    for (const auto& t : dist.terms()) m += t.weight * t.shape / t.rate;
    return m;
}

inline double second_moment(const ClaimDistribution& dist) {
    double m = 0.0;
    for (const auto& t : dist.terms()) m += t.weight * t.shape * (t.shape + 1.0) / (t.rate * t.rate);
    return m;
}

inline double laplace(const ClaimDistribution& dist, double s) {
    if (!(s >= 0.0)) fail(ErrorKind::domain, "laplace: s must be nonnegative");
    double sum = 0.0;
    for (const auto& t : dist.terms()) sum += t.weight * std::pow(t.rate / (t.rate + s), t.shape);
    return sum;
}

/// Laplace-Stieltjes transform of the equilibrium law, (1 - f~(s)) / (mean s).
inline double equilibrium_laplace(const ClaimDistribution& dist, double s) {
    if (!(s >= 0.0)) fail(ErrorKind::domain, "equilibrium_laplace: s must be nonnegative");
    // (1 - q^k)/s = sum_{i<k} q^i / (beta + s) with q = beta/(beta + s); no cancellation at small s.
    double sum = 0.0;
    for (const auto& t : dist.terms()) {
        const double q = t.rate / (t.rate + s);
        double partial = 0.0;
        double qi = 1.0;
        for (int i = 0; i < t.shape; ++i) {
            partial += qi;
            qi *= q;
        }
        sum += t.weight * partial / (t.rate + s);
    }
    return sum / mean(dist);
}

inline void ClaimDistribution::validate() const {
    if (terms_.empty()) fail(ErrorKind::config, "claim distribution needs at least one term");
    double mass = 0.0;
    for (const auto& t : terms_) {
        if (t.shape < 1) fail(ErrorKind::config, "claim distribution: Erlang shape must be a positive integer");
        if (!(t.rate > 0.0) || !std::isfinite(t.rate)) fail(ErrorKind::config, "claim distribution: rates must be positive");
        if (!std::isfinite(t.weight)) fail(ErrorKind::config, "claim distribution: weights must be finite");
        mass += t.weight;
    }
    if (std::abs(mass - 1.0) > 1e-12) fail(ErrorKind::config, "claim distribution: coefficients must sum to 1");
    const double mu = mean(*this);
    const double m2 = second_moment(*this);
    if (!(mu > 0.0) || !std::isfinite(mu) || !(m2 > 0.0) || !std::isfinite(m2)) {
        fail(ErrorKind::config, "claim distribution: mean and second moment must be positive and finite");
    }
    constexpr int kGrid = 1024;
    double scale = 0.0;
    std::vector<double> values(kGrid);
    for (int i = 0; i < kGrid; ++i) {
        values[i] = density(*this, 20.0 * mu * i / (kGrid - 1));
        scale = std::max(scale, std::abs(values[i]));
    }
    for (int i = 0; i < kGrid; ++i) {
        if (values[i] < -1e-12 * scale) {
            fail(ErrorKind::config, "claim distribution: density is negative at x = " +
                                        std::to_string(20.0 * mu * i / (kGrid - 1)));
        }
    }
}

/// Lundberg adjustment coefficient R > 0 of the interest-free model:
/// lambda (E e^(R X) - 1) = c R. Requires c > lambda * mean.
inline double adjustment_coefficient(const ClaimDistribution& dist, double c, double lambda) {
    if (!(c > lambda * mean(dist))) fail(ErrorKind::unsupported, "adjustment coefficient requires c > lambda * mean");
    const auto h = [&](double R) {
        double mgf = 0.0;
        for (const auto& t : dist.terms()) mgf += t.weight * std::pow(t.rate / (t.rate - R), t.shape);
        return lambda * (mgf - 1.0) - c * R;
    };
    // h is convex with h(0) = 0, h'(0) < 0 and h -> +inf at the smallest rate.
    double lo = 0.0;
    double hi = dist.min_rate();
    for (int i = 0; i < 200 && hi - lo > 1e-15 * hi; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (h(mid) < 0.0) lo = mid;
        else hi = mid;
    }
    return lo;
}

struct RiskModel {
    double c = 1.5;
    double lambda = 1.0;
    double r = 0.01;
    double alpha = 0.0;
    ClaimDistribution claim;
};

inline void validate(const RiskModel& model) {
    if (!(model.c > 0.0)) fail(ErrorKind::config, "premium rate c must be positive");
    if (!(model.lambda > 0.0)) fail(ErrorKind::config, "claim intensity lambda must be positive");
    if (!(model.r >= 0.0)) fail(ErrorKind::config, "interest force r must be nonnegative");
    if (!(model.alpha >= 0.0)) fail(ErrorKind::config, "discount force alpha must be nonnegative");
    for (double v : {model.c, model.lambda, model.r, model.alpha}) {
        if (!std::isfinite(v)) fail(ErrorKind::config, "model parameters must be finite");
    }
}

/// Warnings that do not invalidate the model.
inline std::vector<std::string> diagnostics(const RiskModel& model, bool with_barrier) {
    std::vector<std::string> out;
    if (!with_barrier && model.alpha == 0.0 && !(model.c > model.lambda * mean(model.claim))) {
        out.emplace_back("no positive safety loading (c <= lambda * mean) with alpha = 0: "
                         "penalty quantities may be infinite");
    }
    return out;
}

enum class PenaltyKind { ruin_probability, laplace_ruin_time, claim_causing_ruin, deficit_at_ruin, custom };

/// Penalty w(surplus before ruin, deficit at ruin).
struct PenaltyCase {
    PenaltyKind kind = PenaltyKind::ruin_probability;
    std::function<double(double, double)> custom;

    static PenaltyCase ruin_probability() { return {PenaltyKind::ruin_probability, {}}; }
    static PenaltyCase laplace_ruin_time() { return {PenaltyKind::laplace_ruin_time, {}}; }
    static PenaltyCase claim_causing_ruin() { return {PenaltyKind::claim_causing_ruin, {}}; }
    static PenaltyCase deficit_at_ruin() { return {PenaltyKind::deficit_at_ruin, {}}; }
    static PenaltyCase make_custom(std::function<double(double, double)> w) { return {PenaltyKind::custom, std::move(w)}; }

    double weight(double surplus_before, double deficit) const {
        switch (kind) {
        case PenaltyKind::ruin_probability:
        case PenaltyKind::laplace_ruin_time:
            return 1.0;
        case PenaltyKind::claim_causing_ruin:
            return surplus_before + deficit;
        case PenaltyKind::deficit_at_ruin:
            return deficit;
        case PenaltyKind::custom:
            return custom(surplus_before, deficit);
        }
        return 0.0;
    }
};

inline std::string_view to_string(PenaltyKind kind) {
    switch (kind) {
    case PenaltyKind::ruin_probability: return "ruin_probability";
    case PenaltyKind::laplace_ruin_time: return "laplace_ruin_time";
    case PenaltyKind::claim_causing_ruin: return "claim_causing_ruin";
    case PenaltyKind::deficit_at_ruin: return "deficit_at_ruin";
    case PenaltyKind::custom: return "custom";
    }
    return "unknown";
}

/// Discount force each named functional is computed with (0.01 for the
/// Laplace transform of the ruin time, 0 otherwise).
inline double default_alpha(PenaltyKind kind) { return kind == PenaltyKind::laplace_ruin_time ? 0.01 : 0.0; }

/// A(u) = int_u^inf w(u, y - u) dF(y) and the quantities derived from it.
/// Closed forms for the named cases; truncated quadrature for custom penalties.
class PenaltyFunction {
public:
    PenaltyFunction(const ClaimDistribution& claim, PenaltyCase penalty)
        : claim_(claim), case_(std::move(penalty)), claim_mean_(gerber_shiu::mean(claim)) {
        switch (case_.kind) {
        case PenaltyKind::ruin_probability:
        case PenaltyKind::laplace_ruin_time:
            poly_ = claim_.survival_poly();
            break;
        case PenaltyKind::deficit_at_ruin:
            poly_ = claim_.survival_poly().tail_integral();
            break;
        case PenaltyKind::claim_causing_ruin: {
            // u F(u) + int_u^inf F(t) dt, with F the survival function
            const auto sf = claim_.survival_poly();
            const auto tail = sf.tail_integral();
            poly_ = sf.times_x();
            for (const auto& t : tail.terms()) poly_.add(t.coef, t.power, t.rate);
            break;
        }
        case PenaltyKind::custom:
            if (!case_.custom) fail(ErrorKind::config, "custom penalty requires a function w(x, y)");
            break;
        }
        mu_A_ = compute_mu_A();
    }

    const PenaltyCase& penalty_case() const { return case_; }
    bool is_zero() const { return mu_A_ == 0.0; }

    double A(double u) const {
        if (!(u >= 0.0)) fail(ErrorKind::domain, "penalty A(u): u must be nonnegative");
        switch (case_.kind) {
        case PenaltyKind::ruin_probability:
        case PenaltyKind::laplace_ruin_time:
            return survival(claim_, u);
        case PenaltyKind::custom:
            return custom_A(u);
        default:
            return poly_(u);
        }
    }

    /// Integral of A over [0, u].
    double integral_A(double u) const {
        if (case_.kind == PenaltyKind::custom) {
            return integrate_composite([this](double t) { return custom_A(t); }, 0.0, u,
                                       std::max(1, static_cast<int>(std::ceil(4.0 * u / claim_mean_))), 8);
        }
        return mu_A_ - poly_.tail_integral()(u);
    }

    /// Integral of A over [0, u_j] at every grid point, accumulated panel by panel.
    std::vector<double> cumulative_integral_A(std::span<const double> grid) const {
        std::vector<double> out(grid.size(), 0.0);
        if (case_.kind != PenaltyKind::custom) {
            const auto tail = poly_.tail_integral();
            for (std::size_t j = 0; j < grid.size(); ++j) out[j] = mu_A_ - tail(grid[j]);
            return out;
        }
        double acc = 0.0;
        for (std::size_t j = 1; j < grid.size(); ++j) {
            acc += integrate([this](double t) { return custom_A(t); }, grid[j - 1], grid[j], 8);
            out[j] = acc;
        }
        return out;
    }

    double mu_A() const { return mu_A_; }

    /// (1/mu_A) int_0^inf e^(-s x) A(x) dx, equal to 1 at s = 0.
    double a1_laplace(double s) const {
        if (!(s >= 0.0)) fail(ErrorKind::domain, "a1_laplace: s must be nonnegative");
        if (s == 0.0) return 1.0;
        if (mu_A_ == 0.0) return 1.0;
        if (case_.kind == PenaltyKind::custom) {
            const double upper = 50.0 * claim_mean_;
            return integrate_composite([&](double x) { return std::exp(-s * x) * custom_A(x); }, 0.0, upper, 64, 16) /
                   mu_A_;
        }
        return poly_.laplace(s) / mu_A_;
    }

private:
    double custom_A(double u) const {
        const double span = 50.0 * claim_mean_;
        return integrate_composite([&](double y) { return case_.custom(u, y - u) * density(claim_, y); }, u, u + span,
                                   64, 16);
    }

    double compute_mu_A() const {
        switch (case_.kind) {
        case PenaltyKind::ruin_probability:
        case PenaltyKind::laplace_ruin_time:
            return claim_mean_;
        case PenaltyKind::deficit_at_ruin:
            return 0.5 * second_moment(claim_);
        case PenaltyKind::claim_causing_ruin:
            return second_moment(claim_);
        case PenaltyKind::custom:
            break;
        }
        const double upper = 50.0 * claim_mean_;
        const auto A = [this](double t) { return custom_A(t); };
        const double head = integrate_composite(A, 0.0, 0.5 * upper, 32, 16);
        const double tail = integrate_composite(A, 0.5 * upper, upper, 32, 16);
        const double total = head + tail;
        if (!std::isfinite(total) || std::abs(tail) > 1e-6 * std::max(std::abs(total), 1e-300)) {
            if (total != 0.0 || tail != 0.0) fail(ErrorKind::divergence, "mu_A: penalty integral does not converge");
        }
        return total;
    }

    ClaimDistribution claim_;
    PenaltyCase case_;
    double claim_mean_;
    detail::ExpPolynomial poly_;
    double mu_A_ = 0.0;
};

inline double penalty_A(const RiskModel& model, const PenaltyCase& penalty, double u) {
    return PenaltyFunction(model.claim, penalty).A(u);
}

inline double mu_A(const RiskModel& model, const PenaltyCase& penalty) {
    return PenaltyFunction(model.claim, penalty).mu_A();
}

inline double a1_laplace(const RiskModel& model, const PenaltyCase& penalty, double s) {
    return PenaltyFunction(model.claim, penalty).a1_laplace(s);
}

}  // namespace gerber_shiu
