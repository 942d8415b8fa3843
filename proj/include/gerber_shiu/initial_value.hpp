#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "gerber_shiu/error.hpp"
#include "gerber_shiu/quadrature.hpp"
#include "gerber_shiu/risk_model.hpp"

namespace gerber_shiu {

/// Tabulated I(v) = int_0^v lambda * mean * f1~(r s) ds on a uniform grid,
/// interpolated by monotone cubic Hermite segments using the exact slopes.
struct InnerIntegralTable {
    std::vector<double> v;
    std::vector<double> value;
    std::vector<double> slope;

    double step() const { return v.size() > 1 ? v[1] - v[0] : 0.0; }

    double operator()(double x) const {
        const std::size_t last = v.size() - 1;
        if (x >= v[last]) return value[last] + slope[last] * (x - v[last]);
        if (x <= 0.0) return value[0];
        const double h = step();
        const std::size_t i = std::min(static_cast<std::size_t>(x / h), last - 1);
        const double t = (x - v[i]) / h;
        const double t2 = t * t;
        const double t3 = t2 * t;
        return (2 * t3 - 3 * t2 + 1) * value[i] + (t3 - 2 * t2 + t) * h * slope_l_[i] +
               (-2 * t3 + 3 * t2) * value[i + 1] + (t3 - t2) * h * slope_r_[i];
    }

    /// Fritsch-Carlson limited end slopes per interval.
    void finalize() {
        const std::size_t n = v.size();
        slope_l_.assign(n - 1, 0.0);
        slope_r_.assign(n - 1, 0.0);
        for (std::size_t i = 0; i + 1 < n; ++i) {
            const double secant = (value[i + 1] - value[i]) / (v[i + 1] - v[i]);
            double ml = slope[i];
            double mr = slope[i + 1];
            if (secant == 0.0) {
                ml = mr = 0.0;
            } else {
                const double a = ml / secant;
                const double b = mr / secant;
                if (a < 0.0) ml = 0.0;
                if (b < 0.0) mr = 0.0;
                const double norm = a * a + b * b;
                if (norm > 9.0) {
                    const double tau = 3.0 / std::sqrt(norm);
                    ml = tau * a * secant;
                    mr = tau * b * secant;
                }
            }
            slope_l_[i] = ml;
            slope_r_[i] = mr;
        }
    }

private:
    std::vector<double> slope_l_;
    std::vector<double> slope_r_;
};

struct InitialValueResult {
    double phi0 = 0.0;
    double kappa = 0.0;
    InnerIntegralTable inner_grid;
};

namespace detail {

/// Shared setup for kappa and phi_infinity_at_zero: the integrand
/// g(v) = v^(alpha/r) exp(-c v + I(v)) scaled by exp(-log_shift).
class OuterIntegrand {
public:
    static constexpr int kIntervals = 256;

    explicit OuterIntegrand(const RiskModel& model) : model_(model) {
        validate(model);
        if (!(model.r > 0.0)) {
            fail(ErrorKind::unsupported, "the exact initial value formula requires r > 0 (use the classical value at r = 0)");
        }
        const double lm = model.lambda * mean(model.claim);
        if (model.alpha == 0.0 && !(model.c > lm)) {
            fail(ErrorKind::divergence, "initial value: c <= lambda * mean with alpha = 0 (kappa diverges)");
        }
        exponent_ = model.alpha / model.r;
        const auto inner = [&](double s) { return lm * equilibrium_laplace(model.claim, model.r * s); };
        const auto dlog = [&](double v) { return exponent_ / v - model.c + inner(v); };

        // Locate the active range: log g is concave, so once it decreases and
        // has fallen 60 units below the running maximum it stays negligible.
        double log_max = model.alpha == 0.0 ? 0.0 : -std::numeric_limits<double>::infinity();
        double acc = 0.0;
        double lo = 0.0;
        double hi = 1.0;
        double active = 0.0;
        for (int panel = 0; panel < 60; ++panel) {
            acc += integrate(inner, lo, hi, 32);
            const double lg = log_g(hi, acc);
            log_max = std::max(log_max, lg);
            if (dlog(hi) < 0.0 && lg < log_max - 60.0) {
                active = hi;
                break;
            }
            lo = hi;
            hi *= 2.0;
        }
        if (active == 0.0) fail(ErrorKind::divergence, "initial value: outer integrand does not decay within 2^60");

        InnerIntegralTable& table = table_;
        table.v.resize(kIntervals + 1);
        table.value.resize(kIntervals + 1);
        table.slope.resize(kIntervals + 1);
        const double h = active / kIntervals;
        double cum = 0.0;
        for (int i = 0; i <= kIntervals; ++i) {
            const double vi = i * h;
            if (i > 0) cum += integrate(inner, (i - 1) * h, vi, 16);
            table.v[i] = vi;
            table.value[i] = cum;
            table.slope[i] = inner(vi);
        }
        table.finalize();

        log_shift_ = model.alpha == 0.0 ? 0.0 : -std::numeric_limits<double>::infinity();
        for (int i = 1; i <= kIntervals; ++i) log_shift_ = std::max(log_shift_, log_g(table.v[i], table.value[i]));
    }

    double operator()(double v) const {
        if (v <= 0.0) return exponent_ == 0.0 ? std::exp(-log_shift_) : 0.0;
        return std::exp(log_g(v, table_(v)) - log_shift_);
    }

    double log_shift() const { return log_shift_; }
    const InnerIntegralTable& table() const { return table_; }

private:
    double log_g(double v, double inner_integral) const {
        const double power = exponent_ == 0.0 ? 0.0 : exponent_ * std::log(v);
        return power - model_.c * v + inner_integral;
    }

    RiskModel model_;
    double exponent_ = 0.0;
    double log_shift_ = 0.0;
    InnerIntegralTable table_;
};

}  // namespace detail

/// kappa_{r,alpha} = c int_0^inf v^(alpha/r) exp(-c v + int_0^v lambda mean f1~(r s) ds) dv.
inline double kappa(const RiskModel& model, double tol = 1e-12) {
    const detail::OuterIntegrand g(model);
    return model.c * std::exp(g.log_shift()) * integrate_semi_infinite(g, tol);
}

/// Exact no-barrier initial value for r > 0, together with kappa and the inner table.
inline InitialValueResult compute_initial_value(const RiskModel& model, const PenaltyCase& penalty, double tol = 1e-12) {
    const detail::OuterIntegrand g(model);
    const PenaltyFunction pf(model.claim, penalty);
    InitialValueResult result;
    const double denom = integrate_semi_infinite(g, tol);
    result.kappa = model.c * std::exp(g.log_shift()) * denom;
    result.inner_grid = g.table();
    if (model.lambda * pf.mu_A() == 0.0) {
        result.phi0 = 0.0;
        return result;
    }
    const double numer = integrate_semi_infinite([&](double v) { return pf.a1_laplace(model.r * v) * g(v); }, tol);
    result.phi0 = model.lambda * pf.mu_A() * numer / (model.c * denom);
    if (!std::isfinite(result.phi0)) fail(ErrorKind::numeric, "initial value is not finite");
    return result;
}

inline double phi_infinity_at_zero(const RiskModel& model, const PenaltyCase& penalty, double tol = 1e-12) {
    return compute_initial_value(model, penalty, tol).phi0;
}

/// lambda mu_A / c: the r = 0, alpha = 0 value with positive safety loading.
inline double classical_zero_value(const RiskModel& model, const PenaltyCase& penalty) {
    validate(model);
    if (model.r != 0.0 || model.alpha != 0.0) {
        fail(ErrorKind::unsupported, "classical_zero_value requires r = 0 and alpha = 0");
    }
    if (!(model.c > model.lambda * mean(model.claim))) {
        fail(ErrorKind::unsupported, "classical_zero_value requires c > lambda * mean");
    }
    return model.lambda * mu_A(model, penalty) / model.c;
}

/// Phi_inf(0) by whichever formula covers the model.
inline double initial_value(const RiskModel& model, const PenaltyCase& penalty) {
    if (model.r > 0.0) return phi_infinity_at_zero(model, penalty);
    if (model.alpha == 0.0) return classical_zero_value(model, penalty);
    fail(ErrorKind::unsupported, "no initial-value formula for r = 0 with alpha > 0");
}

}  // namespace gerber_shiu
