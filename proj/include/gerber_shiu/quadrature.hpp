#pragma once

#include <array>
#include <cmath>
#include <mutex>
#include <numbers>
#include <sstream>
#include <vector>

#include "gerber_shiu/error.hpp"

namespace gerber_shiu {

/// n-point Gauss-Legendre rule on [-1, 1]; nodes ascending.
struct QuadratureRule {
    std::vector<double> nodes;
    std::vector<double> weights;

    std::size_t size() const noexcept { return nodes.size(); }
};

inline constexpr int kMaxQuadratureNodes = 128;

namespace detail {

// P_n(x) and P_n'(x) by the three-term recurrence.
inline std::pair<double, double> legendre_with_derivative(int n, double x) {
    double p0 = 1.0;
    double p1 = x;
    for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    const double dp = n * (x * p1 - p0) / (x * x - 1.0);
    return {p1, dp};
}

}  // namespace detail

inline QuadratureRule gauss_legendre(int n) {
    if (n < 1 || n > kMaxQuadratureNodes) {
        fail(ErrorKind::domain, "gauss_legendre: node count must be in [1, 128], got " + std::to_string(n));
    }
    QuadratureRule rule;
    rule.nodes.assign(n, 0.0);
    rule.weights.assign(n, 0.0);
    if (n == 1) {
        rule.weights[0] = 2.0;
        return rule;
    }
    const int half = (n + 1) / 2;
    for (int i = 0; i < half; ++i) {
        // Chebyshev-type initial guess for the i-th largest root.
        double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        for (int iter = 0; iter < 100; ++iter) {
            const auto [p, dp] = detail::legendre_with_derivative(n, x);
            const double step = p / dp;
            x -= step;
            if (std::abs(step) <= 1e-15) break;
        }
        const auto [p, dp] = detail::legendre_with_derivative(n, x);
        (void)p;
        const double w = 2.0 / ((1.0 - x * x) * dp * dp);
        rule.nodes[n - 1 - i] = x;
        rule.nodes[i] = -x;
        rule.weights[n - 1 - i] = w;
        rule.weights[i] = w;
    }
    if (n % 2 == 1) rule.nodes[n / 2] = 0.0;
    return rule;
}

/// Shared read-only rule, built on first use. Thread-safe.
inline const QuadratureRule& cached_gauss_legendre(int n) {
    if (n < 1 || n > kMaxQuadratureNodes) {
        fail(ErrorKind::domain, "gauss_legendre: node count must be in [1, 128], got " + std::to_string(n));
    }
    static std::array<QuadratureRule, kMaxQuadratureNodes + 1> rules;
    static std::array<std::once_flag, kMaxQuadratureNodes + 1> flags;
    std::call_once(flags[n], [n] { rules[n] = gauss_legendre(n); });
    return rules[n];
}

namespace detail {

[[noreturn]] inline void non_finite_integrand(double x, double fx) {
    std::ostringstream os;
    os.precision(17);
    os << "integrand is not finite at x = " << x << " (f = " << fx << ")";
    fail(ErrorKind::numeric, os.str());
}

}  // namespace detail

/// Affine-mapped n-point Gauss-Legendre approximation of the integral of f over [a, b].
template <class F>
double integrate(F&& f, double a, double b, int n) {
    if (!(a <= b)) fail(ErrorKind::domain, "integrate: requires a <= b");
    const QuadratureRule& rule = cached_gauss_legendre(n);
    const double mid = 0.5 * (a + b);
    const double half = 0.5 * (b - a);
    double sum = 0.0;
    for (std::size_t i = 0; i < rule.size(); ++i) {
        const double x = mid + half * rule.nodes[i];
        const double fx = f(x);
        if (!std::isfinite(fx)) detail::non_finite_integrand(x, fx);
        sum += rule.weights[i] * fx;
    }
    return half * sum;
}

template <class F>
double integrate_composite(F&& f, double a, double b, int panels, int n) {
    if (panels < 1) fail(ErrorKind::domain, "integrate_composite: panels must be positive");
    if (panels == 1) return integrate(f, a, b, n);
    const double width = (b - a) / panels;
    double sum = 0.0;
    for (int k = 0; k < panels; ++k) {
        const double lo = a + k * width;
        const double hi = (k + 1 == panels) ? b : a + (k + 1) * width;
        sum += integrate(f, lo, hi, n);
    }
    return sum;
}

/// Integral over [0, inf) by 32-point panels [0,1], [1,2], [2,4], [4,8], ...
/// Stops once a panel contributes less than tol * (accumulated |sum| + tol).
template <class F>
double integrate_semi_infinite(F&& f, double tol) {
    if (!(tol > 0.0)) fail(ErrorKind::domain, "integrate_semi_infinite: tol must be positive");
    constexpr int kMaxPanels = 60;
    double value = 0.0;
    double abs_sum = 0.0;
    double lo = 0.0;
    double hi = 1.0;
    for (int panel = 0; panel < kMaxPanels; ++panel) {
        const double part = integrate(f, lo, hi, 32);
        value += part;
        abs_sum += std::abs(part);
        if (panel > 0 && std::abs(part) < tol * (abs_sum + tol)) return value;
        lo = hi;
        hi = (panel == 0) ? 2.0 : 2.0 * hi;
    }
    fail(ErrorKind::divergence, "integrate_semi_infinite: no convergence within 60 panels");
}

}  // namespace gerber_shiu
