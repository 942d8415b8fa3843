#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "gerber_shiu/error.hpp"
#include "gerber_shiu/initial_value.hpp"
#include "gerber_shiu/risk_model.hpp"
#include "gerber_shiu/solution_table.hpp"

namespace gerber_shiu {

namespace detail {

inline constexpr double kRescaleThreshold = 1e280;

// Trapezoidal Nystrom marching for
//   phi(u) = c phi(0)/(c + r u) - lambda/(c + r u) int_0^u A + int_0^u k(u,t) phi(t) dt,
//   k(u,t) = (r + alpha + lambda Fbar(u - t)) / (c + r u).
// integral_A is empty for the homogeneous equation.
inline SolutionTable march_volterra(const RiskModel& model, double phi0, const std::vector<double>& integral_A,
                                    double u_max, int intervals) {
    validate(model);
    if (intervals < 16) fail(ErrorKind::domain, "Volterra solver needs at least 16 grid intervals");
    if (!(u_max > 0.0) || !std::isfinite(u_max)) fail(ErrorKind::domain, "Volterra solver needs a positive u_max");

    SolutionTable table;
    table.u = uniform_grid(0.0, u_max, intervals);
    const std::size_t n = table.u.size();
    const double h = u_max / intervals;
    const double rho = model.r + model.alpha;

    std::vector<double> fbar(n);
    for (std::size_t m = 0; m < n; ++m) fbar[m] = survival(model.claim, m * h);

    std::vector<double>& phi = table.phi;
    phi.assign(n, 0.0);
    phi[0] = phi0;
    double start = phi0;              // phi(0) in the current scale
    double plain_sum = 0.5 * phi[0];  // trapezoid sum without the unknown endpoint

    for (std::size_t j = 1; j < n; ++j) {
        const double denom_u = model.c + model.r * table.u[j];
        double conv = 0.5 * fbar[j] * phi[0];
        for (std::size_t i = 1; i < j; ++i) conv += fbar[j - i] * phi[i];
        const double known = h * (rho * plain_sum + model.lambda * conv) / denom_u;
        double g = model.c * start / denom_u;
        if (!integral_A.empty()) g -= model.lambda * integral_A[j] / denom_u;
        const double diag = 1.0 - 0.5 * h * (rho + model.lambda * fbar[0]) / denom_u;
        if (!(std::abs(diag) > 1e-8)) {
            fail(ErrorKind::numeric, "Volterra step is too coarse (vanishing diagonal); increase the grid size");
        }
        phi[j] = (g + known) / diag;
        if (!std::isfinite(phi[j])) fail(ErrorKind::numeric, "Volterra solution is not finite at u = " + std::to_string(table.u[j]));
        plain_sum += phi[j];  // 0.5 phi_0 + sum_{i=1}^{j} phi_i for the next node

        if (integral_A.empty() && std::abs(phi[j]) > kRescaleThreshold) {
            const double s = std::abs(phi[j]);
            for (std::size_t i = 0; i <= j; ++i) phi[i] /= s;
            start /= s;
            plain_sum /= s;
            table.log_scale += std::log(s);
        }
    }
    return table;
}

}  // namespace detail

/// No-barrier Gerber-Shiu function on [0, u_max] from its initial value.
inline SolutionTable solve_phi_infinity(const RiskModel& model, const PenaltyCase& penalty, double phi0, double u_max,
                                        int intervals) {
    const PenaltyFunction pf(model.claim, penalty);
    const auto grid = uniform_grid(0.0, u_max, static_cast<std::size_t>(intervals));
    return detail::march_volterra(model, phi0, pf.cumulative_integral_A(grid), u_max, intervals);
}

/// Homogeneous solution with h(0) = 1.
inline SolutionTable solve_h(const RiskModel& model, double u_max, int intervals) {
    return detail::march_volterra(model, 1.0, {}, u_max, intervals);
}

namespace detail {

inline SolutionTable derivative_from_ide_impl(const RiskModel& model, const PenaltyFunction* pf, SolutionTable table) {
    const std::size_t n = table.size();
    if (n < 2) fail(ErrorKind::domain, "derivative_from_ide needs at least two grid points");
    const double h = table.u[1] - table.u[0];
    std::vector<double> f(n);
    for (std::size_t m = 0; m < n; ++m) f[m] = density(model.claim, m * h);
    const double a_scale = std::exp(-table.log_scale);
    table.dphi.assign(n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
        double conv = 0.0;
        if (j > 0) {
            conv = 0.5 * (table.phi[j] * f[0] + table.phi[0] * f[j]);
            for (std::size_t i = 1; i < j; ++i) conv += table.phi[j - i] * f[i];
            conv *= h;
        }
        double rhs = (model.alpha + model.lambda) * table.phi[j] - model.lambda * conv;
        if (pf != nullptr) rhs -= model.lambda * pf->A(table.u[j]) * a_scale;
        table.dphi[j] = rhs / (model.r * table.u[j] + model.c);
    }
    return table;
}

}  // namespace detail

/// Fills dphi from the integro-differential equation itself.
inline SolutionTable derivative_from_ide(const RiskModel& model, const PenaltyCase& penalty, SolutionTable table) {
    const PenaltyFunction pf(model.claim, penalty);
    return detail::derivative_from_ide_impl(model, &pf, std::move(table));
}

/// Homogeneous variant (A = 0), used for h.
inline SolutionTable derivative_from_ide(const RiskModel& model, SolutionTable table) {
    return detail::derivative_from_ide_impl(model, nullptr, std::move(table));
}

/// Phi_b = Phi_inf - (Phi_inf'(b) / h'(b)) h on the shared grid [0, b].
inline SolutionTable combine_barrier(const RiskModel& model, const PenaltyCase& penalty, double b,
                                     const SolutionTable& phi_inf, const SolutionTable& h) {
    (void)model;
    (void)penalty;
    if (phi_inf.size() != h.size() || phi_inf.size() < 2) fail(ErrorKind::domain, "combine_barrier: grids differ");
    if (!phi_inf.has_derivative() || !h.has_derivative()) fail(ErrorKind::domain, "combine_barrier: derivatives missing");
    for (std::size_t j = 0; j < h.size(); ++j) {
        if (std::abs(phi_inf.u[j] - h.u[j]) > 1e-12 * std::max(1.0, std::abs(h.u[j]))) {
            fail(ErrorKind::domain, "combine_barrier: grids differ");
        }
    }
    if (std::abs(phi_inf.u.back() - b) > 1e-9 * std::max(1.0, b)) {
        fail(ErrorKind::domain, "combine_barrier: the barrier must be the last grid point");
    }
    if (phi_inf.log_scale != 0.0) fail(ErrorKind::domain, "combine_barrier: Phi_inf table must be unscaled");
    const double hb = h.dphi.back();
    if (hb == 0.0) fail(ErrorKind::numeric, "combine_barrier: h'(b) = 0, degenerate decomposition");
    // h's scale cancels: coefficient and h share it.
    const double coef = phi_inf.dphi.back() / hb;
    SolutionTable out;
    out.u = phi_inf.u;
    out.phi.resize(out.u.size());
    out.dphi.resize(out.u.size());
    for (std::size_t j = 0; j < out.u.size(); ++j) {
        out.phi[j] = phi_inf.phi[j] - coef * h.phi[j];
        out.dphi[j] = phi_inf.dphi[j] - coef * h.dphi[j];
    }
    return out;
}

/// Volterra reference without a barrier: initial value, marching, derivative.
inline SolutionTable volterra_no_barrier(const RiskModel& model, const PenaltyCase& penalty, double u_max, int intervals,
                                         std::optional<double> phi0 = std::nullopt) {
    const double start = phi0 ? *phi0 : initial_value(model, penalty);
    return derivative_from_ide(model, penalty, solve_phi_infinity(model, penalty, start, u_max, intervals));
}

/// Volterra reference with a dividend barrier at b via the decomposition.
inline SolutionTable volterra_barrier(const RiskModel& model, const PenaltyCase& penalty, double b, int intervals,
                                      std::optional<double> phi0 = std::nullopt) {
    const auto phi_inf = volterra_no_barrier(model, penalty, b, intervals, phi0);
    const auto h = derivative_from_ide(model, solve_h(model, b, intervals));
    return combine_barrier(model, penalty, b, phi_inf, h);
}

}  // namespace gerber_shiu
