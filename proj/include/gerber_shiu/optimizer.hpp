#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "gerber_shiu/error.hpp"

namespace gerber_shiu {

struct LbfgsConfig {
    int memory = 10;
    double c1 = 1e-4;
    double c2 = 0.9;
    int max_line_search = 25;
    double grad_tol = 1e-8;
    double rel_decrease_tol = 1e-12;
    int stall_window = 5;
    int max_iterations = 5000;
};

struct AdamConfig {
    double step = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    int iterations = 10000;
};

struct LevenbergMarquardtConfig {
    int max_iterations = 1200;
    double initial_damping = 1e-3;
    double grad_tol = 1e-15;
    double rel_decrease_tol = 1e-12;
    int stall_window = 5;
    int max_damping_trials = 30;
};

struct OptReport {
    double final_loss = 0.0;
    int iterations = 0;
    double grad_inf_norm = 0.0;
    bool converged = false;
    std::vector<double> loss_history;
    int evaluations = 0;
    std::string stop_reason;
};

/// Objective returning f(x) and writing the gradient into g.
using Objective = std::function<double(std::span<const double>, std::span<double>)>;

namespace detail {

inline double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double inf_norm(std::span<const double> a) {
    double m = 0.0;
    for (double v : a) m = std::max(m, std::abs(v));
    return m;
}

// Minimizer of the cubic through (a, fa, da) and (b, fb, db), clamped to the
// inner 80% of the bracket; bisection when the cubic is degenerate.
inline double cubic_step(double a, double fa, double da, double b, double fb, double db) {
    const double lo = std::min(a, b);
    const double hi = std::max(a, b);
    const double margin = 0.1 * (hi - lo);
    const double d1 = da + db - 3.0 * (fa - fb) / (a - b);
    const double disc = d1 * d1 - da * db;
    double t = 0.5 * (a + b);
    if (disc >= 0.0) {
        const double d2 = std::copysign(std::sqrt(disc), b - a);
        const double denom = db - da + 2.0 * d2;
        if (denom != 0.0) t = b - (b - a) * (db + d2 - d1) / denom;
    }
    if (!std::isfinite(t) || t < lo + margin || t > hi - margin) t = 0.5 * (a + b);
    return t;
}

struct LineSearchResult {
    bool ok = false;
    double step = 0.0;
    double f = 0.0;
    std::vector<double> x;
    std::vector<double> g;
};

// Strong Wolfe line search: bracketing phase, then zoom with cubic interpolation.
inline LineSearchResult strong_wolfe(const Objective& fg, std::span<const double> x0, double f0,
                                     std::span<const double> dir, double dphi0, double step0,
                                     const LbfgsConfig& cfg, int& evaluations) {
    const std::size_t n = x0.size();
    LineSearchResult trial;
    trial.x.resize(n);
    trial.g.resize(n);
    auto eval = [&](double a, LineSearchResult& r) {
        for (std::size_t i = 0; i < n; ++i) r.x[i] = x0[i] + a * dir[i];
        r.f = fg(r.x, r.g);
        r.step = a;
        ++evaluations;
        return dot(r.g, dir);
    };

    LineSearchResult lo_pt;  // best point satisfying sufficient decrease
    lo_pt.step = 0.0;
    lo_pt.f = f0;
    double lo = 0.0, f_lo = f0, d_lo = dphi0;
    double hi = 0.0, f_hi = 0.0, d_hi = 0.0;
    bool bracketed = false;
    double a = step0;
    double prev = 0.0, f_prev = f0, d_prev = dphi0;
    int trials = 0;

    while (trials < cfg.max_line_search) {
        if (!bracketed) {
            const double d = eval(a, trial);
            ++trials;
            const bool armijo = std::isfinite(trial.f) && trial.f <= f0 + cfg.c1 * a * dphi0;
            if (!armijo || (trials > 1 && trial.f >= f_prev)) {
                lo = prev; f_lo = f_prev; d_lo = d_prev;
                hi = a; f_hi = std::isfinite(trial.f) ? trial.f : std::numeric_limits<double>::max(); d_hi = std::isfinite(d) ? d : 0.0;
                bracketed = true;
                continue;
            }
            lo_pt = trial;
            if (std::abs(d) <= -cfg.c2 * dphi0) {
                trial.ok = true;
                return trial;
            }
            if (d >= 0.0) {
                lo = a; f_lo = trial.f; d_lo = d;
                hi = prev; f_hi = f_prev; d_hi = d_prev;
                bracketed = true;
                continue;
            }
            prev = a; f_prev = trial.f; d_prev = d;
            a *= 2.0;
            continue;
        }
        const bool finite_hi = f_hi < std::numeric_limits<double>::max();
        const double t = finite_hi ? cubic_step(lo, f_lo, d_lo, hi, f_hi, d_hi) : lo + 0.5 * (hi - lo);
        const double d = eval(t, trial);
        ++trials;
        if (!std::isfinite(trial.f) || trial.f > f0 + cfg.c1 * t * dphi0 || trial.f >= f_lo) {
            hi = t; f_hi = std::isfinite(trial.f) ? trial.f : std::numeric_limits<double>::max(); d_hi = std::isfinite(d) ? d : 0.0;
        } else {
            lo_pt = trial;
            if (std::abs(d) <= -cfg.c2 * dphi0) {
                trial.ok = true;
                return trial;
            }
            if (d * (hi - lo) >= 0.0) {
                hi = lo; f_hi = f_lo; d_hi = d_lo;
            }
            lo = t; f_lo = trial.f; d_lo = d;
        }
        if (std::abs(hi - lo) <= 1e-16 * std::max(1.0, std::abs(lo))) break;
    }
    // Curvature not met: fall back to the best sufficient-decrease point, if any.
    lo_pt.ok = lo_pt.step > 0.0 && lo_pt.f < f0;
    return lo_pt;
}

}  // namespace detail

/// Limited-memory BFGS (two-loop recursion) with a strong Wolfe line search.
/// On line-search failure the memory is cleared and steepest descent tried once.
inline std::pair<std::vector<double>, OptReport> lbfgs_minimize(const Objective& fg, std::vector<double> x,
                                                                const LbfgsConfig& cfg = {}) {
    const std::size_t n = x.size();
    OptReport report;
    std::vector<double> g(n);
    double f = fg(x, g);
    report.evaluations = 1;
    if (!std::isfinite(f)) fail(ErrorKind::numeric, "lbfgs: objective is not finite at the start point");
    report.loss_history.push_back(f);

    std::deque<std::vector<double>> S, Y;
    std::deque<double> rho;
    std::vector<double> d(n), alpha_buf;
    bool restarted = false;

    for (int k = 0;; ++k) {
        report.iterations = k;
        report.grad_inf_norm = detail::inf_norm(g);
        if (report.grad_inf_norm < cfg.grad_tol) {
            report.converged = true;
            report.stop_reason = "gradient tolerance";
            break;
        }
        const auto& hist = report.loss_history;
        if (static_cast<int>(hist.size()) > cfg.stall_window) {
            const double old = hist[hist.size() - 1 - cfg.stall_window];
            if (old - f <= cfg.rel_decrease_tol * std::abs(old)) {
                report.converged = true;
                report.stop_reason = "relative decrease tolerance";
                break;
            }
        }
        if (k >= cfg.max_iterations) {
            report.stop_reason = "iteration limit";
            break;
        }

        // Two-loop recursion.
        for (std::size_t i = 0; i < n; ++i) d[i] = -g[i];
        const std::size_t m = S.size();
        alpha_buf.assign(m, 0.0);
        for (std::size_t i = m; i-- > 0;) {
            alpha_buf[i] = rho[i] * detail::dot(S[i], d);
            for (std::size_t t = 0; t < n; ++t) d[t] -= alpha_buf[i] * Y[i][t];
        }
        double gamma = 1.0;
        if (m > 0) gamma = detail::dot(S.back(), Y.back()) / detail::dot(Y.back(), Y.back());
        for (double& v : d) v *= gamma;
        for (std::size_t i = 0; i < m; ++i) {
            const double beta = rho[i] * detail::dot(Y[i], d);
            for (std::size_t t = 0; t < n; ++t) d[t] += (alpha_buf[i] - beta) * S[i][t];
        }

        double dphi0 = detail::dot(g, d);
        if (!(dphi0 < 0.0)) {
            S.clear(); Y.clear(); rho.clear();
            for (std::size_t i = 0; i < n; ++i) d[i] = -g[i];
            dphi0 = detail::dot(g, d);
        }
        const double step0 = (m == 0) ? std::min(1.0, 1.0 / std::sqrt(detail::dot(g, g))) : 1.0;
        auto ls = detail::strong_wolfe(fg, x, f, d, dphi0, step0, cfg, report.evaluations);
        if (!ls.ok) {
            if (restarted || m == 0) {
                report.stop_reason = "line search failure";
                break;
            }
            restarted = true;
            S.clear(); Y.clear(); rho.clear();
            continue;  // retry this iteration with steepest descent
        }
        restarted = false;

        std::vector<double> s(n), y(n);
        for (std::size_t i = 0; i < n; ++i) {
            s[i] = ls.x[i] - x[i];
            y[i] = ls.g[i] - g[i];
        }
        const double sy = detail::dot(s, y);
        const double ns = std::sqrt(detail::dot(s, s));
        const double ny = std::sqrt(detail::dot(y, y));
        if (sy > 1e-10 * ns * ny) {
            S.push_back(std::move(s));
            Y.push_back(std::move(y));
            rho.push_back(1.0 / sy);
            if (static_cast<int>(S.size()) > cfg.memory) {
                S.pop_front(); Y.pop_front(); rho.pop_front();
            }
        }
        x = std::move(ls.x);
        g = std::move(ls.g);
        f = ls.f;
        report.loss_history.push_back(f);
    }
    report.final_loss = f;
    report.grad_inf_norm = detail::inf_norm(g);
    return {std::move(x), std::move(report)};
}

/// Separate value and gradient callables.
template <class F, class G>
std::pair<std::vector<double>, OptReport> lbfgs_minimize(F&& f, G&& g, std::vector<double> x0, const LbfgsConfig& cfg = {}) {
    const Objective fg = [&](std::span<const double> x, std::span<double> grad) {
        g(x, grad);
        return f(x);
    };
    return lbfgs_minimize(fg, std::move(x0), cfg);
}

/// Adam with bias correction over a fixed iteration budget.
inline std::pair<std::vector<double>, OptReport> adam_minimize(const Objective& fg, std::vector<double> x,
                                                               const AdamConfig& cfg = {}) {
    const std::size_t n = x.size();
    OptReport report;
    std::vector<double> g(n), m1(n, 0.0), m2(n, 0.0);
    double b1t = 1.0, b2t = 1.0;
    for (int k = 0; k < cfg.iterations; ++k) {
        const double f = fg(x, g);
        ++report.evaluations;
        if (!std::isfinite(f)) fail(ErrorKind::numeric, "adam: objective is not finite");
        report.loss_history.push_back(f);
        b1t *= cfg.beta1;
        b2t *= cfg.beta2;
        for (std::size_t i = 0; i < n; ++i) {
            m1[i] = cfg.beta1 * m1[i] + (1.0 - cfg.beta1) * g[i];
            m2[i] = cfg.beta2 * m2[i] + (1.0 - cfg.beta2) * g[i] * g[i];
            const double mhat = m1[i] / (1.0 - b1t);
            const double vhat = m2[i] / (1.0 - b2t);
            x[i] -= cfg.step * mhat / (std::sqrt(vhat) + cfg.eps);
        }
    }
    report.iterations = cfg.iterations;
    report.final_loss = fg(x, g);
    ++report.evaluations;
    report.grad_inf_norm = detail::inf_norm(g);
    report.converged = true;  // a completed budget is Adam's only stopping rule
    report.stop_reason = "iteration budget";
    return {std::move(x), std::move(report)};
}

template <class F, class G>
std::pair<std::vector<double>, OptReport> adam_minimize(F&& f, G&& g, std::vector<double> x0, const AdamConfig& cfg = {}) {
    const Objective fg = [&](std::span<const double> x, std::span<double> grad) {
        g(x, grad);
        return f(x);
    };
    return adam_minimize(fg, std::move(x0), cfg);
}

/// Residuals r(x) with their row-major Jacobian (rows = residuals, cols = parameters).
using ResidualJacobian = std::function<void(std::span<const double>, std::vector<double>&, std::vector<double>&)>;
/// Sum of squared residuals at x.
using SumOfSquares = std::function<double(std::span<const double>)>;

/// Levenberg-Marquardt on f = sum r_i^2 with Nielsen damping updates.
inline std::pair<std::vector<double>, OptReport> levenberg_marquardt(const ResidualJacobian& rj, const SumOfSquares& f,
                                                                     std::vector<double> x,
                                                                     const LevenbergMarquardtConfig& cfg = {}) {
    using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    if (cfg.max_iterations < 0 || !(cfg.initial_damping > 0.0) || cfg.max_damping_trials < 1) {
        fail(ErrorKind::config, "invalid Levenberg-Marquardt configuration");
    }
    const auto np = static_cast<Eigen::Index>(x.size());
    OptReport report;
    std::vector<double> r;
    std::vector<double> jac;
    std::vector<double> trial(x.size());

    rj(x, r, jac);
    ++report.evaluations;
    const auto nr = static_cast<Eigen::Index>(r.size());
    if (static_cast<Eigen::Index>(jac.size()) != nr * np) fail(ErrorKind::numeric, "Jacobian has the wrong shape");
    Eigen::Map<const Eigen::VectorXd> rv(r.data(), nr);
    double loss = rv.squaredNorm();
    if (!std::isfinite(loss)) fail(ErrorKind::numeric, "initial residuals are not finite");
    report.loss_history.push_back(loss);

    double mu = cfg.initial_damping;
    double nu = 2.0;
    int stalled = 0;
    report.stop_reason = "iteration limit";
    Eigen::VectorXd grad(np);
    Eigen::VectorXd delta(np);
    Mat normal;

    for (int it = 0; it < cfg.max_iterations; ++it) {
        Eigen::Map<const Mat> J(jac.data(), nr, np);
        Eigen::Map<const Eigen::VectorXd> res(r.data(), nr);
        grad.noalias() = J.transpose() * res;
        report.grad_inf_norm = 2.0 * grad.lpNorm<Eigen::Infinity>();
        if (report.grad_inf_norm <= cfg.grad_tol) {
            report.converged = true;
            report.stop_reason = "gradient tolerance";
            break;
        }
        const bool dual = nr <= np;
        if (dual) normal.noalias() = J * J.transpose();
        else normal.noalias() = J.transpose() * J;

        bool accepted = false;
        double new_loss = loss;
        for (int tries = 0; tries < cfg.max_damping_trials; ++tries) {
            Mat a = normal;
            a.diagonal().array() += mu;
            Eigen::LDLT<Mat> ldlt(a);
            if (dual) delta.noalias() = -(J.transpose() * ldlt.solve(res));
            else delta = -ldlt.solve(grad);
            for (Eigen::Index i = 0; i < np; ++i) trial[static_cast<std::size_t>(i)] = x[static_cast<std::size_t>(i)] + delta[i];
            const double f_trial = f(trial);
            ++report.evaluations;
            // Predicted decrease of the linear model: -2 g.d - |J d|^2
            const double jd = (J * delta).squaredNorm();
            const double predicted = -2.0 * grad.dot(delta) - jd;
            const double rho = predicted > 0.0 ? (loss - f_trial) / predicted : -1.0;
            if (std::isfinite(f_trial) && f_trial < loss && rho > 0.0) {
                mu *= std::max(1.0 / 3.0, 1.0 - std::pow(2.0 * rho - 1.0, 3));
                nu = 2.0;
                new_loss = f_trial;
                accepted = true;
                break;
            }
            mu *= nu;
            nu *= 2.0;
        }
        if (!accepted) {
            report.converged = true;
            report.stop_reason = "no decrease at maximum damping";
            break;
        }
        x = trial;
        rj(x, r, jac);
        ++report.evaluations;
        ++report.iterations;
        const double rel = (loss - new_loss) / std::max(loss, std::numeric_limits<double>::min());
        loss = new_loss;
        report.loss_history.push_back(loss);
        stalled = rel < cfg.rel_decrease_tol ? stalled + 1 : 0;
        if (stalled >= cfg.stall_window) {
            report.converged = true;
            report.stop_reason = "relative decrease tolerance";
            break;
        }
    }
    report.final_loss = Eigen::Map<const Eigen::VectorXd>(r.data(), nr).squaredNorm();
    return {std::move(x), std::move(report)};
}

}  // namespace gerber_shiu
