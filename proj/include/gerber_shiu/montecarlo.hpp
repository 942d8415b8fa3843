#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "gerber_shiu/error.hpp"
#include "gerber_shiu/risk_model.hpp"

namespace gerber_shiu {

struct SimConfig {
    std::size_t paths = 100000;
    double horizon = 2000.0;
    std::uint64_t seed = 0;
    std::optional<double> barrier;
    // Paths whose surplus exceeds ln(1/early_stop)/R are counted as surviving
    // (no barrier, positive loading only). 0 disables.
    double early_stop = 1e-12;
    unsigned threads = 1;  // 0: hardware concurrency
};

struct PathOutcome {
    bool ruined = false;
    double ruin_time = 0.0;
    double surplus_before = 0.0;
    double deficit = 0.0;
};

struct MonteCarloEstimate {
    double value = 0.0;
    double std_error = 0.0;
    std::size_t paths = 0;
    double horizon = 0.0;
    double ruined_fraction = 0.0;
    std::vector<std::string> notes;
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::string fmt(double v) {
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
}

inline double unit_uniform(std::mt19937_64& gen) { return static_cast<double>(gen() >> 11) * 0x1.0p-53; }

/// Surplus after growing for time dt from x, capped at the barrier.
inline double grow(double x, double dt, double c, double r, double cap) {
    const double y = r > 0.0 ? (x + c / r) * std::exp(r * dt) - c / r : x + c * dt;
    return std::min(y, cap);
}

inline void validate_sim(const RiskModel& model, double u0, const SimConfig& config) {
    if (!(model.c > 0.0) || !(model.lambda >= 0.0) || !(model.r >= 0.0) || !(model.alpha >= 0.0)) {
        fail(ErrorKind::config, "invalid model parameters for simulation");
    }
    if (config.paths < 1) fail(ErrorKind::config, "montecarlo.paths must be at least 1");
    if (!(config.horizon > 0.0) || !std::isfinite(config.horizon)) fail(ErrorKind::config, "montecarlo.horizon must be positive");
    if (!(u0 >= 0.0)) fail(ErrorKind::domain, "initial surplus must be nonnegative");
    if (config.barrier && !(*config.barrier > 0.0)) fail(ErrorKind::config, "barrier level must be positive");
    if (config.barrier && u0 > *config.barrier) fail(ErrorKind::domain, "initial surplus exceeds the barrier");
}

}  // namespace detail

/// Inverse of the claim distribution: the x with F(x) = p, found by bisection on F
/// accelerated with Newton steps that stay inside the bracket. Stops at width 1e-12.
inline double inverse_cdf(const ClaimDistribution& dist, double p) {
    if (!(p >= 0.0 && p < 1.0)) fail(ErrorKind::domain, "inverse_cdf: p must lie in [0, 1)");
    if (p == 0.0) return 0.0;
    const double target = 1.0 - p;  // survival level
    double lo = 0.0;
    double hi = mean(dist);
    while (survival(dist, hi) > target) {
        lo = hi;
        hi *= 2.0;
        if (hi > 1e6 * mean(dist)) fail(ErrorKind::numeric, "inverse_cdf: cannot bracket quantile");
    }
    double x = 0.5 * (lo + hi);
    for (int it = 0; it < 200 && hi - lo > 1e-12; ++it) {
        const double g = survival(dist, x) - target;
        if (g == 0.0) return x;
        if (g > 0.0) lo = x;
        else hi = x;
        const double f = density(dist, x);
        double next = f > 0.0 ? x + g / f : 0.5 * (lo + hi);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (std::abs(next - x) < 1e-13) {
            x = next;
            break;
        }
        x = next;
    }
    return x;
}

/// Surplus level above which ruin probability is at most eps, or +inf if not applicable.
inline double safe_level(const RiskModel& model, const SimConfig& config) {
    if (config.barrier || !(config.early_stop > 0.0) || model.lambda == 0.0) {
        return std::numeric_limits<double>::infinity();
    }
    if (!(model.c > model.lambda * mean(model.claim))) return std::numeric_limits<double>::infinity();
    const double R = adjustment_coefficient(model.claim, model.c, model.lambda);
    return std::log(1.0 / config.early_stop) / R;
}

namespace detail {

inline PathOutcome simulate_path_impl(const RiskModel& model, double u0, const SimConfig& config, std::size_t index,
                                      double u_safe) {
    std::mt19937_64 gen(splitmix64(config.seed ^ splitmix64(static_cast<std::uint64_t>(index))));
    const double cap = config.barrier ? *config.barrier : std::numeric_limits<double>::infinity();
    PathOutcome out;
    if (model.lambda == 0.0) return out;
    double t = 0.0;
    double x = u0;
    for (;;) {
        const double dt = -std::log1p(-unit_uniform(gen)) / model.lambda;
        if (t + dt > config.horizon) return out;
        t += dt;
        x = grow(x, dt, model.c, model.r, cap);
        const double y = inverse_cdf(model.claim, unit_uniform(gen));
        if (y > x) {
            out.ruined = true;
            out.ruin_time = t;
            out.surplus_before = x;
            out.deficit = y - x;
            return out;
        }
        x -= y;
        if (x >= u_safe) return out;
    }
}

}  // namespace detail

/// One surplus path from u0 until ruin, the horizon, or the early-stop level.
inline PathOutcome simulate_path(const RiskModel& model, double u0, const SimConfig& config, std::size_t path_index) {
    detail::validate_sim(model, u0, config);
    return detail::simulate_path_impl(model, u0, config, path_index, safe_level(model, config));
}

/// Sample mean of exp(-alpha T) w(U(T-), |U(T)|) over all paths, with its standard error.
inline MonteCarloEstimate estimate(const RiskModel& model, const PenaltyCase& penalty, double u0, const SimConfig& config) {
    detail::validate_sim(model, u0, config);
    const double u_safe = safe_level(model, config);
    const std::size_t n = config.paths;
    std::vector<double> contrib(n, 0.0);
    std::vector<unsigned char> ruined(n, 0);

    const auto work = [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            const PathOutcome o = detail::simulate_path_impl(model, u0, config, i, u_safe);
            if (o.ruined) {
                ruined[i] = 1;
                contrib[i] = std::exp(-model.alpha * o.ruin_time) * penalty.weight(o.surplus_before, o.deficit);
            }
        }
    };
    unsigned threads = config.threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : config.threads;
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, n));
    if (threads <= 1) {
        work(0, n);
    } else {
        std::vector<std::thread> pool;
        const std::size_t chunk = (n + threads - 1) / threads;
        for (unsigned k = 0; k < threads; ++k) {
            const std::size_t b = std::min(n, k * chunk);
            const std::size_t e = std::min(n, b + chunk);
            pool.emplace_back(work, b, e);
        }
        for (auto& th : pool) th.join();
    }

    MonteCarloEstimate est;
    est.paths = n;
    est.horizon = config.horizon;
    double sum = 0.0;
    std::size_t ruined_count = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sum += contrib[i];
        ruined_count += ruined[i];
    }
    const double mean_value = sum / static_cast<double>(n);
    double ss = 0.0;
    for (double v : contrib) ss += (v - mean_value) * (v - mean_value);
    est.value = mean_value;
    est.std_error = n > 1 ? std::sqrt(ss / static_cast<double>(n - 1) / static_cast<double>(n)) : 0.0;
    est.ruined_fraction = static_cast<double>(ruined_count) / static_cast<double>(n);
    if (!std::isfinite(est.value) || !std::isfinite(est.std_error)) fail(ErrorKind::numeric, "Monte Carlo estimate is not finite");

    if (model.alpha > 0.0) {
        est.notes.push_back("horizon truncation bias bound exp(-alpha*T_max) = " +
                            detail::fmt(std::exp(-model.alpha * config.horizon)));
    } else if (!config.barrier) {
        est.notes.push_back("alpha = 0 without barrier: horizon truncation bias is not bounded analytically");
    }
    if (std::isfinite(u_safe)) {
        est.notes.push_back("paths stopped above surplus " + detail::fmt(u_safe) +
                            "; ruin probability beyond that level is below " + detail::fmt(config.early_stop));
    }
    return est;
}

/// Estimates at several initial surpluses with the same configuration.
inline std::vector<MonteCarloEstimate> estimate_many(const RiskModel& model, const PenaltyCase& penalty,
                                                     const std::vector<double>& u0s, const SimConfig& config) {
    std::vector<MonteCarloEstimate> out;
    out.reserve(u0s.size());
    for (double u0 : u0s) out.push_back(estimate(model, penalty, u0, config));
    return out;
}

}  // namespace gerber_shiu
