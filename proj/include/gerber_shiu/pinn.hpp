#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "gerber_shiu/error.hpp"
#include "gerber_shiu/initial_value.hpp"
#include "gerber_shiu/network.hpp"
#include "gerber_shiu/optimizer.hpp"
#include "gerber_shiu/quadrature.hpp"
#include "gerber_shiu/risk_model.hpp"
#include "gerber_shiu/solution_table.hpp"

namespace gerber_shiu {

/// No dividend barrier: domain [0, u_max], anchored by Phi_inf(0).
struct NoBarrier {
    double u_max = 30.0;
    double anchor = 0.0;
};

/// Constant dividend barrier at b: domain [0, b] with Phi_b'(b) = 0.
struct BarrierLevel {
    double b = 10.0;
};

struct ProblemSpec {
    RiskModel model;
    PenaltyCase penalty;
    std::variant<NoBarrier, BarrierLevel> barrier;

    bool has_barrier() const { return std::holds_alternative<BarrierLevel>(barrier); }
    double domain_end() const {
        return has_barrier() ? std::get<BarrierLevel>(barrier).b : std::get<NoBarrier>(barrier).u_max;
    }
};

/// No-barrier problem with the anchor computed from the exact initial value.
inline ProblemSpec make_no_barrier_problem(const RiskModel& model, const PenaltyCase& penalty, double u_max) {
    return {model, penalty, NoBarrier{u_max, initial_value(model, penalty)}};
}

inline ProblemSpec make_barrier_problem(const RiskModel& model, const PenaltyCase& penalty, double b) {
    return {model, penalty, BarrierLevel{b}};
}

enum class Placement { equispaced, uniform_random };

struct TrainConfig {
    int residual_points = 256;
    Placement placement = Placement::equispaced;
    std::uint64_t placement_seed = 0;
    int conv_quad_nodes = 32;
    double w_f = 1.0;
    double w_g = 1.0;
    std::variant<LevenbergMarquardtConfig, LbfgsConfig, AdamConfig> optimizer = LevenbergMarquardtConfig{};
    std::vector<int> layer_sizes{1, 20, 20, 20, 20, 1};
    std::uint64_t seed = 1;
    // Train on x = u / domain_end; the scale is folded into the first layer afterwards.
    bool normalize_input = true;
    // The loss is quadratic in the output layer: after a first-order optimizer
    // finishes, solve for it exactly by least squares.
    bool refit_output = true;
    double loss_target = 1e-8;
};

inline void validate(const ProblemSpec& spec) {
    validate(spec.model);
    if (!(spec.domain_end() > 0.0) || !std::isfinite(spec.domain_end())) {
        fail(ErrorKind::config, "training domain must have positive length");
    }
    if (!spec.has_barrier() && !std::isfinite(std::get<NoBarrier>(spec.barrier).anchor)) {
        fail(ErrorKind::config, "no-barrier problem needs a finite anchor value");
    }
}

inline void validate(const TrainConfig& config) {
    if (config.residual_points < 8) fail(ErrorKind::config, "pinn.residual_points must be at least 8");
    if (config.conv_quad_nodes < 4 || config.conv_quad_nodes > kMaxQuadratureNodes) {
        fail(ErrorKind::config, "pinn.quad_nodes must be in [4, 128]");
    }
    if (!(config.w_f > 0.0) || !(config.w_g > 0.0)) fail(ErrorKind::config, "loss weights must be positive");
}

/// Integro-differential residual of an approximant phi(u) -> (value, derivative):
/// -(alpha+lambda) phi(u) + phi'(u)(u r + c) + lambda sum_i w_i f(u - y_i) phi(y_i) + lambda A(u),
/// with the Gauss-Legendre rule mapped onto [0, u].
template <class Approximant>
double residual(const Approximant& phi, const RiskModel& model, const PenaltyFunction& penalty, double u,
                const QuadratureRule& rule) {
    const auto [value, deriv] = phi(u);
    double conv = 0.0;
    if (u > 0.0) {
        const double half = 0.5 * u;
        for (std::size_t i = 0; i < rule.size(); ++i) {
            const double y = half * (1.0 + rule.nodes[i]);
            conv += rule.weights[i] * density(model.claim, u - y) * phi(y).first;
        }
        conv *= half;
    }
    const double r = -(model.alpha + model.lambda) * value + deriv * (u * model.r + model.c) + model.lambda * conv +
                     model.lambda * penalty.A(u);
    if (!std::isfinite(r)) fail(ErrorKind::numeric, "residual is not finite at u = " + std::to_string(u));
    return r;
}

/// Adapts MLPParams to the approximant interface used by residual().
struct NetworkApproximant {
    const MLPParams& params;
    std::pair<double, double> operator()(double x) const { return forward_with_input_derivative(params, x); }
};

template <class Approximant>
double residual(const Approximant& phi, const RiskModel& model, const PenaltyCase& penalty, double u, int nodes = 32) {
    return residual(phi, model, PenaltyFunction(model.claim, penalty), u, cached_gauss_legendre(nodes));
}

inline double residual(const MLPParams& params, const RiskModel& model, const PenaltyCase& penalty, double u,
                       int nodes = 32) {
    return residual(NetworkApproximant{params}, model, penalty, u, nodes);
}

inline std::vector<double> residual_points(double end, const TrainConfig& config) {
    const int n = config.residual_points;
    std::vector<double> pts(n);
    if (config.placement == Placement::equispaced) {
        for (int i = 0; i < n; ++i) pts[i] = end * i / (n - 1);
        pts[n - 1] = end;
    } else {
        std::mt19937_64 gen(config.placement_seed);
        for (double& p : pts) p = end * (static_cast<double>(gen() >> 11) * 0x1.0p-53);
        std::sort(pts.begin(), pts.end());
    }
    return pts;
}

/// The discretized loss with all quadrature nodes and coefficients precomputed.
/// Tangent points are the residual points followed by one boundary point.
class PinnLoss {
public:
    PinnLoss(const ProblemSpec& spec, const TrainConfig& config) : spec_(spec), config_(config) {
        validate(spec);
        validate(config);
        const RiskModel& m = spec.model;
        const PenaltyFunction pf(m.claim, spec.penalty);
        const QuadratureRule& rule = cached_gauss_legendre(config.conv_quad_nodes);
        const double end = spec.domain_end();

        auto pts = gerber_shiu::residual_points(end, config);
        n_res_ = pts.size();
        forcing_.resize(n_res_);
        deriv_coef_.resize(n_res_);
        for (std::size_t p = 0; p < n_res_; ++p) {
            const double u = pts[p];
            forcing_[p] = m.lambda * pf.A(u);
            deriv_coef_[p] = u * m.r + m.c;
            if (u > 0.0) {
                const double half = 0.5 * u;
                for (std::size_t i = 0; i < rule.size(); ++i) {
                    const double y = half * (1.0 + rule.nodes[i]);
                    eval_.value_points.push_back(y);
                    conv_coef_.push_back(m.lambda * half * rule.weights[i] * density(m.claim, u - y));
                    owner_.push_back(p);
                }
            }
        }
        value_coef_ = -(m.alpha + m.lambda);
        eval_.tangent_points = std::move(pts);
        if (spec.has_barrier()) {
            eval_.tangent_points.push_back(end);
        } else {
            eval_.tangent_points.push_back(0.0);
            anchor_ = std::get<NoBarrier>(spec.barrier).anchor;
        }
        points_ = eval_.tangent_points;
        if (config.normalize_input) {
            input_scale_ = 1.0 / end;
            for (double& x : eval_.value_points) x *= input_scale_;
            for (double& x : eval_.tangent_points) x *= input_scale_;
            for (double& c : deriv_coef_) c *= input_scale_;
        }
        residual_.resize(n_res_);
    }

    std::size_t parameter_count() const { return parameter_count_for(config_.layer_sizes); }
    std::span<const double> residual_points() const { return std::span(points_).first(n_res_); }

    /// Factor between the network input and u (1 unless normalize_input).
    double input_scale() const { return input_scale_; }

    /// Loss and gradient over the flat parameter vector.
    double operator()(const MLPParams& params, std::span<double> grad) {
        return eval_(params, [this](const NetworkOutputs& out, NetworkOutputs& adj) { return assemble(out, &adj); }, grad);
    }

    double value(const MLPParams& params) {
        return eval_.value_only(params, [this](const NetworkOutputs& out, NetworkOutputs&) { return assemble(out, nullptr); });
    }

    /// Sets the output layer of params to the exact minimizer of the loss for the
    /// given hidden layers; the loss is quadratic in the output layer.
    void solve_output_layer(MLPParams& params) {
        value(params);
        const BatchWorkspace& wv = eval_.value_workspace();
        const BatchWorkspace& wt = eval_.tangent_workspace();
        const std::size_t L = params.num_layers();
        const std::size_t H = static_cast<std::size_t>(params.layer_sizes()[L - 1]);
        const auto rows = static_cast<Eigen::Index>(n_res_ + 1);
        const auto cols = static_cast<Eigen::Index>(H + 1);
        Eigen::MatrixXd J = Eigen::MatrixXd::Zero(rows, cols);
        Eigen::VectorXd rhs(rows);
        const auto bias_col = static_cast<Eigen::Index>(H);
        if (!conv_coef_.empty()) {
            const double* av = wv.act[L - 1].data();
            for (std::size_t k = 0; k < conv_coef_.size(); ++k) {
                const auto p = static_cast<Eigen::Index>(owner_[k]);
                for (std::size_t j = 0; j < H; ++j) J(p, static_cast<Eigen::Index>(j)) += conv_coef_[k] * av[k * H + j];
                J(p, bias_col) += conv_coef_[k];
            }
        }
        const double* at = wt.act[L - 1].data();
        const double* dt = wt.dact[L - 1].data();
        const double sf = std::sqrt(config_.w_f);
        const double sg = std::sqrt(config_.w_g);
        for (std::size_t p = 0; p < n_res_; ++p) {
            const auto row = static_cast<Eigen::Index>(p);
            for (std::size_t j = 0; j < H; ++j) {
                J(row, static_cast<Eigen::Index>(j)) += value_coef_ * at[p * H + j] + deriv_coef_[p] * dt[p * H + j];
            }
            J(row, bias_col) += value_coef_;
            J.row(row) *= sf;
            rhs(row) = -sf * forcing_[p];
        }
        const std::size_t bp = n_res_;
        const Eigen::Index brow = rows - 1;
        for (std::size_t j = 0; j < H; ++j) {
            J(brow, static_cast<Eigen::Index>(j)) =
                sg * (spec_.has_barrier() ? input_scale_ * dt[bp * H + j] : at[bp * H + j]);
        }
        J(brow, bias_col) = spec_.has_barrier() ? 0.0 : sg;
        rhs(brow) = spec_.has_barrier() ? 0.0 : sg * anchor_;
        const Eigen::VectorXd w = J.colPivHouseholderQr().solve(rhs);
        if (!w.allFinite()) fail(ErrorKind::numeric, "output-layer least squares produced non-finite weights");
        for (std::size_t j = 0; j < H; ++j) params.weight(L - 1, 0, j) = w[static_cast<Eigen::Index>(j)];
        params.bias(L - 1, 0) = w[bias_col];
    }

    /// Weighted residual vector (sqrt(w_f) R_p for each residual point, then sqrt(w_g) times the
    /// boundary residual) and its Jacobian with respect to the parameters, row-major.
    void residual_jacobian(const MLPParams& params, std::vector<double>& r, std::vector<double>& jac) {
        const std::size_t np = params.size();
        const std::size_t rows = n_res_ + 1;
        r.assign(rows, 0.0);
        jac.assign(rows * np, 0.0);
        const double sf = std::sqrt(config_.w_f);
        const double sg = std::sqrt(config_.w_g);
        BatchWorkspace wsv, wst;
        std::vector<double> vals, tv(1), td(1), adj_v;
        std::size_t k = 0;
        for (std::size_t p = 0; p <= n_res_; ++p) {
            const std::size_t begin = k;
            while (p < n_res_ && k < owner_.size() && owner_[k] == p) ++k;
            const std::size_t count = k - begin;
            std::span<double> row(jac.data() + p * np, np);
            const double x = eval_.tangent_points[p];
            forward_batch(params, std::span<const double>(&x, 1), true, wst, tv, td);
            double res = 0.0;
            double adj_val = 0.0;
            double adj_der = 0.0;
            if (p < n_res_) {
                if (count > 0) {
                    vals.resize(count);
                    adj_v.resize(count);
                    const std::span<const double> pts(eval_.value_points.data() + begin, count);
                    forward_batch(params, pts, false, wsv, vals, {});
                    for (std::size_t i = 0; i < count; ++i) {
                        res += conv_coef_[begin + i] * vals[i];
                        adj_v[i] = sf * conv_coef_[begin + i];
                    }
                    backward_batch(params, wsv, adj_v, {}, row);
                }
                res += value_coef_ * tv[0] + deriv_coef_[p] * td[0] + forcing_[p];
                r[p] = sf * res;
                adj_val = sf * value_coef_;
                adj_der = sf * deriv_coef_[p];
            } else if (spec_.has_barrier()) {
                r[p] = sg * input_scale_ * td[0];
                adj_der = sg * input_scale_;
            } else {
                r[p] = sg * (tv[0] - anchor_);
                adj_val = sg;
            }
            backward_batch(params, wst, std::span<const double>(&adj_val, 1), std::span<const double>(&adj_der, 1), row);
        }
    }

    /// Residuals at the residual points for the last evaluated parameters.
    std::span<const double> last_residuals() const { return residual_; }

    /// Boundary-condition residual for the last evaluated parameters.
    double last_boundary() const { return boundary_; }

    /// Network values at the residual points from the last evaluation.
    std::span<const double> last_values() const {
        return std::span(eval_.outputs().tangent_value).first(n_res_);
    }

    const ProblemSpec& spec() const { return spec_; }
    const TrainConfig& config() const { return config_; }

private:
    static std::size_t parameter_count_for(const std::vector<int>& sizes) { return gerber_shiu::parameter_count(sizes); }

    double assemble(const NetworkOutputs& out, NetworkOutputs* adj) {
        std::fill(residual_.begin(), residual_.end(), 0.0);
        for (std::size_t k = 0; k < conv_coef_.size(); ++k) residual_[owner_[k]] += conv_coef_[k] * out.value[k];
        double res_sum = 0.0;
        for (std::size_t p = 0; p < n_res_; ++p) {
            residual_[p] += value_coef_ * out.tangent_value[p] + deriv_coef_[p] * out.tangent_derivative[p] + forcing_[p];
            res_sum += residual_[p] * residual_[p];
        }
        const std::size_t bp = n_res_;
        const double boundary =
            spec_.has_barrier() ? input_scale_ * out.tangent_derivative[bp] : out.tangent_value[bp] - anchor_;
        boundary_ = boundary;
        const double loss = config_.w_f * res_sum + config_.w_g * boundary * boundary;
        if (adj != nullptr) {
            for (std::size_t p = 0; p < n_res_; ++p) {
                const double gr = 2.0 * config_.w_f * residual_[p];
                adj->tangent_value[p] = gr * value_coef_;
                adj->tangent_derivative[p] = gr * deriv_coef_[p];
            }
            for (std::size_t k = 0; k < conv_coef_.size(); ++k) {
                adj->value[k] = 2.0 * config_.w_f * residual_[owner_[k]] * conv_coef_[k];
            }
            const double gb = 2.0 * config_.w_g * boundary;
            if (spec_.has_barrier()) adj->tangent_derivative[bp] = gb * input_scale_;
            else adj->tangent_value[bp] = gb;
        }
        return loss;
    }

    ProblemSpec spec_;
    TrainConfig config_;
    LossGradientEvaluator eval_;
    std::size_t n_res_ = 0;
    std::vector<double> forcing_;
    std::vector<double> deriv_coef_;
    std::vector<double> conv_coef_;
    std::vector<std::size_t> owner_;
    double value_coef_ = 0.0;
    double anchor_ = 0.0;
    double input_scale_ = 1.0;
    double boundary_ = 0.0;
    std::vector<double> points_;
    std::vector<double> residual_;
};

/// Loss of a network that takes u itself as input, as returned by train().
inline double loss(const MLPParams& params, const ProblemSpec& spec, const TrainConfig& config) {
    TrainConfig raw = config;
    raw.normalize_input = false;
    PinnLoss l(spec, raw);
    return l.value(params);
}

struct TrainResult {
    MLPParams params;
    OptReport report;
    bool met_loss_target = false;

    /// Optimizer stopped on its own criteria or the loss reached the target.
    bool successful() const { return report.converged || met_loss_target; }
};

/// Minimizes the loss from init(layer_sizes, seed) with the configured optimizer.
inline TrainResult train(const ProblemSpec& spec, const TrainConfig& config) {
    PinnLoss objective(spec, config);
    MLPParams current = init(config.layer_sizes, config.seed);
    MLPParams work = current;
    const Objective fg = [&](std::span<const double> theta, std::span<double> grad) {
        std::copy(theta.begin(), theta.end(), work.flat().begin());
        return objective(work, grad);
    };

    OptReport report;
    const auto refit = [&]() {
        if (!config.refit_output) return;
        objective.solve_output_layer(current);
        report.final_loss = objective.value(current);
        report.loss_history.push_back(report.final_loss);
    };
    if (const auto* lm = std::get_if<LevenbergMarquardtConfig>(&config.optimizer)) {
        const ResidualJacobian rj = [&](std::span<const double> theta, std::vector<double>& r, std::vector<double>& jac) {
            std::copy(theta.begin(), theta.end(), work.flat().begin());
            objective.residual_jacobian(work, r, jac);
        };
        const SumOfSquares f = [&](std::span<const double> theta) {
            std::copy(theta.begin(), theta.end(), work.flat().begin());
            return objective.value(work);
        };
        auto [x, rep] = levenberg_marquardt(rj, f, current.pack(), *lm);
        current = MLPParams::unpack(config.layer_sizes, x);
        report = std::move(rep);
    } else if (const auto* lb = std::get_if<LbfgsConfig>(&config.optimizer)) {
        auto [x, rep] = lbfgs_minimize(fg, current.pack(), *lb);
        current = MLPParams::unpack(config.layer_sizes, x);
        report = std::move(rep);
        refit();
    } else {
        auto [x, rep] = adam_minimize(fg, current.pack(), std::get<AdamConfig>(config.optimizer));
        current = MLPParams::unpack(config.layer_sizes, x);
        report = std::move(rep);
        refit();
    }

    for (int i = 0; i < config.layer_sizes[1]; ++i) current.weight(0, i, 0) *= objective.input_scale();
    TrainResult result{std::move(current), std::move(report), false};
    result.met_loss_target = result.report.final_loss <= config.loss_target;
    return result;
}

/// Network values and input derivatives on a grid.
inline SolutionTable evaluate(const MLPParams& params, std::span<const double> grid, double domain_end = -1.0) {
    SolutionTable table;
    table.u.assign(grid.begin(), grid.end());
    table.phi.resize(grid.size());
    table.dphi.resize(grid.size());
    BatchWorkspace ws;
    forward_batch(params, grid, true, ws, table.phi, table.dphi);
    if (domain_end >= 0.0) {
        for (double x : grid) {
            if (x < 0.0 || x > domain_end) {
                table.notes.push_back("warning: grid extends outside the training domain [0, " + std::to_string(domain_end) +
                                      "]; values are extrapolated");
                break;
            }
        }
    }
    return table;
}

}  // namespace gerber_shiu
