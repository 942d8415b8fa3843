#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "gerber_shiu/config.hpp"
#include "gerber_shiu/csv.hpp"
#include "gerber_shiu/error.hpp"
#include "gerber_shiu/initial_value.hpp"
#include "gerber_shiu/montecarlo.hpp"
#include "gerber_shiu/pinn.hpp"
#include "gerber_shiu/solution_table.hpp"
#include "gerber_shiu/volterra.hpp"

namespace gerber_shiu {

/// Values of one method at a set of points, with run metadata.
struct MethodResult {
    SolutionTable table;
    bool success = true;
    std::vector<std::string> meta;  // key=value lines
};

inline double relative_error(double value, double reference) {
    return std::abs(value - reference) / std::max(std::abs(reference), 1e-3);
}

inline std::vector<double> output_grid(const ExperimentConfig& cfg) {
    return uniform_grid(0.0, cfg.domain_end(), static_cast<std::size_t>(cfg.output_points - 1));
}

inline ProblemSpec problem_for(const ExperimentConfig& cfg) {
    return cfg.barrier ? make_barrier_problem(cfg.model, cfg.penalty, *cfg.barrier)
                       : make_no_barrier_problem(cfg.model, cfg.penalty, cfg.u_max);
}

namespace detail {

inline void check_points(const ExperimentConfig& cfg, const std::vector<double>& points) {
    for (double u : points) {
        if (!(u >= 0.0) || u > cfg.domain_end()) {
            fail(ErrorKind::domain, "evaluation point " + format_real(u) + " lies outside [0, " + format_real(cfg.domain_end()) + "]");
        }
    }
}

inline std::vector<std::string> model_meta(const ExperimentConfig& cfg, Method method) {
    std::vector<std::string> m{
        "method=" + to_string(method),
        "claim=" + cfg.claim_label,
        "case=" + std::string(to_string(cfg.penalty.kind)),
        "c=" + format_real(cfg.model.c),
        "lambda=" + format_real(cfg.model.lambda),
        "r=" + format_real(cfg.model.r),
        "alpha=" + format_real(cfg.model.alpha),
        "barrier=" + (cfg.barrier ? format_real(*cfg.barrier) : std::string("none")),
        "seed=" + std::to_string(cfg.seed),
    };
    return m;
}

}  // namespace detail

/// Volterra reference on its own grid, resampled at the points by Hermite interpolation.
inline MethodResult run_volterra(const ExperimentConfig& cfg, const std::vector<double>& points) {
    detail::check_points(cfg, points);
    const SolutionTable native = cfg.barrier ? volterra_barrier(cfg.model, cfg.penalty, *cfg.barrier, cfg.volterra_intervals)
                                             : volterra_no_barrier(cfg.model, cfg.penalty, cfg.u_max, cfg.volterra_intervals);
    const TableInterpolant ip(native);
    MethodResult out;
    out.table.u = points;
    out.table.notes = native.notes;
    for (double u : points) {
        const auto [v, d] = ip(u);
        out.table.phi.push_back(v);
        out.table.dphi.push_back(d);
    }
    out.meta = detail::model_meta(cfg, Method::volterra);
    out.meta.push_back("intervals=" + std::to_string(cfg.volterra_intervals));
    out.meta.push_back("phi0=" + format_real(native.phi.front() * std::exp(native.log_scale)));
    return out;
}

/// Trains the network and evaluates it at the points.
inline MethodResult run_pinn(const ExperimentConfig& cfg, const std::vector<double>& points, TrainResult* trained = nullptr) {
    detail::check_points(cfg, points);
    const ProblemSpec spec = problem_for(cfg);
    TrainConfig tc = cfg.train;
    tc.seed = cfg.seed;
    TrainResult res = train(spec, tc);
    MethodResult out;
    out.table = evaluate(res.params, points, spec.domain_end());
    out.success = res.successful();
    out.meta = detail::model_meta(cfg, Method::pinn);
    if (!spec.has_barrier()) out.meta.push_back("anchor=" + format_real(std::get<NoBarrier>(spec.barrier).anchor));
    out.meta.push_back("final_loss=" + format_real(res.report.final_loss));
    out.meta.push_back("iterations=" + std::to_string(res.report.iterations));
    out.meta.push_back("stop_reason=" + res.report.stop_reason);
    out.meta.push_back(std::string("converged=") + (res.report.converged ? "true" : "false"));
    out.meta.push_back(std::string("met_loss_target=") + (res.met_loss_target ? "true" : "false"));
    if (trained != nullptr) *trained = std::move(res);
    return out;
}

/// Monte Carlo estimates at the points.
inline MethodResult run_montecarlo(const ExperimentConfig& cfg, const std::vector<double>& points) {
    SimConfig sc = cfg.sim;
    sc.seed = cfg.seed;
    sc.barrier = cfg.barrier;
    MethodResult out;
    out.meta = detail::model_meta(cfg, Method::montecarlo);
    out.meta.push_back("paths=" + std::to_string(sc.paths));
    out.meta.push_back("horizon=" + format_real(sc.horizon));
    for (double u : points) {
        const MonteCarloEstimate est = estimate(cfg.model, cfg.penalty, u, sc);
        out.table.u.push_back(u);
        out.table.phi.push_back(est.value);
        out.table.std_error.push_back(est.std_error);
        if (out.table.notes.empty()) out.table.notes = est.notes;
    }
    return out;
}

inline MethodResult run_method(const ExperimentConfig& cfg, Method method, const std::vector<double>& points) {
    switch (method) {
    case Method::pinn: return run_pinn(cfg, points);
    case Method::volterra: return run_volterra(cfg, points);
    case Method::montecarlo: return run_montecarlo(cfg, points);
    }
    fail(ErrorKind::config, "unknown method");
}

/// Monte Carlo CSV: u,estimate,std_error,paths,horizon.
inline std::string montecarlo_csv(const MethodResult& r, const SimConfig& sc) {
    CsvWriter w({"u", "estimate", "std_error", "paths", "horizon"});
    for (std::size_t i = 0; i < r.table.size(); ++i) {
        w.row_text({format_real(r.table.u[i]), format_real(r.table.phi[i]), format_real(r.table.std_error[i]),
                    std::to_string(sc.paths), format_real(sc.horizon)});
    }
    return w.str();
}

inline std::string meta_text(const MethodResult& r) {
    std::string s;
    for (const auto& m : r.meta) s += m + '\n';
    for (const auto& n : r.table.notes) s += "note=" + n + '\n';
    return s;
}

/// Report CSV u,phi_a,phi_b,rel_err ending in max_rel_err=<value>.
inline std::string compare_csv(const SolutionTable& a, const SolutionTable& b, double* max_rel = nullptr) {
    CsvWriter w({"u", "phi_a", "phi_b", "rel_err"});
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double e = relative_error(a.phi[i], b.phi[i]);
        worst = std::max(worst, e);
        w.row({a.u[i], a.phi[i], b.phi[i], e});
    }
    w.line("max_rel_err=" + format_real(worst));
    if (max_rel != nullptr) *max_rel = worst;
    return w.str();
}

/// One cell of the experiment grid: PINN against the Volterra reference.
struct CellResult {
    std::string claim;
    PenaltyKind kind = PenaltyKind::ruin_probability;
    std::optional<double> barrier;
    SolutionTable pinn;
    SolutionTable reference;
    TrainResult trained;
    double max_rel_err = 0.0;
    double max_abs_err = 0.0;
};

/// The three claim laws used throughout the experiments.
inline std::vector<std::pair<std::string, ClaimDistribution>> standard_claims() {
    return {{"exponential", ClaimDistribution::exponential(1.0)},
            {"erlang", ClaimDistribution::erlang(2, 2.0)},
            {"combination", ClaimDistribution::combination()}};
}

inline std::vector<PenaltyKind> standard_cases() {
    return {PenaltyKind::ruin_probability, PenaltyKind::laplace_ruin_time, PenaltyKind::claim_causing_ruin,
            PenaltyKind::deficit_at_ruin};
}

/// Config for a grid cell: base settings with the claim, case, discount and barrier replaced.
inline ExperimentConfig cell_config(const ExperimentConfig& base, const std::string& label, const ClaimDistribution& claim,
                                    PenaltyKind kind, std::optional<double> barrier) {
    ExperimentConfig cfg = base;
    cfg.claim_label = label;
    cfg.model.claim = claim;
    cfg.model.alpha = default_alpha(kind);
    cfg.penalty = PenaltyCase{kind, {}};
    cfg.barrier = barrier;
    cfg.sim.barrier = barrier;
    return cfg;
}

inline CellResult run_cell(const ExperimentConfig& cfg) {
    CellResult cell;
    cell.claim = cfg.claim_label;
    cell.kind = cfg.penalty.kind;
    cell.barrier = cfg.barrier;
    const auto grid = output_grid(cfg);
    cell.pinn = run_pinn(cfg, grid, &cell.trained).table;
    cell.reference = run_volterra(cfg, grid).table;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        cell.max_rel_err = std::max(cell.max_rel_err, relative_error(cell.pinn.phi[i], cell.reference.phi[i]));
        cell.max_abs_err = std::max(cell.max_abs_err, std::abs(cell.pinn.phi[i] - cell.reference.phi[i]));
    }
    return cell;
}

/// Executes a subcommand and writes its files under cfg.output_dir.
/// Returns 0 when every solve met its criteria and 3 otherwise; errors throw.
inline int run(const std::string& command, const ExperimentConfig& cfg, std::ostream& out, std::ostream& log) {
    namespace fs = std::filesystem;
    const fs::path dir(cfg.output_dir);
    bool ok = true;

    if (command == "solve") {
        const auto points = cfg.method == Method::montecarlo ? cfg.sim_points : output_grid(cfg);
        TrainResult trained;
        const MethodResult r = cfg.method == Method::pinn ? run_pinn(cfg, points, &trained) : run_method(cfg, cfg.method, points);
        const std::string name = to_string(cfg.method);
        if (cfg.method == Method::pinn) {
            std::ostringstream params;
            save_params(params, trained.params);
            write_file_atomic(dir / "pinn_params.txt", params.str());
        }
        write_file_atomic(dir / (name + ".csv"), cfg.method == Method::montecarlo ? montecarlo_csv(r, cfg.sim) : table_csv(r.table));
        write_file_atomic(dir / (name + "_meta.txt"), meta_text(r));
        ok = r.success;
    } else if (command == "simulate") {
        const MethodResult r = run_montecarlo(cfg, cfg.sim_points);
        write_file_atomic(dir / "montecarlo.csv", montecarlo_csv(r, cfg.sim));
        write_file_atomic(dir / "montecarlo_meta.txt", meta_text(r));
    } else if (command == "initial-value") {
        CsvWriter w({"phi0", "kappa"});
        if (cfg.model.r > 0.0) {
            const InitialValueResult iv = compute_initial_value(cfg.model, cfg.penalty);
            w.row({iv.phi0, iv.kappa});
            out << "phi0=" << format_real(iv.phi0) << "\nkappa=" << format_real(iv.kappa) << '\n';
        } else {
            const double phi0 = initial_value(cfg.model, cfg.penalty);
            w.row_text({format_real(phi0), "nan"});
            out << "phi0=" << format_real(phi0) << "\nkappa=undefined for r = 0\n";
        }
        write_file_atomic(dir / "initial_value.csv", w.str());
    } else if (command == "compare") {
        if (cfg.method == cfg.reference) fail(ErrorKind::config, "compare needs two different methods");
        const bool mc = cfg.method == Method::montecarlo || cfg.reference == Method::montecarlo;
        const auto points = mc ? cfg.sim_points : output_grid(cfg);
        const MethodResult a = run_method(cfg, cfg.method, points);
        const MethodResult b = run_method(cfg, cfg.reference, points);
        double worst = 0.0;
        write_file_atomic(dir / "compare.csv", compare_csv(a.table, b.table, &worst));
        write_file_atomic(dir / (to_string(cfg.method) + "_meta.txt"), meta_text(a));
        write_file_atomic(dir / (to_string(cfg.reference) + "_meta.txt"), meta_text(b));
        out << "max_rel_err=" << format_real(worst) << '\n';
        ok = a.success && b.success;
    } else if (command == "reproduce") {
        const double b = cfg.barrier.value_or(10.0);
        std::vector<ExperimentConfig> cells;
        for (const auto& [label, claim] : standard_claims()) {
            for (PenaltyKind kind : standard_cases()) cells.push_back(cell_config(cfg, label, claim, kind, std::nullopt));
        }
        for (const auto& [label, claim] : standard_claims()) {
            cells.push_back(cell_config(cfg, label, claim, PenaltyKind::laplace_ruin_time, b));
        }
        CsvWriter summary({"claim", "case", "barrier", "max_rel_err", "max_abs_err", "final_loss", "iterations", "success"});
        for (const auto& cc : cells) {
            const auto t0 = std::chrono::steady_clock::now();
            const CellResult cell = run_cell(cc);
            const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            const std::string name = cc.claim_label + "_" + std::string(to_string(cc.penalty.kind)) +
                                     (cc.barrier ? "_b" + format_real(*cc.barrier) : std::string());
            write_file_atomic(dir / (name + ".csv"), compare_csv(cell.pinn, cell.reference));
            const bool success = cell.trained.successful();
            ok = ok && success;
            summary.row_text({cc.claim_label, std::string(to_string(cc.penalty.kind)),
                              cc.barrier ? format_real(*cc.barrier) : "none", format_real(cell.max_rel_err),
                              format_real(cell.max_abs_err), format_real(cell.trained.report.final_loss),
                              std::to_string(cell.trained.report.iterations), success ? "true" : "false"});
            log << name << ": max_rel_err " << cell.max_rel_err << " (" << secs << " s)\n";
        }
        write_file_atomic(dir / "summary.csv", summary.str());
    } else {
        fail(ErrorKind::config, "unknown command '" + command + "' (solve, initial-value, simulate, compare, reproduce)");
    }
    return ok ? 0 : 3;
}

}  // namespace gerber_shiu
