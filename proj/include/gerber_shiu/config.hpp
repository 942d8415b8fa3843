#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "gerber_shiu/error.hpp"
#include "gerber_shiu/montecarlo.hpp"
#include "gerber_shiu/pinn.hpp"
#include "gerber_shiu/risk_model.hpp"

namespace gerber_shiu {

enum class Method { pinn, volterra, montecarlo };

inline std::string to_string(Method m) {
    switch (m) {
    case Method::pinn: return "pinn";
    case Method::volterra: return "volterra";
    case Method::montecarlo: return "montecarlo";
    }
    return "?";
}

struct ExperimentConfig {
    RiskModel model;
    std::string claim_label;
    PenaltyCase penalty;
    std::optional<double> barrier;
    Method method = Method::volterra;
    Method reference = Method::volterra;  // second method of `compare`

    double u_max = 30.0;
    int output_points = 512;

    int volterra_intervals = 3000;

    TrainConfig train;

    SimConfig sim;
    std::vector<double> sim_points{0.0, 5.0, 10.0};

    std::uint64_t seed = 1;
    std::string output_dir = "out";

    double domain_end() const { return barrier ? *barrier : u_max; }
};

namespace detail {

inline std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

inline double parse_real(const std::string& key, const std::string& text) {
    double v = 0.0;
    const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (res.ec != std::errc{} || res.ptr != text.data() + text.size() || !std::isfinite(v)) {
        fail(ErrorKind::config, key + ": expected a finite number, got '" + text + "'");
    }
    return v;
}

inline long long parse_int(const std::string& key, const std::string& text) {
    long long v = 0;
    const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (res.ec != std::errc{} || res.ptr != text.data() + text.size()) {
        fail(ErrorKind::config, key + ": expected an integer, got '" + text + "'");
    }
    return v;
}

inline std::uint64_t parse_u64(const std::string& key, const std::string& text) {
    std::uint64_t v = 0;
    const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (res.ec != std::errc{} || res.ptr != text.data() + text.size()) {
        fail(ErrorKind::config, key + ": expected a nonnegative integer, got '" + text + "'");
    }
    return v;
}

inline bool parse_bool(const std::string& key, const std::string& text) {
    if (text == "true") return true;
    if (text == "false") return false;
    fail(ErrorKind::config, key + ": expected true or false, got '" + text + "'");
}

inline std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream is(text);
    while (std::getline(is, item, ',')) out.push_back(trim(item));
    return out;
}

inline Method parse_method(const std::string& key, const std::string& text) {
    if (text == "pinn") return Method::pinn;
    if (text == "volterra") return Method::volterra;
    if (text == "montecarlo") return Method::montecarlo;
    fail(ErrorKind::config, key + ": unknown method '" + text + "' (pinn, volterra, montecarlo)");
}

inline PenaltyKind parse_case(const std::string& key, const std::string& text) {
    if (text == "ruin_probability") return PenaltyKind::ruin_probability;
    if (text == "laplace_ruin_time") return PenaltyKind::laplace_ruin_time;
    if (text == "claim_causing_ruin") return PenaltyKind::claim_causing_ruin;
    if (text == "deficit_at_ruin") return PenaltyKind::deficit_at_ruin;
    fail(ErrorKind::config, key + ": unknown case '" + text +
                                "' (ruin_probability, laplace_ruin_time, claim_causing_ruin, deficit_at_ruin)");
}

// Terms "w:k:rate, w:k:rate" of a signed Erlang combination.
inline std::vector<ErlangTerm> parse_terms(const std::string& key, const std::string& text) {
    std::vector<ErlangTerm> terms;
    for (const auto& item : split_list(text)) {
        const auto a = item.find(':');
        const auto b = item.find(':', a == std::string::npos ? a : a + 1);
        if (a == std::string::npos || b == std::string::npos) {
            fail(ErrorKind::config, key + ": term '" + item + "' must be weight:shape:rate");
        }
        const double w = parse_real(key, trim(item.substr(0, a)));
        const long long k = parse_int(key, trim(item.substr(a + 1, b - a - 1)));
        const double rate = parse_real(key, trim(item.substr(b + 1)));
        if (k < 1) fail(ErrorKind::config, key + ": Erlang shape must be at least 1");
        terms.push_back({w, static_cast<int>(k), rate});
    }
    if (terms.empty()) fail(ErrorKind::config, key + ": no terms given");
    return terms;
}

inline const std::set<std::string>& known_keys() {
    static const std::set<std::string> keys{
        "model.c", "model.lambda", "model.r", "model.alpha",
        "claim.kind", "claim.rate", "claim.shape", "claim.terms",
        "case.kind",
        "barrier.level",
        "method.name", "compare.reference",
        "grid.u_max", "grid.points",
        "volterra.intervals",
        "pinn.residual_points", "pinn.placement", "pinn.placement_seed", "pinn.quad_nodes", "pinn.w_f", "pinn.w_g",
        "pinn.optimizer", "pinn.max_iterations", "pinn.adam_step", "pinn.adam_iterations", "pinn.layers",
        "pinn.normalize_input", "pinn.refit_output", "pinn.loss_target",
        "montecarlo.paths", "montecarlo.horizon", "montecarlo.early_stop", "montecarlo.threads", "montecarlo.u",
        "run.seed", "output.dir",
    };
    return keys;
}

}  // namespace detail

/// Parses `section.key = value` lines; `#` starts a comment. Unknown keys are errors.
inline ExperimentConfig parse_config(std::string_view text) {
    std::map<std::string, std::string> kv;
    std::istringstream is{std::string(text)};
    std::string raw;
    int line_no = 0;
    while (std::getline(is, raw)) {
        ++line_no;
        const auto hash = raw.find('#');
        const std::string line = detail::trim(hash == std::string::npos ? raw : raw.substr(0, hash));
        if (line.empty()) continue;
        const auto eq = line.find('=');
        const std::string where = "line " + std::to_string(line_no) + ": ";
        if (eq == std::string::npos) fail(ErrorKind::config, where + "expected 'section.key = value'");
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string value = detail::trim(line.substr(eq + 1));
        if (key.empty() || key.find('.') == std::string::npos) fail(ErrorKind::config, where + "key must be 'section.key'");
        if (value.empty()) fail(ErrorKind::config, where + "missing value for " + key);
        if (!detail::known_keys().count(key)) fail(ErrorKind::config, where + "unknown key '" + key + "'");
        if (kv.count(key)) fail(ErrorKind::config, where + "duplicate key '" + key + "'");
        kv[key] = value;
    }
    for (const char* required : {"claim.kind", "case.kind", "method.name"}) {
        if (!kv.count(required)) fail(ErrorKind::config, std::string("missing required key '") + required + "'");
    }
    const auto get = [&](const std::string& key) -> std::optional<std::string> {
        const auto it = kv.find(key);
        if (it == kv.end()) return std::nullopt;
        return it->second;
    };
    const auto real = [&](const std::string& key, double fallback) {
        const auto v = get(key);
        return v ? detail::parse_real(key, *v) : fallback;
    };
    const auto integer = [&](const std::string& key, long long fallback, long long lo) {
        const auto v = get(key);
        const long long n = v ? detail::parse_int(key, *v) : fallback;
        if (n < lo) fail(ErrorKind::config, key + " must be at least " + std::to_string(lo));
        return n;
    };

    ExperimentConfig cfg;

    const std::string claim_kind = *get("claim.kind");
    if (claim_kind == "exponential") {
        const double rate = real("claim.rate", 1.0);
        if (!(rate > 0.0)) fail(ErrorKind::config, "claim.rate must be positive");
        cfg.model.claim = ClaimDistribution::exponential(rate);
    } else if (claim_kind == "erlang") {
        const double rate = real("claim.rate", 2.0);
        if (!(rate > 0.0)) fail(ErrorKind::config, "claim.rate must be positive");
        cfg.model.claim = ClaimDistribution::erlang(static_cast<int>(integer("claim.shape", 2, 1)), rate);
    } else if (claim_kind == "combination") {
        cfg.model.claim = ClaimDistribution::combination();
    } else if (claim_kind == "mixed_erlang") {
        const auto terms = get("claim.terms");
        if (!terms) fail(ErrorKind::config, "claim.terms is required for claim.kind = mixed_erlang");
        cfg.model.claim = ClaimDistribution(detail::parse_terms("claim.terms", *terms));
    } else {
        fail(ErrorKind::config, "claim.kind: unknown distribution '" + claim_kind +
                                    "' (exponential, erlang, combination, mixed_erlang)");
    }
    cfg.claim_label = claim_kind;
    if (claim_kind != "mixed_erlang" && get("claim.terms")) fail(ErrorKind::config, "claim.terms applies to mixed_erlang only");

    const PenaltyKind kind = detail::parse_case("case.kind", *get("case.kind"));
    cfg.penalty = PenaltyCase{kind, {}};

    cfg.model.c = real("model.c", 1.5);
    cfg.model.lambda = real("model.lambda", 1.0);
    cfg.model.r = real("model.r", 0.01);
    cfg.model.alpha = real("model.alpha", default_alpha(kind));
    validate(cfg.model);

    if (const auto b = get("barrier.level")) {
        const double level = detail::parse_real("barrier.level", *b);
        if (!(level > 0.0)) fail(ErrorKind::config, "barrier.level must be positive");
        cfg.barrier = level;
    }

    cfg.method = detail::parse_method("method.name", *get("method.name"));
    if (const auto ref = get("compare.reference")) cfg.reference = detail::parse_method("compare.reference", *ref);

    cfg.u_max = real("grid.u_max", 30.0);
    if (!(cfg.u_max > 0.0)) fail(ErrorKind::config, "grid.u_max must be positive");
    cfg.output_points = static_cast<int>(integer("grid.points", 512, 2));
    cfg.volterra_intervals = static_cast<int>(integer("volterra.intervals", 3000, 16));

    TrainConfig& tc = cfg.train;
    tc.residual_points = static_cast<int>(integer("pinn.residual_points", 256, 8));
    if (const auto p = get("pinn.placement")) {
        if (*p == "equispaced") tc.placement = Placement::equispaced;
        else if (*p == "uniform_random") tc.placement = Placement::uniform_random;
        else fail(ErrorKind::config, "pinn.placement: unknown placement '" + *p + "' (equispaced, uniform_random)");
    }
    if (const auto s = get("pinn.placement_seed")) tc.placement_seed = detail::parse_u64("pinn.placement_seed", *s);
    tc.conv_quad_nodes = static_cast<int>(integer("pinn.quad_nodes", 32, 4));
    if (tc.conv_quad_nodes > kMaxQuadratureNodes) fail(ErrorKind::config, "pinn.quad_nodes must be at most 128");
    tc.w_f = real("pinn.w_f", 1.0);
    tc.w_g = real("pinn.w_g", 1.0);
    if (!(tc.w_f > 0.0)) fail(ErrorKind::config, "pinn.w_f must be positive");
    if (!(tc.w_g > 0.0)) fail(ErrorKind::config, "pinn.w_g must be positive");
    const std::string opt = get("pinn.optimizer").value_or("lm");
    if (opt == "lm") {
        LevenbergMarquardtConfig lm;
        lm.max_iterations = static_cast<int>(integer("pinn.max_iterations", lm.max_iterations, 1));
        tc.optimizer = lm;
    } else if (opt == "lbfgs") {
        LbfgsConfig lb;
        lb.max_iterations = static_cast<int>(integer("pinn.max_iterations", lb.max_iterations, 1));
        tc.optimizer = lb;
    } else if (opt == "adam") {
        AdamConfig ad;
        ad.step = real("pinn.adam_step", ad.step);
        if (!(ad.step > 0.0)) fail(ErrorKind::config, "pinn.adam_step must be positive");
        ad.iterations = static_cast<int>(integer("pinn.adam_iterations", ad.iterations, 1));
        tc.optimizer = ad;
    } else {
        fail(ErrorKind::config, "pinn.optimizer: unknown optimizer '" + opt + "' (lm, lbfgs, adam)");
    }
    if (opt == "adam" && get("pinn.max_iterations")) fail(ErrorKind::config, "pinn.max_iterations applies to lm and lbfgs only");
    if (opt != "adam" && (get("pinn.adam_step") || get("pinn.adam_iterations"))) {
        fail(ErrorKind::config, "pinn.adam_* keys apply to adam only");
    }
    if (const auto layers = get("pinn.layers")) {
        tc.layer_sizes.clear();
        for (const auto& item : detail::split_list(*layers)) {
            const long long n = detail::parse_int("pinn.layers", item);
            if (n < 1) fail(ErrorKind::config, "pinn.layers: sizes must be positive");
            tc.layer_sizes.push_back(static_cast<int>(n));
        }
        if (tc.layer_sizes.size() < 3 || tc.layer_sizes.front() != 1 || tc.layer_sizes.back() != 1) {
            fail(ErrorKind::config, "pinn.layers must look like 1, h1, ..., 1 with at least one hidden layer");
        }
    }
    if (const auto v = get("pinn.normalize_input")) tc.normalize_input = detail::parse_bool("pinn.normalize_input", *v);
    if (const auto v = get("pinn.refit_output")) tc.refit_output = detail::parse_bool("pinn.refit_output", *v);
    tc.loss_target = real("pinn.loss_target", tc.loss_target);
    if (!(tc.loss_target > 0.0)) fail(ErrorKind::config, "pinn.loss_target must be positive");

    SimConfig& sc = cfg.sim;
    sc.paths = static_cast<std::size_t>(integer("montecarlo.paths", 100000, 1));
    sc.horizon = real("montecarlo.horizon", 2000.0);
    if (!(sc.horizon > 0.0)) fail(ErrorKind::config, "montecarlo.horizon must be positive");
    sc.early_stop = real("montecarlo.early_stop", 1e-12);
    if (!(sc.early_stop >= 0.0 && sc.early_stop < 1.0)) fail(ErrorKind::config, "montecarlo.early_stop must lie in [0, 1)");
    sc.threads = static_cast<unsigned>(integer("montecarlo.threads", 1, 0));
    sc.barrier = cfg.barrier;
    if (const auto us = get("montecarlo.u")) {
        cfg.sim_points.clear();
        for (const auto& item : detail::split_list(*us)) {
            const double u = detail::parse_real("montecarlo.u", item);
            if (!(u >= 0.0)) fail(ErrorKind::config, "montecarlo.u: initial surpluses must be nonnegative");
            if (cfg.barrier && u > *cfg.barrier) fail(ErrorKind::config, "montecarlo.u: initial surplus above the barrier");
            cfg.sim_points.push_back(u);
        }
    }

    if (const auto s = get("run.seed")) cfg.seed = detail::parse_u64("run.seed", *s);
    cfg.output_dir = get("output.dir").value_or("out");
    cfg.train.seed = cfg.seed;
    cfg.sim.seed = cfg.seed;
    return cfg;
}

/// Applies a seed override to every seeded component.
inline void set_seed(ExperimentConfig& cfg, std::uint64_t seed) {
    cfg.seed = seed;
    cfg.train.seed = seed;
    cfg.sim.seed = seed;
}

}  // namespace gerber_shiu
