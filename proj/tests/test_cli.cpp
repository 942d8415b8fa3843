#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "gerber_shiu/config.hpp"
#include "gerber_shiu/csv.hpp"
#include "gerber_shiu/error.hpp"

using namespace gerber_shiu;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("gerber_shiu_cli_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

void write(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    out << text;
}

int cli(const std::string& args, const fs::path& log) {
    const std::string cmd = std::string(GERBER_SHIU_CLI) + " " + args + " > " + log.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

ErrorKind parse_error_kind(const std::string& text, std::string* message = nullptr) {
    try {
        parse_config(text);
    } catch (const Error& e) {
        if (message != nullptr) *message = e.what();
        return e.kind();
    }
    ADD_FAILURE() << "expected a parse error";
    return ErrorKind::numeric;
}

const char* kSmallPinn =
    "claim.kind = exponential\n"
    "case.kind = ruin_probability\n"
    "method.name = pinn\n"
    "grid.points = 64\n"
    "pinn.residual_points = 32\n"
    "pinn.quad_nodes = 8\n"
    "pinn.layers = 1, 8, 8, 1\n"
    "pinn.max_iterations = 15\n"
    "pinn.loss_target = 1\n";

}  // namespace

TEST(ParseConfig, MinimalConfigDefaults) {
    const auto cfg = parse_config("claim.kind = exponential\nclaim.rate = 1\ncase.kind = ruin_probability\nmethod.name = volterra\n");
    EXPECT_EQ(cfg.model.c, 1.5);
    EXPECT_EQ(cfg.model.lambda, 1.0);
    EXPECT_EQ(cfg.model.r, 0.01);
    EXPECT_EQ(cfg.model.alpha, 0.0);
    EXPECT_EQ(cfg.method, Method::volterra);
    EXPECT_FALSE(cfg.barrier.has_value());
    EXPECT_EQ(cfg.u_max, 30.0);
    EXPECT_EQ(cfg.output_points, 512);
    const auto laplace = parse_config("claim.kind = erlang\ncase.kind = laplace_ruin_time\nmethod.name = pinn\n");
    EXPECT_EQ(laplace.model.alpha, 0.01);
    EXPECT_EQ(mean(laplace.model.claim), 1.0);
    EXPECT_TRUE(std::holds_alternative<LevenbergMarquardtConfig>(laplace.train.optimizer));
}

TEST(ParseConfig, FullSchema) {
    const auto cfg = parse_config(
        "# comment line\n"
        "model.c = 2   # trailing comment\n"
        "model.lambda = 0.5\nmodel.r = 0.02\nmodel.alpha = 0.03\n"
        "claim.kind = mixed_erlang\nclaim.terms = 2:1:1.5, -1:1:3\n"
        "case.kind = deficit_at_ruin\nbarrier.level = 8\n"
        "method.name = montecarlo\ncompare.reference = pinn\n"
        "grid.u_max = 20\ngrid.points = 100\nvolterra.intervals = 500\n"
        "pinn.residual_points = 64\npinn.placement = uniform_random\npinn.placement_seed = 5\npinn.quad_nodes = 16\n"
        "pinn.w_f = 2\npinn.w_g = 3\npinn.optimizer = lbfgs\npinn.max_iterations = 50\npinn.layers = 1,10,1\n"
        "pinn.normalize_input = false\npinn.refit_output = false\npinn.loss_target = 1e-6\n"
        "montecarlo.paths = 500\nmontecarlo.horizon = 100\nmontecarlo.early_stop = 0\nmontecarlo.threads = 2\n"
        "montecarlo.u = 0, 4\nrun.seed = 42\noutput.dir = somewhere\n");
    EXPECT_EQ(cfg.model.c, 2.0);
    EXPECT_EQ(cfg.model.claim.terms().size(), 2u);
    EXPECT_EQ(*cfg.barrier, 8.0);
    EXPECT_EQ(cfg.method, Method::montecarlo);
    EXPECT_EQ(cfg.reference, Method::pinn);
    EXPECT_EQ(cfg.train.placement, Placement::uniform_random);
    EXPECT_EQ(std::get<LbfgsConfig>(cfg.train.optimizer).max_iterations, 50);
    EXPECT_EQ(cfg.train.layer_sizes, (std::vector<int>{1, 10, 1}));
    EXPECT_FALSE(cfg.train.normalize_input);
    EXPECT_EQ(cfg.sim.paths, 500u);
    EXPECT_EQ(cfg.sim_points, (std::vector<double>{0.0, 4.0}));
    EXPECT_EQ(cfg.seed, 42u);
    EXPECT_EQ(cfg.train.seed, 42u);
    EXPECT_EQ(cfg.sim.seed, 42u);
    EXPECT_EQ(*cfg.sim.barrier, 8.0);
    EXPECT_EQ(cfg.output_dir, "somewhere");
}

TEST(ParseConfig, Errors) {
    std::string msg;
    EXPECT_EQ(parse_error_kind("claim.kind = cauchy\ncase.kind = ruin_probability\nmethod.name = volterra\n", &msg),
              ErrorKind::config);
    EXPECT_NE(msg.find("claim.kind"), std::string::npos);

    EXPECT_EQ(parse_error_kind("", &msg), ErrorKind::config);
    EXPECT_NE(msg.find("missing required key"), std::string::npos);

    EXPECT_EQ(parse_error_kind("claim.kind = exponential\ncase.kind = ruin_probability\nmethod.name = volterra\n"
                               "model.cc = 2\n",
                               &msg),
              ErrorKind::config);
    EXPECT_NE(msg.find("line 4"), std::string::npos);
    EXPECT_NE(msg.find("model.cc"), std::string::npos);

    EXPECT_EQ(parse_error_kind("claim.kind = exponential\nthis is not a pair\n", &msg), ErrorKind::config);
    EXPECT_NE(msg.find("line 2"), std::string::npos);

    EXPECT_EQ(parse_error_kind("claim.kind = exponential\nclaim.kind = erlang\n", &msg), ErrorKind::config);
    EXPECT_NE(msg.find("duplicate"), std::string::npos);

    EXPECT_EQ(parse_error_kind("claim.kind = exponential\ncase.kind = ruin_probability\nmethod.name = volterra\n"
                               "model.c = -1\n",
                               &msg),
              ErrorKind::config);
    EXPECT_NE(msg.find("c must be positive"), std::string::npos);

    EXPECT_EQ(parse_error_kind("claim.kind = exponential\ncase.kind = ruin_probability\nmethod.name = volterra\n"
                               "grid.points = 1\n",
                               &msg),
              ErrorKind::config);
    EXPECT_NE(msg.find("grid.points"), std::string::npos);

    EXPECT_EQ(parse_error_kind("Claim.kind = exponential\ncase.kind = ruin_probability\nmethod.name = volterra\n"),
              ErrorKind::config);
    EXPECT_EQ(parse_error_kind("claim.kind = mixed_erlang\nclaim.terms = 0.5:1:1\ncase.kind = ruin_probability\n"
                               "method.name = volterra\n"),
              ErrorKind::config);
}

TEST(Csv, SeventeenDigitRoundTrip) {
    for (double v : {0.1, 2.0 / 3.0, 1e-300, -123456.789, 6.02214076e23}) {
        const std::string s = format_real(v);
        EXPECT_EQ(std::stod(s), v);
    }
    CsvWriter w({"u", "phi"});
    w.row({0.5, 1.0 / 3.0});
    const auto [header, rows] = read_csv(w.str());
    EXPECT_EQ(header, (std::vector<std::string>{"u", "phi"}));
    ASSERT_EQ(rows.size(), 1u);
    EXPECT_EQ(rows[0][1], 1.0 / 3.0);
    EXPECT_EQ(w.str().find('\r'), std::string::npos);
}

TEST(Cli, VolterraSolveIsDeterministicAndRoundTrips) {
    const fs::path dir = scratch_dir("volterra");
    const std::string cfg = std::string(GERBER_SHIU_CONFIGS) + "/volterra_ruin_exponential.cfg";
    ASSERT_EQ(cli("solve --config " + cfg + " --output " + (dir / "a").string(), dir / "log_a"), 0);
    ASSERT_EQ(cli("solve --config " + cfg + " --output " + (dir / "b").string(), dir / "log_b"), 0);
    const std::string a = slurp(dir / "a" / "volterra.csv");
    EXPECT_EQ(a, slurp(dir / "b" / "volterra.csv"));
    EXPECT_EQ(slurp(dir / "a" / "volterra_meta.txt"), slurp(dir / "b" / "volterra_meta.txt"));
    const auto [header, rows] = read_csv(a);
    EXPECT_EQ(header, (std::vector<std::string>{"u", "phi", "dphi"}));
    ASSERT_EQ(rows.size(), 512u);
    for (const auto& row : rows) {
        for (double v : row) EXPECT_EQ(format_real(v), format_real(std::stod(format_real(v))));
    }
    EXPECT_EQ(rows.front()[0], 0.0);
    EXPECT_EQ(rows.back()[0], 30.0);
}

TEST(Cli, PinnSolveDeterministicAndSeedOverride) {
    const fs::path dir = scratch_dir("pinn");
    write(dir / "small.cfg", kSmallPinn);
    const std::string cfg = (dir / "small.cfg").string();
    ASSERT_EQ(cli("solve --config " + cfg + " --output " + (dir / "a").string(), dir / "log"), 0);
    ASSERT_EQ(cli("solve --config " + cfg + " --output " + (dir / "b").string(), dir / "log"), 0);
    ASSERT_EQ(cli("solve --config " + cfg + " --seed 2 --output " + (dir / "c").string(), dir / "log"), 0);
    EXPECT_EQ(slurp(dir / "a" / "pinn.csv"), slurp(dir / "b" / "pinn.csv"));
    EXPECT_EQ(slurp(dir / "a" / "pinn_params.txt"), slurp(dir / "b" / "pinn_params.txt"));
    EXPECT_EQ(slurp(dir / "a" / "pinn_meta.txt"), slurp(dir / "b" / "pinn_meta.txt"));
    EXPECT_NE(slurp(dir / "a" / "pinn.csv"), slurp(dir / "c" / "pinn.csv"));
    EXPECT_NE(slurp(dir / "c" / "pinn_meta.txt").find("seed=2"), std::string::npos);
}

TEST(Cli, NonConvergenceExitCode) {
    const fs::path dir = scratch_dir("nonconv");
    write(dir / "strict.cfg", std::string(kSmallPinn).replace(std::string(kSmallPinn).find("loss_target = 1"), 15,
                                                              "loss_target = 1e-30"));
    EXPECT_EQ(cli("solve --config " + (dir / "strict.cfg").string() + " --output " + (dir / "o").string(), dir / "log"), 3);
    EXPECT_TRUE(fs::exists(dir / "o" / "pinn.csv"));
}

TEST(Cli, ConfigErrorExitCode) {
    const fs::path dir = scratch_dir("badcfg");
    write(dir / "bad.cfg", "claim.kind = cauchy\ncase.kind = ruin_probability\nmethod.name = volterra\n");
    EXPECT_EQ(cli("solve --config " + (dir / "bad.cfg").string(), dir / "log"), 1);
    EXPECT_NE(slurp(dir / "log").find("claim.kind"), std::string::npos);
    write(dir / "badmethod.cfg", "claim.kind = exponential\ncase.kind = ruin_probability\nmethod.name = volterra\n");
    EXPECT_EQ(cli("solve --config " + (dir / "badmethod.cfg").string() + " --method nope", dir / "log"), 1);
}

TEST(Cli, NumericErrorExitCode) {
    const fs::path dir = scratch_dir("numeric");
    write(dir / "coarse.cfg",
          "model.r = 0\nclaim.kind = exponential\ncase.kind = ruin_probability\nmethod.name = volterra\n"
          "grid.u_max = 48\nvolterra.intervals = 16\ngrid.points = 8\n"
          "output.dir = " + (dir / "o").string() + "\n");
    EXPECT_EQ(cli("solve --config " + (dir / "coarse.cfg").string(), dir / "log"), 2);
}

TEST(Cli, SimulateAndCompareWithMonteCarlo) {
    const fs::path dir = scratch_dir("simulate");
    write(dir / "mc.cfg",
          "claim.kind = exponential\ncase.kind = ruin_probability\nmethod.name = montecarlo\ncompare.reference = volterra\n"
          "montecarlo.paths = 4000\nmontecarlo.u = 0, 5\n");
    const std::string cfg = (dir / "mc.cfg").string();
    ASSERT_EQ(cli("simulate --config " + cfg + " --output " + (dir / "a").string(), dir / "log"), 0);
    ASSERT_EQ(cli("simulate --config " + cfg + " --output " + (dir / "b").string(), dir / "log"), 0);
    const std::string a = slurp(dir / "a" / "montecarlo.csv");
    EXPECT_EQ(a, slurp(dir / "b" / "montecarlo.csv"));
    EXPECT_EQ(a.substr(0, a.find('\n')), "u,estimate,std_error,paths,horizon");
    ASSERT_EQ(cli("compare --config " + cfg + " --output " + (dir / "c").string(), dir / "log"), 0);
    const std::string report = slurp(dir / "c" / "compare.csv");
    EXPECT_EQ(report.substr(0, report.find('\n')), "u,phi_a,phi_b,rel_err");
    EXPECT_NE(report.find("max_rel_err="), std::string::npos);
}

TEST(Cli, CompareVolterraResolutions) {
    const fs::path dir = scratch_dir("compare");
    write(dir / "cmp.cfg", "claim.kind = erlang\ncase.kind = deficit_at_ruin\nmethod.name = volterra\n"
                           "compare.reference = pinn\npinn.max_iterations = 10\npinn.layers = 1, 6, 1\n"
                           "pinn.residual_points = 16\npinn.loss_target = 1e3\ngrid.points = 32\n");
    ASSERT_EQ(cli("compare --config " + (dir / "cmp.cfg").string() + " --output " + (dir / "o").string(), dir / "log"), 0);
    const auto report = slurp(dir / "o" / "compare.csv");
    const auto last = report.substr(report.rfind("max_rel_err="));
    EXPECT_GT(std::stod(last.substr(12)), 0.0);
    EXPECT_NE(slurp(dir / "log").find("max_rel_err="), std::string::npos);
}

TEST(Cli, InitialValue) {
    const fs::path dir = scratch_dir("initial");
    write(dir / "iv.cfg", "claim.kind = exponential\ncase.kind = ruin_probability\nmethod.name = volterra\nmodel.alpha = 0\n");
    ASSERT_EQ(cli("initial-value --config " + (dir / "iv.cfg").string() + " --output " + (dir / "o").string(), dir / "log"), 0);
    const std::string out = slurp(dir / "log");
    EXPECT_NE(out.find("phi0="), std::string::npos);
    EXPECT_NE(out.find("kappa="), std::string::npos);
    const auto [header, rows] = read_csv(slurp(dir / "o" / "initial_value.csv"));
    ASSERT_EQ(rows.size(), 1u);
    EXPECT_GT(rows[0][0], 0.0);
    EXPECT_LT(rows[0][0], 2.0 / 3.0);
}

TEST(Cli, UsageErrors) {
    const fs::path dir = scratch_dir("usage");
    EXPECT_NE(cli("", dir / "log"), 0);
    EXPECT_NE(cli("solve --config /nonexistent/file.cfg", dir / "log"), 0);
}
