#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "gerber_shiu/config.hpp"
#include "gerber_shiu/error.hpp"
#include "gerber_shiu/experiment.hpp"

namespace gs = gerber_shiu;

int main(int argc, char** argv) {
    CLI::App app{"Gerber-Shiu functions by PINN, Volterra marching and Monte Carlo"};
    app.require_subcommand(1, 1);
    std::string config_path;
    std::string output_dir;
    std::string method;
    std::uint64_t seed = 0;

    for (const char* name : {"solve", "initial-value", "simulate", "compare", "reproduce"}) {
        auto* sub = app.add_subcommand(name);
        sub->add_option("--config", config_path, "experiment config file")->required()->check(CLI::ExistingFile);
        sub->add_option("--output", output_dir, "output directory (overrides output.dir)");
        sub->add_option("--seed", seed, "seed (overrides run.seed)");
        sub->add_option("--method", method, "pinn, volterra or montecarlo (overrides method.name)");
    }
    CLI11_PARSE(app, argc, argv);
    const std::string command = app.get_subcommands().front()->get_name();
    const auto* sub = app.get_subcommands().front();

    try {
        std::ifstream in(config_path, std::ios::binary);
        std::ostringstream text;
        text << in.rdbuf();
        gs::ExperimentConfig cfg = gs::parse_config(text.str());
        if (sub->count("--output")) cfg.output_dir = output_dir;
        if (sub->count("--seed")) gs::set_seed(cfg, seed);
        if (sub->count("--method")) cfg.method = gs::detail::parse_method("--method", method);
        const int code = gs::run(command, cfg, std::cout, std::cerr);
        if (code != 0) std::cerr << "error: at least one solve did not meet its convergence criteria\n";
        return code;
    } catch (const gs::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return e.exit_code();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
}
