// Batch front-end: bmeig CONFIG.yaml [--h H] [--output DIR] [--threads N]
//                                    [--seed S] [--solver-tol TOL]

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

#include "bmeig/cli.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Brunn-Minkowski eigenvalue toolkit"};
    app.set_help_flag("--help", "print this help and exit");
    std::string config_path;
    std::string h_text;
    bmeig::ConfigOverrides ov;
    app.add_option("config", config_path, "YAML run configuration")->required();
    app.add_option("--h", h_text, "grid spacing, a number or a ratio such as 1/64");
    app.add_option("--output", ov.output, "output directory");
    app.add_option("--threads", ov.threads, "worker threads");
    app.add_option("--seed", ov.seed, "seed for sampled checks");
    app.add_option("--solver-tol", ov.solver_tol, "eigensolver relative residual tolerance");
    app.set_version_flag("--version", bmeig::cli::kVersion);
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : bmeig::exit_code::config;
    }

    try {
        if (!h_text.empty()) {
            const YAML::Node n = YAML::Load(h_text);
            ov.h = bmeig::detail::number(n, "--h");
        }
        std::ifstream in(config_path);
        if (!in) {
            std::cerr << "error: cannot read " << config_path << '\n';
            return bmeig::exit_code::io;
        }
        std::stringstream text;
        text << in.rdbuf();
        const bmeig::RunConfig cfg = bmeig::parse_config(text.str(), ov);
        return bmeig::cli::run(cfg, std::cout);
    } catch (const bmeig::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return bmeig::exit_code_for(e.kind());
    } catch (const YAML::Exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return bmeig::exit_code::config;
    }
}
