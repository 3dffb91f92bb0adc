#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "jdc/runner.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Concave-distance contraction toolkit for jump diffusions"};
    app.require_subcommand(1, 1);

    std::string config;
    std::string out_dir;
    int workers = -1;
    long long seed = -1;

    for (const auto& name : jdc::subcommands()) {
        CLI::App* sub = app.add_subcommand(name, "run the " + name + " pipeline");
        sub->add_option("--config,-c", config, "INI configuration file")->required()->check(CLI::ExistingFile);
        sub->add_option("--out,-o", out_dir, "output directory");
        sub->add_option("--workers,-w", workers, "worker threads (0: all cores)")->check(CLI::NonNegativeNumber);
        sub->add_option("--seed,-s", seed, "seed override")->check(CLI::NonNegativeNumber);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? jdc::kExitOk : jdc::kExitConfig;
    }

    jdc::Overrides ov;
    if (seed >= 0) ov.seed = static_cast<std::uint64_t>(seed);
    if (workers >= 0) ov.workers = workers;
    if (!out_dir.empty()) ov.out_dir = out_dir;
    const std::string name = app.get_subcommands().front()->get_name();
    return jdc::run_from_file(name, config, ov, std::cout, std::cerr);
}
