#include "mixweak/cli.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv)
{
    namespace cli = mixweak::cli;

    CLI::App app{"Dyadic mixed weak-type experiments"};
    app.require_subcommand(1);

    std::string config;
    std::string out = ".";
    std::uint64_t seed = 0;
    unsigned threads = 1;
    double tau = 0.0;
    double cprime = 0.0;

    for (const auto& name : cli::subcommands())
    {
        auto* sub = app.add_subcommand(name);
        sub->add_option("--config", config, "scenario file (JSON)")->required()->check(CLI::ExistingFile);
        sub->add_option("--out", out, "output directory");
        sub->add_option("--seed", seed, "base seed for random elements without their own seed");
        sub->add_option("--threads", threads, "worker threads for sweeps")->check(CLI::Range(1u, 256u));
        sub->add_option("--tau", tau, "reverse Hoelder constant tau")->check(CLI::PositiveNumber);
        sub->add_option("--cprime", cprime, "constant c' in K0 = c' [u]_A1 log([v]_A1 + e)")->check(CLI::PositiveNumber);
    }

    try
    {
        app.parse(argc, argv);
    }
    catch (const CLI::ParseError& e)
    {
        const int code = app.exit(e);
        return code == 0 ? 0 : cli::exit_config_error;
    }

    auto* sub = app.get_subcommands().front();
    cli::Overrides overrides;
    if (sub->count("--seed"))
        overrides.seed = seed;
    if (sub->count("--threads"))
        overrides.threads = threads;
    if (sub->count("--tau"))
        overrides.tau = tau;
    if (sub->count("--cprime"))
        overrides.cprime = cprime;

    try
    {
        return cli::run_from_file(sub->get_name(), config, out, overrides, std::cerr);
    }
    catch (const std::exception& e)
    {
        std::cerr << "error: " << e.what() << "\n";
        return cli::exit_invariant_failure;
    }
}
