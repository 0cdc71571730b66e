#include <CLI11.hpp>

#include "commands.hpp"

int main(int argc, char** argv) {
    CLI::App app{"certified-robustness toolkit for small classifier ensembles"};
    app.require_subcommand(1);

    enscert::cli::GlobalOptions opts;
    uint64_t seed = 0;
    int jobs = 0;

    auto add_common = [&](CLI::App* sub, bool needs_config) {
        auto* c = sub->add_option("--config", opts.config_path, "JSON run configuration");
        if (needs_config) c->required()->check(CLI::ExistingFile);
        sub->add_option("--out", opts.out_dir, "output directory (overrides config)");
        sub->add_option("--seed", seed, "seed override")->each([&](const std::string&) {
            opts.seed = seed;
        });
        sub->add_option("--jobs", jobs, "worker threads (overrides config)")
            ->each([&](const std::string&) { opts.jobs = jobs; });
    };

    auto* train = app.add_subcommand("train", "train ensemble members");
    add_common(train, true);
    auto* certify = app.add_subcommand("certify", "randomized-smoothing certification");
    add_common(certify, true);
    auto* conditions =
        app.add_subcommand("conditions", "analytic robustness-condition reports");
    add_common(conditions, true);
    auto* simulate = app.add_subcommand("simulate", "statistical-robustness simulations");
    add_common(simulate, true);
    auto* eval = app.add_subcommand("eval", "recompute curves from a records CSV");
    add_common(eval, true);

    CLI11_PARSE(app, argc, argv);

    try {
        if (train->parsed()) return enscert::cli::cmd_train(opts);
        if (certify->parsed()) return enscert::cli::cmd_certify(opts);
        if (conditions->parsed()) return enscert::cli::cmd_conditions(opts);
        if (simulate->parsed()) return enscert::cli::cmd_simulate(opts);
        if (eval->parsed()) return enscert::cli::cmd_eval(opts);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 1;
}
