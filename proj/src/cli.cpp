#include <iostream>

#include <CLI11.hpp>

#include "poiseuille/experiments.hpp"

namespace poiseuille {

namespace {

const char* describe(const std::string& kind) {
    if (kind == "linear-decay") return "Evolve Gaussian data under the linear per-mode flow and record E_k, D_k";
    if (kind == "verify-identities") return "Check the per-mode energy identities on random localized states";
    if (kind == "equivalence-band") return "Record the band of E_k against its norm equivalent";
    if (kind == "rate-sweep") return "Fit decay rates over a (nu, k) grid and regress their scaling";
    if (kind == "nonlinear-bootstrap") return "Run the nonlinear bootstrap experiment at one amplitude";
    return "Sweep nonlinear runs over multiples of the implied threshold";
}

}  // namespace

int cli_main(int argc, char** argv) {
    CLI::App app{"Spectral experiments for perturbations of Poiseuille flow"};
    app.require_subcommand(1);
    std::string config_path;
    std::string out_dir;
    int workers = 1;
    std::uint64_t seed = 0;

    for (const auto& kind : experiment_kinds()) {
        CLI::App* sub = app.add_subcommand(kind, describe(kind));
        sub->add_option("--config", config_path, "JSON config file (defaults for the subcommand if omitted)");
        sub->add_option("--out", out_dir, "Output directory (overrides output_dir)");
        sub->add_option("--workers", workers, "Worker threads for independent cells")->check(CLI::PositiveNumber);
        sub->add_option("--seed", seed, "Random seed (overrides seed)");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitConfig;
    }

    const std::string kind = app.get_subcommands().front()->get_name();
    const CLI::App* sub = app.get_subcommands().front();
    RunConfig config;
    try {
        config = config_path.empty() ? default_config(kind) : load_config(config_path, kind);
        if (config.experiment.kind != kind)
            throw ConfigError("config experiment.kind '" + config.experiment.kind + "' does not match subcommand '" +
                              kind + "'");
        if (sub->count("--out")) config.output_dir = out_dir;
        if (sub->count("--seed")) config.seed = seed;
        config.validate();
    } catch (const std::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    }

    const RunManifest m = run_experiment(config, RunOptions{workers});
    if (m.exit_code == kExitOk) {
        std::cout << kind << ": ok (" << m.files.size() << " files in " << config.output_dir << ")\n";
    } else {
        std::cerr << kind << ": failed with exit code " << m.exit_code << ": " << m.failure << "\n";
    }
    return m.exit_code;
}

}  // namespace poiseuille
