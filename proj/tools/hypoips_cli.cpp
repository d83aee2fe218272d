// hypoips: simulate / estimate / experiment / asymptotics from a JSON config.
//
// Exit codes: 0 success, 2 configuration error, 3 every replicate failed
// numerically, 1 anything else.

#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "hypoips/experiment.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitAllFailed = 3;

struct Flags {
    std::string config;
    std::string out;
    std::optional<int> workers;
    std::optional<std::uint64_t> seed;
};

void add_flags(CLI::App* sub, Flags& f)
{
    sub->add_option("--config", f.config, "JSON config file")->required();
    sub->add_option("--out", f.out, "output directory (overrides output_dir)");
    sub->add_option("--workers", f.workers, "worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--seed", f.seed, "base seed (overrides seed)");
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Parameter estimation for weakly interacting hypoelliptic particle systems"};
    app.require_subcommand(1);
    Flags flags;
    auto* sim = app.add_subcommand("simulate", "write replicate datasets rep{k}.csv with metadata");
    auto* est = app.add_subcommand("estimate", "estimate parameters from one dataset");
    auto* exp = app.add_subcommand("experiment", "replicate study: estimates, summary and boxplot data");
    auto* asy = app.add_subcommand("asymptotics", "plug-in precision matrices and CLT diagnostic");
    for (auto* s : {sim, est, exp, asy}) {
        add_flags(s, flags);
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitConfig;
    }

    try {
        hypoips::ExperimentConfig cfg = hypoips::load_config(flags.config);
        if (flags.seed) {
            cfg.seed = *flags.seed;
            cfg.design.seed = *flags.seed;
        }
        if (flags.workers) {
            cfg.workers = *flags.workers;
        }
        if (!flags.out.empty()) {
            cfg.output_dir = flags.out;
        }
        const std::filesystem::path out = cfg.output_dir;

        hypoips::RunOutcome r;
        if (sim->parsed()) {
            r = hypoips::run_simulate(cfg, out);
        } else if (est->parsed()) {
            r = hypoips::run_estimate(cfg, out);
        } else if (exp->parsed()) {
            r = hypoips::run_experiment(cfg, out);
        } else {
            r = hypoips::run_asymptotics(cfg, out);
        }
        if (r.failed > 0) {
            std::cerr << r.failed << " of " << r.attempted << " runs failed; see " << out.string() << "\n";
        }
        return r.all_failed() ? kExitAllFailed : 0;
    } catch (const hypoips::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
