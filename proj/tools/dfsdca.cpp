// Experiment runner for dual-free SDCA.
//
//   dfsdca run <config.json> [--seed-override S ...] [--out DIR] [--workers N] [--quiet]
//   dfsdca summarize <trace.csv> [...] [--field D]
//
// Exit status: 0 success, 1 an enabled check failed or a run aborted,
// 2 invalid config or usage, 3 other runtime error.

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dfsdca/experiment.hpp"

namespace {

int cmd_run(const std::string& config_path, const std::vector<std::uint64_t>& seed_override,
            const std::string& out_dir, std::optional<int> workers, bool quiet) {
    dfsdca::ExperimentConfig config = dfsdca::load_config(config_path);
    if (!seed_override.empty()) config.seeds = seed_override;
    if (!out_dir.empty()) config.output = out_dir;

    const auto result = dfsdca::run_experiment(config, {quiet, workers});
    if (!quiet) {
        std::cout << "eta = " << dfsdca::format_real(result.eta) << '\n';
        if (result.decay_rate)
            std::cout << "decay rate of mean " << dfsdca::to_string(result.rate_field) << " = "
                      << dfsdca::format_real(*result.decay_rate) << " per iteration\n";
        std::cout << "summary: " << result.summary_path.string() << '\n';
    }
    for (const auto& seed : result.seeds) {
        if (!seed.error.empty()) std::cerr << "error: " << seed.error << '\n';
        for (const auto& f : seed.failures) std::cerr << "check failed: " << f << '\n';
        if (seed.failure_count > seed.failures.size())
            std::cerr << "seed " << seed.seed << ": " << (seed.failure_count - seed.failures.size())
                      << " further check failures not shown\n";
    }
    return result.passed ? 0 : 1;
}

int cmd_summarize(const std::vector<std::string>& paths, const std::string& field_name) {
    std::vector<std::vector<dfsdca::PotentialSnapshot>> traces;
    for (const auto& p : paths) traces.push_back(dfsdca::read_trace_file(p));
    const auto mean = dfsdca::mean_trace(traces);
    const auto field = dfsdca::parse_potential(field_name);
    std::cout << "traces: " << traces.size() << ", snapshots: " << mean.size() << '\n';
    if (!mean.empty()) {
        const auto& last = mean.back();
        std::cout << "final mean at t=" << last.t << ": " << field_name << " = "
                  << dfsdca::format_real(dfsdca::field(last, field)) << '\n';
    }
    std::cout << "decay_rate(" << field_name << ") = " << dfsdca::format_real(dfsdca::fit_decay_rate(mean, field))
              << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Dual-free SDCA experiment runner"};
    app.require_subcommand(1);

    std::string config_path;
    std::vector<std::uint64_t> seed_override;
    std::string out_dir;
    int workers = 0;
    bool quiet = false;
    auto* run = app.add_subcommand("run", "Run the experiment described by a JSON config");
    run->add_option("config", config_path, "Experiment config file")->required()->check(CLI::ExistingFile);
    run->add_option("--seed-override", seed_override, "Replace the config's seed list");
    run->add_option("--out", out_dir, "Output directory (overrides the config)");
    auto* workers_opt = run->add_option("--workers", workers, "Parallel seed slots (0 = all cores)")
                            ->check(CLI::NonNegativeNumber);
    run->add_flag("--quiet", quiet, "Suppress progress output");

    std::vector<std::string> trace_paths;
    std::string field = "D";
    auto* summarize = app.add_subcommand("summarize", "Fit the decay rate of the seed-mean of trace files");
    summarize->add_option("traces", trace_paths, "Trace CSV files")->required()->check(CLI::ExistingFile);
    summarize->add_option("--field", field, "A, B, C, D or suboptimality");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    try {
        if (*run)
            return cmd_run(config_path, seed_override, out_dir,
                           workers_opt->count() ? std::optional<int>(workers) : std::nullopt, quiet);
        return cmd_summarize(trace_paths, field);
    } catch (const dfsdca::ConfigError& e) {
        std::cerr << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    }
}
