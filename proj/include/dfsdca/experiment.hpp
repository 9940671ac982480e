#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "dfsdca/diagnostics.hpp"
#include "dfsdca/problems.hpp"
#include "dfsdca/sgd.hpp"

namespace dfsdca {

struct DatasetSource {
    std::filesystem::path path;
    LossKind loss = LossKind::squared;
    double lambda = 1.0;
    std::optional<Eigen::Index> d;
};

enum class SolverKind { sdca, sgd };

struct EtaAutoConvex {};
struct EtaAutoNonconvex {};
using EtaChoice = std::variant<EtaAutoConvex, EtaAutoNonconvex, double>;

struct ChecksConfig {
    bool contraction = false;          // enumerated E[C or D] <= (1 - eta lambda) * current, at snapshots
    bool evolution = false;            // single-step A/B identities, every step
    bool self_bound = false;           // gradient-difference bound at snapshots (individually convex only)
    bool primal_dual = false;          // w = (1/(lambda n)) sum alpha_i at snapshots
    bool suboptimality_bound = false;  // P(w) - P* <= (L + lambda)/2 B at snapshots

    bool any() const { return contraction || evolution || self_bound || primal_dual || suboptimality_bound; }
};

// Starting point: zero pseudo-duals (SGD: w = 0), or gradient-warm duals
// alpha_i = -grad phi_i(w0) (SGD: w = w0).
struct InitConfig {
    std::optional<Vector> warm_w0;
};

struct ExperimentConfig {
    std::variant<GeneratorSpec, DatasetSource> problem;
    SolverKind solver = SolverKind::sdca;
    EtaChoice eta = EtaAutoConvex{};
    SgdSchedule::Kind sgd_schedule = SgdSchedule::Kind::constant;
    InitConfig init;
    std::uint64_t T = 0;
    std::vector<std::uint64_t> seeds;
    std::uint64_t snapshot_every = 1;
    std::filesystem::path output;
    int workers = 0;  // 0 = one per available core
    ChecksConfig checks;
};

// Lists every violation found, one per line.
class ConfigError : public Error {
public:
    explicit ConfigError(std::vector<std::string> violations);
    const std::vector<std::string>& violations() const { return violations_; }

private:
    std::vector<std::string> violations_;
};

// Relative dataset paths resolve against base_dir; output stays relative to the
// working directory.
ExperimentConfig parse_config_text(const std::string& text, const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);

Problem build_problem(const ExperimentConfig& config);

// Resolves the configured step size and validates it against the problem
// (beta < 1, and the auto_convex rule only on individually convex problems).
double resolve_eta(const ExperimentConfig& config, const Problem& problem);

// CSV trace: header "t,A,B,C,D,suboptimality,v_norm_sq", LF endings, reals
// in 17 significant digits.
inline constexpr const char* kTraceHeader = "t,A,B,C,D,suboptimality,v_norm_sq";
std::string format_real(double value);
void write_trace(std::ostream& out, std::span<const PotentialSnapshot> snapshots);
void write_trace_file(const std::filesystem::path& path, std::span<const PotentialSnapshot> snapshots);
std::vector<PotentialSnapshot> read_trace(std::istream& in, const std::string& source = "<stream>");
std::vector<PotentialSnapshot> read_trace_file(const std::filesystem::path& path);

// Per-t mean over seeds; all traces must share the same t grid.
std::vector<PotentialSnapshot> mean_trace(const std::vector<std::vector<PotentialSnapshot>>& traces);

struct SeedResult {
    std::uint64_t seed = 0;
    std::vector<PotentialSnapshot> snapshots;
    std::vector<std::string> failures;
    std::uint64_t failure_count = 0;
    std::string error;  // set when the run itself aborted
};

struct ExperimentResult {
    std::vector<SeedResult> seeds;
    std::vector<PotentialSnapshot> mean;
    Potential rate_field = Potential::D;
    std::optional<double> decay_rate;
    double eta = 0.0;
    bool passed = true;
    std::filesystem::path summary_path;
};

struct RunOptions {
    bool quiet = true;
    std::optional<int> workers;
};

// Runs every seed (in parallel worker slots), writes trace_seed_<seed>.csv,
// mean_trace.csv and summary.json into config.output.
ExperimentResult run_experiment(const ExperimentConfig& config, const RunOptions& options = {});

}  // namespace dfsdca
