#include "dfsdca/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iostream>
#include <mutex>
#include <set>
#include <sstream>

#include "json.hpp"

namespace dfsdca {

using nlohmann::json;

namespace {

std::string join_lines(const std::vector<std::string>& lines) {
    std::string out = "invalid experiment config:";
    for (const auto& l : lines) out += "\n  - " + l;
    return out;
}

// Collects violations while reading a JSON object so that every problem is
// reported in one pass.
class Reader {
public:
    explicit Reader(std::vector<std::string>& violations) : violations_(violations) {}

    void fail(const std::string& msg) { violations_.push_back(msg); }

    template <typename T>
    std::optional<T> get(const json& obj, const std::string& key, const std::string& where, bool required) {
        const auto it = obj.find(key);
        if (it == obj.end()) {
            if (required) fail(where + key + ": missing");
            return std::nullopt;
        }
        try {
            if constexpr (std::is_same_v<T, double>) {
                if (!it->is_number()) throw std::runtime_error("");
            } else if constexpr (std::is_unsigned_v<T> && !std::is_same_v<T, bool>) {
                if (!it->is_number_unsigned()) throw std::runtime_error("");
            } else if constexpr (std::is_integral_v<T> && !std::is_same_v<T, bool>) {
                if (!it->is_number_integer()) throw std::runtime_error("");
            } else if constexpr (std::is_same_v<T, bool>) {
                if (!it->is_boolean()) throw std::runtime_error("");
            } else if constexpr (std::is_same_v<T, std::string>) {
                if (!it->is_string()) throw std::runtime_error("");
            }
            return it->get<T>();
        } catch (const std::exception&) {
            fail(where + key + ": has the wrong type");
            return std::nullopt;
        }
    }

private:
    std::vector<std::string>& violations_;
};

GeneratorSpec parse_generator(const json& g, Reader& r) {
    const std::string at = "problem.generator.";
    GeneratorSpec spec;
    if (auto family = r.get<std::string>(g, "family", at, true)) {
        try {
            spec.family = parse_generator_family(*family);
        } catch (const Error& e) {
            r.fail(at + "family: " + e.what());
        }
    }
    if (auto n = r.get<std::uint64_t>(g, "n", at, true)) {
        if (*n == 0) r.fail(at + "n: must be >= 1");
        spec.n = *n;
    }
    if (auto d = r.get<std::uint64_t>(g, "d", at, true)) {
        if (*d == 0) r.fail(at + "d: must be >= 1");
        spec.d = *d;
    }
    if (auto lambda = r.get<double>(g, "lambda", at, true)) {
        if (!(*lambda > 0.0)) r.fail(at + "lambda: must be positive");
        spec.lambda = *lambda;
    }
    if (auto seed = r.get<std::uint64_t>(g, "seed", at, false)) spec.seed = *seed;
    if (auto noise = r.get<double>(g, "noise", at, false)) {
        if (!(*noise >= 0.0)) r.fail(at + "noise: must be non-negative");
        spec.noise = *noise;
    }
    if (auto v = r.get<double>(g, "eig_min", at, false)) spec.eig_min = *v;
    if (auto v = r.get<double>(g, "eig_max", at, false)) spec.eig_max = *v;
    if (auto v = r.get<double>(g, "psd_margin", at, false)) {
        if (!(*v >= 0.0)) r.fail(at + "psd_margin: must be non-negative");
        spec.psd_margin = *v;
    }
    if (auto v = r.get<bool>(g, "require_indefinite", at, false)) spec.require_indefinite = *v;
    if (spec.eig_min > spec.eig_max) r.fail(at + "eig_min: exceeds eig_max");
    if (spec.family == GeneratorFamily::indefinite_quadratic && spec.require_indefinite && spec.eig_min >= 0.0)
        r.fail(at + "eig_min: must be negative when require_indefinite is set");
    return spec;
}

DatasetSource parse_dataset(const json& ds, Reader& r, const std::filesystem::path& base_dir) {
    const std::string at = "problem.dataset.";
    DatasetSource src;
    if (auto path = r.get<std::string>(ds, "path", at, true)) {
        src.path = *path;
        if (src.path.is_relative() && !base_dir.empty()) src.path = base_dir / src.path;
    }
    if (auto loss = r.get<std::string>(ds, "loss", at, true)) {
        try {
            src.loss = parse_loss_kind(*loss);
            if (src.loss == LossKind::indefinite_quadratic)
                r.fail(at + "loss: datasets support squared, logistic and smoothed_hinge");
        } catch (const Error& e) {
            r.fail(at + "loss: " + e.what());
        }
    }
    if (auto lambda = r.get<double>(ds, "lambda", at, true)) {
        if (!(*lambda > 0.0)) r.fail(at + "lambda: must be positive");
        src.lambda = *lambda;
    }
    if (auto d = r.get<std::uint64_t>(ds, "d", at, false)) src.d = static_cast<Eigen::Index>(*d);
    return src;
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> violations)
    : Error(join_lines(violations)), violations_(std::move(violations)) {}

ExperimentConfig parse_config_text(const std::string& text, const std::filesystem::path& base_dir) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError({std::string("not valid JSON: ") + e.what()});
    }
    if (!root.is_object()) throw ConfigError({"top level must be an object"});

    std::vector<std::string> violations;
    Reader r(violations);
    ExperimentConfig cfg;

    static const std::set<std::string> known = {"problem", "solver", "eta", "sgd_schedule", "init", "T", "seeds",
                                                "snapshot_every", "output", "workers", "checks"};
    for (const auto& [key, _] : root.items())
        if (!known.count(key)) r.fail(key + ": unknown key");

    const auto problem_it = root.find("problem");
    if (problem_it == root.end() || !problem_it->is_object()) {
        r.fail("problem: missing or not an object");
    } else {
        const bool has_gen = problem_it->contains("generator");
        const bool has_ds = problem_it->contains("dataset");
        if (has_gen == has_ds) {
            r.fail("problem: give exactly one of 'generator' or 'dataset'");
        } else if (has_gen) {
            cfg.problem = parse_generator((*problem_it)["generator"], r);
        } else {
            cfg.problem = parse_dataset((*problem_it)["dataset"], r, base_dir);
        }
    }

    if (auto solver = r.get<std::string>(root, "solver", "", false)) {
        if (*solver == "sdca") cfg.solver = SolverKind::sdca;
        else if (*solver == "sgd") cfg.solver = SolverKind::sgd;
        else r.fail("solver: must be 'sdca' or 'sgd'");
    }

    if (const auto it = root.find("eta"); it != root.end()) {
        if (it->is_string()) {
            const auto s = it->get<std::string>();
            if (s == "auto_convex") cfg.eta = EtaAutoConvex{};
            else if (s == "auto_nonconvex") cfg.eta = EtaAutoNonconvex{};
            else r.fail("eta: must be 'auto_convex', 'auto_nonconvex' or a positive number");
        } else if (it->is_number()) {
            const double eta = it->get<double>();
            if (!(eta > 0.0)) r.fail("eta: explicit step size must be positive");
            cfg.eta = eta;
        } else {
            r.fail("eta: must be 'auto_convex', 'auto_nonconvex' or a positive number");
        }
    }

    if (auto sched = r.get<std::string>(root, "sgd_schedule", "", false)) {
        if (*sched == "constant") cfg.sgd_schedule = SgdSchedule::Kind::constant;
        else if (*sched == "decaying") cfg.sgd_schedule = SgdSchedule::Kind::decaying;
        else r.fail("sgd_schedule: must be 'constant' or 'decaying'");
    }

    if (const auto it = root.find("init"); it != root.end()) {
        if (it->is_string() && it->get<std::string>() == "zero") {
        } else if (it->is_object() && it->contains("gradient_warm") && (*it)["gradient_warm"].is_array()) {
            const auto& arr = (*it)["gradient_warm"];
            Vector w0(static_cast<Eigen::Index>(arr.size()));
            bool ok = true;
            for (std::size_t k = 0; k < arr.size(); ++k) {
                if (!arr[k].is_number()) ok = false;
                else w0[static_cast<Eigen::Index>(k)] = arr[k].get<double>();
            }
            if (!ok) r.fail("init.gradient_warm: entries must be numbers");
            else cfg.init.warm_w0 = std::move(w0);
        } else {
            r.fail("init: must be \"zero\" or {\"gradient_warm\": [w0...]}");
        }
    }

    if (auto T = r.get<std::uint64_t>(root, "T", "", true)) cfg.T = *T;

    if (const auto it = root.find("seeds"); it == root.end()) {
        r.fail("seeds: missing");
    } else if (!it->is_array() || it->empty()) {
        r.fail("seeds: must be a non-empty array of non-negative integers");
    } else {
        std::set<std::uint64_t> unique;
        for (const auto& s : *it) {
            if (!s.is_number_unsigned()) {
                r.fail("seeds: entries must be non-negative integers");
                break;
            }
            cfg.seeds.push_back(s.get<std::uint64_t>());
            if (!unique.insert(cfg.seeds.back()).second)
                r.fail("seeds: duplicate seed " + std::to_string(cfg.seeds.back()));
        }
    }

    if (auto every = r.get<std::uint64_t>(root, "snapshot_every", "", false)) {
        if (*every == 0) r.fail("snapshot_every: must be positive");
        cfg.snapshot_every = *every;
    }
    if (auto out = r.get<std::string>(root, "output", "", false)) cfg.output = *out;
    if (auto workers = r.get<int>(root, "workers", "", false)) {
        if (*workers < 0) r.fail("workers: must be >= 0");
        cfg.workers = *workers;
    }

    if (const auto it = root.find("checks"); it != root.end()) {
        if (!it->is_object()) {
            r.fail("checks: must be an object of booleans");
        } else {
            static const std::set<std::string> known_checks = {"contraction", "evolution", "self_bound",
                                                               "primal_dual", "suboptimality_bound"};
            for (const auto& [key, _] : it->items())
                if (!known_checks.count(key)) r.fail("checks." + key + ": unknown check");
            auto flag = [&](const char* key, bool& dst) {
                if (auto v = r.get<bool>(*it, key, "checks.", false)) dst = *v;
            };
            flag("contraction", cfg.checks.contraction);
            flag("evolution", cfg.checks.evolution);
            flag("self_bound", cfg.checks.self_bound);
            flag("primal_dual", cfg.checks.primal_dual);
            flag("suboptimality_bound", cfg.checks.suboptimality_bound);
        }
    }

    if (cfg.solver == SolverKind::sgd) {
        if (cfg.checks.contraction) r.fail("checks.contraction: only defined for the sdca solver");
        if (cfg.checks.evolution) r.fail("checks.evolution: only defined for the sdca solver");
        if (cfg.checks.primal_dual) r.fail("checks.primal_dual: only defined for the sdca solver");
        if (std::holds_alternative<EtaAutoNonconvex>(cfg.eta))
            r.fail("eta: sgd supports auto_convex or an explicit step size");
    }
    if (cfg.solver == SolverKind::sdca && std::holds_alternative<GeneratorSpec>(cfg.problem)) {
        const auto& gen = std::get<GeneratorSpec>(cfg.problem);
        if (const double* eta = std::get_if<double>(&cfg.eta)) {
            const double beta = *eta * gen.lambda * static_cast<double>(gen.n);
            if (!(beta < 1.0)) r.fail("eta: beta = eta*lambda*n = " + format_real(beta) + " must be < 1");
        }
    }

    if (!violations.empty()) throw ConfigError(std::move(violations));
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError({"cannot read config file '" + path.string() + "'"});
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str(), path.parent_path());
}

Problem build_problem(const ExperimentConfig& config) {
    if (const auto* gen = std::get_if<GeneratorSpec>(&config.problem)) return generate(*gen);
    const auto& ds = std::get<DatasetSource>(config.problem);
    const auto rows = load_libsvm(ds.path, ds.d);
    if (rows.empty()) throw Error("dataset '" + ds.path.string() + "' has no rows");
    return make_linear_problem(ds.loss, rows, ds.lambda);
}

double resolve_eta(const ExperimentConfig& config, const Problem& problem) {
    std::vector<std::string> violations;
    double eta = 0.0;
    if (std::holds_alternative<EtaAutoConvex>(config.eta)) {
        if (problem.convexity() != ConvexityClass::each_convex)
            violations.push_back("eta: auto_convex needs individually convex components; this problem is only "
                                 "average-convex, use auto_nonconvex");
        else
            eta = step_size_convex(problem.smoothness(), problem.lambda(), problem.n());
    } else if (std::holds_alternative<EtaAutoNonconvex>(config.eta)) {
        eta = step_size_nonconvex(problem.smoothness(), problem.lambda(), problem.n());
    } else {
        eta = std::get<double>(config.eta);
    }
    if (violations.empty() && config.solver == SolverKind::sdca) {
        const double beta = eta * problem.lambda() * static_cast<double>(problem.n());
        if (!(beta < 1.0)) violations.push_back("eta: beta = eta*lambda*n = " + format_real(beta) + " must be < 1");
    }
    if (config.checks.self_bound && problem.convexity() != ConvexityClass::each_convex)
        violations.push_back("checks.self_bound: needs individually convex components");
    if (violations.empty() && config.checks.contraction) {
        const double slack = 1.0 + 1e-12;
        const bool convex_ok = problem.convexity() == ConvexityClass::each_convex &&
                               eta <= step_size_convex(problem.smoothness(), problem.lambda(), problem.n()) * slack;
        const bool nonconvex_ok =
            eta <= step_size_nonconvex(problem.smoothness(), problem.lambda(), problem.n()) * slack;
        if (!convex_ok && !nonconvex_ok)
            violations.push_back("checks.contraction: eta = " + format_real(eta) +
                                 " is outside both step-size regimes that guarantee contraction");
    }
    if (!violations.empty()) throw ConfigError(std::move(violations));
    return eta;
}

std::string format_real(double value) {
    if (std::isnan(value)) return "nan";
    if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, value, std::chars_format::general, 17);
    return std::string(buf, res.ptr);
}

void write_trace(std::ostream& out, std::span<const PotentialSnapshot> snapshots) {
    out << kTraceHeader << '\n';
    for (const auto& s : snapshots) {
        out << s.t << ',' << format_real(s.A) << ',' << format_real(s.B) << ',' << format_real(s.C) << ','
            << format_real(s.D) << ',' << format_real(s.suboptimality) << ',' << format_real(s.v_norm_sq) << '\n';
    }
}

void write_trace_file(const std::filesystem::path& path, std::span<const PotentialSnapshot> snapshots) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write trace '" + path.string() + "'");
    write_trace(out, snapshots);
    if (!out) throw Error("write failed for trace '" + path.string() + "'");
}

namespace {

double parse_trace_real(std::string_view token, const std::string& source, std::size_t line) {
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
    if (ec != std::errc() || ptr != token.data() + token.size() || token.empty())
        throw Error(source + ":" + std::to_string(line) + ": bad number '" + std::string(token) + "'");
    return value;
}

}  // namespace

std::vector<PotentialSnapshot> read_trace(std::istream& in, const std::string& source) {
    std::string line;
    if (!std::getline(in, line) || line != kTraceHeader)
        throw Error(source + ": missing trace header '" + std::string(kTraceHeader) + "'");
    std::vector<PotentialSnapshot> out;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::vector<std::string_view> cells;
        std::string_view rest(line);
        for (;;) {
            const auto comma = rest.find(',');
            cells.push_back(rest.substr(0, comma));
            if (comma == std::string_view::npos) break;
            rest.remove_prefix(comma + 1);
        }
        if (cells.size() != 7)
            throw Error(source + ":" + std::to_string(line_no) + ": expected 7 columns, got " +
                        std::to_string(cells.size()));
        PotentialSnapshot s;
        const auto [ptr, ec] = std::from_chars(cells[0].data(), cells[0].data() + cells[0].size(), s.t);
        if (ec != std::errc() || ptr != cells[0].data() + cells[0].size())
            throw Error(source + ":" + std::to_string(line_no) + ": bad iteration '" + std::string(cells[0]) + "'");
        s.A = parse_trace_real(cells[1], source, line_no);
        s.B = parse_trace_real(cells[2], source, line_no);
        s.C = parse_trace_real(cells[3], source, line_no);
        s.D = parse_trace_real(cells[4], source, line_no);
        s.suboptimality = parse_trace_real(cells[5], source, line_no);
        s.v_norm_sq = parse_trace_real(cells[6], source, line_no);
        out.push_back(s);
    }
    return out;
}

std::vector<PotentialSnapshot> read_trace_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open trace '" + path.string() + "'");
    return read_trace(in, path.string());
}

std::vector<PotentialSnapshot> mean_trace(const std::vector<std::vector<PotentialSnapshot>>& traces) {
    if (traces.empty()) return {};
    const std::size_t len = traces.front().size();
    for (const auto& tr : traces)
        if (tr.size() != len) throw Error("mean_trace: traces have different lengths");
    const double count = static_cast<double>(traces.size());
    std::vector<PotentialSnapshot> mean(len);
    std::vector<double> column(traces.size());
    auto average = [&](std::size_t k, auto member) {
        for (std::size_t s = 0; s < traces.size(); ++s) column[s] = traces[s][k].*member;
        return pairwise_sum(column) / count;
    };
    for (std::size_t k = 0; k < len; ++k) {
        const std::uint64_t t = traces.front()[k].t;
        for (const auto& tr : traces)
            if (tr[k].t != t) throw Error("mean_trace: traces use different snapshot grids");
        mean[k].t = t;
        mean[k].A = average(k, &PotentialSnapshot::A);
        mean[k].B = average(k, &PotentialSnapshot::B);
        mean[k].C = average(k, &PotentialSnapshot::C);
        mean[k].D = average(k, &PotentialSnapshot::D);
        mean[k].suboptimality = average(k, &PotentialSnapshot::suboptimality);
        mean[k].v_norm_sq = average(k, &PotentialSnapshot::v_norm_sq);
    }
    return mean;
}

namespace {

constexpr std::size_t kMaxRecordedFailures = 20;
constexpr double kEvolutionTolerance = 1e-10;
constexpr double kSelfBoundTolerance = 1e-9;
constexpr double kSuboptimalityRelTolerance = 1e-9;

struct SeedContext {
    const ExperimentConfig& config;
    const Problem& problem;
    const ReferenceSolution& ref;
    double eta;
    Potential contraction_potential;
    ExecPolicy policy;
};

class FailureLog {
public:
    explicit FailureLog(SeedResult& result) : result_(result) {}
    void add(std::uint64_t t, const std::string& what, double lhs, double rhs) {
        ++result_.failure_count;
        if (result_.failures.size() < kMaxRecordedFailures)
            result_.failures.push_back("seed " + std::to_string(result_.seed) + ", iteration " + std::to_string(t) +
                                       ": " + what + " violated (lhs = " + format_real(lhs) +
                                       ", rhs = " + format_real(rhs) + ")");
    }

private:
    SeedResult& result_;
};

void check_snapshot_bounds(const SeedContext& ctx, const Vector& w, std::uint64_t t, FailureLog& log) {
    const auto& checks = ctx.config.checks;
    if (checks.self_bound) {
        const auto b = check_self_bound(ctx.problem, ctx.ref, w);
        if (!b.holds(kSelfBoundTolerance))
            log.add(t, "self-bound (1/n) sum |grad phi_i(w) - grad phi_i(w*)|^2 <= 2L(P(w) - P* - lambda/2 B)",
                    b.lhs, b.rhs);
    }
    if (checks.suboptimality_bound) {
        const auto b = check_suboptimality_bound(ctx.problem, ctx.ref, w);
        if (!b.holds(kSuboptimalityRelTolerance * std::abs(b.rhs)))
            log.add(t, "P(w) - P* <= (L + lambda)/2 B", b.lhs, b.rhs);
    }
}

SeedResult run_sdca_seed(const SeedContext& ctx, std::uint64_t seed) {
    SeedResult result;
    result.seed = seed;
    FailureLog log(result);
    const auto& cfg = ctx.config;
    const HyperParams hp = HyperParams::for_problem(ctx.problem, ctx.eta);

    SolverState state = cfg.init.warm_w0 ? init_state_gradient_warm(ctx.problem, *cfg.init.warm_w0, seed)
                                         : init_state_zero(ctx.problem, seed);
    double max_v_norm = 0.0;

    auto at_snapshot = [&](const SolverState& s, double v_norm_sq) {
        result.snapshots.push_back(snapshot(s, ctx.problem, ctx.ref, v_norm_sq));
        const auto& snap = result.snapshots.back();
        if (cfg.checks.contraction) {
            const double current = field(snap, ctx.contraction_potential);
            const double expected =
                expected_next_potential(s, ctx.problem, ctx.ref, hp, ctx.contraction_potential, ctx.policy);
            const double bound = (1.0 - hp.eta() * hp.lambda()) * current + 1e-12 * std::max(1.0, current);
            if (!(expected <= bound))
                log.add(s.t,
                        std::string("contraction E[") + std::string(to_string(ctx.contraction_potential)) +
                            "_next] <= (1 - eta lambda) " + std::string(to_string(ctx.contraction_potential)) +
                            " + tol",
                        expected, bound);
        }
        if (cfg.checks.primal_dual) {
            const double residual = primal_dual_residual(s, hp.lambda());
            const double tol = primal_dual_tolerance(s.dim(), s.t, max_v_norm);
            if (!(residual <= tol)) log.add(s.t, "primal-dual relation |w - sum alpha/(lambda n)| <= tol_pd", residual, tol);
        }
        check_snapshot_bounds(ctx, s.w, s.t, log);
    };

    at_snapshot(state, 0.0);
    SolverState previous = cfg.checks.evolution ? state : SolverState{};
    const auto hook = [&](const StepReport& report, const SolverState& s) {
        max_v_norm = std::max(max_v_norm, std::sqrt(report.grad_norm_sq));
        if (cfg.checks.evolution) {
            const auto ev = check_evolution(previous, s, report, ctx.problem, ctx.ref, hp);
            if (!ev.holds_A(kEvolutionTolerance))
                log.add(s.t, "A-evolution identity (relative 1e-10)", ev.measured_dA, ev.predicted_dA);
            if (!ev.holds_B(kEvolutionTolerance))
                log.add(s.t, "B-evolution identity (relative 1e-10)", ev.measured_dB, ev.predicted_dB);
            previous = s;
        }
        if (s.t % cfg.snapshot_every == 0 || s.t == cfg.T) at_snapshot(s, report.grad_norm_sq);
    };
    try {
        run(std::move(state), ctx.problem, hp, cfg.T, hook);
    } catch (const StepError& e) {
        result.error = "seed " + std::to_string(seed) + ": " + e.what();
    }
    return result;
}

PotentialSnapshot sgd_snapshot(const SgdState& s, const Problem& problem, const ReferenceSolution& ref,
                               double v_norm_sq) {
    PotentialSnapshot snap;
    snap.t = s.t;
    snap.A = snap.C = snap.D = std::numeric_limits<double>::quiet_NaN();
    snap.B = (s.w - ref.w_star).squaredNorm();
    snap.suboptimality = objective(problem, s.w) - ref.p_star;
    snap.v_norm_sq = v_norm_sq;
    return snap;
}

SeedResult run_sgd_seed(const SeedContext& ctx, std::uint64_t seed) {
    SeedResult result;
    result.seed = seed;
    FailureLog log(result);
    const auto& cfg = ctx.config;
    const SgdSchedule schedule{cfg.sgd_schedule, ctx.eta};
    SgdState state = init_sgd_state(ctx.problem, cfg.init.warm_w0.value_or(Vector::Zero(ctx.problem.dim())), seed);

    auto at_snapshot = [&](const SgdState& s, double v_norm_sq) {
        result.snapshots.push_back(sgd_snapshot(s, ctx.problem, ctx.ref, v_norm_sq));
        check_snapshot_bounds(ctx, s.w, s.t, log);
    };
    at_snapshot(state, 0.0);
    const auto hook = [&](const StepReport& report, const SgdState& s) {
        if (s.t % cfg.snapshot_every == 0 || s.t == cfg.T) at_snapshot(s, report.grad_norm_sq);
    };
    try {
        sgd_run(std::move(state), ctx.problem, schedule, cfg.T, hook);
    } catch (const StepError& e) {
        result.error = "seed " + std::to_string(seed) + ": " + e.what();
    }
    return result;
}

json snapshot_json(const PotentialSnapshot& s) {
    auto num = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
    return json{{"t", s.t},       {"A", num(s.A)},
                {"B", num(s.B)},  {"C", num(s.C)},
                {"D", num(s.D)},  {"suboptimality", num(s.suboptimality)},
                {"v_norm_sq", num(s.v_norm_sq)}};
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config, const RunOptions& options) {
    if (config.output.empty()) throw ConfigError({"output: missing (set it in the config or pass --out)"});
    if (config.seeds.empty()) throw ConfigError({"seeds: must be a non-empty array"});
    if (config.init.warm_w0) {
        const Eigen::Index d = std::holds_alternative<GeneratorSpec>(config.problem)
                                   ? static_cast<Eigen::Index>(std::get<GeneratorSpec>(config.problem).d)
                                   : -1;
        if (d >= 0 && config.init.warm_w0->size() != d)
            throw ConfigError({"init.gradient_warm: has " + std::to_string(config.init.warm_w0->size()) +
                               " entries, problem dimension is " + std::to_string(d)});
    }

    const Problem problem = build_problem(config);
    if (config.init.warm_w0 && config.init.warm_w0->size() != problem.dim())
        throw ConfigError({"init.gradient_warm: dimension does not match the problem"});
    const double eta = resolve_eta(config, problem);
    const ReferenceSolution ref = solve_reference(problem);

    Potential contraction_potential = lyapunov_potential(problem.convexity());
    if (config.checks.contraction && contraction_potential == Potential::D &&
        eta > step_size_convex(problem.smoothness(), problem.lambda(), problem.n()) * (1.0 + 1e-12))
        contraction_potential = Potential::C;

    std::filesystem::create_directories(config.output);

    const int workers = std::max(1, options.workers.value_or(config.workers) > 0
                                        ? options.workers.value_or(config.workers)
                                        : max_threads());
    const int slots = std::min<int>(workers, static_cast<int>(config.seeds.size()));
    const SeedContext ctx{config, problem, ref, eta, contraction_potential,
                          slots > 1 ? ExecPolicy::serial : ExecPolicy::parallel};

    ExperimentResult result;
    result.eta = eta;
    result.seeds.resize(config.seeds.size());
    std::mutex io_mutex;
    const auto count = static_cast<std::ptrdiff_t>(config.seeds.size());

#pragma omp parallel for num_threads(slots) schedule(dynamic, 1)
    for (std::ptrdiff_t k = 0; k < count; ++k) {
        const std::uint64_t seed = config.seeds[static_cast<std::size_t>(k)];
        SeedResult seed_result;
        try {
            seed_result = config.solver == SolverKind::sdca ? run_sdca_seed(ctx, seed) : run_sgd_seed(ctx, seed);
            write_trace_file(config.output / ("trace_seed_" + std::to_string(seed) + ".csv"), seed_result.snapshots);
        } catch (const std::exception& e) {
            seed_result.seed = seed;
            seed_result.error = "seed " + std::to_string(seed) + ": " + e.what();
        }
        if (!options.quiet) {
            std::lock_guard<std::mutex> lock(io_mutex);
            std::cout << "seed " << seed << ": " << seed_result.snapshots.size() << " snapshots, "
                      << seed_result.failure_count << " check failures"
                      << (seed_result.error.empty() ? "" : " (aborted: " + seed_result.error + ")") << '\n';
        }
        result.seeds[static_cast<std::size_t>(k)] = std::move(seed_result);
    }

    std::vector<std::vector<PotentialSnapshot>> completed;
    json failures = json::array();
    std::uint64_t failure_count = 0;
    for (const auto& s : result.seeds) {
        if (s.error.empty()) completed.push_back(s.snapshots);
        else failures.push_back(s.error);
        for (const auto& f : s.failures) failures.push_back(f);
        failure_count += s.failure_count;
    }
    result.passed = failure_count == 0 && completed.size() == result.seeds.size();

    result.rate_field = config.solver == SolverKind::sdca ? lyapunov_potential(problem.convexity()) : Potential::B;
    json rates = json::object();
    if (!completed.empty()) {
        result.mean = mean_trace(completed);
        write_trace_file(config.output / "mean_trace.csv", result.mean);
        for (Potential p : {Potential::A, Potential::B, Potential::C, Potential::D, Potential::suboptimality}) {
            try {
                const double rate = fit_decay_rate(result.mean, p);
                rates[std::string(to_string(p))] = rate;
                if (p == result.rate_field) result.decay_rate = rate;
            } catch (const Error&) {
                rates[std::string(to_string(p))] = nullptr;
            }
        }
    }

    json checks_enabled = json::array();
    if (config.checks.contraction) checks_enabled.push_back("contraction");
    if (config.checks.evolution) checks_enabled.push_back("evolution");
    if (config.checks.self_bound) checks_enabled.push_back("self_bound");
    if (config.checks.primal_dual) checks_enabled.push_back("primal_dual");
    if (config.checks.suboptimality_bound) checks_enabled.push_back("suboptimality_bound");

    json traces = json::array();
    for (const auto seed : config.seeds) traces.push_back("trace_seed_" + std::to_string(seed) + ".csv");

    json summary{
        {"solver", config.solver == SolverKind::sdca ? "sdca" : "sgd"},
        {"n", problem.n()},
        {"d", problem.dim()},
        {"lambda", problem.lambda()},
        {"L", problem.smoothness()},
        {"convexity_class", std::string(to_string(problem.convexity()))},
        {"eta", eta},
        {"beta", eta * problem.lambda() * static_cast<double>(problem.n())},
        {"T", config.T},
        {"seeds", config.seeds},
        {"reference",
         {{"method", std::string(to_string(ref.method))}, {"residual", ref.residual}, {"p_star", ref.p_star}}},
        {"rate_field", std::string(to_string(result.rate_field))},
        {"decay_rate", result.decay_rate ? json(*result.decay_rate) : json(nullptr)},
        {"theoretical_rate", -eta * problem.lambda()},
        {"decay_rates", rates},
        {"final_mean", result.mean.empty() ? json(nullptr) : snapshot_json(result.mean.back())},
        {"traces", traces},
        {"mean_trace", completed.empty() ? json(nullptr) : json("mean_trace.csv")},
        {"checks", {{"enabled", checks_enabled}, {"failure_count", failure_count}, {"failures", failures}}},
        {"passed", result.passed},
    };
    result.summary_path = config.output / "summary.json";
    std::ofstream out(result.summary_path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write summary '" + result.summary_path.string() + "'");
    out << summary.dump(2) << '\n';
    return result;
}

}  // namespace dfsdca
