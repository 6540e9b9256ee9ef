#include "volstop/cli.hpp"

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "volstop/chain.hpp"
#include "volstop/config.hpp"
#include "volstop/csv.hpp"
#include "volstop/errors.hpp"
#include "volstop/models.hpp"
#include "volstop/montecarlo.hpp"
#include "volstop/stopping.hpp"
#include "volstop/timechange.hpp"
#include "volstop/version.hpp"

namespace volstop {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct CliOptions {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
    int threads = 0;  // 0 = not given on the command line
};

// Precedence: --threads flag, then VOLSTOP_THREADS, then 1. The thread count
// is deliberately not a config key: results are a function of the config
// bytes alone, threads only change wall time.
int resolve_threads(int flag_value) {
    if (flag_value > 0) return flag_value;
    if (const char* env = std::getenv("VOLSTOP_THREADS")) {
        char* end = nullptr;
        long v = std::strtol(env, &end, 10);
        if (end == env || *end != '\0' || v <= 0)
            throw Error(ErrorCode::BadConfig, "VOLSTOP_THREADS must be a positive integer, got \"" +
                                                  std::string(env) + "\"");
        return static_cast<int>(v);
    }
    return 1;
}

struct Run {
    RunConfig cfg;
    fs::path out;
    int threads = 1;
};

Run make_run(const CliOptions& opt) {
    Run run;
    run.cfg = load_config(opt.config_path);
    if (opt.seed) run.cfg.mc.seed = *opt.seed;
    if (opt.out_dir) run.cfg.output.directory = *opt.out_dir;
    run.threads = resolve_threads(opt.threads);
    run.out = fs::path(run.cfg.output.directory);
    std::error_code ec;
    fs::create_directories(run.out, ec);
    if (ec) throw Error(ErrorCode::BadConfig, "cannot create output directory " + run.out.string());
    return run;
}

// Two-space indented, trailing newline, keys in nlohmann's sorted order, so
// reruns of the same config are byte-identical.
void write_json(const fs::path& path, const json& j) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error(ErrorCode::BadConfig, "cannot open " + path.string() + " for writing");
    f << j.dump(2) << '\n';
}

std::string model_name(const RunConfig& cfg) {
    switch (cfg.model.kind) {
        case RunConfig::ModelKind::Chain: return "chain";
        case RunConfig::ModelKind::HullWhite: return "hull-white";
        case RunConfig::ModelKind::Heston: return "heston";
    }
    return "unknown";
}

ValueSurface solve_surface(const Run& run, const StoppingProblem& problem,
                           std::vector<double>* grid_out = nullptr) {
    std::vector<double> grid = make_log_grid(run.cfg.problem.strike, run.cfg.solver.grid_points,
                                             run.cfg.solver.grid_decades);
    ValueSurface surface =
        solve_value_iteration(problem, grid, run.cfg.solver.tol, run.cfg.solver.max_iters);
    if (grid_out) *grid_out = std::move(grid);
    return surface;
}

int cmd_price(const Run& run) {
    StoppingProblem problem = run.cfg.build_problem();
    ValueSurface surface = solve_surface(run, problem);
    ThresholdVector thresholds =
        extract_thresholds(surface, problem.gain, run.cfg.solver.contact_tol);

    const fs::path surface_path = run.out / "value_surface.csv";
    const fs::path thresholds_path = run.out / "thresholds.csv";
    {
        const std::string cols[] = {"x", "y_state", "v"};
        CsvWriter csv(surface_path.string(), cols);
        for (std::size_t i = 0; i < surface.state_levels.size(); ++i)
            for (std::size_t j = 0; j < surface.x_grid.size(); ++j) {
                const double row[] = {surface.x_grid[j], surface.state_levels[i],
                                      surface.v[i][j]};
                csv.row(row);
            }
    }
    {
        const std::string cols[] = {"y_state", "b"};
        CsvWriter csv(thresholds_path.string(), cols);
        for (std::size_t i = 0; i < thresholds.levels.size(); ++i) {
            const double row[] = {surface.state_levels[i], thresholds.levels[i]};
            csv.row(row);
        }
    }

    json meta;
    meta["command"] = "price";
    meta["revision"] = kBuildRevision;
    meta["model"] = model_name(run.cfg);
    meta["n_states"] = surface.state_levels.size();
    meta["iterations"] = surface.iterations;
    meta["residual"] = surface.residual;
    meta["solver_tol"] = surface.solver_tol;
    meta["contact_tol"] = thresholds.contact_tol;
    meta["step_dt"] = surface.step_dt;
    meta["grid"] = {{"points", surface.x_grid.size()},
                    {"x_min", surface.x_grid.front()},
                    {"x_max", surface.x_grid.back()},
                    {"decades", run.cfg.solver.grid_decades}};
    write_json(run.out / "metadata.json", meta);

    for (std::size_t i = 0; i < thresholds.levels.size(); ++i)
        std::cout << "state " << i << " (y = " << format_full(surface.state_levels[i])
                  << "): threshold " << format_full(thresholds.levels[i]) << "\n";
    std::cout << "converged in " << surface.iterations << " iterations, residual "
              << format_full(surface.residual) << "\n";
    std::cout << "wrote " << surface_path.string() << ", " << thresholds_path.string() << ", "
              << (run.out / "metadata.json").string() << "\n";
    return 0;
}

int cmd_verify_monotone(const Run& run) {
    StoppingProblem problem = run.cfg.build_problem();
    ValueSurface surface = solve_surface(run, problem);
    MonotonicityReport report = check_monotone_surface(surface);
    const double tol = 10.0 * run.cfg.solver.tol;
    const bool pass = report.passes(tol);

    json j;
    j["check"] = "monotone";
    j["revision"] = kBuildRevision;
    j["max_gap"] = report.max_gap;
    j["state_index"] = report.state_index;
    j["x_at_max"] = report.x_at_max;
    j["cells_checked"] = report.cells_checked;
    j["tolerance"] = tol;
    j["pass"] = pass;
    write_json(run.out / "verify_monotone.json", j);

    std::cout << (pass ? "PASS" : "FAIL") << " monotone: max gap "
              << format_full(report.max_gap) << " over " << report.cells_checked
              << " cells (tolerance " << format_full(tol) << ")\n";
    return pass ? 0 : 1;
}

int cmd_verify_coupling(const Run& run) {
    McConfig mc = run.cfg.build_mc(run.threads);
    json j;
    j["check"] = "coupling";
    j["revision"] = kBuildRevision;
    j["model"] = model_name(run.cfg);

    PairedReport report;
    if (run.cfg.is_chain()) {
        if (!run.cfg.mc.y0_high_index)
            throw Error(ErrorCode::BadConfig, "verify coupling needs mc.y0_high_index");
        StoppingProblem problem = run.cfg.build_problem();
        // Refuse before the solve: the coupled device only exists for
        // skip-free chains.
        if (!is_tridiagonal(problem.chain().generator))
            throw Error(ErrorCode::NotSkipFree,
                        "coupled verification requires a skip-free (tridiagonal) generator");
        ValueSurface surface = solve_surface(run, problem);
        ThresholdVector thresholds =
            extract_thresholds(surface, problem.gain, run.cfg.solver.contact_tol);
        StoppingRule rule = StoppingRule::from_thresholds(thresholds);
        report = verify_monotonicity_coupled(problem, run.cfg.mc.x0, run.cfg.mc.y0_index,
                                             *run.cfg.mc.y0_high_index, rule, mc);
        j["y_lo_index"] = run.cfg.mc.y0_index;
        j["y_hi_index"] = *run.cfg.mc.y0_high_index;
        j["payoff_gap_mean"] = report.payoff_gap.mean;
        j["payoff_gap_std_error"] = report.payoff_gap.std_error;
        j["payoff_violations"] = report.payoff_violations;
        j["max_payoff_violation"] = report.max_payoff_violation;
        j["truncated_pairs"] = report.truncated_pairs;
    } else {
        if (!run.cfg.mc.y0_high)
            throw Error(ErrorCode::BadConfig, "verify coupling needs mc.y0_high");
        DiffusionVolModel model = run.cfg.build_diffusion();
        report = verify_monotonicity_coupled(model, run.cfg.mc.y0, *run.cfg.mc.y0_high,
                                             run.cfg.mc.coupling_horizon, mc);
        j["y_lo"] = run.cfg.mc.y0;
        j["y_hi"] = *run.cfg.mc.y0_high;
        j["horizon"] = run.cfg.mc.coupling_horizon;
    }

    const bool pass = report.ordered();
    j["n_pairs"] = report.n_pairs;
    j["order_checks"] = report.order_checks;
    j["vol_order_violations"] = report.vol_order_violations;
    j["gamma_order_violations"] = report.gamma_order_violations;
    j["pass"] = pass;
    write_json(run.out / "verify_coupling.json", j);

    std::cout << (pass ? "PASS" : "FAIL") << " coupling: " << report.n_pairs << " pairs, "
              << report.order_checks << " order checks, " << report.vol_order_violations
              << " vol / " << report.gamma_order_violations << " clock / "
              << report.payoff_violations << " payoff violations\n";
    return pass ? 0 : 1;
}

int cmd_verify_continuity(const Run& run) {
    if (run.cfg.is_chain())
        throw Error(ErrorCode::BadConfig,
                    "verify continuity probes a diffusion volatility model; configure "
                    "model.kind = hullwhite or heston");
    DiffusionVolModel model = run.cfg.build_diffusion();
    McConfig mc = run.cfg.build_mc(run.threads);
    ConvergenceReport report = probe_continuity(model, run.cfg.mc.y0, run.cfg.mc.direction,
                                                run.cfg.mc.n_levels, run.cfg.mc.t_probe, mc);
    const double rel_tol = 1e-3;
    const bool pass = report.ordering_violations == 0 && report.converged(rel_tol);

    json j;
    j["check"] = "continuity";
    j["revision"] = kBuildRevision;
    j["model"] = model_name(run.cfg);
    j["y0"] = run.cfg.mc.y0;
    j["t_probe"] = run.cfg.mc.t_probe;
    j["direction"] = run.cfg.mc.direction == ProbeDirection::Down ? "down" : "up";
    j["levels"] = report.levels;
    j["rel_offsets"] = report.rel_offsets;
    j["mean_gamma"] = report.mean_gamma;
    j["mean_abs_gap"] = report.mean_abs_gap;
    j["base_mean_gamma"] = report.base_mean_gamma;
    j["ordering_violations"] = report.ordering_violations;
    j["max_pathwise_gap_closest"] = report.max_pathwise_gap_closest;
    j["rel_tol"] = rel_tol;
    j["pass"] = pass;
    write_json(run.out / "verify_continuity.json", j);

    std::cout << (pass ? "PASS" : "FAIL") << " continuity: " << report.ordering_violations
              << " ordering violations, closest-level mean gap "
              << format_full(report.mean_abs_gap.empty() ? 0.0 : report.mean_abs_gap.back())
              << " vs base clock " << format_full(report.base_mean_gamma) << "\n";
    return pass ? 0 : 1;
}

int cmd_verify_ordering(const Run& run) {
    StoppingProblem problem = run.cfg.build_problem();
    if (!problem.is_chain())
        throw Error(ErrorCode::BadConfig, "verify ordering needs a chain model");
    ValueSurface surface = solve_surface(run, problem);
    const GeneratorMatrix& generator = problem.chain().generator;
    OrderedSearchResult exhaustive =
        ordered_threshold_search_on(surface, problem.gain, generator, SearchMode::Exhaustive);
    OrderedSearchResult monotone =
        ordered_threshold_search_on(surface, problem.gain, generator, SearchMode::Monotone);

    // Modes must land on the same boundary up to one grid cell, and the
    // boundary must be nonincreasing in the volatility state (strict decrease
    // up to cell resolution).
    std::size_t max_index_gap = 0;
    const auto& ei = exhaustive.thresholds.grid_indices;
    const auto& mi = monotone.thresholds.grid_indices;
    for (std::size_t i = 0; i < ei.size(); ++i) {
        const std::size_t gap = ei[i] > mi[i] ? ei[i] - mi[i] : mi[i] - ei[i];
        max_index_gap = std::max(max_index_gap, gap);
    }
    bool decreasing = true;
    for (std::size_t i = 0; i + 1 < ei.size(); ++i)
        if (ei[i + 1] > ei[i]) decreasing = false;
    const bool pass = max_index_gap <= 1 && decreasing;

    json j;
    j["check"] = "ordering";
    j["revision"] = kBuildRevision;
    j["orderings_examined_exhaustive"] = exhaustive.orderings_examined;
    j["orderings_consistent_exhaustive"] = exhaustive.orderings_consistent;
    j["orderings_examined_monotone"] = monotone.orderings_examined;
    j["orderings_consistent_monotone"] = monotone.orderings_consistent;
    j["thresholds_exhaustive"] = exhaustive.thresholds.levels;
    j["thresholds_monotone"] = monotone.thresholds.levels;
    j["max_index_gap"] = max_index_gap;
    j["decreasing"] = decreasing;
    j["pass"] = pass;
    write_json(run.out / "verify_ordering.json", j);

    std::cout << (pass ? "PASS" : "FAIL") << " ordering: exhaustive examined "
              << exhaustive.orderings_examined << ", monotone examined "
              << monotone.orderings_examined << ", max index gap " << max_index_gap
              << (decreasing ? ", thresholds decreasing" : ", thresholds NOT decreasing")
              << "\n";
    return pass ? 0 : 1;
}

int cmd_export(const Run& run) {
    const auto& mc = run.cfg.mc;
    if (mc.export_paths == 0)
        throw Error(ErrorCode::BadParameter, "mc.export_paths must be positive");
    const double horizon = mc.horizon_cap;
    const double dt_out = mc.export_dt;
    if (!(dt_out > 0.0) || !(horizon > 0.0))
        throw Error(ErrorCode::BadParameter, "mc.export_dt and mc.horizon_cap must be positive");
    RngStream root = RngStream::root(mc.seed);
    const fs::path csv_path = run.out / "paths.csv";

    const bool coupled = run.cfg.is_chain() ? mc.y0_high_index.has_value()
                                            : mc.y0_high.has_value();
    std::string schema;

    if (run.cfg.is_chain()) {
        ChainModel model = run.cfg.build_chain();
        const auto& states = model.states;
        if (mc.y0_index >= states.size())
            throw Error(ErrorCode::BadParameter, "mc.y0_index out of range");
        if (coupled) {
            schema = "coupled";
            if (*mc.y0_high_index >= states.size())
                throw Error(ErrorCode::BadParameter, "mc.y0_high_index out of range");
            if (!is_tridiagonal(model.generator))
                throw Error(ErrorCode::NotSkipFree,
                            "coupled export requires a skip-free (tridiagonal) generator");
            SkipFreeChainModel skip_free = validate_skip_free(model.states, model.generator);
            const std::string cols[] = {"path", "t", "G", "Z", "Zp", "Gamma", "Gammap"};
            CsvWriter csv(csv_path.string(), cols);
            for (std::size_t p = 0; p < mc.export_paths; ++p) {
                RngStream ps = root.stream(p);
                CoupledChainPaths pair =
                    simulate_coupled(skip_free, static_cast<int>(mc.y0_index),
                                     static_cast<int>(*mc.y0_high_index), horizon, ps.stream(0));
                TimeChangePath clock_lo = gamma_from_chain(pair.lower, states);
                TimeChangePath clock_hi = gamma_from_chain(pair.upper, states);
                AssetPath g = simulate_G(mc.x0, AssetKind::Linear, horizon, dt_out, ps.stream(1));
                const auto n_rows = static_cast<std::size_t>(horizon / dt_out) + 1;
                for (std::size_t k = 0; k < n_rows; ++k) {
                    const double t = std::min(static_cast<double>(k) * dt_out, horizon);
                    const double row[] = {static_cast<double>(p),
                                          t,
                                          g.at(t),
                                          states[pair.lower.state_index_at(t)],
                                          states[pair.upper.state_index_at(t)],
                                          clock_lo.gamma_at(t),
                                          clock_hi.gamma_at(t)};
                    csv.row(row);
                }
            }
        } else {
            schema = "single";
            const std::string cols[] = {"path", "t",     "G",      "Z",
                                        "Gamma", "A", "Xtilde", "Ytilde"};
            CsvWriter csv(csv_path.string(), cols);
            for (std::size_t p = 0; p < mc.export_paths; ++p) {
                RngStream ps = root.stream(p);
                ChainPath z = simulate_chain(model.generator, static_cast<int>(mc.y0_index),
                                             horizon, ps.stream(0));
                TimeChangePath clock = gamma_from_chain(z, states);
                AssetPath g = simulate_G(mc.x0, AssetKind::Linear, horizon, dt_out, ps.stream(1));
                // Rows end where every column is defined: t must stay inside
                // both the simulated window and the clock's range.
                const double t_end = std::min(horizon, clock.gamma_max());
                TimeChangedPair pair = time_changed_pair(g, clock, z, states, t_end, dt_out);
                for (std::size_t k = 0; k < pair.x.values.size(); ++k) {
                    const double t = static_cast<double>(k) * dt_out;
                    const double row[] = {static_cast<double>(p),
                                          t,
                                          g.at(t),
                                          states[z.state_index_at(t)],
                                          clock.gamma_at(t),
                                          clock.inverse(t),
                                          pair.x.values[k],
                                          pair.y.values[k]};
                    csv.row(row);
                }
            }
        }
    } else {
        DiffusionVolModel model = run.cfg.build_diffusion();
        XiSystem system = xi_system(model);
        if (coupled) {
            schema = "coupled";
            if (*mc.y0_high < mc.y0)
                throw Error(ErrorCode::StartOrderViolated,
                            "mc.y0_high must be >= mc.y0 for a coupled export");
            const auto n_steps = static_cast<std::size_t>(std::ceil(horizon / mc.dt));
            const std::string cols[] = {"path", "t", "G", "Z", "Zp", "Gamma", "Gammap"};
            CsvWriter csv(csv_path.string(), cols);
            for (std::size_t p = 0; p < mc.export_paths; ++p) {
                RngStream ps = root.stream(p);
                RngStream noise = ps.stream(0);
                std::vector<double> increments(n_steps);
                for (double& z : increments) z = noise.gaussian();
                SampledPath xi_lo = simulate_xi_with_increments(system, mc.y0, mc.dt, increments);
                SampledPath xi_hi =
                    simulate_xi_with_increments(system, *mc.y0_high, mc.dt, increments);
                TimeChangePath clock_lo = gamma_from_samples(xi_lo.values, mc.dt);
                TimeChangePath clock_hi = gamma_from_samples(xi_hi.values, mc.dt);
                AssetPath g = simulate_G(mc.x0, AssetKind::Linear, horizon, dt_out, ps.stream(1));
                const double t_end = std::min(horizon, xi_lo.horizon());
                const auto n_rows = static_cast<std::size_t>(t_end / dt_out) + 1;
                for (std::size_t k = 0; k < n_rows; ++k) {
                    const double t = std::min(static_cast<double>(k) * dt_out, t_end);
                    const double row[] = {static_cast<double>(p),
                                          t,
                                          g.at(t),
                                          xi_lo.at(t),
                                          xi_hi.at(t),
                                          clock_lo.gamma_at(t),
                                          clock_hi.gamma_at(t)};
                    csv.row(row);
                }
            }
        } else {
            schema = "single";
            const std::string cols[] = {"path", "t",     "G",      "Z",
                                        "Gamma", "A", "Xtilde", "Ytilde"};
            CsvWriter csv(csv_path.string(), cols);
            for (std::size_t p = 0; p < mc.export_paths; ++p) {
                RngStream ps = root.stream(p);
                SampledPath xi = simulate_xi(system, mc.y0, horizon, mc.dt, ps.stream(0));
                TimeChangePath clock = gamma_from_samples(xi.values, mc.dt);
                AssetPath g = simulate_G(mc.x0, AssetKind::Linear, horizon, dt_out, ps.stream(1));
                const double t_end =
                    std::min({horizon, clock.gamma_max(), xi.horizon()});
                TimeChangedPair pair = time_changed_pair(g, clock, xi, t_end, dt_out);
                for (std::size_t k = 0; k < pair.x.values.size(); ++k) {
                    const double t = static_cast<double>(k) * dt_out;
                    const double row[] = {static_cast<double>(p),
                                          t,
                                          g.at(t),
                                          xi.at(t),
                                          clock.gamma_at(t),
                                          clock.inverse(t),
                                          pair.x.values[k],
                                          pair.y.values[k]};
                    csv.row(row);
                }
            }
        }
    }

    json meta;
    meta["command"] = "export-paths";
    meta["revision"] = kBuildRevision;
    meta["model"] = model_name(run.cfg);
    meta["schema"] = schema;
    meta["n_paths"] = mc.export_paths;
    meta["dt"] = dt_out;
    meta["horizon"] = horizon;
    meta["seed"] = mc.seed;
    write_json(run.out / "metadata.json", meta);

    std::cout << "wrote " << csv_path.string() << " (" << schema << ", " << mc.export_paths
              << " paths)\n";
    return 0;
}

int cmd_validate(const Run& run) {
    json j;
    j["command"] = "validate";
    j["revision"] = kBuildRevision;
    j["model"] = model_name(run.cfg);
    int rc = 0;

    if (run.cfg.is_chain()) {
        ChainModel model = run.cfg.build_chain();
        const bool skip_free = is_tridiagonal(model.generator);
        j["n_states"] = model.states.size();
        j["levels"] = model.states.levels();
        j["skip_free"] = skip_free;
        j["status"] = "Pass";
        std::cout << "chain model: " << model.states.size() << " states, "
                  << (skip_free ? "skip-free (tridiagonal generator)"
                                : "not skip-free (coupled devices unavailable)")
                  << "\n";
    } else {
        DiffusionVolModel model = run.cfg.build_diffusion();
        ValidityReport report = validate_model(model);
        const char* status = report.status == ValidityReport::Status::Pass ? "Pass"
                             : report.status == ValidityReport::Status::Fail ? "Fail"
                                                                             : "Unverifiable";
        if (report.phi) j["phi"] = *report.phi;
        j["inequality"] = report.inequality;
        j["inequality_holds"] = report.inequality_holds;
        j["note"] = report.note;
        j["status"] = status;
        rc = report.status == ValidityReport::Status::Fail ? 1 : 0;
        std::cout << "diffusion model " << model_name(run.cfg) << ": " << status;
        if (report.phi) std::cout << " (phi = " << format_full(*report.phi) << ")";
        std::cout << ", " << report.inequality << " "
                  << (report.inequality_holds ? "holds" : "fails") << "\n";
    }

    write_json(run.out / "validate.json", j);
    return rc;
}

}  // namespace

int run_cli(int argc, char** argv) {
    CLI::App app{"optimal stopping under stochastic volatility via the unit-volatility time change"};
    app.require_subcommand(1);

    CliOptions opt;
    auto add_common = [&opt](CLI::App* sub) {
        sub->add_option("--config", opt.config_path, "run configuration file")->required();
        sub->add_option("--seed", opt.seed, "override the config's Monte Carlo seed");
        sub->add_option("--out", opt.out_dir, "override the config's output directory");
        sub->add_option("--threads", opt.threads,
                        "worker threads (default: VOLSTOP_THREADS, else 1)");
    };

    CLI::App* price =
        app.add_subcommand("price", "solve the perpetual problem, write surface and thresholds");
    add_common(price);

    CLI::App* verify = app.add_subcommand("verify", "run one verification check");
    std::string check;
    verify->add_option("check", check, "monotone | coupling | continuity | ordering")
        ->required()
        ->check(CLI::IsMember({"monotone", "coupling", "continuity", "ordering"}));
    add_common(verify);

    CLI::App* export_cmd =
        app.add_subcommand("export-paths", "simulate paths and export the time-change table");
    add_common(export_cmd);

    CLI::App* validate = app.add_subcommand("validate", "check the configured model's inputs");
    add_common(validate);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        Run run = make_run(opt);
        if (price->parsed()) return cmd_price(run);
        if (verify->parsed()) {
            if (check == "monotone") return cmd_verify_monotone(run);
            if (check == "coupling") return cmd_verify_coupling(run);
            if (check == "continuity") return cmd_verify_continuity(run);
            return cmd_verify_ordering(run);
        }
        if (export_cmd->parsed()) return cmd_export(run);
        return cmd_validate(run);
    } catch (const Error& e) {
        // what() already leads with the machine-readable code name.
        std::cerr << "error: " << e.what() << "\n";
        return e.code() == ErrorCode::NoConvergence ? 3 : 2;
    } catch (const std::exception& e) {
        std::cerr << "error: Internal: " << e.what() << "\n";
        return 2;
    }
}

}  // namespace volstop
