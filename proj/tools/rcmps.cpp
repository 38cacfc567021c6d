// Command-line front end: solve, sweep, check, export.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "rcmps/oracle.hpp"
#include "rcmps/phi4_app.hpp"

using namespace rcmps;

namespace {

constexpr int kExitConfig = 1;
constexpr int kExitNumerical = 2;
constexpr int kExitCheck = 3;

void add_optimizer_flags(CLI::App* app, OptimizerConfig& c) {
    app->add_option("--max-iters", c.max_iters);
    app->add_option("--grad-norm-tol", c.grad_norm_tol);
    app->add_option("--energy-rel-tol", c.energy_rel_tol);
    app->add_option("--stall-window", c.stall_window);
    app->add_option("--metric-reg", c.metric_reg);
    app->add_option("--metric-reg-max", c.metric_reg_max);
    app->add_option("--armijo-c", c.armijo_c);
    app->add_option("--backtrack-factor", c.backtrack_factor);
    app->add_option("--max-backtracks", c.max_backtracks);
    app->add_option("--init-scale", c.init_scale, "<= 0 selects 1/sqrt(D)");
    app->add_option("--step-init", c.step_init);
    app->add_option("--step-max", c.step_max);
    app->add_option("--max-seconds", c.max_seconds, "<= 0: unlimited");
}

void add_numerics_flags(CLI::App* app, Numerics& n) {
    app->add_option("--ode-tol", n.ode_tol);
    app->add_option("--quad-rtol", n.quad_rtol);
    app->add_option("--x-max-factor", n.x_max_factor);
}

CmpsState read_warm_start(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot read warm-start file " + path);
    }
    Json j;
    try {
        j = Json::parse(in);
    } catch (const Json::exception& e) {
        throw ConfigError("warm-start file is not valid JSON: " + std::string(e.what()));
    }
    if (j.contains("state")) {
        if (j.at("state").is_null()) {
            throw ConfigError("warm-start record has no state");
        }
        return state_from_json(j.at("state"));
    }
    return state_from_json(j);
}

void print_record(const RunRecord& r, bool reused) {
    const double phi = r.observables.phi_moments.empty() ? 0.0 : r.observables.phi_moments[0];
    std::printf("D=%d m=%g g=%g seed=%llu %s E=%.10f <phi>=%.6f |G|=%.2e iters=%d (%s, %.1fs)%s%s\n", r.dim, r.mass,
                r.g, static_cast<unsigned long long>(r.seed), to_string(r.status).c_str(), r.energy, phi,
                r.grad_norm, r.iterations, to_string(r.termination).c_str(), r.wall_seconds, reused ? " [stored]" : "",
                r.error.empty() ? "" : (" error: " + r.error).c_str());
    std::fflush(stdout);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Variational ground states of the 1+1d phi^4 theory with relativistic continuous MPS"};
    app.require_subcommand(1);

    // solve
    auto* solve = app.add_subcommand("solve", "optimize a single (D, g, seed) cell");
    int dim = 0;
    double coupling = 0.0;
    double mass = 1.0;
    std::uint64_t seed = 1;
    std::string warm_path;
    std::string out_dir = "runs";
    bool verbose = false;
    OptimizerConfig cfg;
    Numerics numerics;
    solve->add_option("--dim", dim, "bond dimension")->required()->check(CLI::PositiveNumber);
    solve->add_option("--coupling", coupling, "quartic coupling g")->required()->check(CLI::NonNegativeNumber);
    solve->add_option("--mass", mass)->check(CLI::PositiveNumber);
    solve->add_option("--seed", seed);
    solve->add_option("--warm-start", warm_path, "state or record JSON to embed");
    solve->add_option("--out", out_dir, "record store directory");
    solve->add_flag("-v,--verbose", verbose, "print progress every 50 iterations");
    add_optimizer_flags(solve, cfg);
    add_numerics_flags(solve, numerics);

    // sweep
    auto* sweep = app.add_subcommand("sweep", "run a coupling / bond-dimension sweep");
    std::string config_path;
    int workers = 1;
    sweep->add_option("--config", config_path)->required();
    sweep->add_option("--out", out_dir, "record store directory");
    sweep->add_option("--workers", workers)->check(CLI::PositiveNumber);

    // check
    auto* check = app.add_subcommand("check", "run the oracle and invariant suite");
    std::string level = "quick";
    check->add_option("--level", level)->check(CLI::IsMember({"quick", "full"}));

    // export
    auto* exp = app.add_subcommand("export", "export stored records");
    std::string format;
    std::string in_dir;
    std::string out_path;
    exp->add_option("--format", format)->required()->check(CLI::IsMember({"csv", "json"}));
    exp->add_option("--in", in_dir)->required()->check(CLI::ExistingDirectory);
    exp->add_option("--out", out_path)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitConfig;
    }

    try {
        if (*solve) {
            cfg.seed = seed;
            cfg.validate();
            std::optional<CmpsState> warm;
            if (!warm_path.empty()) {
                warm = read_warm_start(warm_path);
                if (warm->dim() > dim) {
                    throw ConfigError("warm-start state is larger than --dim");
                }
            }
            ProgressCallback progress;
            if (verbose) {
                progress = [](int it, double e, double gn, double step) {
                    if (it % 50 == 0) {
                        std::printf("  it %5d  E %.12f  |G| %.3e  step %.3e\n", it, e, gn, step);
                        std::fflush(stdout);
                    }
                };
            }
            const RecordStore store(out_dir);
            const RunRecord rec =
                solve_phi4(dim, mass, coupling, cfg, numerics, warm ? &*warm : nullptr, progress);
            store.save(rec);
            print_record(rec, false);
            std::printf("record: %s\n", (store.dir() / (rec.key() + ".json")).string().c_str());
            return rec.status == RunStatus::ok ? 0 : kExitNumerical;
        }
        if (*sweep) {
            const SweepConfig config = load_sweep_config(config_path);
            const RecordStore store(out_dir);
            SweepOptions opts;
            opts.workers = workers;
            opts.on_record = print_record;
            const SweepOutcome outcome = run_sweep(config, &store, opts);
            int failed = 0;
            for (const RunRecord& r : outcome.best) {
                failed += r.status == RunStatus::failed ? 1 : 0;
            }
            std::printf("%zu cells, %d optimized, %d reused, %d failed\n", outcome.best.size(),
                        outcome.optimizations, static_cast<int>(outcome.all.size()) - outcome.optimizations, failed);
            return 0;
        }
        if (*check) {
            const OracleReport report = run_checks(level == "full" ? CheckLevel::full : CheckLevel::quick);
            for (const CheckResult& c : report.checks) {
                std::printf("%s  %-60s fast=% .12e oracle=% .12e dev=%.2e tol=%.0e\n", c.pass ? "PASS" : "FAIL",
                            c.name.c_str(), c.fast, c.oracle, c.relative ? c.rel_dev : c.abs_dev, c.tolerance);
            }
            const bool ok = report.all_pass();
            std::printf("%s: %zu checks\n", ok ? "all passed" : "FAILURES", report.checks.size());
            return ok ? 0 : kExitCheck;
        }
        if (*exp) {
            const RecordStore store(in_dir);
            const std::vector<RunRecord> records = store.load_all();
            export_records(records, parse_export_format(format), out_path);
            std::printf("exported %zu records to %s\n", records.size(), out_path.c_str());
            return 0;
        }
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitConfig;
    } catch (const RcmpsError& e) {
        std::fprintf(stderr, "numerical failure: %s\n", e.what());
        return kExitNumerical;
    } catch (const std::filesystem::filesystem_error& e) {
        std::fprintf(stderr, "i/o error: %s\n", e.what());
        return kExitNumerical;
    }
    return 0;
}
