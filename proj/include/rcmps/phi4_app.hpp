#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "rcmps/observables.hpp"
#include "rcmps/serialization.hpp"
#include "rcmps/tangent_optimizer.hpp"

namespace rcmps {

inline constexpr const char* kArtifactVersion = "rcmps 1.0.0";

/// Energy density at m = 1, g = 1 used for the error-vs-D export.
inline constexpr double kReferenceEnergyG1 = -0.0393547;

struct CouplingRange {
    double start = 0.0;
    double stop = 0.0;
    double step = 0.0;
};

/// Extra couplings center +- half_width spaced by step.
struct FocusWindow {
    double center = 0.0;
    double half_width = 0.0;
    double step = 0.0;
};

struct SweepSpec {
    std::vector<double> couplings;
    std::optional<CouplingRange> range;
    std::optional<FocusWindow> focus;
    std::vector<int> dims;
    std::vector<std::uint64_t> seeds{1, 2, 3};
    double mass = 1.0;
    /// Initialize each D > min(dims) from the same seed's state at the next smaller D.
    bool warm_start = false;

    /// Throws ConfigError.
    void validate() const;
    /// All couplings, sorted ascending and deduplicated (to 1e-12).
    [[nodiscard]] std::vector<double> resolved_couplings() const;
};

struct SweepConfig {
    SweepSpec sweep;
    OptimizerConfig optimizer;
    Numerics numerics;
};

/// {model: {mass, coupling | couplings | coupling_range, focus, dim | dims,
/// seeds, warm_start}, optimizer: {...}, numerics: {...}}.
[[nodiscard]] SweepConfig sweep_config_from_json(const Json& j);
[[nodiscard]] SweepConfig load_sweep_config(const std::filesystem::path& path);

enum class RunStatus { ok, failed };

struct RunRecord {
    int dim = 0;
    double mass = 1.0;
    double g = 0.0;
    std::uint64_t seed = 0;

    RunStatus status = RunStatus::failed;
    std::string error;

    std::optional<CmpsState> state;
    double energy = 0.0;
    double grad_norm = 0.0;
    int iterations = 0;
    Termination termination = Termination::max_iters;
    double wall_seconds = 0.0;
    double metric_reg = 0.0;
    ObservableSet observables;

    OptimizerConfig optimizer;
    Numerics numerics;
    bool warm_started = false;
    std::string version = kArtifactVersion;
    std::string started;
    std::string finished;

    /// Content address: hash of (D, m, g, seed, optimizer, numerics, warm start).
    [[nodiscard]] std::string key() const;
};

[[nodiscard]] std::string record_key(int dim, double mass, double g, const OptimizerConfig& cfg,
                                     const Numerics& numerics, bool warm_started);

[[nodiscard]] Json record_to_json(const RunRecord& r);
[[nodiscard]] RunRecord record_from_json(const Json& j);

/// Observables of the stored state, recomputed with the stored numerics.
[[nodiscard]] ObservableSet recompute_observables(const RunRecord& r);

/// Optimizes from `warm` (embedded with init_scale * 1e-2 noise) or from a
/// random state, then evaluates the observables. Optimizer and numerical
/// errors are caught and reported through a failed record.
[[nodiscard]] RunRecord solve_phi4(int dim, double mass, double g, const OptimizerConfig& cfg,
                                   const Numerics& numerics = {}, const CmpsState* warm = nullptr,
                                   const ProgressCallback& progress = {});

/// One JSON file per record, named by its key. Writes are atomic.
class RecordStore {
public:
    explicit RecordStore(std::filesystem::path dir);

    [[nodiscard]] std::optional<RunRecord> find(const std::string& key) const;
    void save(const RunRecord& r) const;
    [[nodiscard]] std::vector<RunRecord> load_all() const;
    [[nodiscard]] const std::filesystem::path& dir() const noexcept { return dir_; }

private:
    std::filesystem::path dir_;
};

struct SweepOptions {
    int workers = 1;
    /// Called after every cell, from the worker thread, under a lock.
    std::function<void(const RunRecord&, bool reused)> on_record;
};

struct SweepOutcome {
    std::vector<RunRecord> best;  // one per (g, D), ordered by g then D
    std::vector<RunRecord> all;   // every seed, same ordering
    int optimizations = 0;        // cells actually computed (not reused)
};

/// Lowest-energy successful record among seeds; a failed record if all failed.
[[nodiscard]] RunRecord best_of(const std::vector<RunRecord>& seeds);

/// Runs every (g, D, seed) cell, skipping those already in `store`.
[[nodiscard]] SweepOutcome run_sweep(const SweepConfig& config, const RecordStore* store,
                                     const SweepOptions& options = {});

enum class ExportFormat { json, csv };

[[nodiscard]] ExportFormat parse_export_format(const std::string& s);

/// JSON: array of full records. CSV: one row per record plus the plot tables
/// <stem>_energy_vs_g.csv, <stem>_phi_vs_g.csv, <stem>_phi2_vs_g.csv and
/// <stem>_error_vs_dim.csv next to `path` (best seed per (g, D)).
void export_records(const std::vector<RunRecord>& records, ExportFormat format, const std::filesystem::path& path);

[[nodiscard]] std::string records_csv(const std::vector<RunRecord>& records);
[[nodiscard]] std::string energy_vs_g_csv(const std::vector<RunRecord>& records);
[[nodiscard]] std::string phi_vs_g_csv(const std::vector<RunRecord>& records);
[[nodiscard]] std::string phi2_vs_g_csv(const std::vector<RunRecord>& records);
/// Relative error (E - E_ref) / |E_ref| at g = 1 for each D.
[[nodiscard]] std::string error_vs_dim_csv(const std::vector<RunRecord>& records,
                                           double reference = kReferenceEnergyG1);

[[nodiscard]] std::string to_string(RunStatus s);

} // namespace rcmps
