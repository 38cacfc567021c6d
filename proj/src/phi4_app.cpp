#include "rcmps/phi4_app.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>
#include <tuple>

namespace rcmps {

namespace fs = std::filesystem;

namespace {

std::string utc_now() {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

Termination termination_from_string(const std::string& s) {
    for (const Termination t :
         {Termination::grad_norm, Termination::energy_stall, Termination::max_iters, Termination::time_limit,
          Termination::no_descent}) {
        if (to_string(t) == s) {
            return t;
        }
    }
    throw ConfigError("unknown termination '" + s + "'");
}

template <class T>
T get(const Json& j, const char* key) {
    try {
        return j.at(key).get<T>();
    } catch (const Json::exception& e) {
        throw ConfigError(std::string("bad or missing '") + key + "': " + e.what());
    }
}

std::string fmt(double v) {
    if (!std::isfinite(v)) {
        return "nan";
    }
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

void write_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw RcmpsError("cannot open " + path.string() + " for writing");
    }
    out << text;
    out.flush();
    if (!out) {
        throw RcmpsError("write to " + path.string() + " failed");
    }
}

bool same_coupling(double a, double b) { return std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(a)); }

// Best record per (g, D), ordered by g then D.
std::vector<RunRecord> best_cells(const std::vector<RunRecord>& records) {
    std::map<std::tuple<double, int, double>, std::vector<RunRecord>> cells;
    for (const RunRecord& r : records) {
        cells[{r.g, r.dim, r.mass}].push_back(r);
    }
    std::vector<RunRecord> out;
    for (const auto& [key, seeds] : cells) {
        out.push_back(best_of(seeds));
    }
    return out;
}

double phi1(const RunRecord& r) {
    return r.observables.phi_moments.empty() ? std::nan("") : r.observables.phi_moments[0];
}

double phi_n(const RunRecord& r, std::size_t n) {
    return r.observables.phi_moments.size() >= n ? r.observables.phi_moments[n - 1] : std::nan("");
}

} // namespace

void SweepSpec::validate() const {
    if (!(mass > 0.0) || !std::isfinite(mass)) {
        throw ConfigError("model.mass must be positive");
    }
    for (const double g : couplings) {
        if (!(g > 0.0) || !std::isfinite(g)) {
            throw ConfigError("couplings must be positive");
        }
    }
    if (range) {
        if (!(range->step > 0.0)) {
            throw ConfigError("coupling_range.step must be positive");
        }
        if (!(range->start > 0.0) || !(range->stop >= range->start)) {
            throw ConfigError("coupling_range needs 0 < start <= stop");
        }
    }
    if (focus) {
        if (!(focus->step > 0.0) || !(focus->half_width >= 0.0)) {
            throw ConfigError("focus needs step > 0 and half_width >= 0");
        }
        if (!(focus->center - focus->half_width > 0.0)) {
            throw ConfigError("focus window must stay at positive coupling");
        }
    }
    for (const int d : dims) {
        if (d < 1) {
            throw ConfigError("bond dimensions must be positive");
        }
    }
    if (seeds.empty()) {
        throw ConfigError("at least one seed is required");
    }
}

std::vector<double> SweepSpec::resolved_couplings() const {
    validate();
    std::vector<double> all = couplings;
    auto add_grid = [&](double lo, double hi, double step) {
        const auto n = static_cast<long>(std::floor((hi - lo) / step + 1e-9));
        for (long i = 0; i <= n; ++i) {
            all.push_back(lo + static_cast<double>(i) * step);
        }
    };
    if (range) {
        add_grid(range->start, range->stop, range->step);
    }
    if (focus) {
        add_grid(focus->center - focus->half_width, focus->center + focus->half_width, focus->step);
    }
    std::sort(all.begin(), all.end());
    std::vector<double> out;
    for (const double g : all) {
        if (out.empty() || !same_coupling(out.back(), g)) {
            out.push_back(g);
        }
    }
    return out;
}

SweepConfig sweep_config_from_json(const Json& j) {
    if (!j.is_object()) {
        throw ConfigError("config must be a JSON object");
    }
    for (const auto& [key, value] : j.items()) {
        if (key != "model" && key != "optimizer" && key != "numerics") {
            throw ConfigError("unknown section '" + key + "'");
        }
    }
    SweepConfig c;
    if (j.contains("optimizer")) {
        c.optimizer = optimizer_config_from_json(j.at("optimizer"));
    }
    if (j.contains("numerics")) {
        c.numerics = numerics_from_json(j.at("numerics"));
    }
    if (!j.contains("model")) {
        throw ConfigError("missing section 'model'");
    }
    const Json& m = j.at("model");
    if (!m.is_object()) {
        throw ConfigError("model must be an object");
    }
    static const std::vector<std::string> known{"mass",  "coupling", "couplings", "coupling_range", "focus",
                                                "dim",   "dims",     "seeds",     "warm_start"};
    for (const auto& [key, value] : m.items()) {
        if (std::find(known.begin(), known.end(), key) == known.end()) {
            throw ConfigError("unknown key '" + key + "' in model");
        }
    }
    SweepSpec& s = c.sweep;
    if (m.contains("mass")) {
        s.mass = get<double>(m, "mass");
    }
    if (m.contains("coupling")) {
        s.couplings.push_back(get<double>(m, "coupling"));
    }
    if (m.contains("couplings")) {
        const auto list = get<std::vector<double>>(m, "couplings");
        s.couplings.insert(s.couplings.end(), list.begin(), list.end());
    }
    if (m.contains("coupling_range")) {
        const Json& r = m.at("coupling_range");
        s.range = CouplingRange{get<double>(r, "start"), get<double>(r, "stop"), get<double>(r, "step")};
    }
    if (m.contains("focus")) {
        const Json& f = m.at("focus");
        s.focus = FocusWindow{get<double>(f, "center"), get<double>(f, "half_width"), get<double>(f, "step")};
    }
    if (m.contains("dim")) {
        s.dims.push_back(get<int>(m, "dim"));
    }
    if (m.contains("dims")) {
        const auto list = get<std::vector<int>>(m, "dims");
        s.dims.insert(s.dims.end(), list.begin(), list.end());
    }
    if (s.dims.empty()) {
        throw ConfigError("model needs 'dim' or 'dims'");
    }
    if (m.contains("seeds")) {
        s.seeds = get<std::vector<std::uint64_t>>(m, "seeds");
    }
    if (m.contains("warm_start")) {
        s.warm_start = get<bool>(m, "warm_start");
    }
    std::sort(s.dims.begin(), s.dims.end());
    s.dims.erase(std::unique(s.dims.begin(), s.dims.end()), s.dims.end());
    s.validate();
    return c;
}

SweepConfig load_sweep_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot read config " + path.string());
    }
    Json j;
    try {
        j = Json::parse(in, nullptr, true, true);
    } catch (const Json::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    return sweep_config_from_json(j);
}

std::string to_string(RunStatus s) { return s == RunStatus::ok ? "ok" : "failed"; }

std::string record_key(int dim, double mass, double g, const OptimizerConfig& cfg, const Numerics& numerics,
                       bool warm_started) {
    const Json canonical = {{"dim", dim},
                            {"mass", mass},
                            {"g", g},
                            {"optimizer", optimizer_config_to_json(cfg)},
                            {"numerics", numerics_to_json(numerics)},
                            {"warm_start", warm_started}};
    char prefix[96];
    std::snprintf(prefix, sizeof prefix, "D%d_m%.6g_g%.6g_s%llu_", dim, mass, g,
                  static_cast<unsigned long long>(cfg.seed));
    return prefix + hex64(fnv1a(canonical.dump()));
}

std::string RunRecord::key() const {
    OptimizerConfig cfg = optimizer;
    cfg.seed = seed;
    return record_key(dim, mass, g, cfg, numerics, warm_started);
}

Json record_to_json(const RunRecord& r) {
    Json j = {{"key", {{"dim", r.dim}, {"mass", r.mass}, {"g", r.g}, {"seed", r.seed}}},
              {"status", to_string(r.status)},
              {"error", r.error},
              {"result",
               {{"energy", r.energy},
                {"grad_norm", r.grad_norm},
                {"iterations", r.iterations},
                {"termination", to_string(r.termination)},
                {"wall_seconds", r.wall_seconds},
                {"metric_reg", r.metric_reg}}},
              {"observables", observables_to_json(r.observables)},
              {"config",
               {{"optimizer", optimizer_config_to_json(r.optimizer)},
                {"numerics", numerics_to_json(r.numerics)},
                {"warm_start", r.warm_started}}},
              {"version", r.version},
              {"started", r.started},
              {"finished", r.finished}};
    j["state"] = r.state ? state_to_json(*r.state) : Json(nullptr);
    return j;
}

RunRecord record_from_json(const Json& j) {
    try {
        RunRecord r;
        const Json& key = j.at("key");
        r.dim = key.at("dim").get<int>();
        r.mass = key.at("mass").get<double>();
        r.g = key.at("g").get<double>();
        r.seed = key.at("seed").get<std::uint64_t>();
        const auto status = j.at("status").get<std::string>();
        if (status != "ok" && status != "failed") {
            throw ConfigError("unknown status '" + status + "'");
        }
        r.status = status == "ok" ? RunStatus::ok : RunStatus::failed;
        r.error = j.at("error").get<std::string>();
        const Json& res = j.at("result");
        r.energy = res.at("energy").get<double>();
        r.grad_norm = res.at("grad_norm").get<double>();
        r.iterations = res.at("iterations").get<int>();
        r.termination = termination_from_string(res.at("termination").get<std::string>());
        r.wall_seconds = res.at("wall_seconds").get<double>();
        r.metric_reg = res.at("metric_reg").get<double>();
        r.observables = observables_from_json(j.at("observables"));
        const Json& cfg = j.at("config");
        r.optimizer = optimizer_config_from_json(cfg.at("optimizer"));
        r.numerics = numerics_from_json(cfg.at("numerics"));
        r.warm_started = cfg.at("warm_start").get<bool>();
        r.version = j.at("version").get<std::string>();
        r.started = j.at("started").get<std::string>();
        r.finished = j.at("finished").get<std::string>();
        if (!j.at("state").is_null()) {
            r.state = state_from_json(j.at("state"));
        }
        return r;
    } catch (const Json::exception& e) {
        throw ConfigError(std::string("malformed record: ") + e.what());
    }
}

ObservableSet recompute_observables(const RunRecord& r) {
    if (!r.state) {
        throw DomainError("record has no state");
    }
    const DensityMatrix rho = stationary_state(*r.state);
    return evaluate_observables(*r.state, rho, r.g, r.numerics.grid(r.mass), r.numerics.ode());
}

RunRecord solve_phi4(int dim, double mass, double g, const OptimizerConfig& cfg, const Numerics& numerics,
                     const CmpsState* warm, const ProgressCallback& progress) {
    cfg.validate();
    if (dim < 1) {
        throw ConfigError("bond dimension must be positive");
    }
    if (!(mass > 0.0) || !(g >= 0.0)) {
        throw ConfigError("need mass > 0 and g >= 0");
    }
    RunRecord rec;
    rec.dim = dim;
    rec.mass = mass;
    rec.g = g;
    rec.seed = cfg.seed;
    rec.optimizer = cfg;
    rec.numerics = numerics;
    rec.warm_started = warm != nullptr;
    rec.started = utc_now();
    try {
        const EnergyObjective objective(mass, g, numerics);
        CmpsState initial = random_init(dim, mass, cfg);
        if (warm) {
            if (warm->mass() != mass) {
                throw DomainError("warm-start state has a different mass");
            }
            const double scale = cfg.init_scale > 0.0 ? cfg.init_scale : 1.0 / std::sqrt(static_cast<double>(dim));
            initial = embed_state(*warm, dim, 1e-2 * scale, cfg.seed);
        }
        OptimizationResult res = optimize(initial, objective, cfg, progress);
        rec.energy = res.energy;
        rec.grad_norm = res.grad_norm;
        rec.iterations = res.iterations;
        rec.termination = res.termination;
        rec.wall_seconds = res.wall_seconds;
        rec.metric_reg = res.metric_reg;
        rec.state = res.state;
        rec.observables = recompute_observables(rec);
        rec.status = RunStatus::ok;
    } catch (const ConfigError&) {
        throw;
    } catch (const RcmpsError& e) {
        rec.status = RunStatus::failed;
        rec.error = e.what();
    }
    rec.finished = utc_now();
    return rec;
}

RecordStore::RecordStore(fs::path dir) : dir_(std::move(dir)) { fs::create_directories(dir_); }

std::optional<RunRecord> RecordStore::find(const std::string& key) const {
    const fs::path p = dir_ / (key + ".json");
    std::ifstream in(p);
    if (!in) {
        return std::nullopt;
    }
    try {
        return record_from_json(Json::parse(in));
    } catch (const Json::exception&) {
        return std::nullopt;
    } catch (const ConfigError&) {
        return std::nullopt;
    }
}

void RecordStore::save(const RunRecord& r) const {
    const std::string key = r.key();
    const fs::path tmp =
        dir_ / ("." + key + ".tmp" + std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id())));
    write_file(tmp, record_to_json(r).dump(1));
    fs::rename(tmp, dir_ / (key + ".json"));
}

std::vector<RunRecord> RecordStore::load_all() const {
    std::vector<RunRecord> out;
    for (const auto& entry : fs::directory_iterator(dir_)) {
        const fs::path& p = entry.path();
        if (!entry.is_regular_file() || p.extension() != ".json" || p.filename().string().starts_with(".")) {
            continue;
        }
        std::ifstream in(p);
        try {
            out.push_back(record_from_json(Json::parse(in)));
        } catch (const Json::exception& e) {
            throw ConfigError("cannot parse " + p.string() + ": " + e.what());
        }
    }
    std::sort(out.begin(), out.end(), [](const RunRecord& a, const RunRecord& b) {
        return std::tie(a.g, a.dim, a.mass, a.seed) < std::tie(b.g, b.dim, b.mass, b.seed);
    });
    return out;
}

RunRecord best_of(const std::vector<RunRecord>& seeds) {
    if (seeds.empty()) {
        throw DomainError("best_of needs at least one record");
    }
    const RunRecord* best = nullptr;
    for (const RunRecord& r : seeds) {
        if (r.status == RunStatus::ok && (!best || r.energy < best->energy)) {
            best = &r;
        }
    }
    return best ? *best : seeds.front();
}

SweepOutcome run_sweep(const SweepConfig& config, const RecordStore* store, const SweepOptions& options) {
    const SweepSpec& spec = config.sweep;
    const std::vector<double> gs = spec.resolved_couplings();
    std::vector<int> dims = spec.dims;
    std::sort(dims.begin(), dims.end());
    const std::size_t nd = dims.size();
    const std::size_t ns = spec.seeds.size();

    // Without warm starts every cell is independent; with them a task walks
    // the dims of one (g, seed) in ascending order.
    struct Task {
        std::size_t gi;
        std::size_t si;
        std::size_t di; // first dim index
        std::size_t dn; // number of dims
    };
    std::vector<Task> tasks;
    for (std::size_t gi = 0; gi < gs.size(); ++gi) {
        for (std::size_t si = 0; si < ns; ++si) {
            if (spec.warm_start) {
                tasks.push_back({gi, si, 0, nd});
            } else {
                for (std::size_t di = 0; di < nd; ++di) {
                    tasks.push_back({gi, si, di, 1});
                }
            }
        }
    }

    std::vector<std::optional<RunRecord>> cells(gs.size() * nd * ns);
    auto cell = [&](std::size_t gi, std::size_t di, std::size_t si) -> std::optional<RunRecord>& {
        return cells[(gi * nd + di) * ns + si];
    };
    std::atomic<std::size_t> next{0};
    std::atomic<int> computed{0};
    std::mutex mu;
    std::exception_ptr error;

    auto worker = [&] {
        for (;;) {
            const std::size_t t = next.fetch_add(1);
            if (t >= tasks.size()) {
                return;
            }
            const Task task = tasks[t];
            try {
                std::optional<CmpsState> warm;
                for (std::size_t di = task.di; di < task.di + task.dn; ++di) {
                    OptimizerConfig cfg = config.optimizer;
                    cfg.seed = spec.seeds[task.si];
                    const double g = gs[task.gi];
                    const int dim = dims[di];
                    const bool use_warm = warm.has_value() && warm->dim() < dim;
                    const std::string key = record_key(dim, spec.mass, g, cfg, config.numerics, use_warm);
                    std::optional<RunRecord> rec = store ? store->find(key) : std::nullopt;
                    const bool reused = rec.has_value();
                    if (!rec) {
                        rec = solve_phi4(dim, spec.mass, g, cfg, config.numerics, use_warm ? &*warm : nullptr);
                        ++computed;
                        if (store) {
                            store->save(*rec);
                        }
                    }
                    warm = rec->state;
                    std::lock_guard<std::mutex> lock(mu);
                    cell(task.gi, di, task.si) = *rec;
                    if (options.on_record) {
                        options.on_record(*rec, reused);
                    }
                }
            } catch (...) {
                std::lock_guard<std::mutex> lock(mu);
                if (!error) {
                    error = std::current_exception();
                }
                next.store(tasks.size());
                return;
            }
        }
    };

    const int nworkers = std::max(1, std::min<int>(options.workers, static_cast<int>(tasks.size())));
    if (nworkers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int i = 0; i < nworkers; ++i) {
            pool.emplace_back(worker);
        }
        for (auto& th : pool) {
            th.join();
        }
    }
    if (error) {
        std::rethrow_exception(error);
    }

    SweepOutcome out;
    out.optimizations = computed.load();
    for (std::size_t gi = 0; gi < gs.size(); ++gi) {
        for (std::size_t di = 0; di < nd; ++di) {
            std::vector<RunRecord> seeds;
            for (std::size_t si = 0; si < ns; ++si) {
                seeds.push_back(*cell(gi, di, si));
                out.all.push_back(*cell(gi, di, si));
            }
            out.best.push_back(best_of(seeds));
        }
    }
    return out;
}

ExportFormat parse_export_format(const std::string& s) {
    if (s == "json") {
        return ExportFormat::json;
    }
    if (s == "csv") {
        return ExportFormat::csv;
    }
    throw ConfigError("export format must be json or csv");
}

std::string records_csv(const std::vector<RunRecord>& records) {
    std::ostringstream out;
    out << "D,m,g,seed,energy,kinetic,phi1,phi2,phi3,phi4,abs_phi1,grad_norm,iters,status\n";
    for (const RunRecord& r : records) {
        out << r.dim << ',' << fmt(r.mass) << ',' << fmt(r.g) << ',' << r.seed << ',' << fmt(r.energy) << ','
            << fmt(r.observables.kinetic_part);
        for (std::size_t n = 1; n <= 4; ++n) {
            out << ',' << fmt(phi_n(r, n));
        }
        out << ',' << fmt(std::abs(phi1(r))) << ',' << fmt(r.grad_norm) << ',' << r.iterations << ','
            << to_string(r.status) << '\n';
    }
    return out.str();
}

std::string energy_vs_g_csv(const std::vector<RunRecord>& records) {
    std::ostringstream out;
    out << "D,g,energy\n";
    for (const RunRecord& r : best_cells(records)) {
        if (r.status == RunStatus::ok) {
            out << r.dim << ',' << fmt(r.g) << ',' << fmt(r.energy) << '\n';
        }
    }
    return out.str();
}

std::string phi_vs_g_csv(const std::vector<RunRecord>& records) {
    std::ostringstream out;
    out << "D,g,phi,abs_phi\n";
    for (const RunRecord& r : best_cells(records)) {
        if (r.status == RunStatus::ok) {
            out << r.dim << ',' << fmt(r.g) << ',' << fmt(phi1(r)) << ',' << fmt(std::abs(phi1(r))) << '\n';
        }
    }
    return out.str();
}

std::string phi2_vs_g_csv(const std::vector<RunRecord>& records) {
    std::ostringstream out;
    out << "D,g,phi2\n";
    for (const RunRecord& r : best_cells(records)) {
        if (r.status == RunStatus::ok) {
            out << r.dim << ',' << fmt(r.g) << ',' << fmt(phi_n(r, 2)) << '\n';
        }
    }
    return out.str();
}

std::string error_vs_dim_csv(const std::vector<RunRecord>& records, double reference) {
    std::ostringstream out;
    out << "D,energy,rel_error\n";
    for (const RunRecord& r : best_cells(records)) {
        if (r.status == RunStatus::ok && same_coupling(r.g, 1.0) && r.mass == 1.0) {
            out << r.dim << ',' << fmt(r.energy) << ',' << fmt((r.energy - reference) / std::abs(reference)) << '\n';
        }
    }
    return out.str();
}

void export_records(const std::vector<RunRecord>& records, ExportFormat format, const fs::path& path) {
    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path());
    }
    if (format == ExportFormat::json) {
        Json arr = Json::array();
        for (const RunRecord& r : records) {
            arr.push_back(record_to_json(r));
        }
        write_file(path, arr.dump(1));
        return;
    }
    write_file(path, records_csv(records));
    const fs::path dir = path.parent_path();
    const std::string stem = path.stem().string();
    write_file(dir / (stem + "_energy_vs_g.csv"), energy_vs_g_csv(records));
    write_file(dir / (stem + "_phi_vs_g.csv"), phi_vs_g_csv(records));
    write_file(dir / (stem + "_phi2_vs_g.csv"), phi2_vs_g_csv(records));
    write_file(dir / (stem + "_error_vs_dim.csv"), error_vs_dim_csv(records));
}

} // namespace rcmps
