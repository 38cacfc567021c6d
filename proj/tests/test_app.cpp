#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <unistd.h>

#include "rcmps/phi4_app.hpp"

using namespace rcmps;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("rcmps-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter()++));
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    static int& counter() {
        static int c = 0;
        return c;
    }
};

OptimizerConfig short_run(int iters = 15) {
    OptimizerConfig cfg;
    cfg.max_iters = iters;
    return cfg;
}

Numerics loose() {
    Numerics n;
    n.ode_tol = 1e-8;
    n.quad_rtol = 1e-6;
    return n;
}

int count_lines(const std::string& s) {
    int n = 0;
    for (const char c : s) {
        n += c == '\n' ? 1 : 0;
    }
    return n;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace

TEST_SUITE("phi4_app") {

TEST_CASE("coupling lists are merged, sorted and deduplicated") {
    SweepSpec s;
    s.dims = {2};
    s.couplings = {3.0, 1.0};
    s.range = CouplingRange{0.5, 2.0, 0.5};
    s.focus = FocusWindow{2.8, 0.2, 0.1};
    const std::vector<double> g = s.resolved_couplings();
    const std::vector<double> expected{0.5, 1.0, 1.5, 2.0, 2.6, 2.7, 2.8, 2.9, 3.0};
    REQUIRE(g.size() == expected.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
        CHECK(g[i] == doctest::Approx(expected[i]).epsilon(1e-12));
    }

    SweepSpec bad = s;
    bad.range->step = 0.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = s;
    bad.couplings = {-1.0};
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = s;
    bad.seeds.clear();
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("config parsing") {
    const Json j = Json::parse(R"({
        "model": {"mass": 1.0, "couplings": [1.0, 2.0], "dims": [4, 2], "seeds": [1, 2, 3], "warm_start": true},
        "optimizer": {"max_iters": 500, "metric_reg": 1e-9},
        "numerics": {"ode_tol": 1e-9}
    })");
    const SweepConfig c = sweep_config_from_json(j);
    CHECK(c.sweep.dims == std::vector<int>{2, 4});
    CHECK(c.sweep.couplings.size() == 2);
    CHECK(c.sweep.warm_start);
    CHECK(c.optimizer.max_iters == 500);
    CHECK(c.optimizer.metric_reg == 1e-9);
    CHECK(c.optimizer.grad_norm_tol == OptimizerConfig{}.grad_norm_tol);
    CHECK(c.numerics.ode_tol == 1e-9);

    CHECK_THROWS_AS((void)sweep_config_from_json(Json::parse(R"({"model": {"dim": 2, "colour": 1}})")), ConfigError);
    CHECK_THROWS_AS((void)sweep_config_from_json(Json::parse(R"({"model": {"dim": 2}, "extra": {}})")), ConfigError);
    CHECK_THROWS_AS((void)sweep_config_from_json(Json::parse(R"({"model": {"coupling": 1}})")), ConfigError);
    CHECK_THROWS_AS((void)sweep_config_from_json(
                        Json::parse(R"({"model": {"dim": 2}, "optimizer": {"armijo_c": 2}})")),
                    ConfigError);
    CHECK_THROWS_AS((void)sweep_config_from_json(
                        Json::parse(R"({"model": {"dim": 2}, "numerics": {"x_max_factor": 5}})")),
                    ConfigError);
    CHECK_THROWS_AS((void)sweep_config_from_json(
                        Json::parse(R"({"model": {"dim": 2, "coupling_range": {"start": 1, "stop": 2, "step": 0}}})")),
                    ConfigError);

    TempDir dir;
    CHECK_THROWS_AS((void)load_sweep_config(dir.path / "missing.json"), ConfigError);
    std::ofstream(dir.path / "broken.json") << "{ model: ";
    CHECK_THROWS_AS((void)load_sweep_config(dir.path / "broken.json"), ConfigError);
}

TEST_CASE("solve, record round trip and checkpoint fidelity") {
    const RunRecord rec = solve_phi4(2, 1.0, 1.0, short_run(), loose());
    REQUIRE(rec.status == RunStatus::ok);
    REQUIRE(rec.state.has_value());
    CHECK(rec.iterations == 15);
    CHECK(std::abs(rec.energy - rec.observables.energy_density) < 1e-12);
    CHECK(std::abs(rec.observables.energy_density -
                   (rec.observables.kinetic_part + rec.g * rec.observables.phi_moments[3])) < 1e-10);

    const Json j = record_to_json(rec);
    const RunRecord back = record_from_json(Json::parse(j.dump()));
    CHECK(record_to_json(back).dump() == j.dump());
    CHECK(back.key() == rec.key());

    const ObservableSet again = recompute_observables(back);
    CHECK(std::abs(again.energy_density - rec.observables.energy_density) < 1e-9);
    CHECK(std::abs(again.kinetic_part - rec.observables.kinetic_part) < 1e-9);
    for (std::size_t n = 0; n < 4; ++n) {
        CHECK(std::abs(again.phi_moments[n] - rec.observables.phi_moments[n]) < 1e-9);
    }
}

TEST_CASE("keys depend on every input") {
    const OptimizerConfig cfg;
    const Numerics num;
    const std::string base = record_key(4, 1.0, 1.0, cfg, num, false);
    CHECK(record_key(4, 1.0, 1.0, cfg, num, false) == base);
    CHECK(record_key(6, 1.0, 1.0, cfg, num, false) != base);
    CHECK(record_key(4, 1.0, 1.5, cfg, num, false) != base);
    CHECK(record_key(4, 1.0, 1.0, cfg, num, true) != base);
    OptimizerConfig other = cfg;
    other.seed = 2;
    CHECK(record_key(4, 1.0, 1.0, other, num, false) != base);
    other = cfg;
    other.metric_reg = 1e-9;
    CHECK(record_key(4, 1.0, 1.0, other, num, false) != base);
    Numerics n2 = num;
    n2.ode_tol = 1e-9;
    CHECK(record_key(4, 1.0, 1.0, cfg, n2, false) != base);
}

TEST_CASE("optimizer failures become failed records") {
    OptimizerConfig cfg = short_run();
    cfg.step_init = 1e4;
    cfg.max_backtracks = 1;
    const RunRecord rec = solve_phi4(2, 1.0, 1.0, cfg, loose());
    CHECK(rec.status == RunStatus::failed);
    CHECK_FALSE(rec.error.empty());
    const RunRecord back = record_from_json(record_to_json(rec));
    CHECK(back.status == RunStatus::failed);
    CHECK_FALSE(back.state.has_value());

    CHECK_THROWS_AS((void)solve_phi4(0, 1.0, 1.0, short_run()), ConfigError);
}

TEST_CASE("warm start embeds the smaller state") {
    const RunRecord small = solve_phi4(2, 1.0, 1.0, short_run(30), loose());
    REQUIRE(small.state.has_value());
    const RunRecord big = solve_phi4(3, 1.0, 1.0, short_run(1), loose(), &*small.state);
    REQUIRE(big.status == RunStatus::ok);
    CHECK(big.warm_started);
    // The embedding keeps the energy, and the line search only descends.
    CHECK(big.energy <= small.energy + 1e-8);
}

TEST_CASE("sweeps are resumable and exported") {
    TempDir dir;
    SweepConfig cfg;
    cfg.sweep.couplings = {0.5, 1.0};
    cfg.sweep.dims = {1, 2};
    cfg.sweep.seeds = {1, 2};
    cfg.optimizer = short_run(8);
    cfg.numerics = loose();
    const RecordStore store(dir.path / "runs");
    SweepOptions opts;
    opts.workers = 2;
    int seen = 0;
    opts.on_record = [&](const RunRecord&, bool reused) { seen += reused ? 0 : 1; };
    const SweepOutcome first = run_sweep(cfg, &store, opts);
    CHECK(first.optimizations == 8);
    CHECK(seen == 8);
    CHECK(first.all.size() == 8);
    REQUIRE(first.best.size() == 4);
    CHECK(first.best[0].g == 0.5);
    CHECK(first.best[0].dim == 1);
    CHECK(first.best[3].g == 1.0);
    CHECK(first.best[3].dim == 2);
    for (const RunRecord& r : first.best) {
        CHECK(r.status == RunStatus::ok);
    }

    const SweepOutcome second = run_sweep(cfg, &store, {});
    CHECK(second.optimizations == 0);
    for (std::size_t i = 0; i < first.all.size(); ++i) {
        CHECK(record_to_json(second.all[i]).dump() == record_to_json(first.all[i]).dump());
    }

    const std::vector<RunRecord> loaded = store.load_all();
    CHECK(loaded.size() == 8);
    for (const auto& e : fs::directory_iterator(store.dir())) {
        CHECK_FALSE(e.path().filename().string().starts_with("."));
    }

    export_records(loaded, ExportFormat::csv, dir.path / "out" / "sweep.csv");
    const std::string csv = slurp(dir.path / "out" / "sweep.csv");
    CHECK(count_lines(csv) == 9);
    CHECK(csv.starts_with("D,m,g,seed,energy,kinetic,phi1,phi2,phi3,phi4,abs_phi1,grad_norm,iters,status\n"));
    CHECK(count_lines(slurp(dir.path / "out" / "sweep_energy_vs_g.csv")) == 5);
    CHECK(count_lines(slurp(dir.path / "out" / "sweep_phi_vs_g.csv")) == 5);
    CHECK(count_lines(slurp(dir.path / "out" / "sweep_phi2_vs_g.csv")) == 5);
    CHECK(count_lines(slurp(dir.path / "out" / "sweep_error_vs_dim.csv")) == 3);

    export_records(loaded, ExportFormat::json, dir.path / "out" / "sweep.json");
    const Json arr = Json::parse(slurp(dir.path / "out" / "sweep.json"));
    REQUIRE(arr.size() == 8);
    CHECK(record_to_json(record_from_json(arr[0])).dump() == arr[0].dump());
}

TEST_CASE("five-record CSV") {
    std::vector<RunRecord> recs;
    for (int i = 0; i < 5; ++i) {
        RunRecord r;
        r.dim = 2;
        r.g = 0.5 * (i + 1);
        r.seed = 1;
        r.status = RunStatus::ok;
        r.energy = -0.01 * i;
        r.observables.phi_moments = {0.1, 0.2, 0.3, 0.4};
        recs.push_back(r);
    }
    CHECK(count_lines(records_csv(recs)) == 6);
}

TEST_CASE("error-vs-dimension table") {
    std::vector<RunRecord> recs;
    for (const int d : {2, 4}) {
        RunRecord r;
        r.dim = d;
        r.g = 1.0;
        r.status = RunStatus::ok;
        r.energy = d == 2 ? -0.0068958 : -0.0336363;
        r.observables.phi_moments = {0.0, 0.0, 0.0, 0.0};
        recs.push_back(r);
    }
    const std::string csv = error_vs_dim_csv(recs);
    std::istringstream in(csv);
    std::string line;
    std::getline(in, line);
    CHECK(line == "D,energy,rel_error");
    std::getline(in, line);
    const double err = std::stod(line.substr(line.rfind(',') + 1));
    CHECK(err == doctest::Approx((-0.0068958 + 0.0393547) / 0.0393547).epsilon(1e-9));
}

TEST_CASE("empty coupling list gives an empty sweep") {
    SweepConfig cfg;
    cfg.sweep.dims = {2};
    const SweepOutcome out = run_sweep(cfg, nullptr);
    CHECK(out.best.empty());
    CHECK(out.optimizations == 0);
}

TEST_CASE("best of seeds") {
    RunRecord a;
    a.status = RunStatus::ok;
    a.energy = -1.0;
    RunRecord b = a;
    b.energy = -2.0;
    RunRecord c = a;
    c.status = RunStatus::failed;
    c.energy = -5.0;
    CHECK(best_of({a, b, c}).energy == -2.0);
    CHECK(best_of({c}).status == RunStatus::failed);
    CHECK_THROWS_AS((void)best_of({}), DomainError);
    CHECK(parse_export_format("csv") == ExportFormat::csv);
    CHECK_THROWS_AS((void)parse_export_format("xml"), ConfigError);
}

}
