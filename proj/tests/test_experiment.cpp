#include "lse/error.hpp"
#include "lse/experiment.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace lse;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name)
{
    const fs::path dir = fs::temp_directory_path() / ("lse_test_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

ErrorCode code_of(auto&& fn)
{
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("no lse::Error thrown");
    return ErrorCode::invalid_argument;
}

} // namespace

TEST_CASE("config parsing, overrides and errors")
{
    auto cfg = ExperimentConfig::parse("# sweep\n[system]\n; grid\nalpha_inverse = 1:0.5:2\n\n[targets]\np=0.5\neta = 1, 0.5\n");
    CHECK(cfg.get("system.alpha_inverse") == "1:0.5:2");
    CHECK(cfg.get("targets.eta") == "1, 0.5");
    cfg.apply_override("targets.p=0.25");
    CHECK(cfg.get("targets.p") == "0.25");
    CHECK_FALSE(cfg.has("solver.tol"));
    cfg.erase("targets.p");
    CHECK_FALSE(cfg.has("targets.p"));

    const auto again = ExperimentConfig::parse(cfg.serialize());
    CHECK(again.values() == cfg.values());

    CHECK(code_of([] { ExperimentConfig::parse("[nope]\nx = 1\n"); }) == ErrorCode::config_error);
    CHECK(code_of([] { ExperimentConfig::parse("[system]\nalpha = 1\nalpha = 2\n"); }) == ErrorCode::config_error);
    CHECK(code_of([] { ExperimentConfig::parse("[system]\nno_equals\n"); }) == ErrorCode::config_error);
    CHECK(code_of([&] { cfg.apply_override("system.alpha_inverse"); }) == ErrorCode::config_error);
    CHECK(code_of([] { ExperimentConfig::load("/nonexistent/lse.cfg"); }) == ErrorCode::io_error);
    for (const KeyDoc& k : documented_keys())
        CHECK(std::string(k.key).find('.') != std::string::npos);
}

TEST_CASE("grids")
{
    const auto g = parse_grid("1.0:0.1:2.8");
    REQUIRE(g.size() == 19);
    CHECK(g.front() == 1.0);
    CHECK(g[7] == 1.7);
    CHECK(g.back() == 2.8);
    CHECK(parse_grid("1, 1.5,2") == std::vector<double>{1.0, 1.5, 2.0});
    CHECK(parse_grid("3") == std::vector<double>{3.0});
    CHECK_THROWS_AS(parse_grid("2, 1"), Error);
    CHECK_THROWS_AS(parse_grid("1:0:2"), Error);
    CHECK_THROWS_AS(parse_grid("a"), Error);
}

TEST_CASE("sweep CSV round-trip")
{
    std::vector<SweepRow> rows(2);
    rows[0] = {1.1, 0.123456789012, 0.0, 3.5, 0.5, 1.0, std::numeric_limits<double>::infinity(), -12.9, 1e-13, 42, "ok"};
    rows[1].alpha_inverse = 1.2;
    rows[1].distortion_db = std::numeric_limits<double>::quiet_NaN();
    rows[1].status = "not_achievable";
    const auto back = parse_sweep_csv(sweep_csv(rows));
    REQUIRE(back.size() == 2);
    CHECK(back[0].lambda == 0.123456789012);
    CHECK(back[0].iterations == 42);
    CHECK(std::isinf(back[0].papr_db));
    CHECK(std::isnan(back[1].distortion_db));
    CHECK(back[1].status == "not_achievable");
    CHECK(sweep_csv(back) == sweep_csv(rows));
    CHECK(code_of([] { parse_sweep_csv("a,b\n1,2\n"); }) == ErrorCode::schema_error);
}

TEST_CASE("plots")
{
    const std::string svg = emit_plot(std::vector<PlotCurve>{{"c", {1.0, 2.0}, {-3.0, -6.0}}}, "t");
    std::size_t count = 0;
    for (auto pos = svg.find("<polyline"); pos != std::string::npos; pos = svg.find("<polyline", pos + 1))
        ++count;
    CHECK(count == 1);
    const auto pts = svg.find("points=\"");
    REQUIRE(pts != std::string::npos);
    const std::string list = svg.substr(pts + 8, svg.find('"', pts + 8) - pts - 8);
    CHECK(std::count(list.begin(), list.end(), ',') == 2);
    CHECK(code_of([] { emit_plot(std::vector<PlotCurve>{}); }) == ErrorCode::schema_error);
    CHECK(code_of([] { emit_plot(std::vector<fs::path>{}); }) == ErrorCode::schema_error);
}

TEST_CASE("replica mode equals a single-point sweep")
{
    const auto cfg = ExperimentConfig::parse("[system]\nalpha_inverse = 2\n[targets]\np = 0.5\neta = 1\n");
    const fs::path a = scratch("replica");
    const fs::path b = scratch("sweep");
    run_experiment(cfg, Mode::replica, {a, 1});
    const auto files = run_experiment(cfg, Mode::sweep, {b, 2});
    fs::path csv;
    for (const auto& f : files)
        if (f.extension() == ".csv")
            csv = f;
    REQUIRE(!csv.empty());
    CHECK(slurp(a / "replica.csv") == slurp(csv));
    const auto rows = parse_sweep_csv(slurp(csv));
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].p == doctest::Approx(0.5).epsilon(1e-8));
    CHECK(rows[0].lambda0 == 0.0);

    const auto manifest = ExperimentConfig::load(a / "manifest.txt");
    CHECK(manifest.get("run.mode") == "replica");
    CHECK(manifest.get("run.version") == kVersion);
    CHECK(code_of([&] { run_experiment(manifest, Mode::sweep, {b, 1}); }) == ErrorCode::config_error);
}

TEST_CASE("direct penalties and plot mode")
{
    const fs::path dir = scratch("direct");
    auto cfg = ExperimentConfig::parse("[system]\nalpha_inverse = 0.5\n[penalty]\nlambda = 0\nlambda0 = 0\n");
    run_experiment(cfg, Mode::replica, {dir, 1});
    const auto rows = parse_sweep_csv(slurp(dir / "replica.csv"));
    REQUIRE(rows.size() == 1);
    CHECK(std::abs(rows[0].chi - 1.0) < 1e-10);
    CHECK(std::abs(rows[0].p - 1.0) < 1e-10);

    auto plot = ExperimentConfig::parse("[plot]\ntitle = x\noutput = fig.svg\n");
    plot.set("plot.inputs", (dir / "replica.csv").string());
    run_experiment(plot, Mode::plot, {dir, 1});
    CHECK(slurp(dir / "fig.svg").find("<svg") != std::string::npos);
    CHECK(code_of([&] { read_plot_curve(dir / "manifest.txt"); }) == ErrorCode::schema_error);
}

TEST_CASE("antenna saving point")
{
    const SavingRow r = antenna_saving_point(2.0, 1.0, 0.5, 0.5, std::nullopt);
    CHECK(r.eta_random == doctest::Approx(0.846574).epsilon(1e-5));
    CHECK(r.saving == doctest::Approx(r.eta_random - 0.5));
    CHECK(code_of([] { antenna_saving_point(1.1, 1.0, 0.5, 0.5, 0.0); }) == ErrorCode::not_achievable);
}

TEST_CASE("simulate reports do not depend on the thread count")
{
    auto cfg = ExperimentConfig::parse(
        "[system]\nalpha_inverse = 2\n[targets]\np = 0.5\neta = 0.5\n[simulation]\nn = 40\ntrials = 4\nseed = 9\nks_draws = 1000\n");
    const fs::path a = scratch("sim1");
    const fs::path b = scratch("sim3");
    const auto fa = run_experiment(cfg, Mode::simulate, {a, 1});
    const auto fb = run_experiment(cfg, Mode::simulate, {b, 3});
    REQUIRE(fa.size() == fb.size());
    for (std::size_t i = 0; i < fa.size(); ++i) {
        CHECK(fa[i].filename() == fb[i].filename());
        CHECK(slurp(fa[i]) == slurp(fb[i]));
    }
}
