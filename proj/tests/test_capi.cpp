// Links only the shared C API.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "lse/lse.h"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>

TEST_CASE("version and status names")
{
    CHECK(std::string(lse_version()) == "0.1.0");
    CHECK(std::string(lse_status_name(LSE_OK)) == "Ok");
    CHECK(std::string(lse_status_name(LSE_NOT_ACHIEVABLE)).size() > 0);
}

TEST_CASE("config handles")
{
    lse_config* cfg = nullptr;
    REQUIRE(lse_config_parse("[targets]\np = 0.5\n", &cfg) == LSE_OK);
    CHECK(lse_config_set(cfg, "system.alpha_inverse", "2") == LSE_OK);
    CHECK(lse_config_override(cfg, "targets.eta=1") == LSE_OK);

    char small[2];
    size_t needed = 0;
    CHECK(lse_config_get(cfg, "targets.p", small, sizeof small, &needed) == LSE_BUFFER_TOO_SMALL);
    CHECK(needed == 4);
    char buf[64];
    CHECK(lse_config_get(cfg, "targets.p", buf, sizeof buf, nullptr) == LSE_OK);
    CHECK(std::string(buf) == "0.5");
    CHECK(lse_config_get(cfg, "solver.tol", buf, sizeof buf, nullptr) == LSE_CONFIG_ERROR);

    CHECK(lse_config_set(cfg, "bogus.key", "1") == LSE_CONFIG_ERROR);
    CHECK(std::string(lse_last_error()).size() > 0);
    CHECK(lse_config_set(nullptr, "targets.p", "1") == LSE_INVALID_ARGUMENT);

    CHECK(lse_config_serialize(cfg, nullptr, 0, &needed) == LSE_BUFFER_TOO_SMALL);
    std::string text(needed, '\0');
    CHECK(lse_config_serialize(cfg, text.data(), text.size(), nullptr) == LSE_OK);
    CHECK(text.find("alpha_inverse = 2") != std::string::npos);

    const auto dir = std::filesystem::temp_directory_path() / "lse_capi_run";
    std::filesystem::remove_all(dir);
    const std::string out = dir.string();
    lse_run_options opts{out.c_str(), 2};
    CHECK(lse_run(cfg, "replica", &opts) == LSE_OK);
    CHECK(std::filesystem::exists(dir / "replica.csv"));
    CHECK(lse_run(cfg, "nonsense", &opts) == LSE_CONFIG_ERROR);

    const std::string csv = (dir / "replica.csv").string();
    const std::string svg = (dir / "r.svg").string();
    const char* paths[] = {csv.c_str()};
    CHECK(lse_plot(paths, 1, "t", svg.c_str()) == LSE_OK);
    CHECK(lse_plot(paths, 0, "t", svg.c_str()) == LSE_SCHEMA_ERROR);
    lse_config_destroy(cfg);
}

TEST_CASE("system handles")
{
    lse_penalty pen{0.0, 0.0, LSE_FULL_PLANE, 0.0};
    lse_system* sys = nullptr;
    REQUIRE(lse_system_create(2.0, 1.0, &pen, &sys) == LSE_OK);
    lse_replica_result r{};
    REQUIRE(lse_system_solve(sys, &r) == LSE_OK);
    CHECK(std::abs(r.chi - 1.0) < 1e-10);
    CHECK(std::abs(r.p - 1.0) < 1e-10);
    CHECK(std::abs(r.distortion - 0.5) < 1e-10);
    CHECK(std::isinf(r.papr));
    lse_system_destroy(sys);

    REQUIRE(lse_system_create(0.5, 1.0, &pen, &sys) == LSE_OK);
    REQUIRE(lse_system_calibrate(sys, 0.5, 0.5, 0.0, &r) == LSE_OK);
    CHECK(std::abs(r.distortion - 0.09281195) < 1e-7);
    lse_penalty fitted{};
    CHECK(lse_system_penalty(sys, &fitted) == LSE_OK);
    CHECK(fitted.lambda == r.lambda);
    CHECK(fitted.lambda0 == r.lambda0);
    CHECK(lse_system_calibrate(sys, 0.5, 0.5, 1.0, &r) == LSE_NOT_ACHIEVABLE);
    lse_system_destroy(sys);

    CHECK(lse_system_create(-1.0, 1.0, &pen, &sys) == LSE_NON_POSITIVE_ALPHA);
}

TEST_CASE("scalar helpers")
{
    lse_penalty hard{0.0, 1.0, LSE_FULL_PLANE, 0.0};
    double re = 0.0;
    double im = 0.0;
    CHECK(lse_prox(&hard, 0.5, 0.5, 1.0, &re, &im) == LSE_OK);
    CHECK((re == 0.0 && im == 0.0));
    CHECK(lse_prox(&hard, 2.0, 0.0, 1.0, &re, &im) == LSE_OK);
    CHECK(re == 2.0);
    lse_penalty bad{-1.0, 0.0, LSE_FULL_PLANE, 0.0};
    CHECK(lse_prox(&bad, 1.0, 0.0, 1.0, &re, &im) == LSE_INVALID_ARGUMENT);

    double q = 0.0;
    CHECK(lse_q_function(0.0, &q) == LSE_OK);
    CHECK(q == doctest::Approx(0.5).epsilon(1e-15));

    double eta_r = 0.0;
    CHECK(lse_antenna_saving(2.0, 1.0, 0.5, 0.5, NAN, &eta_r) == LSE_OK);
    CHECK(std::abs(eta_r - 0.846574) < 1e-5);
}
