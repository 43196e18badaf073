#include "lse/error.hpp"
#include "lse/spectral.hpp"

#include <doctest.h>

#include <cmath>

using namespace lse;

TEST_CASE("Marchenko-Pastur R-transform and its derivative")
{
    const RTransform r = marcenko_pastur(0.7);
    CHECK(r.load() == 0.7);
    for (double chi = 0.0; chi <= 20.0; chi += 0.37) {
        CHECK(r.evaluate(chi) == doctest::Approx(0.7 / (1.0 + chi)).epsilon(1e-15));
        const double h = 1e-6 * (1.0 + chi);
        const double fd = (r.evaluate(chi + h) - r.evaluate(chi - h)) / (2.0 * h);
        CHECK(r.derivative(chi) == doctest::Approx(fd).epsilon(1e-7));
    }
    CHECK_THROWS_AS(marcenko_pastur(0.0), Error);
    try {
        marcenko_pastur(-1.0);
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::non_positive_alpha);
    }
}

TEST_CASE("MP reductions of lambda_rs and the distortion")
{
    for (double alpha : {0.3, 0.5, 1.0, 1.7}) {
        const RTransform r = marcenko_pastur(alpha);
        for (double chi = 0.0; chi <= 50.0; chi += 0.5) {
            for (double p : {0.01, 0.5, 3.0}) {
                const double ls = 1.3;
                CHECK(lambda_rs(r, chi, p, ls) == doctest::Approx((ls + p) / alpha).epsilon(1e-13));
                CHECK(asymptotic_distortion(r, chi, p, ls, alpha)
                      == doctest::Approx((ls + p) / ((1.0 + chi) * (1.0 + chi))).epsilon(1e-12));
            }
        }
    }
}

TEST_CASE("general formulas against finite differences for a non-MP transform")
{
    // R(-chi) = a/(1+chi)^2 + 0.2
    const double a = 0.8;
    const RTransform r(
        "test", 1.0, [=](double chi) { return a / ((1 + chi) * (1 + chi)) + 0.2; },
        [=](double chi) { return -2.0 * a / ((1 + chi) * (1 + chi) * (1 + chi)); });
    const double ls = 1.0;
    const double p = 0.4;
    for (double chi : {0.1, 0.5, 1.0, 3.0}) {
        const double h = 1e-5;
        auto g = [&](double x) { return (ls * x - p) * r.evaluate(x); };
        const double R = r.evaluate(chi);
        const double lrs_fd = (g(chi + h) - g(chi - h)) / (2 * h) / (R * R);
        CHECK(lambda_rs(r, chi, p, ls) == doctest::Approx(lrs_fd).epsilon(1e-8));
        auto k = [&](double x) { return (p - ls * x) * x * r.evaluate(x); };
        const double d_fd = ls + ((k(chi + h) - k(chi - h)) / (2 * h)) / 1.0;
        if (d_fd > 0.0)
            CHECK(asymptotic_distortion(r, chi, p, ls, 1.0) == doctest::Approx(d_fd).epsilon(1e-8));
    }
}

TEST_CASE("invalid states are rejected")
{
    const RTransform r = marcenko_pastur(1.0);
    try {
        lambda_rs(r, 1.0, -2.0, 1.0);
        FAIL("expected InvalidState");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::invalid_state);
    }
    // D = (1 + p)/(1+chi)^2 < 0 for p < -1
    try {
        asymptotic_distortion(r, 1.0, -3.0, 1.0, 1.0);
        FAIL("expected InvalidState");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::invalid_state);
    }
}
