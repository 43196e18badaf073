#include "lse/error.hpp"
#include "lse/numerics.hpp"
#include "lse/penalty.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace lse;

namespace {

double objective(const PenaltySpec& s, cplx z, double c, cplx v)
{
    return std::norm(v - z) + c * penalty_value(s, v);
}

} // namespace

TEST_CASE("prox reduces to known operators")
{
    const double c = 0.8;
    // ridge shrinkage
    const PenaltySpec ridge{0.5, 0.0, Support::full_plane()};
    const cplx z{1.2, -0.7};
    CHECK(std::abs(prox(ridge, z, c) - z / (1.0 + c * 0.5)) < 1e-15);
    // hard thresholding at sqrt(c lambda0)
    const PenaltySpec hard{0.0, 2.0, Support::full_plane()};
    const double tau = std::sqrt(c * 2.0);
    CHECK(prox(hard, cplx{0.99 * tau, 0.0}, c) == cplx{});
    CHECK(prox(hard, cplx{1.01 * tau, 0.0}, c) == cplx{1.01 * tau, 0.0});
    // projection onto the disk
    const PenaltySpec proj{0.0, 0.0, Support::disk(4.0)};
    CHECK(std::abs(prox(proj, cplx{3.0, 4.0}, c) - cplx{1.2, 1.6}) < 1e-15);
    CHECK(prox(proj, cplx{1.0, 1.0}, c) == cplx{1.0, 1.0});
}

TEST_CASE("threshold ties follow the documented conventions")
{
    const double c = 1.0;
    const PenaltySpec s{0.5, 0.3, Support::full_plane()};
    const ThresholdSet t = thresholds(s, c);
    CHECK(t.tau == doctest::Approx(std::sqrt(0.3 * 1.5)));
    CHECK(prox(s, cplx{t.tau, 0.0}, c) != cplx{});
    CHECK(prox(s, cplx{std::nextafter(t.tau, 0.0), 0.0}, c) == cplx{});

    // disk: interior branch then saturation at tau_tilde
    const PenaltySpec d{0.5, 0.01, Support::disk(1.0)};
    const ThresholdSet td = thresholds(d, c);
    CHECK(td.tau < td.tau_tilde);
    const cplx at_tilde = prox(d, cplx{td.tau_tilde, 0.0}, c);
    CHECK(at_tilde.real() == doctest::Approx(td.tau_tilde / 1.5));
    CHECK(std::abs(prox(d, cplx{10.0, 0.0}, c)) == doctest::Approx(1.0));
}

TEST_CASE("negative lambda on a disk gives zero or the circle")
{
    const PenaltySpec s{-3.0, 0.4, Support::disk(2.0)};
    const double c = 1.0;
    const ThresholdSet t = thresholds(s, c);
    CHECK(t.tau == 0.0);
    CHECK(t.tau_tilde == 0.0);
    for (double r = 0.0; r < 4.0; r += 0.01) {
        const cplx v = prox(s, std::polar(r, 0.3), c);
        CHECK((v == cplx{} || std::abs(std::abs(v) - std::sqrt(2.0)) < 1e-14));
    }
}

TEST_CASE("prox is a global minimizer and commutes with rotations")
{
    RandomStream rs(99, 0);
    for (int i = 0; i < 300; ++i) {
        const bool disk = rs.uniform() < 0.5;
        PenaltySpec s;
        s.lambda0 = 2.0 * rs.uniform();
        s.lambda = disk ? 4.0 * rs.uniform() - 1.5 : 2.0 * rs.uniform();
        if (disk)
            s.support = Support::disk(0.1 + 3.0 * rs.uniform());
        const double c = 0.05 + 3.0 * rs.uniform();
        const cplx z = rs.complex_normal(3.0);
        const cplx v = prox(s, z, c);
        REQUIRE(s.support.contains(v));
        const cplx o = prox_oracle(s, z, c, 64);
        CHECK(objective(s, z, c, v) <= objective(s, z, c, o) + 1e-12);
        const cplx rot = std::polar(1.0, 2.0 * std::numbers::pi * rs.uniform());
        CHECK(std::abs(prox(s, z * rot, c) - v * rot) <= 1e-12 * (1.0 + std::abs(z)));
    }
}

TEST_CASE("penalty values and validation")
{
    const PenaltySpec s{0.5, 0.2, Support::disk(1.0)};
    CHECK(penalty_value(s, cplx{}) == 0.0);
    CHECK(penalty_value(s, cplx{0.6, 0.8}) == doctest::Approx(0.5 + 0.2));
    try {
        penalty_value(s, cplx{1.0, 1.0});
        FAIL("expected OutOfSupport");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::out_of_support);
    }
    CHECK_THROWS_AS((PenaltySpec{-0.1, 0.0, Support::full_plane()}.validate()), Error);
    CHECK_THROWS_AS((PenaltySpec{0.1, -1.0, Support::full_plane()}.validate()), Error);
    CHECK_NOTHROW((PenaltySpec{-0.1, 0.0, Support::disk(1.0)}.validate()));
    CHECK_THROWS_AS(Support::disk(0.0), Error);
    CHECK_THROWS_AS(thresholds(s, 0.0), Error);
    CHECK_THROWS_AS(prox_oracle(s, cplx{1.0, 0.0}, 1.0, 1), Error);
}

TEST_CASE("L2L0Penalty exposes the prox and its breakpoints")
{
    const PenaltySpec s{0.5, 0.01, Support::disk(1.0)};
    const L2L0Penalty pen(s);
    const cplx z{0.4, 0.1};
    CHECK(pen.prox(z, 0.7) == prox(s, z, 0.7));
    CHECK(pen.value(cplx{0.5, 0.0}) == penalty_value(s, cplx{0.5, 0.0}));
    const auto bp = pen.breakpoints(1.0);
    const ThresholdSet t = thresholds(s, 1.0);
    REQUIRE(bp.size() == 3);
    CHECK(bp[0] == t.tau);
    CHECK(bp[1] == t.tau_tilde);
    CHECK(bp[2] == t.tau_hat);
    CHECK(L2L0Penalty(PenaltySpec{}).breakpoints(1.0).empty());
}
