#include "lse/error.hpp"
#include "lse/replica.hpp"

#include <doctest.h>

#include <cmath>

using namespace lse;

namespace {

SystemParams mp(double alpha, double lambda, double lambda0, Support support = Support::full_plane())
{
    return make_mp_system(alpha, 1.0, PenaltySpec{lambda, lambda0, support});
}

} // namespace

TEST_CASE("unregularized overloaded system is an exact fixed point")
{
    const SystemParams params = mp(2.0, 0.0, 0.0);
    const FixedPointUpdate u = fixed_point_update(params, make_state(params, 1.0, 1.0));
    CHECK(u.p == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(u.chi == doctest::Approx(1.0).epsilon(1e-14));

    const ReplicaSolution sol = solve_fixed_point(params);
    CHECK(std::abs(sol.state.chi - 1.0) < 1e-10);
    CHECK(std::abs(sol.state.p - 1.0) < 1e-10);
    CHECK(std::abs(sol.distortion - 0.5) < 1e-10);
    CHECK(sol.eta == 1.0);
    CHECK(std::isinf(sol.papr));
}

TEST_CASE("zero threshold gives the shrunk power update")
{
    const SystemParams params = mp(0.5, 0.3, 0.0);
    const ReplicaState st = make_state(params, 0.8, 0.4);
    CHECK(st.kappa == doctest::Approx(1.8 / 0.5));
    CHECK(st.lambda_rs == doctest::Approx(1.4 / 0.5));
    const double a = 1.0 + st.kappa * 0.3;
    CHECK(fixed_point_update(params, st).p == doctest::Approx(st.lambda_rs / (a * a)).epsilon(1e-13));
    CHECK(solve_fixed_point(params).eta == 1.0);
}

TEST_CASE("closed-form and quadrature updates agree")
{
    RandomStream rs(7, 3);
    for (int i = 0; i < 20; ++i) {
        const bool disk = i % 2 == 1;
        const double alpha = 0.3 + 1.5 * rs.uniform();
        const double lambda = disk ? 2.0 * rs.uniform() - 0.5 : rs.uniform();
        const double lambda0 = 0.5 * rs.uniform();
        const Support sup = disk ? Support::disk(0.2 + 2.0 * rs.uniform()) : Support::full_plane();
        const SystemParams params = mp(alpha, lambda, lambda0, sup);
        const ReplicaState st = make_state(params, 0.1 + 3.0 * rs.uniform(), 0.05 + rs.uniform());
        const FixedPointUpdate cf = fixed_point_update(params, st, UpdatePath::closed_form);
        const FixedPointUpdate qd = fixed_point_update(params, st, UpdatePath::quadrature);
        CHECK(std::abs(cf.p - qd.p) <= 1e-7 * std::max(1.0, cf.p));
        CHECK(std::abs(cf.chi - qd.chi) <= 1e-7 * std::max(1.0, cf.chi));
    }
}

TEST_CASE("a huge disk reduces to the full plane")
{
    const SystemParams full = mp(0.5, 0.2, 0.1);
    const SystemParams disk = mp(0.5, 0.2, 0.1, Support::disk(1e6));
    const ReplicaState sf = make_state(full, 1.3, 0.6);
    const ReplicaState sd = make_state(disk, 1.3, 0.6);
    const FixedPointUpdate uf = fixed_point_update(full, sf);
    const FixedPointUpdate ud = fixed_point_update(disk, sd);
    CHECK(ud.p == doctest::Approx(uf.p).epsilon(1e-4));
    CHECK(ud.chi == doctest::Approx(uf.chi).epsilon(1e-4));
}

TEST_CASE("fixed-point certificate at convergence")
{
    const SystemParams params = mp(0.5, 0.1, 0.05);
    const ReplicaSolution sol = solve_fixed_point(params);
    const FixedPointUpdate u = fixed_point_update(params, sol.state);
    CHECK(std::abs(u.p - sol.state.p) <= 10 * 1e-12 * std::max(1.0, sol.state.p));
    CHECK(std::abs(u.chi - sol.state.chi) <= 10 * 1e-12 * std::max(1.0, sol.state.chi));
    CHECK(sol.distortion == doctest::Approx((1.0 + sol.state.p) / std::pow(1.0 + sol.state.chi, 2)));
}

TEST_CASE("calibration hits the targets")
{
    const SystemParams base = mp(0.5, 0.0, 0.0);
    SUBCASE("eta = 1 pins lambda0")
    {
        const Calibration cal = calibrate(base, {0.5, 1.0, std::nullopt});
        CHECK(cal.lambda0 == 0.0);
        CHECK(std::abs(cal.solution.state.p - 0.5) < 1e-8);
        CHECK(cal.lambda == doctest::Approx(0.13299316).epsilon(1e-7));
        CHECK(cal.solution.distortion == doctest::Approx(0.05051026).epsilon(1e-7));
    }
    SUBCASE("eta = 0.5 regression and check-back")
    {
        const Calibration cal = calibrate(base, {0.5, 0.5, std::nullopt});
        CHECK(cal.lambda > 0.0);
        CHECK(cal.lambda0 > 0.0);
        CHECK(cal.solution.distortion == doctest::Approx(0.09281195).epsilon(1e-7));
        const ReplicaSolution again = solve_fixed_point(cal.params);
        CHECK(std::abs(again.state.p - 0.5) < 1e-8);
        CHECK(std::abs(again.eta - 0.5) < 1e-8);
    }
    SUBCASE("more antennas never hurt")
    {
        double prev = std::numeric_limits<double>::infinity();
        for (double eta : {0.3, 0.5, 0.7, 0.9, 1.0}) {
            const double d = calibrate(base, {0.5, eta, std::nullopt}).solution.distortion;
            CHECK(d <= prev + 1e-12);
            prev = d;
        }
    }
    SUBCASE("8 dB tracks the unconstrained precoder")
    {
        const double free_d = calibrate(base, {0.5, 0.5, std::nullopt}).solution.distortion;
        const Calibration cal = calibrate(base, {0.5, 0.5, std::pow(10.0, 0.8)});
        CHECK(cal.params.penalty.support.kind == SupportKind::disk);
        CHECK(std::abs(cal.solution.distortion / free_d - 1.0) < 0.02);
        CHECK(cal.solution.papr == doctest::Approx(std::pow(10.0, 0.8)).epsilon(1e-6));
    }
    SUBCASE("PAPR below the constant-envelope edge is rejected")
    {
        try {
            calibrate(base, {0.5, 0.5, 1.0});
            FAIL("expected NotAchievable");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::not_achievable);
        }
    }
}

TEST_CASE("decoupled samples follow the state")
{
    const SystemParams params = mp(0.5, 0.1, 0.05);
    const ReplicaSolution sol = solve_fixed_point(params);
    RandomStream rs(11, 0);
    const std::size_t n = 200000;
    const auto xs = decoupled_sample(sol.state, params.penalty, rs, n);
    double nz = 0.0;
    double pw = 0.0;
    for (cplx x : xs) {
        nz += x != cplx{} ? 1.0 : 0.0;
        pw += std::norm(x);
    }
    CHECK(std::abs(nz / n - sol.eta) < 4.0 * std::sqrt(sol.eta * (1 - sol.eta) / n));
    CHECK(pw / n == doctest::Approx(sol.state.p).epsilon(0.02));

    PenaltySpec huge{0.0, 1e6, Support::full_plane()};
    const SystemParams hp = make_mp_system(0.5, 1.0, huge);
    for (cplx x : decoupled_sample(make_state(hp, 1.0, 1.0), huge, rs, 1000))
        CHECK(x == cplx{});
}

TEST_CASE("random TAS baseline")
{
    const SystemParams params = mp(0.5, 0.0, 0.0);
    const BaselineSolution full = random_tas_baseline(params, 1.0, 0.5);
    const Calibration direct = calibrate(params, {0.5, 1.0, std::nullopt});
    CHECK(full.effective_alpha == 0.5);
    CHECK(full.calibration.solution.distortion == doctest::Approx(direct.solution.distortion).epsilon(1e-9));

    const double d50 = calibrate(params, {0.5, 0.5, std::nullopt}).solution.distortion;
    const BaselineSolution r85 = random_tas_baseline(params, 0.85, 0.5);
    CHECK(r85.effective_alpha == doctest::Approx(0.5 / 0.85));
    CHECK(std::abs(r85.calibration.solution.distortion / d50 - 1.0) < 0.02);
}

TEST_CASE("parameter validation")
{
    CHECK_THROWS_AS(make_mp_system(0.0, 1.0, {}), Error);
    CHECK_THROWS_AS(make_mp_system(1.0, -1.0, {}), Error);
    SolveOptions bad;
    bad.tol = 0.0;
    CHECK_THROWS_AS(solve_fixed_point(mp(1.0, 0.1, 0.0), bad), Error);
}
