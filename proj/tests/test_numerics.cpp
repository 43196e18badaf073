#include "lse/error.hpp"
#include "lse/numerics.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

using namespace lse;

namespace {

double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

template <class F>
ErrorCode code_of(F&& f)
{
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("no lse::Error thrown");
    return ErrorCode::invalid_argument;
}

} // namespace

TEST_CASE("erfc matches 20-digit reference values")
{
    // mpmath, 30 digits
    const std::pair<double, double> ref[] = {
        {0.1, 0.8875370839817151016},      {0.5, 0.47950012218695346232},   {1.0, 0.15729920705028513066},
        {1.5, 0.033894853524689272933},    {2.0, 0.0046777349810472658379}, {3.0, 2.2090496998585441373e-5},
        {5.0, 1.5374597944280348502e-12},  {10.0, 2.088487583762544757e-45}, {26.0, 5.6631924088561428465e-296},
    };
    for (auto [x, v] : ref)
        CHECK(rel(lse::erfc(x), v) < 1e-14);
}

TEST_CASE("erfc agrees with std::erfc and its reflection")
{
    for (double x = -6.0; x <= 26.0; x += 0.0137) {
        const double ours = lse::erfc(x);
        CHECK(rel(ours, std::erfc(x)) < 2e-14);
        CHECK(std::abs(lse::erfc(-x) - (2.0 - ours)) < 4e-16 * 2.0);
    }
    CHECK(lse::erfc(0.0) == doctest::Approx(1.0).epsilon(1e-16));
    CHECK(lse::erfc(40.0) == 0.0);
    CHECK(lse::erfc(-40.0) == 2.0);
}

TEST_CASE("q_function reference values and symmetry")
{
    const std::pair<double, double> ref[] = {
        {0.5, 0.30853753872598689636},   {1.0, 0.15865525393145705141},   {1.96, 0.024997895148220436213},
        {3.0, 0.0013498980316300945267}, {5.0, 2.8665157187919391167e-7}, {8.0, 6.2209605742717841235e-16},
        {-2.0, 0.9772498680518207928},   {10.0, 7.619853024160526066e-24}, {20.0, 2.7536241186062336951e-89},
    };
    for (auto [x, v] : ref)
        CHECK(rel(q_function(x), v) < 1e-14);
    CHECK(rel(q_function(0.6744897501960817432), 0.25) < 1e-15);
    for (double x = 0.0; x < 8.0; x += 0.25)
        CHECK(q_function(x) + q_function(-x) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("find_root_1d")
{
    const double r = find_root_1d([](double x) { return x * x * x - 2.0; }, 0.0, 2.0, 1e-14);
    CHECK(rel(r, std::cbrt(2.0)) < 1e-13);
    // decreasing function, root at an endpoint
    CHECK(find_root_1d([](double x) { return 1.0 - x; }, 1.0, 3.0, 1e-12) == 1.0);
    // steep, nearly discontinuous
    const double s = find_root_1d([](double x) { return std::tanh(1e4 * (x - 0.3)); }, 0.0, 1.0, 1e-12);
    CHECK(std::abs(s - 0.3) < 1e-10);

    CHECK(code_of([] { find_root_1d([](double x) { return x * x + 1.0; }, -1.0, 1.0, 1e-12); })
          == ErrorCode::no_sign_change);
    CHECK(code_of([] { find_root_1d([](double) { return std::nan(""); }, -1.0, 1.0, 1e-12); })
          == ErrorCode::non_finite);
    CHECK(code_of([] { find_root_1d([](double x) { return x; }, -1.0, 1.0, 0.0); }) == ErrorCode::invalid_argument);
}

TEST_CASE("scan_for_bracket reaches a root next to the edge of the domain")
{
    // undefined below 0.3, root at 0.3001
    const PartialFn f = [](double x) -> std::optional<double> {
        if (x < 0.3)
            return std::nullopt;
        return 0.3001 - x;
    };
    const auto hit = scan_for_bracket(f, 2.0, -1.0, -3.0);
    REQUIRE(hit);
    CHECK(hit->lo <= 0.3001);
    CHECK(hit->hi >= 0.3001);
    CHECK(hit->hi - hit->lo < 1.0);

    const PartialFn none = [](double) -> std::optional<double> { return 1.0; };
    CHECK_FALSE(scan_for_bracket(none, 0.0, 1.0, 5.0));
    CHECK(code_of([&] { scan_for_bracket(none, 0.0, -1.0, 5.0); }) == ErrorCode::invalid_argument);

    const PartialFn exact = [](double x) -> std::optional<double> { return x - 2.0; };
    const auto e = scan_for_bracket(exact, 0.0, 1.0, 5.0, 1e-12);
    REQUIRE(e);
    CHECK(e->exact);
    CHECK(e->lo == 2.0);
}

TEST_CASE("ks_distance")
{
    const std::vector<double> a{0.1, 0.2, 0.3, 0.4};
    CHECK(ks_distance(a, a) == 0.0);
    const std::vector<double> b{1.1, 1.2};
    CHECK(ks_distance(a, b) == 1.0);
    // ties across samples do not create a spurious gap
    const std::vector<double> t1{0.0, 0.0, 1.0, 1.0};
    const std::vector<double> t2{0.0, 1.0};
    CHECK(ks_distance(t1, t2) == doctest::Approx(0.0));

    // grid sample of U(0,1): exact sup distance 1/n
    std::vector<double> grid;
    for (int i = 1; i <= 100; ++i)
        grid.push_back(i / 100.0);
    CHECK(ks_distance(grid, [](double x) { return std::clamp(x, 0.0, 1.0); }) == doctest::Approx(0.01));

    const std::vector<double> empty;
    CHECK(code_of([&] { ks_distance(empty, a); }) == ErrorCode::empty_sample);
    CHECK(code_of([&] { ks_distance(empty, [](double x) { return x; }); }) == ErrorCode::empty_sample);
}

TEST_CASE("gauss_legendre integrates polynomials of degree 2n-1 exactly")
{
    for (int n : {1, 2, 5, 16, 64}) {
        const QuadratureRule g = gauss_legendre(n);
        REQUIRE(g.nodes.size() == static_cast<std::size_t>(n));
        for (int deg = 0; deg <= 2 * n - 1 && deg <= 40; ++deg) {
            double sum = 0.0;
            for (int i = 0; i < n; ++i)
                sum += g.weights[static_cast<std::size_t>(i)] * std::pow(g.nodes[static_cast<std::size_t>(i)], deg);
            const double exact = deg % 2 ? 0.0 : 2.0 / (deg + 1);
            CHECK(std::abs(sum - exact) < 1e-13);
        }
    }
    CHECK(code_of([] { gauss_legendre(0); }) == ErrorCode::invalid_argument);
}

TEST_CASE("radial expectations of the complex Gaussian")
{
    for (double v : {0.01, 0.5, 1.0, 7.0}) {
        CHECK(rel(radial_expectation([](double) { return 1.0; }, v), 1.0) < 1e-13);
        CHECK(rel(radial_expectation([](double r) { return r * r; }, v), v) < 1e-12);
        CHECK(rel(radial_expectation([](double r) { return r; }, v), std::sqrt(std::numbers::pi * v) / 2.0) < 1e-12);
        // discontinuous integrand with its breakpoint declared
        const double t = 0.7 * std::sqrt(v);
        const std::vector<double> bp{t};
        CHECK(rel(radial_expectation([&](double r) { return r >= t ? 1.0 : 0.0; }, v, bp), std::exp(-t * t / v))
              < 1e-13);
    }
    CHECK(code_of([] { radial_expectation([](double) { return 1.0; }, 0.0); }) == ErrorCode::invalid_argument);
    CHECK(code_of([] { radial_expectation([](double) { return std::nan(""); }, 1.0); }) == ErrorCode::non_finite);
}

TEST_CASE("RandomStream is counter-based and reproducible")
{
    RandomStream a(42, 7);
    RandomStream b(42, 7);
    std::vector<std::uint64_t> first;
    for (int i = 0; i < 100; ++i) {
        first.push_back(a.next_u64());
        CHECK(first.back() == b.next_u64());
    }
    a.seek(37);
    CHECK(a.next_u64() == first[37]);
    CHECK(a.position() == 38);

    RandomStream other_index(42, 8);
    RandomStream other_seed(43, 7);
    CHECK(other_index.next_u64() != first[0]);
    CHECK(other_seed.next_u64() != first[0]);
}

TEST_CASE("RandomStream distributions")
{
    RandomStream s(1, 0);
    constexpr int N = 200000;
    double mean = 0.0, m2 = 0.0, cre = 0.0, cim = 0.0, cabs = 0.0, cross = 0.0;
    double umin = 1.0, umax = 0.0;
    for (int i = 0; i < N; ++i) {
        const double u = s.uniform();
        umin = std::min(umin, u);
        umax = std::max(umax, u);
        const double x = s.normal();
        mean += x;
        m2 += x * x;
        const auto z = s.complex_normal(2.0);
        cre += z.real() * z.real();
        cim += z.imag() * z.imag();
        cross += z.real() * z.imag();
        cabs += std::norm(z);
    }
    CHECK(umin > 0.0);
    CHECK(umax < 1.0);
    CHECK(std::abs(mean / N) < 5.0 / std::sqrt(N));
    CHECK(std::abs(m2 / N - 1.0) < 5.0 * std::sqrt(2.0 / N));
    CHECK(std::abs(cabs / N - 2.0) < 5.0 * 2.0 / std::sqrt(N));
    CHECK(std::abs(cre / N - 1.0) < 0.02);
    CHECK(std::abs(cim / N - 1.0) < 0.02);
    CHECK(std::abs(cross / N) < 0.02);

    // uniform_index: all residues hit with roughly equal frequency
    std::vector<int> counts(7, 0);
    for (int i = 0; i < 70000; ++i) {
        const auto k = s.uniform_index(7);
        REQUIRE(k < 7);
        ++counts[k];
    }
    for (int c : counts)
        CHECK(std::abs(c - 10000) < 500);
}
