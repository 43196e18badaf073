#include "lse/numerics.hpp"

#include "lse/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace lse {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// erf(x) = 2/sqrt(pi) exp(-x^2) sum_n 2^n x^(2n+1) / (1*3*...*(2n+1)).
// All terms positive, so no cancellation for moderate x.
double erf_series(double x)
{
    const double x2 = x * x;
    double term = x;
    double sum = x;
    for (int n = 1; n < 200; ++n) {
        term *= 2.0 * x2 / (2.0 * n + 1.0);
        sum += term;
        if (term < sum * 1e-17)
            break;
    }
    return 2.0 / std::sqrt(std::numbers::pi) * std::exp(-x2) * sum;
}

// exp(x^2) erfc(x) = (1/sqrt(pi)) / (x + (1/2)/(x + 1/(x + (3/2)/(x + ...))))
// evaluated with the modified Lentz algorithm, x >= 1.
double erfcx_continued_fraction(double x)
{
    constexpr double tiny = 1e-300;
    double f = x;
    double c = x;
    double d = 0.0;
    for (int n = 1; n < 5000; ++n) {
        const double a = 0.5 * n;
        d = x + a * d;
        if (std::abs(d) < tiny)
            d = tiny;
        c = x + a / c;
        if (std::abs(c) < tiny)
            c = tiny;
        d = 1.0 / d;
        const double delta = c * d;
        f *= delta;
        if (std::abs(delta - 1.0) < 1e-16)
            break;
    }
    return 1.0 / (std::sqrt(std::numbers::pi) * f);
}

// exp(-c x^2) for c in {1, 1/2}; x = m + r with m on a 1/128 grid so m^2 is exact
double gauss_factor(double x, double c)
{
    const double m = std::floor(x * 128.0 + 0.5) / 128.0;
    const double r = x - m;
    return std::exp(-c * m * m) * std::exp(-c * (2.0 * m + r) * r);
}

} // namespace

double erfc(double x)
{
    if (std::isnan(x))
        return x;
    if (x < 0.0)
        return 2.0 - erfc(-x);
    if (x < 1.0)
        return 1.0 - erf_series(x);
    if (x > 27.5)
        return 0.0;
    return gauss_factor(x, 1.0) * erfcx_continued_fraction(x);
}

double q_function(double x)
{
    // the argument is kept unscaled in the Gaussian factor
    const double t = x / std::numbers::sqrt2;
    if (std::isnan(x) || x < 0.0 || t < 1.0 || t > 27.5)
        return 0.5 * erfc(t);
    return 0.5 * gauss_factor(x, 0.5) * erfcx_continued_fraction(t);
}

double find_root_1d(const RealFn& f, double lo, double hi, double tol)
{
    if (!(tol > 0.0))
        throw Error(ErrorCode::invalid_argument, "find_root_1d: tol must be positive");
    if (lo > hi)
        std::swap(lo, hi);

    auto eval = [&](double x) {
        const double y = f(x);
        if (!std::isfinite(y))
            throw Error(ErrorCode::non_finite, "find_root_1d: non-finite function value");
        return y;
    };

    double flo = eval(lo);
    double fhi = eval(hi);
    if (flo == 0.0)
        return lo;
    if (fhi == 0.0)
        return hi;
    if ((flo > 0.0) == (fhi > 0.0))
        throw Error(ErrorCode::no_sign_change, "find_root_1d: bracket does not straddle a root");

    double best = std::abs(flo) < std::abs(fhi) ? lo : hi;
    double fbest = std::min(std::abs(flo), std::abs(fhi));
    double prev_width = hi - lo;
    bool use_secant = true;

    for (int it = 0; it < 400; ++it) {
        const double width = hi - lo;
        if (fbest <= tol || width <= tol)
            return best;

        double x = 0.5 * (lo + hi);
        if (use_secant) {
            const double s = lo - flo * (hi - lo) / (fhi - flo);
            // keep secant steps away from the bracket ends
            const double guard = 1e-3 * width;
            if (s > lo + guard && s < hi - guard)
                x = s;
        }
        const double fx = eval(x);
        if (std::abs(fx) < fbest) {
            fbest = std::abs(fx);
            best = x;
        }
        if (fx == 0.0)
            return x;
        if ((fx > 0.0) == (flo > 0.0)) {
            lo = x;
            flo = fx;
        } else {
            hi = x;
            fhi = fx;
        }
        // fall back to a bisection step whenever the bracket stalls
        use_secant = (hi - lo) < 0.5 * prev_width || !use_secant;
        prev_width = width;
    }
    return best;
}

double ks_distance(std::span<const double> sample_a, std::span<const double> sample_b)
{
    if (sample_a.empty() || sample_b.empty())
        throw Error(ErrorCode::empty_sample, "ks_distance: empty sample");
    std::vector<double> a(sample_a.begin(), sample_a.end());
    std::vector<double> b(sample_b.begin(), sample_b.end());
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());

    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    std::size_t i = 0;
    std::size_t j = 0;
    double d = 0.0;
    while (i < a.size() || j < b.size()) {
        double v;
        if (j == b.size() || (i < a.size() && a[i] <= b[j]))
            v = a[i];
        else
            v = b[j];
        while (i < a.size() && a[i] == v)
            ++i;
        while (j < b.size() && b[j] == v)
            ++j;
        d = std::max(d, std::abs(i / na - j / nb));
    }
    return d;
}

double ks_distance(std::span<const double> sample, const RealFn& cdf)
{
    if (sample.empty())
        throw Error(ErrorCode::empty_sample, "ks_distance: empty sample");
    std::vector<double> a(sample.begin(), sample.end());
    std::sort(a.begin(), a.end());
    const double n = static_cast<double>(a.size());
    double d = 0.0;
    std::size_t i = 0;
    while (i < a.size()) {
        const double v = a[i];
        const double before = i / n;
        while (i < a.size() && a[i] == v)
            ++i;
        const double after = i / n;
        const double f_at = cdf(v);
        const double f_left = cdf(std::nextafter(v, -kInf));
        d = std::max({d, std::abs(after - f_at), std::abs(before - f_left)});
    }
    return d;
}

QuadratureRule gauss_legendre(int n)
{
    if (n < 1)
        throw Error(ErrorCode::invalid_argument, "gauss_legendre: n must be positive");
    QuadratureRule rule;
    rule.kind = QuadratureKind::segment_legendre;
    rule.nodes.resize(n);
    rule.weights.resize(n);
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0;
            double p1 = x;
            for (int k = 2; k <= n; ++k) {
                const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16)
                break;
        }
        // recompute the derivative at the converged node
        double p0 = 1.0;
        double p1 = x;
        for (int k = 2; k <= n; ++k) {
            const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
            p0 = p1;
            p1 = p2;
        }
        dp = n == 1 ? 1.0 : n * (x * p1 - p0) / (x * x - 1.0);
        const double w = 2.0 / ((1.0 - x * x) * dp * dp);
        rule.nodes[i] = -x;
        rule.nodes[n - 1 - i] = x;
        rule.weights[i] = w;
        rule.weights[n - 1 - i] = w;
    }
    return rule;
}

QuadratureRule radial_gaussian_rule(double variance, std::span<const double> breakpoints,
                                    int nodes_per_panel)
{
    if (!(variance > 0.0) || !std::isfinite(variance))
        throw Error(ErrorCode::invalid_argument, "radial_gaussian_rule: variance must be positive");

    const double sigma = std::sqrt(variance);
    const double r_max = 10.0 * sigma;

    std::vector<double> edges;
    for (int i = 0; i <= 10; ++i)
        edges.push_back(i * sigma);
    for (double b : breakpoints)
        if (std::isfinite(b) && b > 0.0 && b < r_max)
            edges.push_back(b);
    std::sort(edges.begin(), edges.end());
    std::vector<double> unique_edges;
    for (double e : edges)
        if (unique_edges.empty() || e - unique_edges.back() > 1e-14 * r_max)
            unique_edges.push_back(e);
    unique_edges.back() = r_max;

    const QuadratureRule base = gauss_legendre(nodes_per_panel);
    QuadratureRule rule;
    rule.kind = QuadratureKind::radial_gaussian;
    for (std::size_t p = 0; p + 1 < unique_edges.size(); ++p) {
        const double a = unique_edges[p];
        const double b = unique_edges[p + 1];
        const double half = 0.5 * (b - a);
        const double mid = 0.5 * (a + b);
        for (int i = 0; i < nodes_per_panel; ++i) {
            const double r = mid + half * base.nodes[i];
            const double density = 2.0 * r / variance * std::exp(-r * r / variance);
            rule.nodes.push_back(r);
            rule.weights.push_back(half * base.weights[i] * density);
        }
    }
    rule.tail_start = r_max;
    rule.tail_mass = std::exp(-r_max * r_max / variance);
    return rule;
}

double radial_expectation(const RealFn& g, double variance, const QuadratureRule& rule)
{
    if (!(variance > 0.0))
        throw Error(ErrorCode::invalid_argument, "radial_expectation: variance must be positive");
    double sum = 0.0;
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
        const double v = g(rule.nodes[i]);
        if (!std::isfinite(v))
            throw Error(ErrorCode::non_finite, "radial_expectation: integrand is not finite");
        sum += rule.weights[i] * v;
    }
    if (rule.tail_mass > 0.0) {
        const double v = g(rule.tail_start);
        if (!std::isfinite(v))
            throw Error(ErrorCode::non_finite, "radial_expectation: integrand is not finite");
        sum += rule.tail_mass * v;
    }
    return sum;
}

double radial_expectation(const RealFn& g, double variance, std::span<const double> breakpoints)
{
    return radial_expectation(g, variance, radial_gaussian_rule(variance, breakpoints));
}

std::uint64_t fmix64(std::uint64_t x) noexcept
{
    // SplitMix64 finalizer
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ULL;
    x ^= x >> 27;
    x *= 0x94d049bb133111ebULL;
    x ^= x >> 31;
    return x;
}

namespace {
constexpr std::uint64_t kGoldenGamma = 0x9e3779b97f4a7c15ULL;
}

RandomStream::RandomStream(std::uint64_t master_seed, std::uint64_t stream_index)
    : master_seed_(master_seed),
      stream_index_(stream_index),
      key_(fmix64(master_seed ^ fmix64(stream_index + kGoldenGamma)))
{
}

std::uint64_t RandomStream::next_u64() noexcept
{
    ++counter_;
    return fmix64(key_ + counter_ * kGoldenGamma);
}

double RandomStream::uniform() noexcept
{
    // 53 random bits, shifted off zero
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

double RandomStream::normal() noexcept
{
    const double u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::complex<double> RandomStream::complex_normal(double variance) noexcept
{
    const double u1 = uniform();
    const double u2 = uniform();
    // |z|^2 ~ Exp(variance)
    const double radius = std::sqrt(-variance * std::log(u1));
    const double phase = 2.0 * std::numbers::pi * u2;
    return {radius * std::cos(phase), radius * std::sin(phase)};
}

std::uint64_t RandomStream::uniform_index(std::uint64_t bound) noexcept
{
    if (bound <= 1)
        return 0;
    // rejection keeps the draw exactly uniform
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max()
        - std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t v;
    do {
        v = next_u64();
    } while (v >= limit);
    return v % bound;
}

std::optional<Bracket> scan_for_bracket(const PartialFn& f, double start, double step, double limit,
                                        double exact_tol)
{
    if (!(step != 0.0) || !std::isfinite(step) || !std::isfinite(start) || !std::isfinite(limit)
        || (limit - start) / step < 0.0)
        throw Error(ErrorCode::invalid_argument, "scan_for_bracket: step must move start toward limit");
    auto exact = [&](double v) { return std::abs(v) <= exact_tol; };
    // good end (x_ok, f_ok), failing end x_bad
    auto refine = [&](double x_ok, double f_ok, double x_bad) -> std::optional<Bracket> {
        for (int i = 0; i < 40; ++i) {
            const double mid = 0.5 * (x_ok + x_bad);
            const auto fm = f(mid);
            if (!fm) {
                x_bad = mid;
                continue;
            }
            if (exact(*fm))
                return Bracket{mid, mid, true};
            if ((*fm > 0.0) != (f_ok > 0.0))
                return Bracket{std::min(mid, x_ok), std::max(mid, x_ok), false};
            x_ok = mid;
            f_ok = *fm;
        }
        return std::nullopt;
    };
    const long count = static_cast<long>(std::floor((limit - start) / step + 1e-9)) + 1;
    std::optional<double> prev_x;
    std::optional<double> prev_f;
    for (long i = 0; i < count; ++i) {
        const double x = start + static_cast<double>(i) * step;
        const auto fx = f(x);
        if (fx && exact(*fx))
            return Bracket{x, x, true};
        if (prev_x) {
            if (fx && prev_f && (*fx > 0.0) != (*prev_f > 0.0))
                return Bracket{std::min(x, *prev_x), std::max(x, *prev_x), false};
            std::optional<Bracket> hit;
            if (fx && !prev_f)
                hit = refine(x, *fx, *prev_x);
            else if (!fx && prev_f)
                hit = refine(*prev_x, *prev_f, x);
            if (hit)
                return hit;
        }
        prev_x = x;
        prev_f = fx;
    }
    return std::nullopt;
}

} // namespace lse
