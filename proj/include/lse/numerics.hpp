#pragma once

#include <complex>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

namespace lse {

using RealFn = std::function<double(double)>;

/// Complementary error function. Positive-term series below 1, Lentz-evaluated
/// continued fraction above; relative error below 1e-14 on the real line.
double erfc(double x);

/// Standard normal upper tail, Q(x) = erfc(x/sqrt 2)/2.
double q_function(double x);

/// Bracketed root of a continuous function: bisection with secant steps
/// (Illinois-style safeguarding). Returns once |f(x)| <= tol or the bracket
/// is narrower than tol.
/// Throws NoSignChange if f(lo), f(hi) share a sign, NonFinite on NaN/inf.
double find_root_1d(const RealFn& f, double lo, double hi, double tol);

/// Real function that may fail to evaluate (nullopt).
using PartialFn = std::function<std::optional<double>(double)>;

struct Bracket {
    double lo = 0.0;
    double hi = 0.0;
    /// |f(lo)| <= exact_tol was hit directly; lo == hi
    bool exact = false;
};

/// Walks x = start + i step up to `limit` and returns the first pair of
/// neighbours where f changes sign. Where exactly one neighbour fails to
/// evaluate, the stretch is bisected toward the failure first, so brackets
/// next to the edge of the domain are still found.
std::optional<Bracket> scan_for_bracket(const PartialFn& f, double start, double step, double limit,
                                        double exact_tol = 0.0);

/// Kolmogorov-Smirnov sup distance between two empirical CDFs.
double ks_distance(std::span<const double> sample_a, std::span<const double> sample_b);

/// Kolmogorov-Smirnov sup distance between an empirical CDF and a reference CDF.
double ks_distance(std::span<const double> sample, const RealFn& cdf);

enum class QuadratureKind { radial_gaussian, segment_legendre };

struct QuadratureRule {
    std::vector<double> nodes;
    std::vector<double> weights;
    QuadratureKind kind = QuadratureKind::segment_legendre;
    // radial rules only: r_max and the Gaussian mass beyond it
    double tail_start = 0.0;
    double tail_mass = 0.0;
};

/// n-point Gauss-Legendre rule on [-1, 1].
QuadratureRule gauss_legendre(int n);

/// Composite rule for the complex-Gaussian radial law with density
/// (2r/variance) exp(-r^2/variance) on [0, 10 sqrt(variance)]. The axis is
/// split at every breakpoint inside that range and at fixed panels of width
/// sqrt(variance); each panel carries `nodes_per_panel` Gauss-Legendre nodes
/// with the density folded into the weights.
QuadratureRule radial_gaussian_rule(double variance,
                                    std::span<const double> breakpoints = {},
                                    int nodes_per_panel = 64);

/// E[g(|s|)] for s ~ CN(0, variance). The tail beyond the rule's r_max is
/// taken as g(r_max) times the exact tail mass.
double radial_expectation(const RealFn& g, double variance, const QuadratureRule& rule);

double radial_expectation(const RealFn& g, double variance,
                          std::span<const double> breakpoints = {});

/// Counter-based stream: the i-th 64-bit output is a finalizer of
/// key + (i + 1) * golden_gamma, where
///   key = fmix64(master_seed ^ fmix64(stream_index + golden_gamma)).
/// Streams are reproducible from (master_seed, stream_index) alone and can be
/// positioned anywhere with seek().
class RandomStream {
public:
    RandomStream(std::uint64_t master_seed, std::uint64_t stream_index);

    std::uint64_t master_seed() const noexcept { return master_seed_; }
    std::uint64_t stream_index() const noexcept { return stream_index_; }
    std::uint64_t position() const noexcept { return counter_; }
    void seek(std::uint64_t position) noexcept { counter_ = position; }

    std::uint64_t next_u64() noexcept;
    /// Uniform on (0, 1); never returns 0 exactly.
    double uniform() noexcept;
    double normal() noexcept;
    /// Circularly-symmetric complex Gaussian with E|z|^2 = variance.
    std::complex<double> complex_normal(double variance) noexcept;
    /// Uniform integer in [0, bound).
    std::uint64_t uniform_index(std::uint64_t bound) noexcept;

private:
    std::uint64_t master_seed_;
    std::uint64_t stream_index_;
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

std::uint64_t fmix64(std::uint64_t x) noexcept;

} // namespace lse
