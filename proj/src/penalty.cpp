#include "lse/penalty.hpp"

#include "lse/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace lse {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double objective(const PenaltySpec& spec, cplx z, double c, cplx v)
{
    const double u = spec.lambda * std::norm(v) + (v == cplx{} ? 0.0 : spec.lambda0);
    return std::norm(v - z) + c * u;
}

cplx unit_phase(cplx z)
{
    const double m = std::abs(z);
    return m > 0.0 ? z / m : cplx{1.0, 0.0};
}

} // namespace

Support Support::disk(double peak_power)
{
    if (!(peak_power > 0.0) || !std::isfinite(peak_power))
        throw Error(ErrorCode::invalid_argument, "Support::disk: peak power must be positive");
    return {SupportKind::disk, peak_power};
}

double Support::radius() const
{
    return kind == SupportKind::disk ? std::sqrt(peak_power) : kInf;
}

bool Support::contains(cplx v, double slack) const
{
    return kind == SupportKind::full_plane || std::abs(v) <= radius() + slack;
}

void PenaltySpec::validate() const
{
    if (!std::isfinite(lambda) || !std::isfinite(lambda0) || lambda0 < 0.0)
        throw Error(ErrorCode::invalid_argument, "PenaltySpec: lambda0 must be finite and non-negative");
    if (support.kind == SupportKind::full_plane && lambda < 0.0)
        throw Error(ErrorCode::invalid_argument, "PenaltySpec: lambda must be non-negative on the full plane");
    if (support.kind == SupportKind::disk && !(support.peak_power > 0.0))
        throw Error(ErrorCode::invalid_argument, "PenaltySpec: disk peak power must be positive");
}

ThresholdSet thresholds(const PenaltySpec& spec, double c)
{
    if (!(c > 0.0))
        throw Error(ErrorCode::invalid_argument, "thresholds: c must be positive");
    const double a = 1.0 + c * spec.lambda;
    ThresholdSet t;
    if (spec.support.kind == SupportKind::full_plane) {
        t.tau = std::sqrt(c * spec.lambda0 * a);
        return t;
    }
    const double root_p = std::sqrt(spec.support.peak_power);
    const double switch_point = 0.5 * a * root_p + c * spec.lambda0 / (2.0 * root_p);
    if (a <= 0.0) {
        // no interior branch
        t.tau = 0.0;
        t.tau_tilde = 0.0;
        t.tau_hat = std::max(0.0, switch_point);
        return t;
    }
    t.tau = std::sqrt(c * spec.lambda0 * a);
    t.tau_tilde = a * root_p;
    t.tau_hat = std::max(t.tau_tilde, switch_point);
    return t;
}

cplx prox(const PenaltySpec& spec, cplx z, double c)
{
    const double a = 1.0 + c * spec.lambda;
    const double m = std::abs(z);
    const ThresholdSet t = thresholds(spec, c);

    if (spec.support.kind == SupportKind::full_plane)
        return m >= t.tau ? z / a : cplx{};

    const double root_p = std::sqrt(spec.support.peak_power);
    if (a <= 0.0)
        return m >= t.tau_hat ? root_p * unit_phase(z) : cplx{};
    if (m > t.tau_tilde) {
        if (m >= t.tau_hat)
            return root_p * unit_phase(z);
        return {};
    }
    return m >= t.tau ? z / a : cplx{};
}

cplx prox_oracle(const PenaltySpec& spec, cplx z, double c, int grid_n)
{
    if (grid_n < 2)
        throw Error(ErrorCode::invalid_argument, "prox_oracle: grid_n too small");
    const double a = 1.0 + c * spec.lambda;
    const double m = std::abs(z);
    const bool disk = spec.support.kind == SupportKind::disk;

    std::vector<cplx> candidates{cplx{}};
    if (a > 0.0 && spec.support.contains(z / a, 0.0))
        candidates.push_back(z / a);
    if (disk)
        candidates.push_back(std::sqrt(spec.support.peak_power) * unit_phase(z));

    double r_max;
    if (disk) {
        r_max = spec.support.radius();
    } else {
        const ThresholdSet t = thresholds(spec, c);
        r_max = 2.0 * std::max(m, t.tau) + 1.0;
    }
    for (int i = 1; i <= grid_n; ++i) {
        const double r = r_max * i / grid_n;
        for (int j = 0; j < grid_n; ++j) {
            const double phi = 2.0 * std::numbers::pi * j / grid_n;
            candidates.push_back(std::polar(r, phi));
        }
    }

    cplx best = candidates.front();
    double best_cost = objective(spec, z, c, best);
    for (const cplx& v : candidates) {
        const double cost = objective(spec, z, c, v);
        if (cost < best_cost) {
            best_cost = cost;
            best = v;
        }
    }
    return best;
}

double penalty_value(const PenaltySpec& spec, cplx v)
{
    if (!spec.support.contains(v))
        throw Error(ErrorCode::out_of_support, "penalty_value: point outside the support");
    return spec.lambda * std::norm(v) + (v == cplx{} ? 0.0 : spec.lambda0);
}

L2L0Penalty::L2L0Penalty(PenaltySpec spec) : spec_(spec)
{
    spec_.validate();
}

std::vector<double> L2L0Penalty::breakpoints(double c) const
{
    const ThresholdSet t = thresholds(spec_, c);
    std::vector<double> out;
    for (double b : {t.tau, t.tau_tilde, t.tau_hat})
        if (std::isfinite(b) && b > 0.0)
            out.push_back(b);
    return out;
}

} // namespace lse
