#include "lse/replica.hpp"

#include "lse/error.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <numbers>
#include <optional>
#include <string>

namespace lse {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double e_neg(double t, double variance)
{
    return std::isfinite(t) ? std::exp(-t * t / variance) : 0.0;
}

// (p, E Re{x* s}) of the l2/l0 prox in closed form
struct Moments {
    double power;
    double correlation;
};

Moments closed_form_moments(const PenaltySpec& spec, const ReplicaState& st)
{
    const double lrs = st.lambda_rs;
    const double a = 1.0 + st.kappa * spec.lambda;
    const ThresholdSet& t = st.thresholds;

    if (spec.support.kind == SupportKind::full_plane) {
        const double tail = (lrs + t.tau * t.tau) * e_neg(t.tau, lrs);
        return {tail / (a * a), tail / a};
    }

    const double peak = spec.support.peak_power;
    const double root_p = std::sqrt(peak);
    double xi = 0.0;
    if (a > 0.0) {
        const double lo = std::min(t.tau, t.tau_tilde);
        xi = (lrs + lo * lo) * e_neg(lo, lrs)
            - (lrs + t.tau_tilde * t.tau_tilde) * e_neg(t.tau_tilde, lrs);
    }
    const double e_hat = e_neg(t.tau_hat, lrs);
    const double interior_power = a > 0.0 ? xi / (a * a) : 0.0;
    const double interior_corr = a > 0.0 ? xi / a : 0.0;
    // E[sqrt(P) r 1{r >= tau_hat}] for r = |s|
    const double peak_corr = root_p
        * (t.tau_hat * e_hat
           + std::sqrt(std::numbers::pi * lrs) * q_function(std::sqrt(2.0 / lrs) * t.tau_hat));
    return {interior_power + peak * e_hat, interior_corr + peak_corr};
}

double solve_chi(const SystemParams& params, const ReplicaState& state, double target,
                 ChiUpdate mode)
{
    if (mode == ChiUpdate::explicit_map)
        return target * state.kappa;
    // chi R(-chi) = target
    const auto& r = params.rtransform;
    auto f = [&](double chi) { return chi * r.evaluate(chi) - target; };
    if (target <= 0.0)
        return 0.0;
    double hi = std::max(1.0, 2.0 * state.chi);
    int guard = 0;
    while (f(hi) < 0.0) {
        hi *= 2.0;
        if (++guard > 80)
            throw Error(ErrorCode::invalid_state, "chi equation has no solution for this state");
    }
    return find_root_1d(f, 0.0, hi, 1e-15 * std::max(1.0, target));
}

FixedPointUpdate finish_update(const SystemParams& params, const ReplicaState& state,
                               double power, double correlation, ChiUpdate chi_update)
{
    const double target = correlation / state.lambda_rs;
    return {power, solve_chi(params, state, target, chi_update)};
}

double quadrature_eta(const ScalarPenalty& penalty, const ReplicaState& st)
{
    const auto bps = penalty.breakpoints(st.kappa);
    return radial_expectation(
        [&](double r) { return penalty.prox({r, 0.0}, st.kappa) == cplx{} ? 0.0 : 1.0; },
        st.lambda_rs, bps);
}

struct StepResult {
    bool converged = false;
    ReplicaState state;
    double residual = kInf;
    long iterations = 0;
};

template <class Update>
StepResult iterate(const SystemParams& params, const SolveOptions& opts, double chi0, double p0,
                   Update&& update)
{
    StepResult out;
    double theta = opts.damping;
    double chi = chi0;
    double p = p0;
    int alternations = 0;
    double last_dp = 0.0;
    double checkpoint = kInf;
    for (long it = 1; it <= opts.max_iter; ++it) {
        const ReplicaState st = make_state(params, chi, p);
        const FixedPointUpdate next = update(st);
        if (!std::isfinite(next.p) || !std::isfinite(next.chi))
            throw Error(ErrorCode::invalid_state, "fixed-point update produced a non-finite value");
        const double dp = next.p - p;
        const double dchi = next.chi - chi;
        out.residual = std::max(std::abs(dp) / std::max(1.0, p), std::abs(dchi) / std::max(1.0, chi));
        out.iterations = it;
        out.state = st;
        if (out.residual <= opts.tol) {
            out.converged = true;
            return out;
        }
        // give up once 1000 iterations fail to halve the residual
        if (it % 1000 == 0) {
            if (out.residual > 0.5 * checkpoint)
                return out;
            checkpoint = out.residual;
        }
        if (dp * last_dp < 0.0) {
            if (++alternations >= 5) {
                theta = std::max(0.5 * theta, 1e-3);
                alternations = 0;
            }
        } else {
            alternations = 0;
        }
        last_dp = dp;
        p = std::max(0.0, p + theta * dp);
        chi = std::max(0.0, chi + theta * dchi);
    }
    return out;
}

template <class Update, class Finish>
ReplicaSolution run_solver(const SystemParams& params, const SolveOptions& opts, Update&& update,
                           Finish&& finish)
{
    if (!(opts.tol > 0.0) || !(opts.damping > 0.0) || opts.damping > 1.0)
        throw Error(ErrorCode::invalid_argument, "solve_fixed_point: bad tolerance or damping");
    const double p0 = opts.init_p.value_or(params.lambda_s);

    StepResult first;
    std::string first_error;
    try {
        first = iterate(params, opts, opts.init_chi, p0, update);
    } catch (const Error& e) {
        if (!opts.multistart || e.code() != ErrorCode::invalid_state)
            throw;
        first_error = e.what();
    }
    if (first.converged) {
        ReplicaSolution sol;
        sol.state = first.state;
        sol.residual = first.residual;
        sol.iterations = first.iterations;
        finish(sol);
        return sol;
    }
    if (!opts.multistart) {
        throw Error(ErrorCode::no_convergence,
                    "solve_fixed_point: no convergence after " + std::to_string(first.iterations)
                        + " iterations, residual " + std::to_string(first.residual) + " at chi="
                        + std::to_string(first.state.chi) + " p=" + std::to_string(first.state.p));
    }

    // deterministic log-grid of restarts
    const std::array<double, 4> chis{0.1, 0.5, 2.0, 10.0};
    const std::array<double, 2> ps{0.1, 10.0};
    std::vector<ReplicaSolution> found;
    long total_iter = first.iterations;
    for (double c0 : chis) {
        for (double pf : ps) {
            StepResult r;
            try {
                r = iterate(params, opts, c0, pf * params.lambda_s, update);
            } catch (const Error&) {
            }
            total_iter += r.iterations;
            if (!r.converged)
                continue;
            const bool duplicate = std::any_of(found.begin(), found.end(), [&](const auto& s) {
                return std::abs(s.state.chi - r.state.chi) <= 1e-6
                    && std::abs(s.state.p - r.state.p) <= 1e-6;
            });
            if (duplicate)
                continue;
            ReplicaSolution sol;
            sol.state = r.state;
            sol.residual = r.residual;
            sol.iterations = r.iterations;
            finish(sol);
            found.push_back(sol);
        }
    }
    if (found.empty()) {
        throw Error(ErrorCode::no_convergence,
                    "solve_fixed_point: no convergence from any start (last residual "
                        + std::to_string(first.residual) + (first_error.empty() ? "" : ", " + first_error)
                        + ")");
    }
    auto best = std::min_element(found.begin(), found.end(), [](const auto& a, const auto& b) {
        return a.distortion < b.distortion;
    });
    ReplicaSolution out = *best;
    out.iterations = total_iter;
    for (const auto& s : found)
        if (&s != &*best)
            out.alternatives.push_back(s.state);
    return out;
}

double papr_of(const Support& support, double p)
{
    if (support.kind != SupportKind::disk || !(p > 0.0))
        return kInf;
    return support.peak_power / p;
}

} // namespace

void SystemParams::validate() const
{
    if (!(alpha > 0.0) || !std::isfinite(alpha))
        throw Error(ErrorCode::non_positive_alpha, "SystemParams: alpha must be positive");
    if (!(lambda_s > 0.0) || !std::isfinite(lambda_s))
        throw Error(ErrorCode::invalid_argument, "SystemParams: lambda_s must be positive");
    if (std::abs(rtransform.load() - alpha) > 1e-12 * alpha)
        throw Error(ErrorCode::invalid_argument, "SystemParams: R-transform load differs from alpha");
    penalty.validate();
}

SystemParams make_mp_system(double alpha, double lambda_s, const PenaltySpec& penalty)
{
    SystemParams params{alpha, lambda_s, penalty, marcenko_pastur(alpha)};
    params.validate();
    return params;
}

ReplicaState make_state(const SystemParams& params, double chi, double p)
{
    ReplicaState st;
    st.chi = chi;
    st.p = p;
    st.lambda_rs = lambda_rs(params.rtransform, chi, p, params.lambda_s);
    st.kappa = 1.0 / params.rtransform.evaluate(chi);
    st.thresholds = thresholds(params.penalty, st.kappa);
    return st;
}

FixedPointUpdate fixed_point_update(const SystemParams& params, const ReplicaState& state,
                                    UpdatePath path, ChiUpdate chi_update)
{
    if (path == UpdatePath::quadrature)
        return fixed_point_update(params, L2L0Penalty(params.penalty), state, chi_update);
    const Moments m = closed_form_moments(params.penalty, state);
    return finish_update(params, state, m.power, m.correlation, chi_update);
}

FixedPointUpdate fixed_point_update(const SystemParams& params, const ScalarPenalty& penalty,
                                    const ReplicaState& state, ChiUpdate chi_update)
{
    const auto bps = penalty.breakpoints(state.kappa);
    const QuadratureRule rule = radial_gaussian_rule(state.lambda_rs, bps);
    const double power = radial_expectation(
        [&](double r) { return std::norm(penalty.prox({r, 0.0}, state.kappa)); }, state.lambda_rs,
        rule);
    const double corr = radial_expectation(
        [&](double r) { return penalty.prox({r, 0.0}, state.kappa).real() * r; }, state.lambda_rs,
        rule);
    return finish_update(params, state, power, corr, chi_update);
}

double active_fraction(const SystemParams& params, const ReplicaState& state)
{
    const double lrs = state.lambda_rs;
    const ThresholdSet& t = state.thresholds;
    if (params.penalty.support.kind == SupportKind::full_plane)
        return e_neg(t.tau, lrs);
    const double lo = std::min(t.tau, t.tau_tilde);
    const double eta = e_neg(lo, lrs) - e_neg(t.tau_tilde, lrs) + e_neg(t.tau_hat, lrs);
    return std::clamp(eta, 0.0, 1.0);
}

ReplicaSolution solve_fixed_point(const SystemParams& params, const SolveOptions& opts)
{
    params.validate();
    return run_solver(
        params, opts,
        [&](const ReplicaState& st) {
            return fixed_point_update(params, st, opts.path, opts.chi_update);
        },
        [&](ReplicaSolution& sol) {
            sol.distortion = asymptotic_distortion(params.rtransform, sol.state.chi, sol.state.p,
                                                   params.lambda_s, params.alpha);
            sol.eta = active_fraction(params, sol.state);
            sol.papr = papr_of(params.penalty.support, sol.state.p);
        });
}

ReplicaSolution solve_fixed_point(const SystemParams& params, const ScalarPenalty& penalty,
                                  const SolveOptions& opts)
{
    if (!(params.alpha > 0.0) || !(params.lambda_s > 0.0))
        throw Error(ErrorCode::invalid_argument, "solve_fixed_point: bad system parameters");
    return run_solver(
        params, opts,
        [&](const ReplicaState& st) {
            // thresholds in the state refer to params.penalty; the generic
            // path reads breakpoints from the penalty object instead
            return fixed_point_update(params, penalty, st, opts.chi_update);
        },
        [&](ReplicaSolution& sol) {
            sol.distortion = asymptotic_distortion(params.rtransform, sol.state.chi, sol.state.p,
                                                   params.lambda_s, params.alpha);
            sol.eta = quadrature_eta(penalty, sol.state);
            sol.papr = papr_of(penalty.support(), sol.state.p);
        });
}

namespace {

struct Evaluation {
    ReplicaSolution solution;
    double lambda;
    double lambda0;
};

SystemParams with_factors(const SystemParams& base, double lambda, double lambda0)
{
    SystemParams p = base;
    p.penalty.lambda = lambda;
    p.penalty.lambda0 = lambda0;
    return p;
}

// lambda coordinate: log-scale on the full plane, asinh on a disk where
// negative values are allowed
double lambda_from(const Support& s, double y)
{
    return s.kind == SupportKind::disk ? std::sinh(y) : std::exp(y);
}

struct LambdaBracket {
    double lo;
    double hi;
};

LambdaBracket lambda_bracket(const Support& s)
{
    if (s.kind == SupportKind::disk)
        return {-25.0, 25.0};
    return {-25.0, 20.0};
}

constexpr double kResidualTol = 1e-8;
// PAPR targets this close to 1/eta are taken as exactly 1/eta
constexpr double kEnvelopeSnap = 5e-3;

// lambda giving p = p_target at fixed lambda0
Evaluation solve_power(const SystemParams& base, double p_target, double lambda0,
                       const SolveOptions& opts)
{
    const Support& support = base.penalty.support;
    const LambdaBracket br = lambda_bracket(support);
    auto power_gap = [&](double y) {
        return solve_fixed_point(with_factors(base, lambda_from(support, y), lambda0), opts).state.p
            - p_target;
    };
    const PartialFn maybe = [&](double y) -> std::optional<double> {
        try {
            return power_gap(y);
        } catch (const Error&) {
            return std::nullopt;
        }
    };
    // p falls with lambda: walk outward from lambda = 1
    const double y0 = support.kind == SupportKind::disk ? std::asinh(1.0) : 0.0;
    const auto f0 = maybe(y0);
    if (!f0)
        throw Error(ErrorCode::not_achievable, "calibrate: no fixed point at lambda = 1");
    const double dir = *f0 > 0.0 ? 1.0 : -1.0;
    const auto hit = scan_for_bracket(maybe, y0, dir * 2.0, dir > 0.0 ? br.hi : br.lo, 0.1 * kResidualTol);
    if (!hit)
        throw Error(ErrorCode::not_achievable,
                    "calibrate: power target " + std::to_string(p_target) + " outside the reachable range");
    // an exact hit covers the constant-envelope plateau landing on the target
    const double y = hit->exact ? hit->lo : find_root_1d(power_gap, hit->lo, hit->hi, 1e-11);
    const double lam = lambda_from(support, y);
    Evaluation ev{solve_fixed_point(with_factors(base, lam, lambda0), opts), lam, lambda0};
    if (std::abs(ev.solution.state.p - p_target) > kResidualTol)
        throw Error(ErrorCode::not_achievable, "calibrate: power target not met to tolerance");
    return ev;
}

bool meets(const Evaluation& ev, const CalibrationTargets& t)
{
    return std::abs(ev.solution.state.p - t.p) <= kResidualTol
        && std::abs(ev.solution.eta - t.eta) <= kResidualTol;
}

std::optional<Evaluation> newton_calibrate(const SystemParams& base, const CalibrationTargets& t,
                                           const SolveOptions& opts, double log_lambda_start)
{
    auto eval = [&](double x, double y) {
        return Evaluation{solve_fixed_point(with_factors(base, std::exp(x), std::exp(y)), opts),
                          std::exp(x), std::exp(y)};
    };
    auto residual = [&](const Evaluation& ev) {
        return std::array<double, 2>{ev.solution.state.p - t.p, ev.solution.eta - t.eta};
    };
    auto norm = [](const std::array<double, 2>& r) { return std::hypot(r[0], r[1]); };

    try {
        double x = log_lambda_start;
        // start lambda0 near the threshold that gives eta from the RZF variance
        double y = std::log(std::max(1e-6, -std::log(t.eta)));
        Evaluation cur = eval(x, y);
        auto r = residual(cur);
        constexpr double h = 1e-4;
        for (int it = 0; it < 60; ++it) {
            if (meets(cur, t))
                return cur;
            const auto rx = residual(eval(x + h, y));
            const auto ry = residual(eval(x, y + h));
            const double j00 = (rx[0] - r[0]) / h;
            const double j01 = (ry[0] - r[0]) / h;
            const double j10 = (rx[1] - r[1]) / h;
            const double j11 = (ry[1] - r[1]) / h;
            const double det = j00 * j11 - j01 * j10;
            if (!std::isfinite(det) || std::abs(det) < 1e-300)
                return std::nullopt;
            const double dx = -(j11 * r[0] - j01 * r[1]) / det;
            const double dy = -(-j10 * r[0] + j00 * r[1]) / det;
            double step = 1.0;
            bool improved = false;
            for (int ls = 0; ls < 30; ++ls) {
                const double nx = x + step * std::clamp(dx, -2.0, 2.0);
                const double ny = y + step * std::clamp(dy, -2.0, 2.0);
                try {
                    Evaluation trial = eval(nx, ny);
                    const auto tr = residual(trial);
                    if (norm(tr) < norm(r)) {
                        x = nx;
                        y = ny;
                        cur = trial;
                        r = tr;
                        improved = true;
                        break;
                    }
                } catch (const Error&) {
                }
                step *= 0.5;
            }
            if (!improved)
                return std::nullopt;
        }
        if (meets(cur, t))
            return cur;
    } catch (const Error&) {
    }
    return std::nullopt;
}

Evaluation nested_calibrate(const SystemParams& base, const CalibrationTargets& t,
                            const SolveOptions& opts)
{
    auto eta_gap = [&](double y) { return solve_power(base, t.p, std::exp(y), opts).solution.eta - t.eta; };
    const PartialFn maybe = [&](double y) -> std::optional<double> {
        try {
            return eta_gap(y);
        } catch (const Error&) {
            return std::nullopt;
        }
    };
    const auto hit = scan_for_bracket(maybe, -20.0, 1.0, 12.0, 0.1 * kResidualTol);
    if (!hit)
        throw Error(ErrorCode::not_achievable,
                    "calibrate: active-fraction target " + std::to_string(t.eta) + " not reachable at p="
                        + std::to_string(t.p));
    const double y = hit->exact ? hit->lo : find_root_1d(eta_gap, hit->lo, hit->hi, 1e-11);
    return solve_power(base, t.p, std::exp(y), opts);
}

// PAPR * eta = 1 forces every active antenna onto the circle, so p = eta P
// holds identically and only eta is free. With 1 + kappa lambda <= 0 the
// prox is 0 or a circle point with a threshold set by lambda0; lambda = -2^j
// for the smallest j reaching that regime represents the whole family.
Evaluation constant_envelope_calibrate(const SystemParams& base, const CalibrationTargets& t,
                                       const SolveOptions& opts)
{
    for (int j = 0; j <= 30; ++j) {
        const double lambda = -std::ldexp(1.0, j);
        auto eta_gap = [&](double y) {
            return solve_fixed_point(with_factors(base, lambda, std::exp(y)), opts).eta - t.eta;
        };
        const PartialFn maybe = [&](double y) -> std::optional<double> {
            try {
                return eta_gap(y);
            } catch (const Error&) {
                return std::nullopt;
            }
        };
        const auto hit = scan_for_bracket(maybe, -20.0, 1.0, 12.0, 0.1 * kResidualTol);
        if (!hit)
            continue;
        const double y = hit->exact ? hit->lo : find_root_1d(eta_gap, hit->lo, hit->hi, 1e-11);
        Evaluation ev{solve_fixed_point(with_factors(base, lambda, std::exp(y)), opts), lambda, std::exp(y)};
        if (1.0 + ev.solution.state.kappa * lambda <= 0.0)
            return ev;
    }
    throw Error(ErrorCode::not_achievable, "calibrate: constant-envelope target not reachable");
}

} // namespace

Calibration calibrate(const SystemParams& base_in, const CalibrationTargets& targets,
                      const SolveOptions& opts)
{
    if (!(targets.p > 0.0))
        throw Error(ErrorCode::invalid_argument, "calibrate: power target must be positive");
    if (!(targets.eta > 0.0) || targets.eta > 1.0)
        throw Error(ErrorCode::invalid_argument, "calibrate: eta target must lie in (0, 1]");

    SystemParams base = base_in;
    if (targets.papr) {
        if (!(*targets.papr >= 1.0))
            throw Error(ErrorCode::not_achievable, "calibrate: PAPR below 0 dB is not achievable");
        if (*targets.papr * targets.eta < 1.0 - kEnvelopeSnap)
            throw Error(ErrorCode::not_achievable,
                        "calibrate: PAPR below 1/eta is not achievable (peak power times active fraction "
                        "bounds the average power)");
        base.penalty.support = Support::disk(*targets.papr * targets.p);
    }
    base.penalty.lambda = 0.0;
    base.penalty.lambda0 = 0.0;
    base.validate();

    Evaluation ev;
    if (targets.eta >= 1.0) {
        ev = solve_power(base, targets.p, 0.0, opts);
    } else {
        std::optional<Evaluation> newton;
        if (targets.papr && std::abs(*targets.papr * targets.eta - 1.0) <= kEnvelopeSnap) {
            // "3 dB" at eta = 1/2 means PAPR 2, not 10^0.3
            base.penalty.support = Support::disk(targets.p / targets.eta);
            ev = constant_envelope_calibrate(base, targets, opts);
        } else if (base.penalty.support.kind == SupportKind::full_plane) {
            double start = 0.0;
            try {
                start = std::log(std::max(1e-12, solve_power(base, targets.p, 0.0, opts).lambda));
            } catch (const Error&) {
            }
            newton = newton_calibrate(base, targets, opts, start);
            ev = newton ? *newton : nested_calibrate(base, targets, opts);
        } else {
            ev = nested_calibrate(base, targets, opts);
        }
    }
    if (!meets(ev, targets))
        throw Error(ErrorCode::not_achievable, "calibrate: targets not met to tolerance");

    Calibration out;
    out.lambda = ev.lambda;
    out.lambda0 = ev.lambda0;
    out.solution = ev.solution;
    out.params = with_factors(base, ev.lambda, ev.lambda0);
    return out;
}

std::vector<cplx> decoupled_sample(const ReplicaState& state, const PenaltySpec& penalty,
                                   RandomStream& stream, std::size_t count)
{
    std::vector<cplx> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i)
        out.push_back(prox(penalty, stream.complex_normal(state.lambda_rs), state.kappa));
    return out;
}

BaselineSolution random_tas_baseline(const SystemParams& params, double eta_r, double p_target,
                                     std::optional<double> papr, const SolveOptions& opts)
{
    if (!(eta_r > 0.0) || eta_r > 1.0)
        throw Error(ErrorCode::invalid_argument, "random_tas_baseline: eta_r must lie in (0, 1]");
    const double alpha_eff = params.alpha / eta_r;
    PenaltySpec pen;
    pen.support = papr ? Support::full_plane() : params.penalty.support;
    SystemParams sub = make_mp_system(alpha_eff, params.lambda_s, pen);
    BaselineSolution out;
    out.calibration = calibrate(sub, {p_target, 1.0, papr}, opts);
    out.effective_alpha = alpha_eff;
    out.lambda_physical = out.calibration.lambda * eta_r;
    return out;
}

} // namespace lse
