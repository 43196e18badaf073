#include "lse/simulator.hpp"

#include "lse/error.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <numeric>
#include <string>
#include <thread>

namespace lse {

namespace {

double coord_penalty(const PenaltySpec& spec, cplx v)
{
    return v == cplx{} ? 0.0 : spec.lambda * std::norm(v) + spec.lambda0;
}

VectorC project_to_support(VectorC x, const Support& support)
{
    if (support.kind != SupportKind::disk)
        return x;
    const double r = support.radius();
    for (Eigen::Index j = 0; j < x.size(); ++j) {
        const double m = std::abs(x[j]);
        if (m > r)
            x[j] *= r / m;
    }
    return x;
}

VectorC rzf_on_support(const MatrixC& H, const VectorC& s, const std::vector<int>& cols,
                       double lambda)
{
    VectorC x = VectorC::Zero(H.cols());
    if (cols.empty())
        return x;
    MatrixC sub(H.rows(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t i = 0; i < cols.size(); ++i)
        sub.col(static_cast<Eigen::Index>(i)) = H.col(cols[i]);
    const VectorC xs = precode_rzf(sub, s, lambda);
    for (std::size_t i = 0; i < cols.size(); ++i)
        x[cols[i]] = xs[static_cast<Eigen::Index>(i)];
    return x;
}

struct CcdRun {
    VectorC x;
    double objective;
    int sweeps;
    bool converged;
    double max_step_increase;
    double residual_drift;
};

CcdRun run_ccd(const PrecodeProblem& pb, VectorC x, const Eigen::VectorXd& col_norm2,
               const CcdOptions& opts)
{
    const PenaltySpec& pen = pb.penalty;
    VectorC r = pb.s - pb.H * x;
    double obj = r.squaredNorm();
    for (Eigen::Index j = 0; j < x.size(); ++j)
        obj += coord_penalty(pen, x[j]);

    CcdRun out{x, obj, 0, false, 0.0, 0.0};
    const double s_norm = std::max(pb.s.norm(), 1e-300);
    for (int sweep = 1; sweep <= opts.max_sweeps; ++sweep) {
        const double before = obj;
        double step2 = 0.0;
        for (Eigen::Index j = 0; j < x.size(); ++j) {
            const double h2 = col_norm2[j];
            if (h2 <= 0.0)
                continue;
            const cplx old = x[j];
            const cplx z = old + pb.H.col(j).dot(r) / h2;
            const cplx v = prox(pen, z, 1.0 / h2);
            if (v == old)
                continue;
            const double delta = h2 * (std::norm(v - z) - std::norm(old - z)) + coord_penalty(pen, v)
                - coord_penalty(pen, old);
            out.max_step_increase = std::max(out.max_step_increase, delta);
            obj += delta;
            r.noalias() -= (v - old) * pb.H.col(j);
            x[j] = v;
            step2 += std::norm(v - old);
        }
        out.sweeps = sweep;
        if (sweep % 50 == 0) {
            out.residual_drift = std::max(out.residual_drift, (r - (pb.s - pb.H * x)).norm() / s_norm);
            r = pb.s - pb.H * x;
        }
        const double decrease = before - obj;
        const double scale = std::max(std::abs(before), 1e-300);
        const double xnorm = std::max(x.norm(), 1e-300);
        if (decrease <= opts.tol * scale && std::sqrt(step2) <= opts.step_tol * xnorm) {
            out.converged = true;
            break;
        }
    }
    out.residual_drift = std::max(out.residual_drift, (r - (pb.s - pb.H * x)).norm() / s_norm);
    out.x = x;
    out.objective = precode_objective(pb, x);
    return out;
}

// Best-improvement add/remove search over supports, where every support is
// scored with its exact RZF amplitudes:
//   f(S) = lambda s^H G_S s + lambda0 |S|,  G_S = (H_S H_S^H + lambda I)^-1.
// For column j, u_j = h_j^H G s and d_j = h_j^H G h_j give the change of f
// when j enters (-lambda|u_j|^2/(1+d_j) + lambda0) or leaves
// (+lambda|u_j|^2/(1-d_j) - lambda0); G is updated by rank one.
struct SupportSearch {
    VectorC x;
    int moves = 0;
};

SupportSearch support_search(const PrecodeProblem& pb, const VectorC& x0)
{
    const MatrixC& H = pb.H;
    const VectorC& s = pb.s;
    const double lam = pb.penalty.lambda;
    const double lam0 = pb.penalty.lambda0;
    const Eigen::Index n = H.cols();
    const Eigen::Index k = H.rows();

    std::vector<char> in(static_cast<std::size_t>(n), 0);
    for (Eigen::Index j = 0; j < n; ++j)
        in[j] = x0[j] != cplx{} ? 1 : 0;

    MatrixC G;
    VectorC u;
    Eigen::VectorXd d;
    auto refresh = [&] {
        MatrixC A = lam * MatrixC::Identity(k, k);
        for (Eigen::Index j = 0; j < n; ++j)
            if (in[j])
                A.noalias() += H.col(j) * H.col(j).adjoint();
        G = A.llt().solve(MatrixC::Identity(k, k));
        u = H.adjoint() * (G * s);
        const MatrixC GH = G * H;
        d = (H.conjugate().cwiseProduct(GH)).colwise().sum().real().transpose();
    };
    refresh();

    SupportSearch out;
    const double floor = 1e-12 * std::max(1.0, s.squaredNorm());
    const int max_moves = 20 * static_cast<int>(n);
    while (out.moves < max_moves) {
        Eigen::Index best = -1;
        double best_gain = -floor;
        for (Eigen::Index j = 0; j < n; ++j) {
            const double u2 = std::norm(u[j]);
            const double gain = in[j] ? lam * u2 / (1.0 - d[j]) - lam0 : -lam * u2 / (1.0 + d[j]) + lam0;
            if (gain < best_gain) {
                best_gain = gain;
                best = j;
            }
        }
        if (best < 0)
            break;
        const VectorC g = G * H.col(best);
        const double beta = in[best] ? -(1.0 - d[best]) : 1.0 + d[best];
        const cplx gs = u[best]; // g^H s
        const VectorC hg = H.adjoint() * g;
        G.noalias() -= (g * g.adjoint()) / beta;
        u.noalias() -= hg * (gs / beta);
        d -= hg.cwiseAbs2() / beta;
        in[best] = !in[best];
        ++out.moves;
        if (out.moves % 50 == 0)
            refresh();
    }

    std::vector<int> cols;
    for (Eigen::Index j = 0; j < n; ++j)
        if (in[j])
            cols.push_back(static_cast<int>(j));
    out.x = rzf_on_support(H, s, cols, lam);
    return out;
}

bool wants_support_search(const PrecodeProblem& pb, const CcdOptions& opts)
{
    const bool eligible = pb.penalty.support.kind == SupportKind::full_plane && pb.penalty.lambda > 0.0
        && pb.penalty.lambda0 > 0.0;
    return eligible && opts.support_search.value_or(true);
}

} // namespace

PrecodeProblem generate_problem(int n, int k, double lambda_s, const PenaltySpec& penalty,
                                RandomStream& stream)
{
    if (n < 1 || k < 1)
        throw Error(ErrorCode::invalid_argument, "generate_problem: n and k must be positive");
    if (!(lambda_s > 0.0))
        throw Error(ErrorCode::invalid_argument, "generate_problem: lambda_s must be positive");
    penalty.validate();
    PrecodeProblem pb;
    pb.penalty = penalty;
    pb.H.resize(k, n);
    const double var = 1.0 / n;
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < k; ++i)
            pb.H(i, j) = stream.complex_normal(var);
    pb.s.resize(k);
    for (int i = 0; i < k; ++i)
        pb.s[i] = stream.complex_normal(lambda_s);
    return pb;
}

double precode_objective(const PrecodeProblem& problem, const VectorC& x)
{
    double obj = (problem.H * x - problem.s).squaredNorm();
    for (Eigen::Index j = 0; j < x.size(); ++j)
        obj += coord_penalty(problem.penalty, x[j]);
    return obj;
}

VectorC precode_rzf(const MatrixC& H, const VectorC& s, double lambda)
{
    if (H.rows() != s.size() || H.rows() == 0 || H.cols() == 0)
        throw Error(ErrorCode::invalid_argument, "precode_rzf: dimension mismatch");
    // k > n: (H^H H + lambda I) x = H^H s, the same x and well posed at lambda = 0
    const bool tall = H.rows() > H.cols();
    MatrixC A = tall ? MatrixC(H.adjoint() * H) : MatrixC(H * H.adjoint());
    A.diagonal().array() += lambda;
    const VectorC rhs = tall ? VectorC(H.adjoint() * s) : s;
    VectorC y;
    Eigen::LLT<MatrixC> llt(A);
    if (llt.info() == Eigen::Success) {
        y = llt.solve(rhs);
    } else {
        const Eigen::FullPivLU<MatrixC> lu(A);
        if (lu.rank() < A.rows())
            throw Error(ErrorCode::singular_system, "precode_rzf: regularized Gram matrix is singular");
        y = lu.solve(rhs);
    }
    const double resid = (A * y - rhs).norm();
    if (!y.allFinite() || resid > 1e-10 * rhs.norm())
        throw Error(ErrorCode::singular_system, "precode_rzf: regularized Gram matrix is singular");
    return tall ? y : VectorC(H.adjoint() * y);
}

PrecodeResult precode_ccd(const PrecodeProblem& problem, const CcdOptions& opts)
{
    problem.penalty.validate();
    if (problem.H.rows() != problem.s.size())
        throw Error(ErrorCode::invalid_argument, "precode_ccd: dimension mismatch");
    if (opts.max_sweeps < 1 || opts.restarts < 1)
        throw Error(ErrorCode::invalid_argument, "precode_ccd: max_sweeps and restarts must be positive");

    const Eigen::VectorXd col_norm2 = problem.H.colwise().squaredNorm().transpose();
    std::vector<int> degenerate;
    for (Eigen::Index j = 0; j < col_norm2.size(); ++j)
        if (col_norm2[j] <= 0.0)
            degenerate.push_back(static_cast<int>(j));

    const Eigen::Index n = problem.H.cols();
    const double lam_eff = std::max(problem.penalty.lambda, 1e-6);
    auto rzf_start = [&] {
        return project_to_support(precode_rzf(problem.H, problem.s, lam_eff), problem.penalty.support);
    };

    std::vector<VectorC> starts;
    const CcdInit other = opts.init == CcdInit::rzf ? CcdInit::zero : CcdInit::rzf;
    for (CcdInit init : {opts.init, other}) {
        if (static_cast<int>(starts.size()) >= opts.restarts)
            break;
        starts.push_back(init == CcdInit::rzf ? rzf_start() : VectorC::Zero(n));
    }
    for (int rs = 2; static_cast<int>(starts.size()) < opts.restarts; ++rs) {
        RandomStream stream(opts.restart_seed, static_cast<std::uint64_t>(rs));
        std::vector<int> cols;
        for (Eigen::Index j = 0; j < n; ++j)
            if (stream.uniform() < 0.5)
                cols.push_back(static_cast<int>(j));
        starts.push_back(project_to_support(rzf_on_support(problem.H, problem.s, cols, lam_eff),
                                            problem.penalty.support));
    }

    PrecodeResult best;
    bool have = false;
    for (const VectorC& x0 : starts) {
        CcdRun run = run_ccd(problem, x0, col_norm2, opts);
        PrecodeResult res;
        res.x = std::move(run.x);
        res.objective = run.objective;
        res.sweeps = run.sweeps;
        res.converged = run.converged;
        res.max_step_increase = run.max_step_increase;
        res.residual_drift = run.residual_drift;
        if (wants_support_search(problem, opts)) {
            SupportSearch ss = support_search(problem, res.x);
            const double obj = precode_objective(problem, ss.x);
            if (obj <= res.objective) {
                res.x = std::move(ss.x);
                res.objective = obj;
            }
            res.support_moves = ss.moves;
        }
        if (!have || res.objective < best.objective) {
            best = std::move(res);
            have = true;
        }
    }
    best.degenerate_columns = degenerate;
    return best;
}

PrecodeResult random_tas_rzf(const PrecodeProblem& problem, double eta_r, double lambda,
                             RandomStream& stream)
{
    const int n = problem.n();
    const long count = std::lround(eta_r * n);
    if (count < 1 || count > n)
        throw Error(ErrorCode::invalid_argument, "random_tas_rzf: round(eta_r n) must lie in [1, n]");
    // partial Fisher-Yates
    std::vector<int> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    for (long i = 0; i < count; ++i) {
        const auto j = static_cast<long>(i + stream.uniform_index(static_cast<std::uint64_t>(n - i)));
        std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]);
    }
    std::vector<int> cols(perm.begin(), perm.begin() + count);
    std::sort(cols.begin(), cols.end());

    PrecodeResult res;
    res.x = rzf_on_support(problem.H, problem.s, cols, lambda);
    PrecodeProblem rzf_problem = problem;
    rzf_problem.penalty = PenaltySpec{lambda, 0.0, Support::full_plane()};
    res.objective = precode_objective(rzf_problem, res.x);
    res.converged = true;
    return res;
}

TrialMetrics measure(const PrecodeResult& result, const PrecodeProblem& problem, double zero_eps)
{
    TrialMetrics m;
    const auto& x = result.x;
    const double n = static_cast<double>(x.size());
    m.distortion = (problem.H * x - problem.s).squaredNorm() / problem.k();
    m.power = x.squaredNorm() / n;
    long active = 0;
    double peak = 0.0;
    for (Eigen::Index j = 0; j < x.size(); ++j) {
        const double a = std::abs(x[j]);
        if (a > zero_eps)
            ++active;
        peak = std::max(peak, a * a);
    }
    m.eta = active / n;
    m.papr = m.power > 0.0 ? peak / m.power : std::numeric_limits<double>::infinity();
    return m;
}

Histogram make_histogram(std::span<const double> values, int bins, double lo, double hi)
{
    Histogram h;
    h.lo = lo;
    h.hi = hi > lo ? hi : lo + 1.0;
    h.mass.assign(static_cast<std::size_t>(bins), 0.0);
    if (values.empty())
        return h;
    const double width = (h.hi - h.lo) / bins;
    for (double v : values) {
        auto b = static_cast<long>(std::floor((v - h.lo) / width));
        b = std::clamp(b, 0L, static_cast<long>(bins - 1));
        h.mass[static_cast<std::size_t>(b)] += 1.0;
    }
    for (double& m : h.mass)
        m /= static_cast<double>(values.size());
    return h;
}

namespace {

Estimate estimate(const std::vector<double>& v)
{
    Estimate e;
    const double n = static_cast<double>(v.size());
    e.mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
    if (v.size() > 1) {
        double ss = 0.0;
        for (double x : v)
            ss += (x - e.mean) * (x - e.mean);
        e.ci95 = 1.96 * std::sqrt(ss / (n - 1.0) / n);
    }
    return e;
}

struct TrialOutcome {
    TrialMetrics metrics;
    std::vector<double> magnitudes;
    int sweeps = 0;
};

} // namespace

MonteCarloReport monte_carlo(const MonteCarloConfig& config)
{
    if (config.trials < 2)
        throw Error(ErrorCode::invalid_argument, "monte_carlo: at least two trials are required");
    if (config.n < 1 || config.k < 1)
        throw Error(ErrorCode::invalid_argument, "monte_carlo: n and k must be positive");
    config.penalty.validate();

    const auto trials = static_cast<std::size_t>(config.trials);
    std::vector<TrialOutcome> outcomes(trials);
    std::vector<std::exception_ptr> errors(trials);
    std::atomic<std::size_t> next{0};

    auto worker = [&] {
        for (std::size_t t = next++; t < trials; t = next++) {
            try {
                RandomStream stream(config.master_seed, t);
                const PrecodeProblem pb =
                    generate_problem(config.n, config.k, config.lambda_s, config.penalty, stream);
                CcdOptions solver = config.solver;
                solver.restart_seed = config.master_seed ^ fmix64(t + 1);
                const PrecodeResult res = precode_ccd(pb, solver);
                TrialOutcome& out = outcomes[t];
                out.metrics = measure(res, pb, config.zero_eps);
                out.sweeps = res.sweeps;
                out.magnitudes.resize(static_cast<std::size_t>(res.x.size()));
                for (Eigen::Index j = 0; j < res.x.size(); ++j)
                    out.magnitudes[static_cast<std::size_t>(j)] = std::abs(res.x[j]);
            } catch (...) {
                errors[t] = std::current_exception();
            }
        }
    };

    const int threads = std::max(1, std::min<int>(config.threads, config.trials));
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int i = 0; i < threads; ++i)
            pool.emplace_back(worker);
        for (auto& th : pool)
            th.join();
    }
    for (std::size_t t = 0; t < trials; ++t) {
        if (!errors[t])
            continue;
        try {
            std::rethrow_exception(errors[t]);
        } catch (const Error& e) {
            throw Error(e.code(), "monte_carlo: trial " + std::to_string(t) + ": " + e.what());
        }
    }

    MonteCarloReport rep;
    rep.trials = config.trials;
    std::vector<double> d;
    std::vector<double> p;
    std::vector<double> eta;
    std::vector<double> papr;
    const std::size_t half = static_cast<std::size_t>(config.n) / 2;
    double sweeps = 0.0;
    for (const TrialOutcome& o : outcomes) {
        rep.per_trial.push_back(o.metrics);
        d.push_back(o.metrics.distortion);
        p.push_back(o.metrics.power);
        eta.push_back(o.metrics.eta);
        if (std::isfinite(o.metrics.papr))
            papr.push_back(o.metrics.papr);
        sweeps += o.sweeps;
        rep.magnitudes_first_half.insert(rep.magnitudes_first_half.end(), o.magnitudes.begin(),
                                         o.magnitudes.begin() + static_cast<long>(half));
        rep.magnitudes_second_half.insert(rep.magnitudes_second_half.end(),
                                          o.magnitudes.begin() + static_cast<long>(half),
                                          o.magnitudes.end());
    }
    rep.distortion = estimate(d);
    rep.power = estimate(p);
    rep.eta = estimate(eta);
    if (!papr.empty())
        rep.papr = estimate(papr);
    else
        rep.papr = {std::numeric_limits<double>::infinity(), 0.0};
    rep.mean_sweeps = sweeps / static_cast<double>(trials);

    std::vector<double> pooled = rep.magnitudes_first_half;
    pooled.insert(pooled.end(), rep.magnitudes_second_half.begin(), rep.magnitudes_second_half.end());
    const double top = pooled.empty() ? 1.0 : *std::max_element(pooled.begin(), pooled.end());
    rep.magnitude_histogram = make_histogram(pooled, 128, 0.0, top);
    rep.first_half_histogram = make_histogram(rep.magnitudes_first_half, 128, 0.0, top);
    rep.second_half_histogram = make_histogram(rep.magnitudes_second_half, 128, 0.0, top);
    return rep;
}

} // namespace lse
