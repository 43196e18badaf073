#pragma once

#include "lse/numerics.hpp"
#include "lse/penalty.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace lse {

using MatrixC = Eigen::MatrixXcd;
using VectorC = Eigen::VectorXcd;

/// One instance of the precoding problem min_x ||Hx - s||^2 + u(x) over the support.
struct PrecodeProblem {
    MatrixC H;
    VectorC s;
    PenaltySpec penalty;

    int n() const { return static_cast<int>(H.cols()); }
    int k() const { return static_cast<int>(H.rows()); }
};

/// H with i.i.d. CN(0, 1/n) entries (column-major draw order), then
/// s ~ CN(0, lambda_s I_k), both from `stream`.
PrecodeProblem generate_problem(int n, int k, double lambda_s, const PenaltySpec& penalty,
                                RandomStream& stream);

/// ||Hx - s||^2 + sum_j u(x_j), recomputed from scratch.
double precode_objective(const PrecodeProblem& problem, const VectorC& x);

enum class CcdInit { zero, rzf };

struct CcdOptions {
    CcdInit init = CcdInit::rzf;
    int max_sweeps = 500;
    /// relative objective decrease per sweep
    double tol = 1e-10;
    /// relative step ||dx|| / ||x|| per sweep; both tests must pass
    double step_tol = 1e-12;
    int restarts = 1;
    /// best-improvement add/remove search over supports after CCD; by default
    /// on for the full plane with lambda > 0 and lambda0 > 0
    std::optional<bool> support_search;
    std::uint64_t restart_seed = 0;
};

struct PrecodeResult {
    VectorC x;
    double objective = 0.0;
    int sweeps = 0;
    bool converged = false;
    int support_moves = 0;
    std::vector<int> degenerate_columns;
    /// largest objective increase seen over single coordinate steps
    double max_step_increase = 0.0;
    /// ||r_tracked - (s - Hx)|| / ||s|| just before the final refresh
    double residual_drift = 0.0;
};

/// Cyclic coordinate descent with the exact scalar prox per antenna.
/// Zero columns are skipped and listed in degenerate_columns.
PrecodeResult precode_ccd(const PrecodeProblem& problem, const CcdOptions& opts = {});

/// x = H^H (H H^H + lambda I)^-1 s, solved as (H^H H + lambda I) x = H^H s
/// when k > n. Throws SingularSystem when the solve is not accurate to 1e-10
/// of the right-hand side.
VectorC precode_rzf(const MatrixC& H, const VectorC& s, double lambda);

/// RZF on round(eta_r n) uniformly drawn columns, zeros elsewhere.
PrecodeResult random_tas_rzf(const PrecodeProblem& problem, double eta_r, double lambda,
                             RandomStream& stream);

struct TrialMetrics {
    double distortion = 0.0;
    double power = 0.0;
    double eta = 0.0;
    double papr = 0.0;
};

TrialMetrics measure(const PrecodeResult& result, const PrecodeProblem& problem,
                     double zero_eps = 1e-9);

struct Estimate {
    double mean = 0.0;
    double ci95 = 0.0;
};

struct Histogram {
    double lo = 0.0;
    double hi = 0.0;
    std::vector<double> mass;
};

Histogram make_histogram(std::span<const double> values, int bins, double lo, double hi);

struct MonteCarloConfig {
    int n = 0;
    int k = 0;
    double lambda_s = 1.0;
    PenaltySpec penalty;
    int trials = 2;
    CcdOptions solver;
    std::uint64_t master_seed = 0;
    int threads = 1;
    double zero_eps = 1e-9;
};

struct MonteCarloReport {
    int trials = 0;
    Estimate distortion;
    Estimate power;
    Estimate eta;
    Estimate papr;
    Histogram magnitude_histogram;
    Histogram first_half_histogram;
    Histogram second_half_histogram;
    /// pooled |x_j| by index block, in trial order
    std::vector<double> magnitudes_first_half;
    std::vector<double> magnitudes_second_half;
    std::vector<TrialMetrics> per_trial;
    double mean_sweeps = 0.0;
};

/// Trial t draws its problem from RandomStream(master_seed, t); trials may
/// run on several threads and are reduced in trial order.
MonteCarloReport monte_carlo(const MonteCarloConfig& config);

} // namespace lse
