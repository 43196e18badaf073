#pragma once

#include "lse/numerics.hpp"
#include "lse/penalty.hpp"
#include "lse/spectral.hpp"

#include <optional>
#include <vector>

namespace lse {

struct SystemParams {
    double alpha = 1.0;
    double lambda_s = 1.0;
    PenaltySpec penalty;
    RTransform rtransform = marcenko_pastur(1.0);

    void validate() const;
};

/// i.i.d. Gaussian channel at load alpha.
SystemParams make_mp_system(double alpha, double lambda_s, const PenaltySpec& penalty);

struct ReplicaState {
    double chi = 0.0;
    double p = 0.0;
    double lambda_rs = 0.0;
    double kappa = 0.0;
    ThresholdSet thresholds;
};

/// Completes (chi, p) into a consistent state: lambda_rs, kappa = 1/R(-chi)
/// and the prox thresholds at weight kappa.
ReplicaState make_state(const SystemParams& params, double chi, double p);

struct ReplicaSolution {
    ReplicaState state;
    double distortion = 0.0;
    double eta = 1.0;
    double papr = std::numeric_limits<double>::infinity();
    double residual = 0.0;
    long iterations = 0;
    /// other distinct fixed points found by the multi-start fallback
    std::vector<ReplicaState> alternatives;
};

enum class UpdatePath { closed_form, quadrature };

/// How the chi equation chi R(-chi) = E Re{x* s}/lambda_rs is turned into a
/// map. `explicit_map` evaluates R at the current chi (the closed forms are
/// written this way); `implicit_root` solves for chi with find_root_1d.
/// Both maps share their fixed points.
enum class ChiUpdate { explicit_map, implicit_root };

struct FixedPointUpdate {
    double p = 0.0;
    double chi = 0.0;
};

FixedPointUpdate fixed_point_update(const SystemParams& params, const ReplicaState& state,
                                    UpdatePath path = UpdatePath::closed_form,
                                    ChiUpdate chi_update = ChiUpdate::explicit_map);

/// Quadrature update for an arbitrary isotropic penalty.
FixedPointUpdate fixed_point_update(const SystemParams& params, const ScalarPenalty& penalty,
                                    const ReplicaState& state,
                                    ChiUpdate chi_update = ChiUpdate::explicit_map);

/// Fraction of nonzero decoupled symbols at a state.
double active_fraction(const SystemParams& params, const ReplicaState& state);

struct SolveOptions {
    double damping = 0.5;
    /// on max(|dp|/max(1, p), |dchi|/max(1, chi))
    double tol = 1e-12;
    long max_iter = 100000;
    double init_chi = 1.0;
    /// defaults to lambda_s when unset
    std::optional<double> init_p;
    UpdatePath path = UpdatePath::closed_form;
    ChiUpdate chi_update = ChiUpdate::explicit_map;
    /// retry from a deterministic grid of starts on NoConvergence
    bool multistart = true;
};

/// Damped Picard iteration on (p, chi); the damping halves whenever the
/// p-residual alternates sign five times in a row. A start is abandoned once
/// 1000 iterations fail to halve the residual.
ReplicaSolution solve_fixed_point(const SystemParams& params, const SolveOptions& opts = {});

/// Same iteration driven by the quadrature update of a generic penalty.
/// eta is measured as P(prox != 0) by quadrature; papr is +inf unless the
/// penalty lives on a disk.
ReplicaSolution solve_fixed_point(const SystemParams& params, const ScalarPenalty& penalty,
                                  const SolveOptions& opts = {});

struct CalibrationTargets {
    double p = 0.5;
    double eta = 1.0;
    /// linear PAPR; sets the disk peak power to papr * p
    std::optional<double> papr;
};

struct Calibration {
    double lambda = 0.0;
    double lambda0 = 0.0;
    ReplicaSolution solution;
    SystemParams params;
};

/// Finds (lambda, lambda0) so that the fixed point meets the power and
/// active-fraction targets to 1e-8. eta = 1 pins lambda0 = 0.
Calibration calibrate(const SystemParams& base, const CalibrationTargets& targets,
                      const SolveOptions& opts = {});

/// Draws s ~ CN(0, lambda_rs) and returns prox(s, kappa) per draw.
std::vector<cplx> decoupled_sample(const ReplicaState& state, const PenaltySpec& penalty,
                                   RandomStream& stream, std::size_t count);

struct BaselineSolution {
    Calibration calibration;
    double effective_alpha = 0.0;
    /// regularization to use on the raw k x (eta_r n) subchannel
    double lambda_physical = 0.0;
};

/// RZF on a uniformly random eta_r fraction of the antennas, modelled as the
/// lambda0 = 0 precoder at load alpha/eta_r. The selected columns keep their
/// 1/n variance, so matching the total power p* n means normalized power p*
/// in the smaller system; papr, when given, puts a disk of peak power
/// papr * p* on the active antennas.
BaselineSolution random_tas_baseline(const SystemParams& params, double eta_r, double p_target,
                                     std::optional<double> papr = std::nullopt,
                                     const SolveOptions& opts = {});

} // namespace lse
