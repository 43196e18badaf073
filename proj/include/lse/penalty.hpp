#pragma once

#include <complex>
#include <limits>
#include <memory>
#include <vector>

namespace lse {

using cplx = std::complex<double>;

enum class SupportKind { full_plane, disk };

/// Transmit alphabet: the whole complex plane or the disk |v| <= sqrt(P).
struct Support {
    SupportKind kind = SupportKind::full_plane;
    double peak_power = std::numeric_limits<double>::infinity();

    static Support full_plane() { return {}; }
    static Support disk(double peak_power);

    double radius() const;
    bool contains(cplx v, double slack = 1e-12) const;
};

/// u(v) = lambda |v|^2 + lambda0 1{v != 0} over a support.
///
/// lambda0 must be non-negative. lambda must be non-negative on the full
/// plane; on a disk it may be negative, in which case the quadratic term
/// rewards amplitude and, once 1 + c lambda <= 0, the prox only ever returns
/// 0 or a point on the circle.
struct PenaltySpec {
    double lambda = 0.0;
    double lambda0 = 0.0;
    Support support;

    void validate() const;
};

struct ThresholdSet {
    double tau = 0.0;
    double tau_tilde = std::numeric_limits<double>::infinity();
    double tau_hat = std::numeric_limits<double>::infinity();
};

/// Decision thresholds of the scalar prox with weight c.
ThresholdSet thresholds(const PenaltySpec& spec, double c);

/// Exact global minimizer over the support of |v - z|^2 + c u(v).
///
/// Ties at |z| = tau go to the nonzero branch, at |z| = tau_tilde to the
/// interior branch, at |z| = tau_hat to the peak branch; the zero branch
/// returns an exact 0.
cplx prox(const PenaltySpec& spec, cplx z, double c);

/// Brute-force minimizer on a polar grid of the support (grid_n radii by
/// grid_n phases) plus the closed-form candidates. Test oracle only.
cplx prox_oracle(const PenaltySpec& spec, cplx z, double c, int grid_n);

/// u(v); throws OutOfSupport for points outside the disk.
double penalty_value(const PenaltySpec& spec, cplx v);

/// Isotropic scalar penalty as consumed by the generic fixed-point path.
/// prox() must return the global minimizer of |v - z|^2 + c u(v) over the
/// support and commute with phase rotations.
class ScalarPenalty {
public:
    virtual ~ScalarPenalty() = default;

    virtual cplx prox(cplx z, double c) const = 0;
    virtual double value(cplx v) const = 0;
    virtual const Support& support() const = 0;
    /// Radii at which prox(r, c) is discontinuous or changes branch.
    virtual std::vector<double> breakpoints(double c) const = 0;
};

class L2L0Penalty final : public ScalarPenalty {
public:
    explicit L2L0Penalty(PenaltySpec spec);

    cplx prox(cplx z, double c) const override { return lse::prox(spec_, z, c); }
    double value(cplx v) const override { return penalty_value(spec_, v); }
    const Support& support() const override { return spec_.support; }
    std::vector<double> breakpoints(double c) const override;

    const PenaltySpec& spec() const noexcept { return spec_; }

private:
    PenaltySpec spec_;
};

} // namespace lse
