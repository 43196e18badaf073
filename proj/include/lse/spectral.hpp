#pragma once

#include <functional>
#include <string>

namespace lse {

/// R-transform of the asymptotic eigenvalue law of H^H H, evaluated on the
/// negative real axis: evaluate(chi) = R_D(-chi), derivative(chi) =
/// d/dchi R_D(-chi). Derivatives are analytic per ensemble.
class RTransform {
public:
    using Fn = std::function<double(double)>;

    RTransform(std::string label, double load, Fn evaluate, Fn derivative);

    double evaluate(double chi) const { return evaluate_(chi); }
    double derivative(double chi) const { return derivative_(chi); }
    double load() const noexcept { return load_; }
    const std::string& label() const noexcept { return label_; }

private:
    std::string label_;
    double load_;
    Fn evaluate_;
    Fn derivative_;
};

/// i.i.d. channel with entries of variance 1/n: R_D(w) = alpha/(1 - w).
RTransform marcenko_pastur(double alpha);

/// Variance of the decoupled Gaussian input,
///   R^-2 d/dchi[(lambda_s chi - p) R(-chi)].
/// Throws InvalidState if the result is not strictly positive.
double lambda_rs(const RTransform& r, double chi, double p, double lambda_s);

/// lambda_s + alpha^-1 d/dchi[(p - lambda_s chi) chi R(-chi)], tiny negatives
/// clamped to zero. Throws InvalidState below -1e-9.
double asymptotic_distortion(const RTransform& r, double chi, double p, double lambda_s,
                             double alpha);

} // namespace lse
