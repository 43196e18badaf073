#include "lse/spectral.hpp"

#include "lse/error.hpp"

#include <cmath>
#include <utility>

namespace lse {

RTransform::RTransform(std::string label, double load, Fn evaluate, Fn derivative)
    : label_(std::move(label)), load_(load), evaluate_(std::move(evaluate)),
      derivative_(std::move(derivative))
{
}

RTransform marcenko_pastur(double alpha)
{
    if (!(alpha > 0.0) || !std::isfinite(alpha))
        throw Error(ErrorCode::non_positive_alpha, "marcenko_pastur: alpha must be positive");
    return RTransform(
        "marcenko-pastur", alpha,
        [alpha](double chi) { return alpha / (1.0 + chi); },
        [alpha](double chi) { return -alpha / ((1.0 + chi) * (1.0 + chi)); });
}

double lambda_rs(const RTransform& r, double chi, double p, double lambda_s)
{
    const double rv = r.evaluate(chi);
    if (!(rv > 0.0))
        throw Error(ErrorCode::invalid_state, "lambda_rs: R(-chi) must be positive");
    const double d = lambda_s * rv + (lambda_s * chi - p) * r.derivative(chi);
    const double value = d / (rv * rv);
    if (!(value > 0.0) || !std::isfinite(value))
        throw Error(ErrorCode::invalid_state, "lambda_rs: non-positive decoupled variance");
    return value;
}

double asymptotic_distortion(const RTransform& r, double chi, double p, double lambda_s,
                             double alpha)
{
    const double rv = r.evaluate(chi);
    const double d = (p - 2.0 * lambda_s * chi) * rv + (p - lambda_s * chi) * chi * r.derivative(chi);
    const double value = lambda_s + d / alpha;
    if (!std::isfinite(value) || value < -1e-9)
        throw Error(ErrorCode::invalid_state, "asymptotic_distortion: negative distortion");
    return value < 0.0 ? 0.0 : value;
}

} // namespace lse
