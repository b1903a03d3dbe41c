#include "ruinfunds/closedform.hpp"

#include <cmath>

namespace ruinfunds {

ClosedFormSolution ClosedFormSolution::build(const MarketModel& model, double consumption) {
    if (!model.has_riskless())
        throw UnsupportedModel("closed form needs a riskless asset");
    if (!model.time_homogeneous())
        throw UnsupportedModel("closed form needs constant coefficients");
    if (!(*model.r > 0.0))
        throw UnsupportedModel("closed form needs a strictly positive riskless rate");
    if (model.a.at(0.0) != 0.0 || model.b.at(0.0) != 0.0)
        throw UnsupportedModel("closed form needs constant (deterministic) consumption");
    if (!(consumption > 0.0) || !std::isfinite(consumption))
        throw ConfigError("consumption must be positive and finite");

    ClosedFormSolution out;
    out.rate_ = *model.r;
    out.hazard_ = model.hazard.at(0.0);
    out.consumption_ = consumption;

    SigmaBundle bundle = sigma_bundle(model, 0.0);
    Eigen::VectorXd excess =
        model.mu.at(0.0) - Eigen::VectorXd::Constant(model.n, out.rate_);
    out.direction_ = bundle.Sigma_inv * excess;
    out.price_of_risk_ = 0.5 * excess.dot(out.direction_);
    if (!(out.price_of_risk_ > 0.0))
        throw UnsupportedModel("closed form needs a strictly positive excess return");

    // Larger root of  r p^2 - (r + hazard + m) p + hazard = 0; m > 0 puts it
    // strictly above 1, which keeps the curvature below positive.
    double s = out.rate_ + out.hazard_ + out.price_of_risk_;
    double disc = s * s - 4.0 * out.rate_ * out.hazard_;
    out.exponent_ = (s + std::sqrt(disc)) / (2.0 * out.rate_);
    return out;
}

double ClosedFormSolution::ruin_probability(double wealth) const {
    if (wealth < 0.0 || std::isnan(wealth))
        throw NegativeWealth("ruin probability queried below zero wealth");
    if (wealth >= safe_level()) return 0.0;
    return std::pow(1.0 - rate_ * wealth / consumption_, exponent_);
}

ValueDerivatives ClosedFormSolution::derivatives(double wealth) const {
    if (!(wealth > 0.0) || !(wealth < safe_level()))
        throw OutOfDomain("derivatives defined on the open interval (0, safe_level)");
    double base = 1.0 - rate_ * wealth / consumption_;
    double scale = rate_ / consumption_;
    ValueDerivatives d;
    d.first = -exponent_ * scale * std::pow(base, exponent_ - 1.0);
    d.second = exponent_ * (exponent_ - 1.0) * scale * scale * std::pow(base, exponent_ - 2.0);
    return d;
}

Eigen::VectorXd ClosedFormSolution::optimal_dollars(double wealth) const {
    if (wealth < 0.0 || std::isnan(wealth))
        throw OutOfDomain("allocation queried below zero wealth");
    double gap = safe_level() - wealth;
    if (gap <= 0.0) return Eigen::VectorXd::Zero(direction_.size());
    return (gap / (exponent_ - 1.0)) * direction_;
}

} // namespace ruinfunds
