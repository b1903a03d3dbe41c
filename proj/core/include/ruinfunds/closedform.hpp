#pragma once

#include <Eigen/Dense>

#include "ruinfunds/fundalg.hpp"
#include "ruinfunds/market.hpp"

namespace ruinfunds {

/// Analytic minimal ruin probability for the stationary special case: constant
/// coefficients, a riskless asset with rate r > 0, constant consumption c
/// (zero consumption drift and volatility), constant hazard.  Wealth at or
/// above the safe level c/r can be parked risklessly and never ruins; below
/// it the ruin probability is (1 - r w / c)^p with an exponent p > 1 built
/// from the rate, the hazard and the squared market price of risk.
///
/// Serves as the exact oracle against which the PDE solver and the Monte
/// Carlo engine are checked.
class ClosedFormSolution {
public:
    /// Validates applicability and precomputes the exponent.  Throws
    /// UnsupportedModel when the model is outside the special case (time
    /// dependence, no riskless asset, r == 0, stochastic consumption, or zero
    /// aggregate excess return) and ConfigError when consumption <= 0.
    static ClosedFormSolution build(const MarketModel& model, double consumption);

    /// Minimal probability of ruin starting from `wealth`.  Zero at and above
    /// the safe level; throws NegativeWealth below zero (ruin already
    /// happened, the value is 1 by convention but callers should not ask).
    double ruin_probability(double wealth) const;

    /// First and second wealth-derivatives on the open interval
    /// (0, safe_level); throws OutOfDomain at and beyond the endpoints where
    /// one-sided limits would be needed.
    ValueDerivatives derivatives(double wealth) const;

    /// Optimal dollar holdings in each risky asset.  Proportional to
    /// Sigma^{-1}(mu - r e), scaled by (safe_level - wealth)/(p - 1); defined
    /// as the zero vector at and above the safe level.  Throws OutOfDomain
    /// for negative wealth.
    Eigen::VectorXd optimal_dollars(double wealth) const;

    double safe_level() const noexcept { return consumption_ / rate_; }
    double exponent() const noexcept { return exponent_; }            ///< p
    double half_squared_price_of_risk() const noexcept { return price_of_risk_; }
    double rate() const noexcept { return rate_; }
    double hazard_rate() const noexcept { return hazard_; }
    double consumption() const noexcept { return consumption_; }
    const Eigen::VectorXd& risky_direction() const noexcept { return direction_; }

private:
    ClosedFormSolution() = default;

    double rate_ = 0.0;
    double hazard_ = 0.0;
    double consumption_ = 0.0;
    double price_of_risk_ = 0.0;
    double exponent_ = 0.0;
    Eigen::VectorXd direction_;   ///< Sigma^{-1} (mu - r e)
};

} // namespace ruinfunds
