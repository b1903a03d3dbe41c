#pragma once

#include <Eigen/Dense>

#include <optional>
#include <string>

#include "ruinfunds/market.hpp"

namespace ruinfunds {

/// Whether the investor can hold a riskless asset alongside the risky ones.
/// Several formulas change shape between the two cases, so the choice is an
/// explicit argument rather than something inferred deep inside a solver.
enum class MarketMode { no_riskless, with_riskless };

/// Weights of a continually rebalanced portfolio; entries sum to 1.  In
/// with_riskless contexts the vector has n+1 entries and entry 0 is the
/// riskless weight; otherwise it has n entries, one per risky asset.
struct RelativePortfolioVector {
    Eigen::VectorXd weights;
    std::string label;
};

/// Self-financing tilt: weights sum to 0, so fund + s * tilt is again a
/// portfolio for any scale s.
struct DifferenceVector {
    Eigen::VectorXd weights;
};

/// Drift and factor loadings of one dollar held in a rebalanced fund.
struct FundDynamics {
    double drift = 0.0;
    Eigen::VectorXd vol_row;   ///< length k: loading on each Brownian factor
};

/// First and second derivative of a ruin-probability value function with
/// respect to wealth, evaluated at one state.
struct ValueDerivatives {
    double first = 0.0;    ///< < 0 away from the safe level (more wealth, less ruin)
    double second = 0.0;   ///< > 0 required wherever an allocation is computed
};

/// Split of the optimal allocation into two named funds and the dollar
/// amounts held in each (consumption-normalized units).
struct TwoFundDecomposition {
    RelativePortfolioVector fund_a;   ///< the fund scaled by -first/second
    RelativePortfolioVector fund_b;   ///< carries the remainder of wealth
    double dollars_a = 0.0;
    double dollars_b = 0.0;

    /// Per-asset dollars implied by the split: dollars_a * fund_a + dollars_b * fund_b.
    Eigen::VectorXd flatten() const;
};

// --- fund constructions -----------------------------------------------------
//
// All take the covariance bundle at a fixed time; time-varying markets call
// them per segment.  Labels are the short names used in funds.csv.

/// Global minimum-variance portfolio of the risky assets ("g").
RelativePortfolioVector minimum_variance_fund(const SigmaBundle& bundle);

/// Zero-sum tilt toward expected return, orthogonalized against the
/// minimum-variance normalizer ("f").
DifferenceVector excess_return_tilt(const SigmaBundle& bundle, const Eigen::VectorXd& mu);

/// Zero-sum tilt toward covariance with the consumption shock ("h").
DifferenceVector consumption_hedge_tilt(const SigmaBundle& bundle);

/// Riskless asset plus the risky position that hedges one unit of
/// consumption volatility b ("gtilde", n+1 entries).
RelativePortfolioVector consumption_hedge_fund(const SigmaBundle& bundle, double b);

/// Zero-sum, riskless-financed tilt toward return in excess of the rate and
/// of the consumption hedge ("ftilde", n+1 entries).
DifferenceVector financed_excess_tilt(const SigmaBundle& bundle, const Eigen::VectorXd& mu,
                                      double r, double b);

/// Tangency-style fund proportional to Sigma^{-1}(mu - r e), normalized to
/// invest fully in risky assets ("ghat", n+1 entries, 0 riskless weight).
/// Throws DegenerateNormalizer when the normalizer e^T Sigma^{-1}(mu - r e)
/// vanishes (no aggregate excess return to lean on).
RelativePortfolioVector tangency_fund(const SigmaBundle& bundle, const Eigen::VectorXd& mu,
                                      double r);

/// Drift and factor loadings of one dollar in `fund` under `model` at time t.
/// Accepts n-vectors (risky only) and, when the model has a riskless asset,
/// (n+1)-vectors.
FundDynamics fund_dynamics(const RelativePortfolioVector& fund, const MarketModel& model,
                           double t);

// --- pointwise optimal allocations ------------------------------------------
//
// State is consumption-normalized: z = wealth / consumption, and the returned
// vector holds dollars per unit of consumption in each risky asset.  Both
// require derivs.second > 0 (the ruin value function is convex where these
// formulas apply) and throw DegenerateSecondDerivative otherwise.

/// Minimizer of the ruin-probability Hamiltonian subject to full investment
/// (risky dollars sum to z; no riskless asset exists).
Eigen::VectorXd optimal_allocation_constrained(const SigmaBundle& bundle,
                                               const Eigen::VectorXd& mu, double b,
                                               double z, const ValueDerivatives& derivs);

/// Unconstrained minimizer when a riskless asset absorbs the remainder.
Eigen::VectorXd optimal_allocation_riskless(const SigmaBundle& bundle,
                                            const Eigen::VectorXd& mu, double r, double b,
                                            double z, const ValueDerivatives& derivs);

/// Expresses the optimal allocation as two funds: -first/second dollars in a
/// higher-return fund, the rest of z in a hedging fund.  flatten() of the
/// result reproduces optimal_allocation_* exactly (up to roundoff); r is
/// required in with_riskless mode.
TwoFundDecomposition decompose_two_fund(const SigmaBundle& bundle, const Eigen::VectorXd& mu,
                                        std::optional<double> r, double b, MarketMode mode,
                                        double z, const ValueDerivatives& derivs);

} // namespace ruinfunds
