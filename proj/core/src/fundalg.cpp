#include "ruinfunds/fundalg.hpp"

#include <cmath>
#include <limits>

namespace ruinfunds {

namespace {

constexpr double kNormalizerFloor = 1e-14;

// e^T Sigma^{-1} x for the all-ones vector e.
double ones_dot(const SigmaBundle& bundle, const Eigen::VectorXd& x) {
    return (bundle.Sigma_inv * x).sum();
}

double ones_quadratic(const SigmaBundle& bundle) {
    return bundle.Sigma_inv.sum();   // e^T Sigma^{-1} e
}

void require_convex(const ValueDerivatives& d) {
    if (!(d.second > 0.0) || !std::isfinite(d.second) || !std::isfinite(d.first))
        throw DegenerateSecondDerivative(
            "allocation formulas need a finite, strictly positive second derivative");
}

} // namespace

Eigen::VectorXd TwoFundDecomposition::flatten() const {
    if (fund_a.weights.size() != fund_b.weights.size())
        throw DimensionMismatch("decomposition funds live in different spaces");
    return dollars_a * fund_a.weights + dollars_b * fund_b.weights;
}

RelativePortfolioVector minimum_variance_fund(const SigmaBundle& bundle) {
    double denom = ones_quadratic(bundle);
    if (!(std::abs(denom) > kNormalizerFloor))
        throw DegenerateNormalizer("e^T Sigma^{-1} e vanished");
    Eigen::VectorXd w = bundle.Sigma_inv * Eigen::VectorXd::Ones(bundle.Sigma.rows()) / denom;
    return {std::move(w), "g"};
}

DifferenceVector excess_return_tilt(const SigmaBundle& bundle, const Eigen::VectorXd& mu) {
    double denom = ones_quadratic(bundle);
    if (!(std::abs(denom) > kNormalizerFloor))
        throw DegenerateNormalizer("e^T Sigma^{-1} e vanished");
    double shift = ones_dot(bundle, mu) / denom;
    Eigen::VectorXd centered = mu.array() - shift;
    return {bundle.Sigma_inv * centered};
}

DifferenceVector consumption_hedge_tilt(const SigmaBundle& bundle) {
    double denom = ones_quadratic(bundle);
    if (!(std::abs(denom) > kNormalizerFloor))
        throw DegenerateNormalizer("e^T Sigma^{-1} e vanished");
    double shift = ones_dot(bundle, bundle.sigma_rho) / denom;
    Eigen::VectorXd centered = bundle.sigma_rho.array() - shift;
    return {bundle.Sigma_inv * centered};
}

RelativePortfolioVector consumption_hedge_fund(const SigmaBundle& bundle, double b) {
    long n = bundle.Sigma.rows();
    Eigen::VectorXd risky = b * (bundle.Sigma_inv * bundle.sigma_rho);
    Eigen::VectorXd w(n + 1);
    w(0) = 1.0 - risky.sum();
    w.tail(n) = risky;
    return {std::move(w), "gtilde"};
}

DifferenceVector financed_excess_tilt(const SigmaBundle& bundle, const Eigen::VectorXd& mu,
                                      double r, double b) {
    long n = bundle.Sigma.rows();
    Eigen::VectorXd excess =
        mu - Eigen::VectorXd::Constant(n, r) - b * bundle.sigma_rho;
    Eigen::VectorXd risky = bundle.Sigma_inv * excess;
    Eigen::VectorXd w(n + 1);
    w(0) = -risky.sum();
    w.tail(n) = risky;
    return {std::move(w)};
}

RelativePortfolioVector tangency_fund(const SigmaBundle& bundle, const Eigen::VectorXd& mu,
                                      double r) {
    long n = bundle.Sigma.rows();
    Eigen::VectorXd excess = mu - Eigen::VectorXd::Constant(n, r);
    Eigen::VectorXd direction = bundle.Sigma_inv * excess;
    double denom = direction.sum();
    if (!(std::abs(denom) > kNormalizerFloor))
        throw DegenerateNormalizer("aggregate excess return vanished; tangency fund undefined");
    Eigen::VectorXd w(n + 1);
    w(0) = 0.0;
    w.tail(n) = direction / denom;
    return {std::move(w), "ghat"};
}

FundDynamics fund_dynamics(const RelativePortfolioVector& fund, const MarketModel& model,
                           double t) {
    const Eigen::VectorXd& mu = model.mu.at(t);
    const Eigen::MatrixXd& sig = model.sigma.at(t);
    FundDynamics out;
    if (fund.weights.size() == model.n) {
        out.drift = fund.weights.dot(mu);
        out.vol_row = sig.transpose() * fund.weights;
    } else if (fund.weights.size() == model.n + 1) {
        if (!model.has_riskless())
            throw DimensionMismatch("fund has a riskless entry but the model has no riskless asset");
        Eigen::VectorXd risky = fund.weights.tail(model.n);
        out.drift = fund.weights(0) * *model.r + risky.dot(mu);
        out.vol_row = sig.transpose() * risky;
    } else {
        throw DimensionMismatch("fund dimension matches neither n nor n+1");
    }
    return out;
}

Eigen::VectorXd optimal_allocation_constrained(const SigmaBundle& bundle,
                                               const Eigen::VectorXd& mu, double b,
                                               double z, const ValueDerivatives& derivs) {
    require_convex(derivs);
    double ratio = derivs.first / derivs.second;   // phi_z / phi_zz, negative in the interior
    double denom = ones_quadratic(bundle);
    if (!(std::abs(denom) > kNormalizerFloor))
        throw DegenerateNormalizer("e^T Sigma^{-1} e vanished");

    // Lagrange multiplier enforcing e^T alpha = z.
    double mult = (z + ratio * ones_dot(bundle, mu) -
                   (z + ratio) * b * ones_dot(bundle, bundle.sigma_rho)) /
                  denom;

    long n = bundle.Sigma.rows();
    Eigen::VectorXd alpha = -ratio * (bundle.Sigma_inv * mu) +
                            (z + ratio) * b * (bundle.Sigma_inv * bundle.sigma_rho) +
                            mult * (bundle.Sigma_inv * Eigen::VectorXd::Ones(n));
    return alpha;
}

Eigen::VectorXd optimal_allocation_riskless(const SigmaBundle& bundle,
                                            const Eigen::VectorXd& mu, double r, double b,
                                            double z, const ValueDerivatives& derivs) {
    require_convex(derivs);
    double ratio = derivs.first / derivs.second;
    long n = bundle.Sigma.rows();
    Eigen::VectorXd excess =
        mu - Eigen::VectorXd::Constant(n, r) - b * bundle.sigma_rho;
    return z * b * (bundle.Sigma_inv * bundle.sigma_rho) - ratio * (bundle.Sigma_inv * excess);
}

TwoFundDecomposition decompose_two_fund(const SigmaBundle& bundle, const Eigen::VectorXd& mu,
                                        std::optional<double> r, double b, MarketMode mode,
                                        double z, const ValueDerivatives& derivs) {
    require_convex(derivs);
    double ratio = derivs.first / derivs.second;
    TwoFundDecomposition out;
    out.dollars_a = -ratio;
    out.dollars_b = z + ratio;

    if (mode == MarketMode::no_riskless) {
        RelativePortfolioVector g = minimum_variance_fund(bundle);
        DifferenceVector f = excess_return_tilt(bundle, mu);
        DifferenceVector h = consumption_hedge_tilt(bundle);
        out.fund_a = {g.weights + f.weights, "g+f"};
        out.fund_b = {g.weights + b * h.weights, "g+b*h"};
    } else {
        if (!r)
            throw UnsupportedModel("with_riskless decomposition needs a riskless rate");
        RelativePortfolioVector gt = consumption_hedge_fund(bundle, b);
        DifferenceVector ft = financed_excess_tilt(bundle, mu, *r, b);
        out.fund_a = {gt.weights + ft.weights, "gtilde+ftilde"};
        out.fund_b = {gt.weights, "gtilde"};
    }
    return out;
}

} // namespace ruinfunds
