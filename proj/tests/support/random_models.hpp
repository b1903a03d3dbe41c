#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <random>

#include "ruinfunds/market.hpp"

namespace ruinfunds::testsupport {

/// Random valid market for property tests.  The volatility loadings get
/// their singular values clamped into [0.08, 0.45], so sigma sigma^T is well
/// conditioned (condition number <= ~32) and absolute identity tolerances of
/// 1e-10..1e-12 stay meaningful.  Requires k >= n.
inline MarketModel random_model(std::mt19937_64& rng, int n, int k, bool with_riskless,
                                double b_max = 0.3) {
    std::normal_distribution<double> normal;
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    Eigen::MatrixXd raw(n, k);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < k; ++j) raw(i, j) = normal(rng);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(raw, Eigen::ComputeThinU | Eigen::ComputeThinV);
    Eigen::VectorXd sv = svd.singularValues();
    for (int i = 0; i < sv.size(); ++i) sv[i] = 0.08 + 0.37 * unit(rng);
    Eigen::MatrixXd sigma = svd.matrixU() * sv.asDiagonal() * svd.matrixV().transpose();

    MarketModel m;
    m.n = n;
    m.k = k;
    Eigen::VectorXd mu(n);
    for (int i = 0; i < n; ++i) mu[i] = 0.01 + 0.11 * unit(rng);
    m.mu = VectorCurve::constant(std::move(mu));
    m.sigma = MatrixCurve::constant(std::move(sigma));
    if (with_riskless) m.r = 0.005 + 0.045 * unit(rng);

    Eigen::VectorXd dir(k);
    for (int j = 0; j < k; ++j) dir[j] = normal(rng);
    double norm = dir.norm();
    if (norm > 0.0) dir *= 0.95 * std::pow(unit(rng), 1.0 / k) / norm;
    m.rho = dir;

    double b = unit(rng) < 0.3 ? 0.0 : b_max * unit(rng);
    m.b = ScalarCurve::constant(b);
    m.a = ScalarCurve::constant(-0.02 + 0.07 * unit(rng));
    m.hazard = ScalarCurve::constant(0.01 + 0.09 * unit(rng));
    return validate(std::move(m));
}

/// The constant-coefficient single-asset market whose minimal ruin
/// probability has the exact closed form used as the cross-route oracle.
inline MarketModel reference_market() {
    MarketModel m;
    m.n = 1;
    m.k = 1;
    m.mu = VectorCurve::constant(Eigen::VectorXd::Constant(1, 0.06));
    m.sigma = MatrixCurve::constant(Eigen::MatrixXd::Constant(1, 1, 0.20));
    m.r = 0.02;
    m.rho = Eigen::VectorXd::Zero(1);
    m.hazard = ScalarCurve::constant(0.04);
    return validate(std::move(m));
}

} // namespace ruinfunds::testsupport
