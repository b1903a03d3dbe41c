#include <doctest.h>

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <random>

#include "random_models.hpp"
#include "ruinfunds/market.hpp"

using namespace ruinfunds;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

MarketModel base_two_asset() {
    MarketModel m;
    m.n = 2;
    m.k = 2;
    VectorXd mu(2);
    mu << 0.05, 0.08;
    MatrixXd sigma(2, 2);
    sigma << 0.20, 0.00, 0.05, 0.25;
    m.mu = VectorCurve::constant(mu);
    m.sigma = MatrixCurve::constant(sigma);
    m.r = 0.02;
    m.rho = VectorXd::Zero(2);
    m.hazard = ScalarCurve::constant(0.04);
    return m;
}

} // namespace

TEST_SUITE("market") {

TEST_CASE("constant curves return the same value everywhere") {
    auto c = ScalarCurve::constant(0.04);
    CHECK(c.is_constant());
    CHECK(c.at(0.0) == 0.04);
    CHECK(c.at(123.4) == 0.04);
    CHECK(c.at(-5.0) == 0.04);
}

TEST_CASE("piecewise curves switch exactly at their breakpoints") {
    auto c = ScalarCurve::piecewise({0.0, 2.0, 5.0}, {1.0, 2.0, 3.0});
    CHECK_FALSE(c.is_constant());
    CHECK(c.at(-0.5) == 1.0);
    CHECK(c.at(0.0) == 1.0);
    CHECK(c.at(1.999) == 1.0);
    CHECK(c.at(2.0) == 2.0);
    CHECK(c.at(4.999) == 2.0);
    CHECK(c.at(5.0) == 3.0);
    CHECK(c.at(100.0) == 3.0);
    CHECK(c.segment_index(3.0) == 1);
    CHECK(c.segment_index(5.0) == 2);
}

TEST_CASE("piecewise construction rejects malformed segment data") {
    CHECK_THROWS_AS(ScalarCurve::piecewise({}, {}), DimensionMismatch);
    CHECK_THROWS_AS(ScalarCurve::piecewise({0.0, 1.0}, {1.0}), DimensionMismatch);
    CHECK_THROWS_AS(ScalarCurve::piecewise({1.0, 2.0}, {1.0, 2.0}), ConfigError);
    CHECK_THROWS_AS(ScalarCurve::piecewise({0.0, 3.0, 3.0}, {1.0, 2.0, 3.0}), ConfigError);
    CHECK_THROWS_AS(ScalarCurve::piecewise({0.0, 3.0, 2.0}, {1.0, 2.0, 3.0}), ConfigError);
}

TEST_CASE("step-function integrals are exact") {
    auto flat = ScalarCurve::constant(0.04);
    CHECK(curve_integral(flat, 0.0) == 0.0);
    CHECK(curve_integral(flat, 25.0) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(curve_integral(flat, -3.0) == 0.0);

    auto stepped = ScalarCurve::piecewise({0.0, 10.0}, {0.02, 0.05});
    CHECK(curve_integral(stepped, 10.0) == doctest::Approx(0.2).epsilon(1e-15));
    CHECK(curve_integral(stepped, 25.0) == doctest::Approx(0.95).epsilon(1e-15));
}

TEST_CASE("integral inversion recovers times exactly, including flat spells") {
    auto stepped = ScalarCurve::piecewise({0.0, 10.0}, {0.02, 0.05});
    CHECK(curve_integral_inverse(stepped, 0.0) == 0.0);
    CHECK(curve_integral_inverse(stepped, 0.2) == doctest::Approx(10.0).epsilon(1e-14));
    CHECK(curve_integral_inverse(stepped, 0.95) == doctest::Approx(25.0).epsilon(1e-14));
    for (double t : {0.5, 3.0, 9.999, 10.0, 42.0}) {
        double back = curve_integral_inverse(stepped, curve_integral(stepped, t));
        CHECK(back == doctest::Approx(t).epsilon(1e-13));
    }

    // Mass runs out: the inverse must report "never".
    auto dies_out = ScalarCurve::piecewise({0.0, 5.0}, {0.1, 0.0});
    CHECK(curve_integral_inverse(dies_out, 0.4) == doctest::Approx(4.0).epsilon(1e-14));
    CHECK(curve_integral_inverse(dies_out, 0.5) == doctest::Approx(5.0).epsilon(1e-14));
    CHECK(std::isinf(curve_integral_inverse(dies_out, 0.6)));

    auto zero = ScalarCurve::constant(0.0);
    CHECK(curve_integral_inverse(zero, 0.0) == 0.0);
    CHECK(std::isinf(curve_integral_inverse(zero, 0.1)));

    CHECK_THROWS_AS(curve_integral_inverse(stepped, -1.0), OutOfDomain);
    CHECK_THROWS_AS(curve_integral_inverse(stepped, std::numeric_limits<double>::quiet_NaN()),
                    OutOfDomain);
}

TEST_CASE("validation accepts a clean model and is idempotent") {
    MarketModel m = validate(base_two_asset());
    MarketModel again = validate(m);
    CHECK(again.n == m.n);
    CHECK(again.mu.at(0.0) == m.mu.at(0.0));
    CHECK(again.sigma.at(0.0) == m.sigma.at(0.0));
    CHECK(again.has_riskless());
    CHECK(again.deterministic_consumption());
    CHECK(again.time_homogeneous());
}

TEST_CASE("validation rejects dimension mismatches") {
    MarketModel m = base_two_asset();
    m.mu = VectorCurve::constant(VectorXd::Constant(3, 0.05));
    CHECK_THROWS_AS(validate(m), DimensionMismatch);

    m = base_two_asset();
    m.sigma = MatrixCurve::constant(MatrixXd::Constant(2, 3, 0.1));
    CHECK_THROWS_AS(validate(m), DimensionMismatch);

    m = base_two_asset();
    m.rho = VectorXd::Zero(1);
    CHECK_THROWS_AS(validate(m), DimensionMismatch);
}

TEST_CASE("validation rejects singular factor loadings") {
    MarketModel m = base_two_asset();
    MatrixXd sigma(2, 2);
    sigma << 0.2, 0.1, 0.2, 0.1;   // duplicated exposure: sigma sigma^T singular
    m.sigma = MatrixCurve::constant(sigma);
    CHECK_THROWS_AS(validate(m), NotPositiveDefinite);

    // Fewer factors than assets can never span the asset space.
    MarketModel fat;
    fat.n = 2;
    fat.k = 1;
    fat.mu = VectorCurve::constant(VectorXd::Constant(2, 0.05));
    fat.sigma = MatrixCurve::constant(MatrixXd::Constant(2, 1, 0.2));
    fat.rho = VectorXd::Zero(1);
    fat.hazard = ScalarCurve::constant(0.02);
    CHECK_THROWS_AS(validate(fat), NotPositiveDefinite);
}

TEST_CASE("validation checks every segment of a piecewise loading curve") {
    MarketModel m = base_two_asset();
    MatrixXd good = m.sigma.at(0.0);
    MatrixXd bad(2, 2);
    bad << 0.2, 0.1, 0.2, 0.1;
    m.sigma = MatrixCurve::piecewise({0.0, 7.0}, {good, bad});
    CHECK_THROWS_AS(validate(m), NotPositiveDefinite);
}

TEST_CASE("validation enforces the sign and range constraints") {
    MarketModel m = base_two_asset();
    m.rho = VectorXd::Constant(2, 0.8);   // squared norm 1.28
    CHECK_THROWS_AS(validate(m), CorrelationOutOfRange);

    m = base_two_asset();
    m.rho << 0.6, 0.8;                    // exactly unit norm is allowed
    CHECK_NOTHROW(validate(m));

    m = base_two_asset();
    m.b = ScalarCurve::constant(-0.1);
    CHECK_THROWS_AS(validate(m), ConfigError);

    m = base_two_asset();
    m.hazard = ScalarCurve::constant(-0.01);
    CHECK_THROWS_AS(validate(m), ConfigError);

    m = base_two_asset();
    m.r = -0.01;
    CHECK_THROWS_AS(validate(m), ConfigError);

    m = base_two_asset();
    m.mu = VectorCurve::constant(VectorXd::Constant(2, std::numeric_limits<double>::quiet_NaN()));
    CHECK_THROWS_AS(validate(m), ConfigError);
}

TEST_CASE("covariance bundle matches the hand-computed 2x2 inverse") {
    MarketModel m = validate(base_two_asset());
    m.rho << 0.3, -0.4;
    SigmaBundle bundle = sigma_bundle(m, 0.0);

    MatrixXd Sigma(2, 2);
    Sigma << 0.04, 0.01, 0.01, 0.065;
    CHECK((bundle.Sigma - Sigma).cwiseAbs().maxCoeff() < 1e-15);

    double det = 0.04 * 0.065 - 0.01 * 0.01;
    MatrixXd inv(2, 2);
    inv << 0.065 / det, -0.01 / det, -0.01 / det, 0.04 / det;
    CHECK((bundle.Sigma_inv - inv).cwiseAbs().maxCoeff() < 1e-11);

    VectorXd sr = m.sigma.at(0.0) * m.rho;
    CHECK((bundle.sigma_rho - sr).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("covariance bundle inverts the covariance on random models") {
    std::mt19937_64 rng(99001);
    for (int trial = 0; trial < 20; ++trial) {
        int n = 1 + static_cast<int>(rng() % 5);
        int k = n + static_cast<int>(rng() % 3);
        MarketModel m = testsupport::random_model(rng, n, k, trial % 2 == 0);
        SigmaBundle bundle = sigma_bundle(m, 0.0);
        MatrixXd eye = bundle.Sigma_inv * bundle.Sigma;
        CHECK((eye - MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff() < 1e-10);
    }
}

TEST_CASE("time-dependent coefficients are picked up per segment") {
    MarketModel m = base_two_asset();
    MatrixXd early = m.sigma.at(0.0);
    MatrixXd late = 1.5 * early;
    m.sigma = MatrixCurve::piecewise({0.0, 10.0}, {early, late});
    m = validate(m);
    CHECK_FALSE(m.time_homogeneous());
    SigmaBundle b0 = sigma_bundle(m, 3.0);
    SigmaBundle b1 = sigma_bundle(m, 12.0);
    CHECK((b1.Sigma - 2.25 * b0.Sigma).cwiseAbs().maxCoeff() < 1e-14);
}

} // TEST_SUITE("market")
