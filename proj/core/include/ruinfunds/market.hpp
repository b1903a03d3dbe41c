#pragma once

#include <Eigen/Dense>

#include <optional>
#include <vector>

#include "ruinfunds/errors.hpp"

namespace ruinfunds {

/// Deterministic piecewise-constant function of time on [0, inf).
///
/// Segment j applies on [times[j], times[j+1]); the final segment extends to
/// infinity.  times must start at 0 and be strictly increasing.  Used for
/// every model coefficient so that time-varying markets cost nothing when the
/// coefficients happen to be constant.
template <class T>
class ParameterCurve {
public:
    static ParameterCurve constant(T value) {
        return ParameterCurve({0.0}, {std::move(value)});
    }

    static ParameterCurve piecewise(std::vector<double> times, std::vector<T> values) {
        if (times.empty() || times.size() != values.size())
            throw DimensionMismatch("piecewise curve needs matching, non-empty times/values");
        if (times.front() != 0.0)
            throw ConfigError("piecewise curve must start at time 0");
        for (std::size_t j = 1; j < times.size(); ++j)
            if (!(times[j] > times[j - 1]))
                throw ConfigError("piecewise curve times must be strictly increasing");
        return ParameterCurve(std::move(times), std::move(values));
    }

    /// Value in force at time t (t < 0 is clamped to the first segment).
    const T& at(double t) const {
        std::size_t j = segment_index(t);
        return values_[j];
    }

    bool is_constant() const noexcept { return values_.size() == 1; }
    std::size_t segments() const noexcept { return values_.size(); }
    const std::vector<double>& start_times() const noexcept { return times_; }
    const std::vector<T>& values() const noexcept { return values_; }

    /// Index of the segment in force at time t.
    std::size_t segment_index(double t) const noexcept {
        std::size_t j = times_.size() - 1;
        while (j > 0 && t < times_[j]) --j;
        return j;
    }

private:
    ParameterCurve(std::vector<double> times, std::vector<T> values)
        : times_(std::move(times)), values_(std::move(values)) {}

    std::vector<double> times_;
    std::vector<T> values_;
};

using ScalarCurve = ParameterCurve<double>;
using VectorCurve = ParameterCurve<Eigen::VectorXd>;
using MatrixCurve = ParameterCurve<Eigen::MatrixXd>;

/// Integral of a nonnegative scalar curve over [0, t].  Exact (the integrand
/// is a step function).
double curve_integral(const ScalarCurve& curve, double t);

/// Smallest t with curve_integral(curve, t) == target, or +infinity when the
/// curve's mass never reaches target.  target must be >= 0.  Inverts the
/// cumulative hazard, so exponential clocks can be converted to event times
/// without discretization error.
double curve_integral_inverse(const ScalarCurve& curve, double target);

/// Market of n risky assets driven by k independent Brownian factors,
/// optionally a riskless asset, plus a geometric consumption stream whose
/// own shock correlates with the asset factors, and a deterministic mortality
/// hazard.  All rates are annualized; sigma has one row per asset and one
/// column per factor.
struct MarketModel {
    int n = 0;                       ///< number of risky assets
    int k = 0;                       ///< number of Brownian factors
    VectorCurve mu = VectorCurve::constant(Eigen::VectorXd());   ///< drift of each asset
    MatrixCurve sigma = MatrixCurve::constant(Eigen::MatrixXd());///< n x k volatility loadings
    std::optional<double> r;         ///< riskless rate; empty => no riskless asset exists
    ScalarCurve a = ScalarCurve::constant(0.0);      ///< consumption drift
    ScalarCurve b = ScalarCurve::constant(0.0);      ///< consumption volatility, >= 0
    Eigen::VectorXd rho;             ///< length-k correlation loadings of the consumption shock
    ScalarCurve hazard = ScalarCurve::constant(0.0); ///< mortality hazard rate, >= 0

    bool has_riskless() const noexcept { return r.has_value(); }
    bool deterministic_consumption(double t = 0.0) const { return b.at(t) == 0.0; }
    bool time_homogeneous() const noexcept {
        return mu.is_constant() && sigma.is_constant() && a.is_constant() &&
               b.is_constant() && hazard.is_constant();
    }
};

/// Relative floor applied to the smallest eigenvalue of sigma sigma^T when
/// deciding positive definiteness.
inline constexpr double kSpdRelativeFloor = 1e-12;

/// Checks dimensions, positive definiteness of sigma sigma^T at every
/// coefficient breakpoint, sign constraints, and rho^T rho <= 1.  Returns the
/// model unchanged on success (validate(validate(m)) == validate(m)).
MarketModel validate(MarketModel model);

/// Instantaneous covariance data at one time point, computed once and shared
/// by every formula that needs it.
struct SigmaBundle {
    Eigen::MatrixXd sigma;      ///< n x k loadings at t
    Eigen::MatrixXd Sigma;      ///< sigma sigma^T
    Eigen::MatrixXd Sigma_inv;  ///< (sigma sigma^T)^{-1}
    Eigen::VectorXd sigma_rho;  ///< sigma * rho: per-asset covariance with the consumption shock
};

/// Covariance bundle at time t.  Throws NotPositiveDefinite if sigma sigma^T
/// is singular at t (possible when sigma came from an unvalidated model).
SigmaBundle sigma_bundle(const MarketModel& model, double t);

} // namespace ruinfunds
