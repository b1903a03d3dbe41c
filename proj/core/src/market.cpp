#include "ruinfunds/market.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>
#include <sstream>

namespace ruinfunds {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string at_time(double t) {
    std::ostringstream os;
    os << " (segment starting at t=" << t << ")";
    return os.str();
}

void check_spd(const Eigen::MatrixXd& sig, int n, int k, double t0) {
    if (sig.rows() != n || sig.cols() != k)
        throw DimensionMismatch("sigma must be n x k" + at_time(t0));
    if (!sig.allFinite())
        throw ConfigError("sigma has non-finite entries" + at_time(t0));
    Eigen::MatrixXd Sigma = sig * sig.transpose();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Sigma, Eigen::EigenvaluesOnly);
    double lo = es.eigenvalues().minCoeff();
    double hi = es.eigenvalues().maxCoeff();
    if (!(lo > kSpdRelativeFloor * std::max(hi, kSpdRelativeFloor)))
        throw NotPositiveDefinite("sigma sigma^T is numerically singular" + at_time(t0));
}

} // namespace

double curve_integral(const ScalarCurve& curve, double t) {
    if (t <= 0.0) return 0.0;
    const auto& times = curve.start_times();
    const auto& vals = curve.values();
    double total = 0.0;
    for (std::size_t j = 0; j < times.size(); ++j) {
        double lo = times[j];
        if (lo >= t) break;
        double hi = (j + 1 < times.size()) ? std::min(times[j + 1], t) : t;
        total += vals[j] * (hi - lo);
    }
    return total;
}

double curve_integral_inverse(const ScalarCurve& curve, double target) {
    if (target < 0.0 || std::isnan(target))
        throw OutOfDomain("curve_integral_inverse needs target >= 0");
    const auto& times = curve.start_times();
    const auto& vals = curve.values();
    double acc = 0.0;
    for (std::size_t j = 0; j < times.size(); ++j) {
        if (target == acc) return times[j];
        double width = (j + 1 < times.size()) ? times[j + 1] - times[j] : kInf;
        double mass = vals[j] * width;   // inf * positive is fine; 0 * inf avoided below
        if (vals[j] > 0.0 && target <= acc + mass)
            return times[j] + (target - acc) / vals[j];
        if (vals[j] > 0.0) acc += mass;
    }
    return kInf;   // the tail rate is zero and the accumulated mass fell short
}

MarketModel validate(MarketModel model) {
    if (model.n < 1) throw DimensionMismatch("need at least one risky asset");
    if (model.k < 1) throw DimensionMismatch("need at least one Brownian factor");

    if (model.mu.segments() == 0)
        throw DimensionMismatch("mu curve is empty");
    for (std::size_t j = 0; j < model.mu.segments(); ++j) {
        const auto& v = model.mu.values()[j];
        if (v.size() != model.n)
            throw DimensionMismatch("mu must have one entry per asset" + at_time(model.mu.start_times()[j]));
        if (!v.allFinite())
            throw ConfigError("mu has non-finite entries" + at_time(model.mu.start_times()[j]));
    }

    for (std::size_t j = 0; j < model.sigma.segments(); ++j)
        check_spd(model.sigma.values()[j], model.n, model.k, model.sigma.start_times()[j]);

    if (model.rho.size() != model.k)
        throw DimensionMismatch("rho must have one entry per Brownian factor");
    if (!model.rho.allFinite())
        throw ConfigError("rho has non-finite entries");
    // Allow a hair of slack so that e.g. (0.6, 0.8) summed in floating point
    // is not rejected; perfect correlation itself is legal.
    if (model.rho.squaredNorm() > 1.0 + 64 * std::numeric_limits<double>::epsilon())
        throw CorrelationOutOfRange("rho^T rho exceeds 1");

    if (model.r) {
        if (!std::isfinite(*model.r) || *model.r < 0.0)
            throw ConfigError("riskless rate must be finite and >= 0");
    }
    for (std::size_t j = 0; j < model.a.segments(); ++j)
        if (!std::isfinite(model.a.values()[j]))
            throw ConfigError("consumption drift has non-finite entries");
    for (std::size_t j = 0; j < model.b.segments(); ++j) {
        double bj = model.b.values()[j];
        if (!std::isfinite(bj) || bj < 0.0)
            throw ConfigError("consumption volatility must be finite and >= 0" + at_time(model.b.start_times()[j]));
    }
    for (std::size_t j = 0; j < model.hazard.segments(); ++j) {
        double hj = model.hazard.values()[j];
        if (!std::isfinite(hj) || hj < 0.0)
            throw ConfigError("mortality hazard must be finite and >= 0" + at_time(model.hazard.start_times()[j]));
    }
    return model;
}

SigmaBundle sigma_bundle(const MarketModel& model, double t) {
    SigmaBundle out;
    out.sigma = model.sigma.at(t);
    out.Sigma = out.sigma * out.sigma.transpose();
    Eigen::LLT<Eigen::MatrixXd> llt(out.Sigma);
    if (llt.info() != Eigen::Success)
        throw NotPositiveDefinite("sigma sigma^T is not positive definite" + at_time(t));
    out.Sigma_inv = llt.solve(Eigen::MatrixXd::Identity(model.n, model.n));
    out.sigma_rho = out.sigma * model.rho;
    return out;
}

} // namespace ruinfunds
