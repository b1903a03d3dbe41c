#include "ruinfunds/mcsim.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <thread>

namespace ruinfunds {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kInf = std::numeric_limits<double>::infinity();

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Coefficient values frozen on the half-open spans where every curve is
// constant, so the path loop touches no curve lookups.
struct Span {
    double t_start;
    Eigen::VectorXd mu;
    Eigen::VectorXd excess;   // mu - r e (or mu itself without a riskless asset)
    Eigen::MatrixXd sigma_t;  // sigma transposed: k x n, for sigma^T pi products
    double a, b;
};

std::vector<Span> freeze_spans(const MarketModel& model) {
    std::vector<double> ts;
    auto add = [&ts](const std::vector<double>& more) {
        ts.insert(ts.end(), more.begin(), more.end());
    };
    add(model.mu.start_times());
    add(model.sigma.start_times());
    add(model.a.start_times());
    add(model.b.start_times());
    std::sort(ts.begin(), ts.end());
    ts.erase(std::unique(ts.begin(), ts.end()), ts.end());

    double r = model.has_riskless() ? *model.r : 0.0;
    std::vector<Span> spans;
    spans.reserve(ts.size());
    for (double t : ts) {
        Span s;
        s.t_start = t;
        s.mu = model.mu.at(t);
        s.excess = model.has_riskless()
                       ? Eigen::VectorXd(s.mu - Eigen::VectorXd::Constant(model.n, r))
                       : s.mu;
        s.sigma_t = model.sigma.at(t).transpose();
        s.a = model.a.at(t);
        s.b = model.b.at(t);
        spans.push_back(std::move(s));
    }
    return spans;
}

struct PathTally {
    long ruined = 0, died_solvent = 0, censored = 0;
};

} // namespace

double Strategy::absorbing_wealth(double) const { return kNaN; }

std::mt19937_64 stream_rng(std::uint64_t seed, std::uint64_t stream) {
    return std::mt19937_64(splitmix64(seed ^ splitmix64(stream)));
}

double correlated_increments(std::mt19937_64& rng, const Eigen::VectorXd& rho, double dt,
                             Eigen::VectorXd& dB) {
    std::normal_distribution<double> normal;
    const double sq = std::sqrt(dt);
    dB.resize(rho.size());
    for (long j = 0; j < rho.size(); ++j) dB[j] = sq * normal(rng);
    double extra = sq * normal(rng);
    double ortho = std::sqrt(std::max(0.0, 1.0 - rho.squaredNorm()));
    return rho.dot(dB) + ortho * extra;
}

double sample_death_time(std::mt19937_64& rng, const ScalarCurve& hazard) {
    double u = uniform01(rng);
    return curve_integral_inverse(hazard, -std::log1p(-u));
}

ClosedFormFeedbackStrategy::ClosedFormFeedbackStrategy(ClosedFormSolution solution)
    : solution_(std::move(solution)) {}

void ClosedFormFeedbackStrategy::allocate(double wealth, double consumption, double,
                                          Eigen::VectorXd& dollars) const {
    double gap = consumption / solution_.rate() - wealth;
    double scale = std::max(gap, 0.0) / (solution_.exponent() - 1.0);
    dollars.noalias() = solution_.risky_direction() * scale;
}

double ClosedFormFeedbackStrategy::absorbing_wealth(double consumption) const {
    return consumption / solution_.rate();
}

HjbPolicyStrategy::HjbPolicyStrategy(RuinSolution solution, const MarketModel& model)
    : solution_(std::move(solution)), absorbing_ratio_(kNaN) {
    bool flat_consumption = model.b.is_constant() && model.b.at(0.0) == 0.0 &&
                            model.a.is_constant() && model.a.at(0.0) == 0.0;
    if (flat_consumption && solution_.mode == MarketMode::with_riskless &&
        model.has_riskless() && *model.r > 0.0)
        absorbing_ratio_ = std::max(solution_.grid.z_max, 1.0 / *model.r);
}

void HjbPolicyStrategy::allocate(double wealth, double consumption, double,
                                 Eigen::VectorXd& dollars) const {
    dollars = consumption * solution_.policy_at(wealth / consumption);
}

double HjbPolicyStrategy::absorbing_wealth(double consumption) const {
    return consumption * absorbing_ratio_;
}

FixedMixStrategy::FixedMixStrategy(Eigen::VectorXd fractions)
    : fractions_(std::move(fractions)) {
    if (fractions_.size() == 0)
        throw InvalidStrategy("fixed mix needs at least one fraction");
    if (!fractions_.allFinite())
        throw InvalidStrategy("fixed mix fractions must be finite");
}

void FixedMixStrategy::allocate(double wealth, double, double,
                                Eigen::VectorXd& dollars) const {
    dollars.noalias() = fractions_ * wealth;
}

TwoFundStrategy::TwoFundStrategy(const MarketModel& model,
                                 const ClosedFormSolution& unit_solution) {
    if (!model.has_riskless())
        throw UnsupportedModel("the two-fund split strategy needs a riskless asset");
    SigmaBundle bundle = sigma_bundle(model, 0.0);
    double b = model.b.at(0.0);
    RelativePortfolioVector hedge = consumption_hedge_fund(bundle, b);
    DifferenceVector tilt =
        financed_excess_tilt(bundle, model.mu.at(0.0), *model.r, b);
    fund_a_risky_ = (hedge.weights + tilt.weights).tail(model.n);
    fund_b_risky_ = hedge.weights.tail(model.n);
    safe_ratio_ = unit_solution.safe_level();   // built at unit consumption: 1/r
    exponent_ = unit_solution.exponent();
}

void TwoFundStrategy::allocate(double wealth, double consumption, double,
                               Eigen::VectorXd& dollars) const {
    double z = wealth / consumption;
    double in_a = std::max(safe_ratio_ - z, 0.0) / (exponent_ - 1.0);
    double in_b = z - in_a;
    dollars.noalias() = consumption * (in_a * fund_a_risky_ + in_b * fund_b_risky_);
}

double TwoFundStrategy::absorbing_wealth(double consumption) const {
    return consumption * safe_ratio_;
}

namespace {

// One complete life.  sign = -1 mirrors every Gaussian shock (antithetic
// partner); the death draw comes first and is shared by both partners.
PathRecord simulate_path(const MarketModel& model, const std::vector<Span>& spans,
                         const Strategy& strategy, double w0, double c0,
                         const SimConfig& cfg, long index, double sign,
                         Eigen::VectorXd& pi, Eigen::VectorXd& xi,
                         Eigen::VectorXd& sig_pi) {
    std::uint64_t stream = cfg.antithetic ? static_cast<std::uint64_t>(index / 2)
                                          : static_cast<std::uint64_t>(index);
    std::mt19937_64 rng = stream_rng(cfg.seed, stream);
    std::normal_distribution<double> normal;

    PathRecord rec;
    rec.index = index;
    rec.ruin_time = kNaN;
    rec.death_time = sample_death_time(rng, model.hazard);

    const bool riskless = model.has_riskless();
    const double r = riskless ? *model.r : 0.0;
    const double t_stop = std::min(rec.death_time, cfg.horizon);
    const int k = model.k;
    const double rho_sq = model.rho.squaredNorm();
    const double ortho = std::sqrt(std::max(0.0, 1.0 - rho_sq));

    double W = w0, c = c0, t = 0.0;
    bool ruined = false;
    std::size_t span_idx = 0;

    auto settled = [&](double wealth, double cons) {
        double absorb = strategy.absorbing_wealth(cons);
        return std::isfinite(absorb) && wealth >= absorb;
    };

    if (!settled(W, c)) {
        while (t < t_stop) {
            while (span_idx + 1 < spans.size() && spans[span_idx + 1].t_start <= t)
                ++span_idx;
            const Span& sp = spans[span_idx];

            strategy.allocate(W, c, t, pi);
            if (!riskless) {
                double gap = std::abs(pi.sum() - W);
                if (gap > 1e-8 * std::max(1.0, std::abs(W)))
                    throw InvalidStrategy(
                        "allocation does not invest exactly the current wealth");
            }

            double h = std::min(cfg.dt, t_stop - t);
            double sqh = std::sqrt(h);
            for (int j = 0; j < k; ++j) xi[j] = sign * normal(rng);
            double shock_c = 0.0;
            if (sp.b > 0.0) {
                double extra = sign * normal(rng);
                shock_c = model.rho.dot(xi) + ortho * extra;
            }

            sig_pi.noalias() = sp.sigma_t * pi;
            double drift = riskless ? r * W + pi.dot(sp.excess) - c : pi.dot(sp.mu) - c;
            W += drift * h + sqh * sig_pi.dot(xi);
            if (sp.b > 0.0)
                c *= std::exp((sp.a - 0.5 * sp.b * sp.b) * h + sp.b * sqh * shock_c);
            else if (sp.a != 0.0)
                c *= std::exp(sp.a * h);
            t += h;

            if (W <= 0.0) {
                ruined = true;
                rec.ruin_time = t;
                break;
            }
            if (settled(W, c)) break;
        }
    }

    if (ruined)
        rec.outcome = PathOutcome::ruined;
    else
        rec.outcome = (rec.death_time <= cfg.horizon) ? PathOutcome::died_solvent
                                                      : PathOutcome::censored;
    return rec;
}

} // namespace

SimResult run_simulation(const MarketModel& model, const Strategy& strategy, double w0,
                         double c0, const SimConfig& cfg,
                         std::vector<PathRecord>* dump) {
    if (cfg.n_paths < 1) throw ConfigError("simulation needs at least one path");
    if (!(cfg.dt > 0.0)) throw ConfigError("simulation step must be positive");
    if (!(cfg.horizon >= 100.0 * cfg.dt))
        throw ConfigError("simulation horizon must cover at least 100 steps");
    if (!(w0 > 0.0) || !(c0 > 0.0))
        throw ConfigError("simulation needs positive initial wealth and consumption");

    const std::vector<Span> spans = freeze_spans(model);
    if (dump) dump->assign(static_cast<std::size_t>(cfg.n_paths), PathRecord{});

    int workers = cfg.threads > 0
                      ? cfg.threads
                      : std::max(1u, std::thread::hardware_concurrency());
    workers = static_cast<int>(std::min<long>(workers, cfg.n_paths));

    std::vector<PathTally> tallies(workers);
    std::vector<std::exception_ptr> failures(workers);

    auto work = [&](int widx, long lo, long hi) {
        try {
            Eigen::VectorXd pi(model.n), xi(model.k), sig_pi(model.k);
            PathTally& tally = tallies[widx];
            for (long p = lo; p < hi; ++p) {
                double sign = (cfg.antithetic && (p % 2 == 1)) ? -1.0 : 1.0;
                PathRecord rec = simulate_path(model, spans, strategy, w0, c0, cfg, p,
                                               sign, pi, xi, sig_pi);
                switch (rec.outcome) {
                    case PathOutcome::ruined: ++tally.ruined; break;
                    case PathOutcome::died_solvent: ++tally.died_solvent; break;
                    case PathOutcome::censored: ++tally.censored; break;
                }
                if (dump) (*dump)[static_cast<std::size_t>(p)] = rec;
            }
        } catch (...) {
            failures[widx] = std::current_exception();
        }
    };

    if (workers == 1) {
        work(0, 0, cfg.n_paths);
    } else {
        std::vector<std::thread> pool;
        long chunk = (cfg.n_paths + workers - 1) / workers;
        for (int widx = 0; widx < workers; ++widx) {
            long lo = widx * chunk;
            long hi = std::min<long>(lo + chunk, cfg.n_paths);
            if (lo >= hi) break;
            pool.emplace_back(work, widx, lo, hi);
        }
        for (auto& th : pool) th.join();
    }
    for (auto& f : failures)
        if (f) std::rethrow_exception(f);

    SimResult out;
    out.paths = cfg.n_paths;
    for (const PathTally& tl : tallies) {
        out.ruined += tl.ruined;
        out.died_solvent += tl.died_solvent;
        out.censored += tl.censored;
    }
    double p_hat = static_cast<double>(out.ruined) / static_cast<double>(out.paths);
    out.ruin_estimate = p_hat;
    out.std_error = std::sqrt(p_hat * (1.0 - p_hat) / static_cast<double>(out.paths));
    return out;
}

ComparisonReport compare_to_oracle(const std::vector<SimResult>& results, double oracle) {
    ComparisonReport report;
    report.oracle = oracle;
    for (const SimResult& res : results) {
        ComparisonRow row;
        row.estimate = res.ruin_estimate;
        row.std_error = res.std_error;
        double diff = res.ruin_estimate - oracle;
        if (res.std_error > 0.0) {
            row.z = diff / res.std_error;
            row.flagged = std::abs(row.z) > 3.0;
        } else {
            row.z = 0.0;
            row.flagged = diff != 0.0;
        }
        report.any_flagged = report.any_flagged || row.flagged;
        report.rows.push_back(row);
    }
    return report;
}

} // namespace ruinfunds
