// Microbenchmarks for the hot paths: covariance bundle assembly, pointwise
// allocations (the Monte Carlo inner loop), the grid solver, and end-to-end
// path throughput.  Build with -DRUINFUNDS_BUILD_BENCHMARKS=ON and run
// ./benchmarks/bench; not part of the test suite.

#include <benchmark/benchmark.h>

#include <Eigen/Dense>

#include "ruinfunds/closedform.hpp"
#include "ruinfunds/fundalg.hpp"
#include "ruinfunds/hjb.hpp"
#include "ruinfunds/market.hpp"
#include "ruinfunds/mcsim.hpp"

using namespace ruinfunds;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

MarketModel reference_market() {
    MarketModel m;
    m.n = 1;
    m.k = 1;
    m.mu = VectorCurve::constant(VectorXd::Constant(1, 0.06));
    m.sigma = MatrixCurve::constant(MatrixXd::Constant(1, 1, 0.20));
    m.r = 0.02;
    m.rho = VectorXd::Zero(1);
    m.hazard = ScalarCurve::constant(0.04);
    return validate(std::move(m));
}

// Diagonally dominant loadings => sigma sigma^T is comfortably positive
// definite at any size.
MarketModel many_asset_market(int n) {
    MarketModel m;
    m.n = n;
    m.k = n;
    m.mu = VectorCurve::constant(VectorXd::LinSpaced(n, 0.04, 0.09));
    m.sigma = MatrixCurve::constant(MatrixXd::Constant(n, n, 0.02) +
                                    0.23 * MatrixXd::Identity(n, n));
    m.r = 0.02;
    m.rho = VectorXd::Constant(n, 0.5 / std::sqrt(static_cast<double>(n)));
    m.b = ScalarCurve::constant(0.1);
    m.hazard = ScalarCurve::constant(0.04);
    return validate(std::move(m));
}

void BM_sigma_bundle(benchmark::State& state) {
    MarketModel m = many_asset_market(static_cast<int>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(sigma_bundle(m, 0.0));
}
BENCHMARK(BM_sigma_bundle)->Arg(1)->Arg(3)->Arg(10);

void BM_two_fund_split(benchmark::State& state) {
    MarketModel m = many_asset_market(static_cast<int>(state.range(0)));
    SigmaBundle bundle = sigma_bundle(m, 0.0);
    const VectorXd& mu = m.mu.at(0.0);
    ValueDerivatives d{-2.0, 0.3};
    for (auto _ : state)
        benchmark::DoNotOptimize(decompose_two_fund(bundle, mu, m.r, m.b.at(0.0),
                                                    MarketMode::with_riskless, 25.0, d));
}
BENCHMARK(BM_two_fund_split)->Arg(1)->Arg(3)->Arg(10);

void BM_pointwise_allocation(benchmark::State& state) {
    MarketModel m = many_asset_market(static_cast<int>(state.range(0)));
    SigmaBundle bundle = sigma_bundle(m, 0.0);
    const VectorXd& mu = m.mu.at(0.0);
    ValueDerivatives d{-2.0, 0.3};
    for (auto _ : state)
        benchmark::DoNotOptimize(
            optimal_allocation_riskless(bundle, mu, *m.r, m.b.at(0.0), 25.0, d));
}
BENCHMARK(BM_pointwise_allocation)->Arg(1)->Arg(3)->Arg(10);

void BM_solve_reference(benchmark::State& state) {
    MarketModel m = reference_market();
    GridSpec grid{50.0, static_cast<int>(state.range(0))};
    for (auto _ : state)
        benchmark::DoNotOptimize(solve_ruin_problem(m, MarketMode::with_riskless, grid));
}
BENCHMARK(BM_solve_reference)->Arg(1001)->Arg(4001)->Unit(benchmark::kMillisecond);

void BM_solve_stochastic_consumption(benchmark::State& state) {
    MarketModel m = reference_market();
    m.b = ScalarCurve::constant(0.1);
    m.rho = VectorXd::Constant(1, 0.4);
    m = validate(std::move(m));
    GridSpec grid{150.0, static_cast<int>(state.range(0))};
    for (auto _ : state)
        benchmark::DoNotOptimize(solve_ruin_problem(m, MarketMode::with_riskless, grid));
}
BENCHMARK(BM_solve_stochastic_consumption)->Arg(1501)->Unit(benchmark::kMillisecond);

void BM_simulation_paths(benchmark::State& state) {
    MarketModel m = reference_market();
    ClosedFormFeedbackStrategy strategy(ClosedFormSolution::build(m, 1.0));
    SimConfig cfg;
    cfg.n_paths = 2000;
    cfg.dt = 1.0 / 250.0;
    cfg.horizon = 200.0;
    cfg.seed = 99;
    cfg.threads = 1;
    for (auto _ : state)
        benchmark::DoNotOptimize(run_simulation(m, strategy, 25.0, 1.0, cfg));
    state.SetItemsProcessed(state.iterations() * cfg.n_paths);
}
BENCHMARK(BM_simulation_paths)->Unit(benchmark::kMillisecond);

} // namespace

BENCHMARK_MAIN();
