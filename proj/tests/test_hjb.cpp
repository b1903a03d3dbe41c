#include <doctest.h>

#include <Eigen/Dense>

#include <cmath>

#include "random_models.hpp"
#include "ruinfunds/closedform.hpp"
#include "ruinfunds/hjb.hpp"

using namespace ruinfunds;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

MarketModel stochastic_consumption_market(double b) {
    MarketModel m = testsupport::reference_market();
    m.b = ScalarCurve::constant(b);
    m.rho = VectorXd::Constant(1, 0.4);
    return validate(std::move(m));
}

void check_value_shape(const RuinSolution& sol, double convexity_floor = -1e-8) {
    int n_nodes = sol.grid.nodes;
    REQUIRE(sol.value.size() == n_nodes);
    CHECK(sol.value[0] == 1.0);
    CHECK(sol.value[n_nodes - 1] == 0.0);
    CHECK(sol.value.minCoeff() >= -1e-12);
    CHECK(sol.value.maxCoeff() <= 1.0 + 1e-12);
    double worst_rise = 0.0;
    double worst_kink = 0.0;
    double dz = sol.grid.spacing();
    for (int i = 0; i + 1 < n_nodes; ++i)
        worst_rise = std::max(worst_rise, sol.value[i + 1] - sol.value[i]);
    for (int i = 1; i + 1 < n_nodes; ++i) {
        double d2 = (sol.value[i + 1] - 2.0 * sol.value[i] + sol.value[i - 1]) / (dz * dz);
        worst_kink = std::min(worst_kink, d2);
    }
    CHECK(worst_rise <= 1e-12);
    CHECK(worst_kink >= convexity_floor);
}

} // namespace

TEST_SUITE("hjb") {

TEST_CASE("solver matches the analytic value on the reference scenario") {
    MarketModel m = testsupport::reference_market();
    ClosedFormSolution exact = ClosedFormSolution::build(m, 1.0);
    GridSpec grid{50.0, 1001};
    RuinSolution sol = solve_ruin_problem(m, MarketMode::with_riskless, grid);

    check_value_shape(sol);
    double worst = 0.0;
    for (int i = 0; i < grid.nodes; ++i)
        worst = std::max(worst, std::abs(sol.value[i] - exact.ruin_probability(grid.z(i))));
    CHECK(worst < 1e-3);

    // The computed feedback rule should track the analytic one away from the
    // endpoints (the scheme is first-order, so allow a grid-sized gap).
    double alloc_err = 0.0;
    for (double z : {10.0, 25.0, 40.0}) {
        VectorXd grid_alloc = sol.policy_at(z);
        VectorXd exact_alloc = exact.optimal_dollars(z);
        alloc_err = std::max(alloc_err, (grid_alloc - exact_alloc).cwiseAbs().maxCoeff());
    }
    CHECK(alloc_err < 0.2);
}

TEST_CASE("errors against the analytic value shrink at first order") {
    MarketModel m = testsupport::reference_market();
    ClosedFormSolution exact = ClosedFormSolution::build(m, 1.0);
    double errs[3];
    int sizes[3] = {251, 501, 1001};
    for (int s = 0; s < 3; ++s) {
        GridSpec grid{50.0, sizes[s]};
        RuinSolution sol = solve_ruin_problem(m, MarketMode::with_riskless, grid);
        double worst = 0.0;
        for (int i = 0; i < grid.nodes; ++i)
            worst = std::max(worst, std::abs(sol.value[i] - exact.ruin_probability(grid.z(i))));
        errs[s] = worst;
    }
    CHECK(errs[1] < errs[0]);
    CHECK(errs[2] < errs[1]);
    CHECK(std::log2(errs[0] / errs[1]) > 0.8);
    CHECK(std::log2(errs[1] / errs[2]) > 0.8);
}

TEST_CASE("zero-hazard ruin problem reproduces its quadratic value") {
    // With no mortality and m = r the exponent collapses to 2, so the exact
    // value is (1 - z/50)^2: a sharp oracle for a qualitatively different
    // regime (ruin is certain only through market moves, not timing).
    MarketModel m = testsupport::reference_market();
    m.hazard = ScalarCurve::constant(0.0);
    m = validate(std::move(m));
    ClosedFormSolution exact = ClosedFormSolution::build(m, 1.0);
    CHECK(exact.exponent() == doctest::Approx(2.0).epsilon(1e-13));

    GridSpec grid{50.0, 2001};
    RuinSolution sol = solve_ruin_problem(m, MarketMode::with_riskless, grid);
    double worst = 0.0;
    for (int i = 0; i < grid.nodes; ++i)
        worst = std::max(worst, std::abs(sol.value[i] - exact.ruin_probability(grid.z(i))));
    CHECK(worst < 1e-3);
}

TEST_CASE("stored policy is a pure function of the stored value") {
    MarketModel m = stochastic_consumption_market(0.1);
    GridSpec grid{150.0, 751};
    RuinSolution sol = solve_ruin_problem(m, MarketMode::with_riskless, grid);
    MatrixXd rebuilt = rebuild_policy(sol, m);
    CHECK((rebuilt - sol.policy).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("reported residual is small and independently recomputable") {
    MarketModel m = testsupport::reference_market();
    GridSpec grid{50.0, 1001};
    RuinSolution sol = solve_ruin_problem(m, MarketMode::with_riskless, grid);
    CHECK(sol.residual < 1e-9);
    VectorXd res = equation_residual(sol, m);
    CHECK(res.cwiseAbs().maxCoeff() == sol.residual);
    CHECK(res[0] == 0.0);
    CHECK(res[grid.nodes - 1] == 0.0);
}

TEST_CASE("stochastic consumption keeps the value monotone and convex") {
    MarketModel m = stochastic_consumption_market(0.1);
    GridSpec grid{150.0, 1501};
    RuinSolution sol = solve_ruin_problem(m, MarketMode::with_riskless, grid);
    check_value_shape(sol);
    // The equation's coefficients reach 2 Q / dz^2 ~ 2e4 near z_max on this
    // grid, so 1e-6 absolute residual is ~5e-11 relative to them.
    CHECK(sol.residual < 1e-6);
}

TEST_CASE("small consumption volatility stays close to the deterministic solve") {
    GridSpec grid{50.0, 1001};
    RuinSolution base = solve_ruin_problem(testsupport::reference_market(),
                                           MarketMode::with_riskless, grid);
    RuinSolution tiny = solve_ruin_problem(stochastic_consumption_market(1e-3),
                                           MarketMode::with_riskless, grid);
    CHECK((base.value - tiny.value).cwiseAbs().maxCoeff() < 5e-3);
}

TEST_CASE("no-riskless mode keeps every policy row fully invested") {
    std::mt19937_64 rng(61001);
    MarketModel m = testsupport::random_model(rng, 2, 2, false);
    GridSpec grid{60.0, 601};
    RuinSolution sol = solve_ruin_problem(m, MarketMode::no_riskless, grid);
    check_value_shape(sol);
    for (int i = 0; i < grid.nodes; ++i) {
        double budget = sol.policy.row(i).sum();
        CHECK(std::abs(budget - grid.z(i)) < 1e-8 * std::max(1.0, grid.z(i)));
    }
}

TEST_CASE("interpolation reproduces nodes and extends by the hedge ray") {
    MarketModel m = stochastic_consumption_market(0.1);
    GridSpec grid{150.0, 751};
    RuinSolution sol = solve_ruin_problem(m, MarketMode::with_riskless, grid);

    CHECK(sol.value_at(-3.0) == 1.0);
    CHECK(sol.value_at(0.0) == 1.0);
    CHECK(sol.value_at(grid.z_max) == 0.0);
    CHECK(sol.value_at(grid.z_max + 10.0) == 0.0);
    int mid = grid.nodes / 2;
    CHECK(sol.value_at(grid.z(mid)) == doctest::Approx(sol.value[mid]).epsilon(1e-13));
    double between = 0.5 * (grid.z(mid) + grid.z(mid + 1));
    CHECK(sol.value_at(between) ==
          doctest::Approx(0.5 * (sol.value[mid] + sol.value[mid + 1])).epsilon(1e-12));

    VectorXd edge = sol.policy.row(grid.nodes - 1).transpose();
    REQUIRE(edge.cwiseAbs().maxCoeff() > 0.0);   // hedge demand is real when b > 0
    VectorXd far = sol.policy_at(2.0 * grid.z_max);
    CHECK((far - 2.0 * edge).cwiseAbs().maxCoeff() < 1e-12 * edge.cwiseAbs().maxCoeff());
}

TEST_CASE("solver rejects grids and models it cannot honor") {
    MarketModel m = testsupport::reference_market();
    CHECK_THROWS_AS(solve_ruin_problem(m, MarketMode::with_riskless, GridSpec{50.0, 2}),
                    ConfigError);
    CHECK_THROWS_AS(solve_ruin_problem(m, MarketMode::with_riskless, GridSpec{0.0, 101}),
                    ConfigError);
    CHECK_THROWS_AS(solve_ruin_problem(m, MarketMode::with_riskless, GridSpec{-5.0, 101}),
                    ConfigError);

    MarketModel no_rate = m;
    no_rate.r.reset();
    CHECK_THROWS_AS(
        solve_ruin_problem(validate(no_rate), MarketMode::with_riskless, GridSpec{50.0, 101}),
        UnsupportedModel);

    MarketModel varying = m;
    varying.hazard = ScalarCurve::piecewise({0.0, 10.0}, {0.02, 0.05});
    CHECK_THROWS_AS(
        solve_ruin_problem(validate(varying), MarketMode::with_riskless, GridSpec{50.0, 101}),
        UnsupportedModel);

    SolverOptions impatient;
    impatient.max_iter = 1;
    CHECK_THROWS_AS(
        solve_ruin_problem(m, MarketMode::with_riskless, GridSpec{50.0, 101}, impatient),
        NonConvergence);
}

TEST_CASE("a node with no hazard, drift or diffusion fails loudly") {
    // mu = r kills every risky allocation, so with zero hazard the interior
    // node z = 32 = 1/r (exact in binary for r = 1/32) has drift r*z - 1 = 0,
    // no diffusion and no zeroth-order term: the evaluator must refuse to
    // paper over the resulting empty equation.
    MarketModel m = testsupport::reference_market();
    m.r = 0.03125;
    m.mu = VectorCurve::constant(VectorXd::Constant(1, 0.03125));
    m.hazard = ScalarCurve::constant(0.0);
    m = validate(std::move(m));
    GridSpec grid{64.0, 65};
    CHECK_THROWS_AS(solve_ruin_problem(m, MarketMode::with_riskless, grid),
                    InstabilityDetected);
}

} // TEST_SUITE("hjb")
