#pragma once

#include <Eigen/Dense>

#include <iosfwd>

#include "ruinfunds/fundalg.hpp"
#include "ruinfunds/market.hpp"

namespace ruinfunds {

/// Uniform grid for the consumption-normalized wealth ratio z = wealth /
/// consumption on [0, z_max].
struct GridSpec {
    double z_max = 0.0;
    int nodes = 0;

    double spacing() const { return z_max / (nodes - 1); }
    double z(int i) const { return i * spacing(); }
};

struct SolverOptions {
    double tol = 1e-10;            ///< sup-norm change of the value between sweeps
    int max_iter = 200;            ///< policy-iteration sweeps before giving up
    double curvature_floor = 1e-12;///< lower clamp on the discrete second derivative
                                   ///< when forming the allocation ratio
    double ratio_cap_factor = 10.0;///< |first/second| is capped at factor * z_max
};

/// Converged minimal-ruin-probability solve on one grid.
struct RuinSolution {
    GridSpec grid;
    MarketMode mode = MarketMode::with_riskless;
    Eigen::VectorXd value;    ///< nodes entries, value(0)=1, value(nodes-1)=0
    Eigen::MatrixXd policy;   ///< nodes x n dollars per unit consumption
    int iterations = 0;
    double residual = 0.0;    ///< max interior equation residual at the stored policy

    /// Value at arbitrary z by linear interpolation (clamped to [0, z_max]).
    double value_at(double z) const;

    /// Policy at arbitrary z.  Inside the grid: linear interpolation.  Beyond
    /// z_max the stored edge row is scaled by z / z_max, which continues the
    /// hedge-only allocation that the edge row carries.
    Eigen::VectorXd policy_at(double z) const;
};

/// Solves the stationary dynamic-programming equation for the minimal
/// probability of lifetime ruin on grid, by policy iteration over a monotone
/// upwind finite-difference scheme (first-order accurate).  Boundary data:
/// certain ruin at z = 0, no ruin at z_max.
///
/// The model must be time-homogeneous.  In with_riskless mode it must carry a
/// riskless rate; in no_riskless mode any rate present is ignored and the
/// allocation is constrained to invest all wealth in the risky assets.
///
/// Each policy-evaluation step solves a tridiagonal system whose
/// off-diagonal entries are nonpositive by construction (upwinding), so the
/// discrete solution inherits the bounds 0 <= value <= 1 and monotonicity
/// from the boundary data.  Each improvement step minimizes the discrete
/// nodal Hamiltonian over candidate allocations that always include the
/// incumbent, so sweeps never increase the value anywhere.
RuinSolution solve_ruin_problem(const MarketModel& model, MarketMode mode,
                                const GridSpec& grid, const SolverOptions& options = {});

/// Per-node residual of the discrete equation at the stored policy: zero at
/// the boundaries by convention.  Computed fresh from the solution, so tests
/// can confirm the reported convergence independently.
Eigen::VectorXd equation_residual(const RuinSolution& solution, const MarketModel& model);

/// The policy the solver would store for this value function: at each
/// interior node the discrete Hamiltonian is evaluated for the allocation
/// candidates built from the left and right difference quotients (ratio
/// clamped to [-cap, 0]) plus the hedge-only allocation, and the minimizer is
/// kept; boundary rows use the hedge-only allocation.  Applying it to a
/// converged solution reproduces solution.policy exactly.
Eigen::MatrixXd rebuild_policy(const RuinSolution& solution, const MarketModel& model,
                               const SolverOptions& options = {});

/// Writes "z,phi,alpha_1..alpha_n,residual" rows.
void write_solution_csv(std::ostream& os, const RuinSolution& solution,
                        const Eigen::VectorXd& residual);

} // namespace ruinfunds
