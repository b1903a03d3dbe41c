#include "ruinfunds/hjb.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

namespace ruinfunds {

namespace {

// Model data frozen at t = 0 plus the pieces of the reduced equation.  For a
// fixed allocation alpha the value solves
//   hazard * v = P(z, alpha) v' + Q(z, alpha) v''
// on (0, z_max) with v(0) = 1, v(z_max) = 0, where P collects every drift
// term and Q every diffusion term of the consumption-normalized wealth ratio.
struct Reduced {
    MarketMode mode;
    SigmaBundle bundle;
    Eigen::VectorXd mu;
    double r = 0.0;        // 0 in no_riskless mode
    double a = 0.0;
    double b = 0.0;
    double hazard = 0.0;
    Eigen::VectorXd drift_load;   // (mu - r e) - b sigma rho, the P-loading of alpha

    static Reduced build(const MarketModel& model, MarketMode mode) {
        if (!model.time_homogeneous())
            throw UnsupportedModel("the stationary solver needs constant coefficients");
        if (mode == MarketMode::with_riskless && !model.has_riskless())
            throw UnsupportedModel("with_riskless mode needs a riskless rate");
        Reduced red;
        red.mode = mode;
        red.bundle = sigma_bundle(model, 0.0);
        red.mu = model.mu.at(0.0);
        red.r = (mode == MarketMode::with_riskless) ? *model.r : 0.0;
        red.a = model.a.at(0.0);
        red.b = model.b.at(0.0);
        red.hazard = model.hazard.at(0.0);
        red.drift_load = red.mu - Eigen::VectorXd::Constant(model.n, red.r) -
                         red.b * red.bundle.sigma_rho;
        return red;
    }

    double base_drift(double z) const { return (r + b * b - a) * z - 1.0; }

    double P(double z, const Eigen::VectorXd& alpha) const {
        return base_drift(z) + alpha.dot(drift_load);
    }

    // Q = 0.5 |sigma^T alpha - b z rho|^2 + 0.5 b^2 z^2 (1 - rho^T rho) >= 0.
    double Q(double z, const Eigen::VectorXd& alpha) const {
        return 0.5 * b * b * z * z + 0.5 * alpha.dot(bundle.Sigma * alpha) -
               b * z * alpha.dot(bundle.sigma_rho);
    }

    // Pointwise minimizer of the Hamiltonian given ratio = v'/v'' (<= 0).
    Eigen::VectorXd allocation(double z, double ratio) const {
        ValueDerivatives d{ratio, 1.0};
        if (mode == MarketMode::with_riskless)
            return optimal_allocation_riskless(bundle, mu, r, b, z, d);
        return optimal_allocation_constrained(bundle, mu, b, z, d);
    }
};

// Discrete Hamiltonian at node i for allocation alpha, given the one-sided
// and central difference quotients of the current value.
double node_hamiltonian(const Reduced& red, double z, const Eigen::VectorXd& alpha,
                        double dminus, double dplus, double d2) {
    double p = red.P(z, alpha);
    double q = red.Q(z, alpha);
    double up = std::max(p, 0.0);
    double down = std::max(-p, 0.0);
    return up * dplus - down * dminus + q * d2;
}

struct NodeQuotients {
    double dminus, dplus, d2;
};

NodeQuotients quotients(const Eigen::VectorXd& v, int i, double dz) {
    return {(v[i] - v[i - 1]) / dz, (v[i + 1] - v[i]) / dz,
            (v[i + 1] - 2.0 * v[i] + v[i - 1]) / (dz * dz)};
}

// Policy update at one node: minimize the discrete Hamiltonian over the
// allocations implied by the left and right slope estimates, the hedge-only
// allocation, and (when given) the incumbent.  Including the incumbent makes
// every sweep a genuine improvement; leaving it out makes the rule a pure
// function of the value, which is what gets stored at the end.
Eigen::VectorXd improve_node(const Reduced& red, double z, const NodeQuotients& nq,
                             const SolverOptions& opt, double z_max,
                             const Eigen::VectorXd* incumbent) {
    double curv = std::max(nq.d2, opt.curvature_floor);
    double cap = opt.ratio_cap_factor * z_max;
    auto clamp_ratio = [cap](double x) { return std::clamp(x, -cap, 0.0); };

    Eigen::VectorXd best;
    double best_h = std::numeric_limits<double>::infinity();
    auto consider = [&](const Eigen::VectorXd& alpha) {
        double h = node_hamiltonian(red, z, alpha, nq.dminus, nq.dplus, nq.d2);
        if (h < best_h) {
            best_h = h;
            best = alpha;
        }
    };
    consider(red.allocation(z, clamp_ratio(nq.dminus / curv)));
    consider(red.allocation(z, clamp_ratio(nq.dplus / curv)));
    consider(red.allocation(z, 0.0));
    if (incumbent) consider(*incumbent);
    return best;
}

// Solves the linear equation hazard*v = P v' + Q v'' for a frozen policy with
// the monotone upwind discretization; boundary rows pin v(0)=1, v(zmax)=0.
Eigen::VectorXd evaluate_policy(const Reduced& red, const GridSpec& grid,
                                const Eigen::MatrixXd& policy) {
    int n_nodes = grid.nodes;
    double dz = grid.spacing();
    Eigen::VectorXd sub(n_nodes), diag(n_nodes), sup(n_nodes), rhs(n_nodes);
    sub.setZero(); sup.setZero();
    diag[0] = 1.0; rhs[0] = 1.0;
    diag[n_nodes - 1] = 1.0; rhs[n_nodes - 1] = 0.0;

    for (int i = 1; i + 1 < n_nodes; ++i) {
        double z = grid.z(i);
        Eigen::VectorXd alpha = policy.row(i).transpose();
        double p = red.P(z, alpha);
        double q = red.Q(z, alpha);
        double up = std::max(p, 0.0) / dz;
        double down = std::max(-p, 0.0) / dz;
        double diff = q / (dz * dz);
        diag[i] = red.hazard + up + down + 2.0 * diff;
        sub[i] = -(down + diff);
        sup[i] = -(up + diff);
        rhs[i] = 0.0;
        if (!(diag[i] > 0.0))
            throw InstabilityDetected("degenerate interior node: no hazard, drift or diffusion");
    }

    // Thomas elimination; diagonal dominance makes it stable without pivoting.
    for (int i = 1; i < n_nodes; ++i) {
        double w = sub[i] / diag[i - 1];
        diag[i] -= w * sup[i - 1];
        rhs[i] -= w * rhs[i - 1];
        if (!(std::abs(diag[i]) > 0.0) || !std::isfinite(diag[i]))
            throw InstabilityDetected("tridiagonal elimination broke down");
    }
    Eigen::VectorXd v(n_nodes);
    v[n_nodes - 1] = rhs[n_nodes - 1] / diag[n_nodes - 1];
    for (int i = n_nodes - 2; i >= 0; --i)
        v[i] = (rhs[i] - sup[i] * v[i + 1]) / diag[i];
    return v;
}

Eigen::MatrixXd rebuild_from(const Reduced& red, const GridSpec& grid,
                             const Eigen::VectorXd& value, const SolverOptions& opt,
                             const Eigen::MatrixXd* incumbent) {
    int n_assets = static_cast<int>(red.mu.size());
    Eigen::MatrixXd policy(grid.nodes, n_assets);
    policy.row(0) = red.allocation(0.0, 0.0).transpose();
    policy.row(grid.nodes - 1) = red.allocation(grid.z_max, 0.0).transpose();
    double dz = grid.spacing();
    for (int i = 1; i + 1 < grid.nodes; ++i) {
        NodeQuotients nq = quotients(value, i, dz);
        Eigen::VectorXd cur;
        if (incumbent) cur = incumbent->row(i).transpose();
        policy.row(i) = improve_node(red, grid.z(i), nq, opt, grid.z_max,
                                     incumbent ? &cur : nullptr)
                            .transpose();
    }
    return policy;
}

void check_grid(const GridSpec& grid) {
    if (!(grid.z_max > 0.0) || !std::isfinite(grid.z_max))
        throw ConfigError("grid needs a positive, finite z_max");
    if (grid.nodes < 3) throw ConfigError("grid needs at least 3 nodes");
}

} // namespace

double RuinSolution::value_at(double z) const {
    if (z <= 0.0) return 1.0;
    if (z >= grid.z_max) return 0.0;
    double x = z / grid.spacing();
    int i = std::min(static_cast<int>(x), grid.nodes - 2);
    double frac = x - i;
    return (1.0 - frac) * value[i] + frac * value[i + 1];
}

Eigen::VectorXd RuinSolution::policy_at(double z) const {
    if (z <= 0.0) return policy.row(0).transpose();
    if (z >= grid.z_max) return policy.row(grid.nodes - 1).transpose() * (z / grid.z_max);
    double x = z / grid.spacing();
    int i = std::min(static_cast<int>(x), grid.nodes - 2);
    double frac = x - i;
    return (1.0 - frac) * policy.row(i).transpose() + frac * policy.row(i + 1).transpose();
}

RuinSolution solve_ruin_problem(const MarketModel& model, MarketMode mode,
                                const GridSpec& grid, const SolverOptions& options) {
    check_grid(grid);
    Reduced red = Reduced::build(model, mode);

    RuinSolution sol;
    sol.grid = grid;
    sol.mode = mode;

    // Seed with the allocation implied by ratio v'/v'' = z - z_max: a risky
    // book of the problem's own length scale at every interior node, so the
    // frozen operator is diffusive everywhere and the first evaluation couples
    // both boundaries.  A hedge-only seed has zero diffusion when b = 0, and
    // with zero hazard its evaluation then moves information from the far
    // boundary only one node per sweep.
    Eigen::MatrixXd policy(grid.nodes, model.n);
    for (int i = 0; i < grid.nodes; ++i)
        policy.row(i) = red.allocation(grid.z(i), grid.z(i) - grid.z_max).transpose();

    Eigen::VectorXd value = evaluate_policy(red, grid, policy);
    int iter = 1;
    bool converged = false;
    for (; iter < options.max_iter; ++iter) {
        policy = rebuild_from(red, grid, value, options, &policy);
        Eigen::VectorXd next = evaluate_policy(red, grid, policy);
        double change = (next - value).cwiseAbs().maxCoeff();
        value.swap(next);
        if (change <= options.tol) {
            converged = true;
            break;
        }
    }
    if (!converged)
        throw NonConvergence("policy iteration did not settle within max_iter sweeps");

    sol.value = std::move(value);
    sol.policy = rebuild_from(red, grid, sol.value, options, nullptr);
    sol.iterations = iter + 1;

    Eigen::VectorXd res = equation_residual(sol, model);
    sol.residual = res.cwiseAbs().maxCoeff();
    return sol;
}

Eigen::VectorXd equation_residual(const RuinSolution& solution, const MarketModel& model) {
    Reduced red = Reduced::build(model, solution.mode);
    const GridSpec& grid = solution.grid;
    double dz = grid.spacing();
    Eigen::VectorXd res = Eigen::VectorXd::Zero(grid.nodes);
    for (int i = 1; i + 1 < grid.nodes; ++i) {
        NodeQuotients nq = quotients(solution.value, i, dz);
        Eigen::VectorXd alpha = solution.policy.row(i).transpose();
        res[i] = red.hazard * solution.value[i] -
                 node_hamiltonian(red, grid.z(i), alpha, nq.dminus, nq.dplus, nq.d2);
    }
    return res;
}

Eigen::MatrixXd rebuild_policy(const RuinSolution& solution, const MarketModel& model,
                               const SolverOptions& options) {
    Reduced red = Reduced::build(model, solution.mode);
    return rebuild_from(red, solution.grid, solution.value, options, nullptr);
}

void write_solution_csv(std::ostream& os, const RuinSolution& solution,
                        const Eigen::VectorXd& residual) {
    os << "z,phi";
    for (int j = 0; j < solution.policy.cols(); ++j) os << ",alpha_" << (j + 1);
    os << ",residual\n";
    os.precision(12);
    for (int i = 0; i < solution.grid.nodes; ++i) {
        os << solution.grid.z(i) << ',' << solution.value[i];
        for (int j = 0; j < solution.policy.cols(); ++j) os << ',' << solution.policy(i, j);
        os << ',' << residual[i] << '\n';
    }
}

} // namespace ruinfunds
