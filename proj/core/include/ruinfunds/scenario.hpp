#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "ruinfunds/hjb.hpp"
#include "ruinfunds/market.hpp"
#include "ruinfunds/mcsim.hpp"

namespace ruinfunds {

enum class Task { funds, closed_form, hjb, simulate, verify_decomposition };

struct HjbSettings {
    std::optional<MarketMode> mode;   ///< default: with_riskless iff the model has a rate
    std::optional<double> z_max;      ///< default: kappa/r (1/r when consumption is flat)
    double kappa = 3.0;               ///< truncation multiple of the safe ratio
    int nodes = 2001;
    SolverOptions solver;
};

struct VerifySettings {
    long samples = 10000;
    std::uint64_t seed = 1234;
    double tolerance = 1e-8;   ///< residual above this fails the run (exit 4)
};

/// A fully parsed run request: model, initial state, tasks, and per-task
/// settings.  Built from a flat key-value config file (dotted section
/// prefixes, '#' comments, ',' within a value, ';' between time segments of
/// piecewise coefficients).
struct Scenario {
    std::string name;          ///< config path, embedded in the summary
    MarketModel model;         ///< already validated
    double wealth0 = 0.0;
    double consumption0 = 0.0;
    std::vector<Task> tasks;
    HjbSettings hjb;
    SimConfig sim;
    std::string strategy = "closed_form_feedback";
    bool dump_paths = false;
    std::string out_dir = ".";
};

/// Parses and validates a scenario; unknown keys, malformed numbers, missing
/// required keys, and model violations all throw (ConfigError and friends).
Scenario parse_scenario(std::istream& in, const std::string& name);
Scenario load_scenario(const std::string& path);

/// Cross-checks the two-fund split against the direct allocation formula on
/// random states of one model: draws (z, derivative-ratio) samples, flattens
/// decompose_two_fund, and records the worst absolute mismatch per market
/// mode.  The no-riskless leg always runs (the rate is simply unused); the
/// riskless leg runs only when the model has a rate (NaN otherwise).
struct DecompositionCheck {
    long samples = 0;
    double max_residual_no_riskless = 0.0;
    double max_residual_riskless = 0.0;
};

DecompositionCheck verify_decomposition(const MarketModel& model, long samples,
                                        std::uint64_t seed);

/// Executes the scenario's tasks in order, writing funds.csv / phi.csv /
/// sim.csv / verify.csv (and optionally paths.csv) under out_dir and a
/// summary table to `out`.  Returns 0; failures surface as exceptions whose
/// kind() carries the process exit status (verification failures included).
int run_scenario(const Scenario& scenario, std::ostream& out);

} // namespace ruinfunds
