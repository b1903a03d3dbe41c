#include "ruinfunds/scenario.hpp"

#include "ruinfunds/closedform.hpp"
#include "ruinfunds/fundalg.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <memory>
#include <ostream>
#include <random>
#include <set>
#include <sstream>

namespace ruinfunds {

namespace {

// ---- flat key-value config --------------------------------------------------

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream is(s);
    while (std::getline(is, cur, sep)) out.push_back(trim(cur));
    if (!s.empty() && s.back() == sep) out.push_back("");
    return out;
}

// Parsed file with usage tracking, so typos surface as errors instead of
// silently falling back to defaults.
class KeyValues {
public:
    static KeyValues parse(std::istream& in, const std::string& name) {
        KeyValues kv;
        kv.name_ = name;
        std::string line;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            auto hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            line = trim(line);
            if (line.empty()) continue;
            auto eq = line.find('=');
            if (eq == std::string::npos)
                throw ConfigError(name + ":" + std::to_string(lineno) +
                                  ": expected key = value");
            std::string key = trim(line.substr(0, eq));
            std::string value = trim(line.substr(eq + 1));
            if (key.empty())
                throw ConfigError(name + ":" + std::to_string(lineno) + ": empty key");
            if (!kv.data_.emplace(key, value).second)
                throw ConfigError(name + ": duplicate key '" + key + "'");
        }
        return kv;
    }

    std::optional<std::string> get(const std::string& key) const {
        auto it = data_.find(key);
        if (it == data_.end()) return std::nullopt;
        used_.insert(key);
        return it->second;
    }

    std::string require(const std::string& key) const {
        auto v = get(key);
        if (!v) throw ConfigError(name_ + ": missing required key '" + key + "'");
        return *v;
    }

    bool has(const std::string& key) const { return data_.count(key) != 0; }

    void finish() const {
        std::vector<std::string> unknown;
        for (const auto& [key, value] : data_)
            if (!used_.count(key)) unknown.push_back(key);
        if (!unknown.empty()) {
            std::string msg = name_ + ": unknown key(s):";
            for (const auto& k : unknown) msg += " '" + k + "'";
            throw ConfigError(msg);
        }
    }

private:
    std::string name_;
    std::map<std::string, std::string> data_;
    mutable std::set<std::string> used_;
};

double to_double(const std::string& key, const std::string& text) {
    try {
        std::size_t pos = 0;
        double v = std::stod(text, &pos);
        if (pos != text.size()) throw std::invalid_argument("trailing junk");
        return v;
    } catch (const std::exception&) {
        throw ConfigError("key '" + key + "': cannot parse number from '" + text + "'");
    }
}

long to_long(const std::string& key, const std::string& text) {
    try {
        std::size_t pos = 0;
        long v = std::stol(text, &pos);
        if (pos != text.size()) throw std::invalid_argument("trailing junk");
        return v;
    } catch (const std::exception&) {
        throw ConfigError("key '" + key + "': cannot parse integer from '" + text + "'");
    }
}

bool to_bool(const std::string& key, const std::string& text) {
    if (text == "true") return true;
    if (text == "false") return false;
    throw ConfigError("key '" + key + "': expected true or false, got '" + text + "'");
}

std::vector<double> to_numbers(const std::string& key, const std::string& text) {
    std::vector<double> out;
    for (const auto& piece : split(text, ','))
        out.push_back(to_double(key, piece));
    return out;
}

// A possibly piecewise value: "<seg>; <seg>; ..." with a parallel
// "<key>_times" list of segment start times.
template <class T, class SegmentParser>
ParameterCurve<T> read_curve(const KeyValues& kv, const std::string& key,
                             T fallback, SegmentParser parse_segment) {
    auto raw = kv.get(key);
    auto raw_times = kv.get(key + "_times");
    if (!raw) {
        if (raw_times) throw ConfigError("key '" + key + "_times' given without '" + key + "'");
        return ParameterCurve<T>::constant(std::move(fallback));
    }
    std::vector<std::string> segs = split(*raw, ';');
    std::vector<T> values;
    for (const auto& seg : segs) values.push_back(parse_segment(seg));
    if (!raw_times) {
        if (values.size() != 1)
            throw ConfigError("key '" + key + "' has segments but no '" + key + "_times'");
        return ParameterCurve<T>::constant(std::move(values.front()));
    }
    std::vector<double> times;
    for (const auto& piece : split(*raw_times, ';'))
        times.push_back(to_double(key + "_times", piece));
    if (times.size() != values.size())
        throw ConfigError("key '" + key + "': segment count differs from '" + key + "_times'");
    return ParameterCurve<T>::piecewise(std::move(times), std::move(values));
}

ScalarCurve read_scalar_curve(const KeyValues& kv, const std::string& key, double fallback) {
    return read_curve<double>(kv, key, fallback,
                              [&](const std::string& seg) { return to_double(key, seg); });
}

Eigen::VectorXd to_eigen(const std::vector<double>& v) {
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<long>(v.size()));
}

MarketModel read_model(const KeyValues& kv) {
    MarketModel m;
    m.n = static_cast<int>(to_long("market.n", kv.require("market.n")));
    m.k = static_cast<int>(to_long("market.k", kv.require("market.k")));
    if (m.n < 1 || m.k < 1) throw ConfigError("market.n and market.k must be >= 1");

    m.mu = read_curve<Eigen::VectorXd>(
        kv, "market.mu", Eigen::VectorXd(), [&](const std::string& seg) {
            auto nums = to_numbers("market.mu", seg);
            if (static_cast<int>(nums.size()) != m.n)
                throw ConfigError("market.mu: expected " + std::to_string(m.n) + " entries");
            return to_eigen(nums);
        });
    if (!kv.has("market.mu")) throw ConfigError("missing required key 'market.mu'");

    m.sigma = read_curve<Eigen::MatrixXd>(
        kv, "market.sigma", Eigen::MatrixXd(), [&](const std::string& seg) {
            auto nums = to_numbers("market.sigma", seg);
            if (static_cast<long>(nums.size()) != static_cast<long>(m.n) * m.k)
                throw ConfigError("market.sigma: expected " + std::to_string(m.n) + "x" +
                                  std::to_string(m.k) + " row-major entries");
            Eigen::MatrixXd sig(m.n, m.k);
            for (int i = 0; i < m.n; ++i)
                for (int j = 0; j < m.k; ++j) sig(i, j) = nums[i * m.k + j];
            return sig;
        });
    if (!kv.has("market.sigma")) throw ConfigError("missing required key 'market.sigma'");

    if (auto r = kv.get("market.r")) m.r = to_double("market.r", *r);

    if (auto rho = kv.get("market.rho")) {
        auto nums = to_numbers("market.rho", *rho);
        if (static_cast<int>(nums.size()) != m.k)
            throw ConfigError("market.rho: expected " + std::to_string(m.k) + " entries");
        m.rho = to_eigen(nums);
    } else {
        m.rho = Eigen::VectorXd::Zero(m.k);
    }

    m.a = read_scalar_curve(kv, "consumption.drift", 0.0);
    m.b = read_scalar_curve(kv, "consumption.volatility", 0.0);
    m.hazard = read_scalar_curve(kv, "mortality.hazard", 0.0);
    return validate(std::move(m));
}

Task to_task(const std::string& text) {
    if (text == "funds") return Task::funds;
    if (text == "closed_form") return Task::closed_form;
    if (text == "hjb") return Task::hjb;
    if (text == "simulate") return Task::simulate;
    if (text == "verify_decomposition") return Task::verify_decomposition;
    throw ConfigError("unknown task '" + text + "'");
}

// ---- run_scenario helpers ---------------------------------------------------

std::ofstream open_out(const std::string& dir, const std::string& file) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    std::filesystem::path path = std::filesystem::path(dir) / file;
    std::ofstream os(path);
    if (!os) throw ConfigError("cannot write " + path.string());
    os.precision(15);
    return os;
}

void write_fund_row(std::ostream& os, const std::string& label,
                    const Eigen::VectorXd& weights, int n) {
    os << label;
    if (weights.size() == n + 1) {
        os << ',' << weights(0);
        for (int i = 1; i <= n; ++i) os << ',' << weights(i);
    } else {
        os << ',';   // no riskless coordinate for this fund
        for (int i = 0; i < n; ++i) os << ',' << weights(i);
    }
    os << '\n';
}

double resolve_z_max(const Scenario& sc, MarketMode mode) {
    if (sc.hjb.z_max) return *sc.hjb.z_max;
    if (mode == MarketMode::with_riskless && sc.model.has_riskless() && *sc.model.r > 0.0) {
        bool flat = sc.model.b.is_constant() && sc.model.b.at(0.0) == 0.0;
        return (flat ? 1.0 : sc.hjb.kappa) / *sc.model.r;
    }
    throw ConfigError("hjb.z_max is required when no riskless rate sets a natural scale");
}

MarketMode resolve_mode(const Scenario& sc) {
    if (sc.hjb.mode) return *sc.hjb.mode;
    return sc.model.has_riskless() ? MarketMode::with_riskless : MarketMode::no_riskless;
}

std::string fmt(double v, int prec = 10) {
    std::ostringstream os;
    os << std::setprecision(prec) << v;
    return os.str();
}

const char* outcome_name(PathOutcome o) {
    switch (o) {
        case PathOutcome::ruined: return "ruined";
        case PathOutcome::died_solvent: return "died_solvent";
        default: return "censored";
    }
}

} // namespace

Scenario parse_scenario(std::istream& in, const std::string& name) {
    KeyValues kv = KeyValues::parse(in, name);
    Scenario sc;
    sc.name = name;
    sc.model = read_model(kv);
    sc.wealth0 = to_double("state.wealth", kv.require("state.wealth"));
    sc.consumption0 = to_double("consumption.initial", kv.require("consumption.initial"));
    if (!(sc.wealth0 > 0.0)) throw ConfigError("state.wealth must be positive");
    if (!(sc.consumption0 > 0.0)) throw ConfigError("consumption.initial must be positive");

    for (const auto& piece : split(kv.require("tasks.run"), ','))
        sc.tasks.push_back(to_task(piece));
    if (sc.tasks.empty()) throw ConfigError("tasks.run must name at least one task");

    if (auto v = kv.get("hjb.mode")) {
        if (*v == "with_riskless") sc.hjb.mode = MarketMode::with_riskless;
        else if (*v == "no_riskless") sc.hjb.mode = MarketMode::no_riskless;
        else throw ConfigError("hjb.mode must be with_riskless or no_riskless");
    }
    if (auto v = kv.get("hjb.z_max")) sc.hjb.z_max = to_double("hjb.z_max", *v);
    if (auto v = kv.get("hjb.kappa")) sc.hjb.kappa = to_double("hjb.kappa", *v);
    if (auto v = kv.get("hjb.nodes"))
        sc.hjb.nodes = static_cast<int>(to_long("hjb.nodes", *v));
    if (auto v = kv.get("hjb.tol")) sc.hjb.solver.tol = to_double("hjb.tol", *v);
    if (auto v = kv.get("hjb.max_iter"))
        sc.hjb.solver.max_iter = static_cast<int>(to_long("hjb.max_iter", *v));

    sc.sim.n_paths = 100000;
    sc.sim.dt = 1.0 / 250.0;
    sc.sim.horizon = 200.0;
    sc.sim.seed = 12345;
    if (auto v = kv.get("simulation.paths")) sc.sim.n_paths = to_long("simulation.paths", *v);
    if (auto v = kv.get("simulation.dt")) sc.sim.dt = to_double("simulation.dt", *v);
    if (auto v = kv.get("simulation.horizon"))
        sc.sim.horizon = to_double("simulation.horizon", *v);
    if (auto v = kv.get("simulation.seed"))
        sc.sim.seed = static_cast<std::uint64_t>(to_long("simulation.seed", *v));
    if (auto v = kv.get("simulation.antithetic"))
        sc.sim.antithetic = to_bool("simulation.antithetic", *v);
    if (auto v = kv.get("simulation.threads"))
        sc.sim.threads = static_cast<int>(to_long("simulation.threads", *v));
    if (auto v = kv.get("simulation.strategy")) sc.strategy = *v;
    if (auto v = kv.get("simulation.dump_paths"))
        sc.dump_paths = to_bool("simulation.dump_paths", *v);

    if (auto v = kv.get("output.dir")) sc.out_dir = *v;

    kv.finish();
    return sc;
}

Scenario load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    return parse_scenario(in, path);
}

DecompositionCheck verify_decomposition(const MarketModel& model, long samples,
                                        std::uint64_t seed) {
    DecompositionCheck check;
    check.samples = samples;
    check.max_residual_riskless = std::numeric_limits<double>::quiet_NaN();
    bool riskless = model.has_riskless();
    if (riskless) check.max_residual_riskless = 0.0;

    SigmaBundle bundle = sigma_bundle(model, 0.0);
    const Eigen::VectorXd mu = model.mu.at(0.0);
    double b = model.b.at(0.0);
    std::mt19937_64 rng = stream_rng(seed, 0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto log_uniform = [&](double lo, double hi) {
        return lo * std::pow(hi / lo, unit(rng));
    };

    for (long s = 0; s < samples; ++s) {
        double z = log_uniform(1e-2, 1e2);
        ValueDerivatives d;
        d.second = log_uniform(1e-2, 1e2);
        d.first = -log_uniform(1e-3, 1e3) * d.second;

        Eigen::VectorXd direct =
            optimal_allocation_constrained(bundle, mu, b, z, d);
        Eigen::VectorXd flat =
            decompose_two_fund(bundle, mu, std::nullopt, b, MarketMode::no_riskless, z, d)
                .flatten();
        check.max_residual_no_riskless = std::max(
            check.max_residual_no_riskless, (direct - flat).cwiseAbs().maxCoeff());

        if (riskless) {
            Eigen::VectorXd direct_r =
                optimal_allocation_riskless(bundle, mu, *model.r, b, z, d);
            Eigen::VectorXd flat_r =
                decompose_two_fund(bundle, mu, model.r, b, MarketMode::with_riskless, z, d)
                    .flatten();
            double res = (direct_r - flat_r.tail(model.n)).cwiseAbs().maxCoeff();
            res = std::max(res, std::abs(flat_r(0) - (z - direct_r.sum())));
            check.max_residual_riskless = std::max(check.max_residual_riskless, res);
        }
    }
    return check;
}

namespace {

void run_funds(const Scenario& sc, std::ostream& out) {
    SigmaBundle bundle = sigma_bundle(sc.model, 0.0);
    const Eigen::VectorXd mu = sc.model.mu.at(0.0);
    double b = sc.model.b.at(0.0);

    std::ofstream csv = open_out(sc.out_dir, "funds.csv");
    csv << "fund,riskless";
    for (int i = 1; i <= sc.model.n; ++i) csv << ",asset_" << i;
    csv << '\n';

    int rows = 3;
    RelativePortfolioVector g = minimum_variance_fund(bundle);
    write_fund_row(csv, g.label, g.weights, sc.model.n);
    write_fund_row(csv, "f", excess_return_tilt(bundle, mu).weights, sc.model.n);
    write_fund_row(csv, "h", consumption_hedge_tilt(bundle).weights, sc.model.n);
    if (sc.model.has_riskless()) {
        double r = *sc.model.r;
        RelativePortfolioVector gt = consumption_hedge_fund(bundle, b);
        write_fund_row(csv, gt.label, gt.weights, sc.model.n);
        write_fund_row(csv, "ftilde", financed_excess_tilt(bundle, mu, r, b).weights,
                       sc.model.n);
        RelativePortfolioVector ghat = tangency_fund(bundle, mu, r);
        write_fund_row(csv, ghat.label, ghat.weights, sc.model.n);
        rows = 6;
    }
    out << "funds: rows=" << rows << " file=funds.csv\n";
}

void run_closed_form(const Scenario& sc, std::ostream& out,
                     std::optional<ClosedFormSolution>& cache) {
    ClosedFormSolution sol = ClosedFormSolution::build(sc.model, sc.consumption0);
    out << "closed_form: p=" << fmt(sol.exponent(), 12)
        << " m=" << fmt(sol.half_squared_price_of_risk(), 12)
        << " safe_level=" << fmt(sol.safe_level())
        << " psi0=" << fmt(sol.ruin_probability(sc.wealth0), 12) << " alloc0=";
    Eigen::VectorXd alloc = sol.optimal_dollars(sc.wealth0);
    for (long i = 0; i < alloc.size(); ++i) out << (i ? "," : "") << fmt(alloc[i]);
    out << '\n';
    cache = std::move(sol);
}

const RuinSolution& ensure_hjb(const Scenario& sc, std::optional<RuinSolution>& cache) {
    if (!cache) {
        MarketMode mode = resolve_mode(sc);
        GridSpec grid{resolve_z_max(sc, mode), sc.hjb.nodes};
        cache = solve_ruin_problem(sc.model, mode, grid, sc.hjb.solver);
    }
    return *cache;
}

void run_hjb(const Scenario& sc, std::ostream& out, std::optional<RuinSolution>& cache) {
    const RuinSolution& sol = ensure_hjb(sc, cache);
    Eigen::VectorXd residual = equation_residual(sol, sc.model);
    std::ofstream csv = open_out(sc.out_dir, "phi.csv");
    write_solution_csv(csv, sol, residual);
    out << "hjb: mode="
        << (sol.mode == MarketMode::with_riskless ? "with_riskless" : "no_riskless")
        << " z_max=" << fmt(sol.grid.z_max) << " nodes=" << sol.grid.nodes
        << " iterations=" << sol.iterations << " residual=" << fmt(sol.residual, 3)
        << " phi0=" << fmt(sol.value_at(sc.wealth0 / sc.consumption0), 12)
        << " file=phi.csv\n";
}

std::unique_ptr<Strategy> make_strategy(const Scenario& sc,
                                        std::optional<RuinSolution>& hjb_cache) {
    const std::string& spec_text = sc.strategy;
    if (spec_text == "closed_form_feedback")
        return std::make_unique<ClosedFormFeedbackStrategy>(
            ClosedFormSolution::build(sc.model, sc.consumption0));
    if (spec_text == "hjb_policy")
        return std::make_unique<HjbPolicyStrategy>(ensure_hjb(sc, hjb_cache), sc.model);
    if (spec_text == "two_fund")
        return std::make_unique<TwoFundStrategy>(sc.model,
                                                 ClosedFormSolution::build(sc.model, 1.0));
    const std::string prefix = "fixed_mix:";
    if (spec_text.rfind(prefix, 0) == 0) {
        auto nums = to_numbers("simulation.strategy", spec_text.substr(prefix.size()));
        if (static_cast<int>(nums.size()) != sc.model.n)
            throw ConfigError("fixed_mix needs one fraction per risky asset");
        Eigen::VectorXd fr = to_eigen(nums);
        if (!sc.model.has_riskless() && std::abs(fr.sum() - 1.0) > 1e-12)
            throw InvalidStrategy("without a riskless asset, fixed_mix fractions must sum to 1");
        return std::make_unique<FixedMixStrategy>(std::move(fr));
    }
    throw ConfigError("unknown simulation.strategy '" + spec_text + "'");
}

void run_simulate(const Scenario& sc, std::ostream& out,
                  std::optional<RuinSolution>& hjb_cache) {
    std::unique_ptr<Strategy> strat = make_strategy(sc, hjb_cache);
    std::vector<PathRecord> records;
    SimResult res = run_simulation(sc.model, *strat, sc.wealth0, sc.consumption0, sc.sim,
                                   sc.dump_paths ? &records : nullptr);

    std::optional<double> oracle;
    try {
        oracle = ClosedFormSolution::build(sc.model, sc.consumption0)
                     .ruin_probability(sc.wealth0);
    } catch (const UnsupportedModel&) {
        // outside the analytic special case: report the estimate alone
    }

    std::ofstream csv = open_out(sc.out_dir, "sim.csv");
    csv << "strategy,paths,estimate,std_error,ruined,died_solvent,censored,oracle,z,"
           "flagged\n";
    csv << sc.strategy << ',' << res.paths << ',' << res.ruin_estimate << ','
        << res.std_error << ',' << res.ruined << ',' << res.died_solvent << ','
        << res.censored;
    out << "simulate: strategy=" << sc.strategy << " paths=" << res.paths
        << " estimate=" << fmt(res.ruin_estimate, 8) << " se=" << fmt(res.std_error, 6)
        << " ruined=" << res.ruined << " died_solvent=" << res.died_solvent
        << " censored=" << res.censored;
    if (oracle) {
        ComparisonReport rep = compare_to_oracle({res}, *oracle);
        const ComparisonRow& row = rep.rows.front();
        csv << ',' << *oracle << ',' << row.z << ',' << (row.flagged ? 1 : 0) << '\n';
        out << " oracle=" << fmt(*oracle, 8) << " z=" << fmt(row.z, 4)
            << " flagged=" << (row.flagged ? 1 : 0);
    } else {
        csv << ",,,\n";
    }
    out << '\n';

    if (sc.dump_paths) {
        std::ofstream pcsv = open_out(sc.out_dir, "paths.csv");
        pcsv << "path,outcome,death_time,ruin_time\n";
        for (const PathRecord& rec : records)
            pcsv << rec.index << ',' << outcome_name(rec.outcome) << ',' << rec.death_time
                 << ',' << rec.ruin_time << '\n';
    }
}

void run_verify(const Scenario& sc, std::ostream& out) {
    VerifySettings vs;   // defaults; scenario-level overrides not exposed yet
    DecompositionCheck check = verify_decomposition(sc.model, vs.samples, vs.seed);

    std::ofstream csv = open_out(sc.out_dir, "verify.csv");
    csv << "mode,samples,max_residual\n";
    csv << "no_riskless," << check.samples << ',' << check.max_residual_no_riskless << '\n';
    if (sc.model.has_riskless())
        csv << "with_riskless," << check.samples << ',' << check.max_residual_riskless
            << '\n';

    double worst = check.max_residual_no_riskless;
    if (sc.model.has_riskless())
        worst = std::max(worst, check.max_residual_riskless);
    out << "verify_decomposition: samples=" << check.samples
        << " no_riskless=" << fmt(check.max_residual_no_riskless, 3);
    if (sc.model.has_riskless())
        out << " riskless=" << fmt(check.max_residual_riskless, 3);
    bool ok = worst <= vs.tolerance;
    out << (ok ? " ok" : " FAIL") << '\n';
    if (!ok)
        throw VerificationFailure("two-fund decomposition residual " + fmt(worst, 3) +
                                  " exceeds " + fmt(vs.tolerance, 3));
}

} // namespace

int run_scenario(const Scenario& sc, std::ostream& out) {
    out << "scenario: " << sc.name << '\n';
    out << "seed: " << sc.sim.seed << '\n';

    std::optional<ClosedFormSolution> closed_cache;
    std::optional<RuinSolution> hjb_cache;
    for (Task task : sc.tasks) {
        switch (task) {
            case Task::funds: run_funds(sc, out); break;
            case Task::closed_form: run_closed_form(sc, out, closed_cache); break;
            case Task::hjb: run_hjb(sc, out, hjb_cache); break;
            case Task::simulate: run_simulate(sc, out, hjb_cache); break;
            case Task::verify_decomposition: run_verify(sc, out); break;
        }
    }
    return 0;
}

} // namespace ruinfunds
