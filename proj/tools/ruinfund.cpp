#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "ruinfunds/errors.hpp"
#include "ruinfunds/scenario.hpp"

namespace {

int run_command(const std::string& config_path, std::optional<std::uint64_t> seed,
                std::optional<long> paths, std::optional<int> grid_nodes,
                std::optional<std::string> out_dir, std::optional<int> threads) {
    ruinfunds::Scenario sc = ruinfunds::load_scenario(config_path);
    if (seed) sc.sim.seed = *seed;
    if (paths) sc.sim.n_paths = *paths;
    if (grid_nodes) sc.hjb.nodes = *grid_nodes;
    if (out_dir) sc.out_dir = *out_dir;
    if (threads) sc.sim.threads = *threads;
    return ruinfunds::run_scenario(sc, std::cout);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"ruin-minimizing investment: funds, closed form, PDE solve, simulation"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<long> paths;
    std::optional<int> grid_nodes;
    std::optional<std::string> out_dir;
    std::optional<int> threads;

    CLI::App* run = app.add_subcommand("run", "execute the tasks listed in a config file");
    run->add_option("config", config_path, "scenario config file")->required();
    run->add_option("--seed", seed, "override simulation.seed");
    run->add_option("--paths", paths, "override simulation.paths");
    run->add_option("--grid", grid_nodes, "override hjb.nodes");
    run->add_option("--out", out_dir, "output directory for CSV artifacts");
    run->add_option("--threads", threads, "simulation worker threads (0 = auto)");

    try {
        app.parse(argc, argv);
        return run_command(config_path, seed, paths, grid_nodes, out_dir, threads);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);   // prints usage; help exits 0
    } catch (const ruinfunds::Error& e) {
        std::cerr << e.code() << ": " << e.what() << '\n';
        return static_cast<int>(e.kind());
    } catch (const std::exception& e) {
        std::cerr << "InternalError: " << e.what() << '\n';
        return 3;
    }
}
