#include <cstdint>
#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mkv/runner.hpp"
#include "mkv/scenario.hpp"

namespace {

std::string resolve_out_dir(const std::string& cli_dir, const mkv::Scenario& sc) {
    if (!cli_dir.empty()) return cli_dir;
    if (!sc.out_dir.empty()) return sc.out_dir;
    if (const char* env = std::getenv("MKVLAB_OUT")) return env;
    return ".";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"self-consistent control laboratory"};
    app.require_subcommand(1);

    std::string scenario_path;
    std::string out_dir;
    std::uint64_t seed = 0;
    int threads = 1;

    CLI::App* run = app.add_subcommand("run", "execute a scenario file");
    run->add_option("scenario", scenario_path, "scenario file to run")->required();
    run->add_option("--out", out_dir,
                    "output directory (falls back to the scenario's [output] "
                    "directory, then $MKVLAB_OUT, then the working directory)");
    CLI::Option* seed_opt =
        run->add_option("--seed", seed, "override the simulation seed");
    run->add_option("--threads", threads, "worker thread count")
        ->check(CLI::PositiveNumber);

    CLI11_PARSE(app, argc, argv);

    mkv::Scenario sc;
    try {
        sc = mkv::parse_scenario_file(scenario_path);
    } catch (const mkv::Error& e) {
        std::cerr << "scenario error: " << e.what() << "\n";
        return 2;
    }
    if (seed_opt->count() > 0) sc.sde.seed = seed;

    try {
        const mkv::ExperimentResult result = mkv::run_experiment(sc, threads);
        const std::vector<std::string> files =
            mkv::emit_report(result, sc, resolve_out_dir(out_dir, sc));
        for (const std::string& f : files) std::cout << f << "\n";
        if (result.uniqueness_warning)
            std::cerr << "warning: the interaction kernel failed the positivity "
                         "check; the computed minimizer may not be unique\n";
        return 0;
    } catch (const mkv::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}
