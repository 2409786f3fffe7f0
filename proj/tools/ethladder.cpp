#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ethladder/records.hpp"
#include "ethladder/run.hpp"
#include "ethladder/version.hpp"

namespace {

void add_common_options(CLI::App* cmd, ethladder::ExperimentConfig& config) {
    cmd->add_option("--nr", config.nr_list, "right-leg lengths N_R (site count N = 3*N_R - 1)")
        ->required();
    cmd->add_option("--kappa", config.kappas, "rung coupling values")->required();
    cmd->add_option("--seed", config.seeds, "trajectory seeds (default 1..5)");
    cmd->add_option("--delta", config.delta, "XXZ anisotropy")->capture_default_str();
    cmd->add_option("--ebar", config.e_bar, "shell center energy")->capture_default_str();
    cmd->add_option("--sigmae", config.sigma_e, "shell energy width")->capture_default_str();
    cmd->add_option("--dt", config.dt, "time step")->capture_default_str();
    cmd->add_option("--tmax", config.t_max, "evolution horizon")->capture_default_str();
    cmd->add_option("--window-fraction", config.window_fraction,
                    "trailing fraction of the run averaged for the relaxation ratio")
        ->capture_default_str();
    cmd->add_option("--half-width", config.half_width, "energy window half width for NNSD")
        ->capture_default_str();
    cmd->add_option("--unfold-degree", config.unfold_degree,
                    "polynomial degree of the unfolding fit (odd)")
        ->capture_default_str();
    cmd->add_option("--out", config.out_dir, "output directory")->capture_default_str();
    cmd->add_option("--cache", config.cache_dir, "spectrum cache directory (default <out>/cache)");
}

void print_summary(const ethladder::RunOutput& output, const std::string& out_dir) {
    for (const auto& r : output.records) {
        if (r.kind == "error") {
            std::printf("error   n=%-3d kappa=%-6g %s\n", r.n_sites, r.kappa, r.message.c_str());
            continue;
        }
        std::string line;
        for (const auto& [name, v] : r.values) {
            char cell[80];
            if (v.err > 0.0)
                std::snprintf(cell, sizeof(cell), " %s=%.6g(%.2g)", name.c_str(), v.value, v.err);
            else
                std::snprintf(cell, sizeof(cell), " %s=%.6g", name.c_str(), v.value);
            line += cell;
        }
        if (r.kind == "gamma")
            std::printf("%-7s kappa=%-6g%s\n", r.kind.c_str(), r.kappa, line.c_str());
        else
            std::printf("%-7s n=%-3d kappa=%-6g%s\n", r.kind.c_str(), r.n_sites, r.kappa,
                        line.c_str());
    }
    std::printf("wrote %zu records to %s\n", output.records.size(), out_dir.c_str());
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"asymmetric-ladder thermalization toolkit"};
    app.set_version_flag("--version", ethladder::kVersion);
    app.require_subcommand(1);

    ethladder::ExperimentConfig config;
    const std::vector<std::pair<std::string, std::string>> modes = {
        {"eth-exact", "shell statistics of the observable from full diagonalization"},
        {"eth-typ", "shell statistics from filtered-state dynamics"},
        {"mod-relax", "relaxation ratio of displaced initial states"},
        {"nnsd", "level-spacing distribution and Brody fit"},
        {"scan", "eth + relaxation over the grid, with width-scaling exponents"},
    };
    for (const auto& [name, help] : modes) {
        CLI::App* cmd = app.add_subcommand(name, help);
        add_common_options(cmd, config);
        cmd->callback([&config, name = name]() { config.mode = ethladder::parse_mode(name); });
    }

    CLI11_PARSE(app, argc, argv);

    try {
        const auto output = ethladder::run(config);
        ethladder::emit_outputs(config.out_dir, output.records, output.nnsd_tables,
                                output.series_tables);
        print_summary(output, config.out_dir);
        return output.all_ok ? 0 : 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "ethladder: %s\n", e.what());
        return 1;
    }
}
