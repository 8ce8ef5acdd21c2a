#include "sae/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "sae/errors.hpp"
#include "sae/io.hpp"

namespace sae {

namespace {

struct MspeArgs {
    std::string data_path;
    std::string method;
    std::size_t bootstrap = kDefaultBootstrapReplicates;
    std::uint64_t seed = 1;
    std::string link = "identity";
    std::string diag_weight = "half";
    std::string out_path;
};

struct SimulateArgs {
    std::string config_path;
    std::string out_dir = ".";
    std::optional<std::uint64_t> seed;
    bool dump_raw = false;
};

void run_fit(const std::string& path, std::ostream& out) {
    const AreaDataset data = read_dataset_csv(path);
    out << to_json(fit(data)).dump(2) << '\n';
}

void run_mspe(const MspeArgs& args, std::ostream& out) {
    const AreaDataset data = read_dataset_csv(args.data_path);
    const MspeMethod method = parse_method(args.method);

    MspeInputs inputs;
    inputs.link = parse_link(args.link);
    inputs.tilt.diag_weight = parse_diag_weight(args.diag_weight);
    if (method == MspeMethod::pr && inputs.link != LinkFunction::identity) {
        throw UnsupportedError("method 'pr' is not available with link 'exp' (identity link only)");
    }

    const FitResult fitted = fit(data, inputs.est);
    const RandomStream root(args.seed);
    if (inputs.link == LinkFunction::exp) {
        inputs.m2_boot = BootstrapBudget{args.bootstrap, root.child(1).seed()};
    }
    if (method == MspeMethod::tilted) {
        inputs.bv = bootstrap_bias_var(data, fitted, inputs.est, args.bootstrap, root.child(0));
    }
    const MspeBreakdown breakdown = compute_mspe(method, data, fitted.delta_hat, inputs);

    if (args.out_path.empty()) {
        write_breakdown_csv(out, std::span(&breakdown, 1));
    } else {
        std::ofstream file(args.out_path);
        if (!file) throw DataError("cannot write '" + args.out_path + "'");
        write_breakdown_csv(file, std::span(&breakdown, 1));
    }
}

void run_simulate(const SimulateArgs& args, std::ostream& out) {
    SimulationConfig cfg = read_config(args.config_path);
    if (args.seed) cfg.seed = *args.seed;

    SimulationOptions options;
    options.keep_raw = args.dump_raw;
    const SimulationSummary summary = run_simulation(cfg, options);

    const std::filesystem::path dir(args.out_dir);
    std::filesystem::create_directories(dir);
    auto open = [&dir](const char* name) {
        std::ofstream file(dir / name);
        if (!file) throw DataError("cannot write '" + (dir / name).string() + "'");
        return file;
    };
    {
        auto file = open("summary.json");
        file << to_json(summary).dump(2) << '\n';
    }
    {
        auto file = open("per_area.csv");
        write_per_area_csv(file, summary);
    }
    if (args.dump_raw) {
        auto file = open("raw.csv");
        write_raw_csv(file, summary);
    }
    out << "wrote " << (dir / "summary.json").string() << '\n';
}

}  // namespace

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Small-area MSPE estimation and simulation", "sae-mspe"};
    app.require_subcommand(1);

    std::string fit_path;
    auto* fit_cmd = app.add_subcommand("fit", "Fit the area-level model and print the estimates as JSON");
    fit_cmd->add_option("data", fit_path, "Dataset CSV (area_id,y,D,x1,...,xp)")->required();

    MspeArgs mspe_args;
    auto* mspe_cmd = app.add_subcommand("mspe", "Per-area MSPE estimates as CSV");
    mspe_cmd->add_option("data", mspe_args.data_path, "Dataset CSV")->required();
    mspe_cmd->add_option("--method", mspe_args.method, "naive | pr | jlw | new")
        ->required()
        ->check(CLI::IsMember({"naive", "pr", "jlw", "new"}));
    mspe_cmd->add_option("--bootstrap", mspe_args.bootstrap, "Bootstrap replicates")
        ->check(CLI::PositiveNumber);
    mspe_cmd->add_option("--seed", mspe_args.seed, "Random seed");
    mspe_cmd->add_option("--link", mspe_args.link, "identity | exp")
        ->check(CLI::IsMember({"identity", "exp"}));
    mspe_cmd->add_option("--tilt-diag-weight", mspe_args.diag_weight, "half | one")
        ->check(CLI::IsMember({"half", "one"}));
    mspe_cmd->add_option("--out", mspe_args.out_path, "Write CSV here instead of stdout");

    SimulateArgs sim_args;
    auto* sim_cmd = app.add_subcommand("simulate", "Run the Monte Carlo study");
    sim_cmd->add_option("--config", sim_args.config_path, "Simulation config JSON")->required();
    sim_cmd->add_option("--out", sim_args.out_dir, "Output directory");
    sim_cmd->add_option("--seed", sim_args.seed, "Override the config seed");
    sim_cmd->add_flag("--dump-raw", sim_args.dump_raw, "Also write per-replicate raw.csv");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, err, err);
        err << app.help();
        return 1;
    }

    try {
        if (*fit_cmd) run_fit(fit_path, out);
        else if (*mspe_cmd) run_mspe(mspe_args, out);
        else if (*sim_cmd) run_simulate(sim_args, out);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}

}  // namespace sae
