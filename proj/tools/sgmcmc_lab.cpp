// sgmcmc-lab: command-line harness for the SGLD experiments.

#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "sgmcmc/config.hpp"
#include "sgmcmc/dataset_io.hpp"
#include "sgmcmc/errors.hpp"
#include "sgmcmc/experiments.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace sgmcmc;

namespace
{

constexpr int exit_config_error = 2;
constexpr int exit_diverged = 3;

struct CommonOptions
{
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> replicas;
    std::string out;
    std::string input;
};

ExperimentConfig load(const CommonOptions& opt)
{
    ExperimentConfig config = opt.config_path.empty() ? ExperimentConfig{} : load_config(opt.config_path);
    if (opt.seed)
    {
        config.seed = *opt.seed;
    }
    if (opt.replicas)
    {
        if (*opt.replicas < 2)
        {
            throw ConfigError("--replicas must be at least 2");
        }
        config.replicas = *opt.replicas;
        config.diffusion.replicas = *opt.replicas;
    }
    if (!opt.out.empty())
    {
        config.output_dir = opt.out;
    }
    return config;
}

int divergence_status(double fraction)
{
    if (fraction > 0.5)
    {
        std::cerr << "more than half of the replicas diverged (" << fraction << ")\n";
        return exit_diverged;
    }
    return 0;
}

void announce(const fs::path& path)
{
    std::cout << "wrote " << path.string() << '\n';
}

//---------------------------------------------------------------------------//
int cmd_simulate_data(const ExperimentConfig& config)
{
    auto resolved = resolve_model(config.model, config.seed);
    DatasetMetadata meta;
    meta.kind = config.model.kind;
    meta.seed = config.seed;
    if (config.model.kind == "gaussian")
    {
        meta.theta_true = config.model.theta_true;
    }
    else
    {
        meta.generating_theta = resolved.generating_theta;
    }
    fs::path stem = fs::path(config.output_dir) / "dataset";
    write_dataset(stem, resolved.model, meta);
    announce(fs::path(stem).replace_extension(".csv"));
    announce(fs::path(stem).replace_extension(".json"));
    return 0;
}

int cmd_mse_sweep(const ExperimentConfig& config)
{
    auto model = resolve_model(config.model, config.seed).model;
    auto result = run_mse_sweep(config, model);
    auto meta = make_meta(config);
    meta.notes.push_back("x_axis=m (SGLD steps)");
    meta.notes.push_back("test_function=generator_psi truth=0; control column phi=1 truth=1");
    fs::path dir = config.output_dir;
    write_csv(dir / "mse_sweep.csv", sweep_table(result), meta);
    announce(dir / "mse_sweep.csv");
    json oracles = {{"sigma2", result.sigma2},
                    {"bias_unit_B", result.unit_bias.value},
                    {"bias_unit_B_std_error", result.unit_bias.std_error},
                    {"bias_enumerated", result.unit_bias.enumerated},
                    {"bias_batches", result.unit_bias.batches}};
    json m0s = json::array();
    for (const auto& s : result.sweeps)
    {
        m0s.push_back({{"alpha", s.alpha}, {"m0", s.m0}});
    }
    oracles["m0"] = m0s;
    write_json(dir / "oracles.json", oracles, meta);
    announce(dir / "oracles.json");
    return divergence_status(result.max_diverged_fraction);
}

std::vector<SweepRow> sweep_input(const ExperimentConfig& config, const CommonOptions& opt)
{
    fs::path input = opt.input.empty() ? fs::path(config.output_dir) / "mse_sweep.csv" : fs::path(opt.input);
    return sweep_rows_from_table(read_csv(input));
}

int cmd_rate_fit(const ExperimentConfig& config, const CommonOptions& opt)
{
    auto rates = fit_rates(sweep_input(config, opt), config.sweep.fit_window_decades);
    for (const auto& r : rates)
    {
        if (!r.warning.empty())
        {
            std::cerr << "warning: alpha " << r.alpha << ": " << r.warning << '\n';
        }
    }
    auto meta = make_meta(config);
    meta.notes.push_back("fit=log mse on log m over the last " +
                         format_number(config.sweep.fit_window_decades) + " decade(s)");
    fs::path path = fs::path(config.output_dir) / "rate_fit.csv";
    write_csv(path, rate_table(rates), meta);
    announce(path);
    return 0;
}

int cmd_scaling_plot(const ExperimentConfig& config, const CommonOptions& opt)
{
    auto rows = sweep_input(config, opt);
    auto meta = make_meta(config);
    meta.notes.push_back("x_axis=m (SGLD steps)");
    fs::path dir = config.output_dir;
    write_csv(dir / "scaling.csv", scaling_table(rows), meta);
    announce(dir / "scaling.csv");
    json summary = json::array();
    for (const auto& s : summarise_scaling(rows, config.sweep.fit_window_decades))
    {
        summary.push_back({{"alpha", s.alpha},
                           {"band_ratio", s.band_ratio},
                           {"increase_z", s.increase_z},
                           {"final_Tm_times_mse", s.final_value},
                           {"final_stderr", s.final_std_error}});
    }
    write_json(dir / "scaling_summary.json", summary, meta);
    announce(dir / "scaling_summary.json");
    return 0;
}

int cmd_subsample_sweep(const ExperimentConfig& config)
{
    auto model = resolve_model(config.model, config.seed).model;
    auto result = run_subsample_sweep(config, model);
    auto meta = make_meta(config);
    meta.notes.push_back("x_axis=likelihood_evals (m * n)");
    meta.notes.push_back("alpha=" + format_number(config.subsample.alpha));
    fs::path dir = config.output_dir;
    write_csv(dir / "subsample.csv", subsample_table(result), meta);
    announce(dir / "subsample.csv");
    json fits = json::array();
    for (const auto& [n, fit] : result.fits)
    {
        fits.push_back({{"n", n}, {"slope", fit.slope}, {"stderr", fit.std_error}});
    }
    write_json(dir / "subsample_fits.json", fits, meta);
    announce(dir / "subsample_fits.json");
    return divergence_status(result.max_diverged_fraction);
}

ReferenceTruth truth_for(const ExperimentConfig& config, const Model& model)
{
    auto truth = obtain_reference_truth(config, model, fs::path(config.output_dir) / "reference_truth.json");
    std::cout << "reference truth " << truth.value << " +/- " << truth.std_error << " ("
              << truth.steps << " MALA steps)\n";
    return truth;
}

int cmd_tune_heatmap(const ExperimentConfig& config)
{
    auto model = resolve_model(config.model, config.seed).model;
    auto truth = truth_for(config, model);
    auto result = run_tune_heatmap(config, model, truth);
    if (result.argmin)
    {
        require_precise_truth(truth, result.cells[*result.argmin].mse,
                              config.reference.max_stderr_fraction);
    }
    auto meta = make_meta(config);
    meta.notes.push_back("budget_likelihood_evals=" + std::to_string(config.heatmap.budget)
                         + " passes=" + format_number(result.passes) + " steps="
                         + std::to_string(result.steps));
    meta.notes.push_back("schedule=(a m + b)^-" + format_number(config.heatmap.gamma)
                         + " n=" + std::to_string(config.heatmap.batch_size));
    fs::path dir = config.output_dir;
    write_csv(dir / "heatmap.csv", heatmap_table(result), meta);
    announce(dir / "heatmap.csv");
    json summary = {{"truth", truth.value},
                    {"truth_std_error", truth.std_error},
                    {"budget_likelihood_evals", config.heatmap.budget},
                    {"passes", result.passes},
                    {"steps", result.steps}};
    if (result.argmin)
    {
        const auto& c = result.cells[*result.argmin];
        summary["argmin"] = {{"a", c.a}, {"b", c.b}, {"mse", c.mse}, {"stderr", c.std_error}};
    }
    else
    {
        summary["argmin"] = nullptr;
    }
    write_json(dir / "heatmap.json", summary, meta);
    announce(dir / "heatmap.json");
    return divergence_status(result.max_diverged_fraction);
}

int cmd_compare_mala(const ExperimentConfig& config)
{
    auto model = resolve_model(config.model, config.seed).model;
    auto truth = truth_for(config, model);
    auto result = run_compare_mala(config, model, truth);
    double min_mse = std::numeric_limits<double>::infinity();
    for (const auto& r : result.rows)
    {
        min_mse = std::min(min_mse, r.mse);
    }
    require_precise_truth(truth, min_mse, config.reference.max_stderr_fraction);
    auto meta = make_meta(config);
    meta.notes.push_back("x_axis=likelihood_evals (MALA: m * N, SGLD: m * n)");
    meta.notes.push_back("mala_delta=" + format_number(result.mala_delta)
                         + " mala_acceptance=" + format_number(result.mala_acceptance));
    fs::path dir = config.output_dir;
    write_csv(dir / "compare_mala.csv", compare_table(result), meta);
    announce(dir / "compare_mala.csv");
    json summary = {{"truth", truth.value},
                    {"mala_delta", result.mala_delta},
                    {"tuning_acceptance", result.tuning_acceptance},
                    {"mala_acceptance", result.mala_acceptance},
                    {"mala_tail_monotone", result.mala_tail_monotone},
                    {"sgld_tail_monotone", result.sgld_tail_monotone},
                    {"crossover_likelihood_evals",
                     result.crossover ? json(*result.crossover) : json(nullptr)}};
    write_json(dir / "compare_mala.json", summary, meta);
    announce(dir / "compare_mala.json");
    return divergence_status(result.max_diverged_fraction);
}

int cmd_diffusion_limit(const ExperimentConfig& config)
{
    auto model = resolve_model(config.model, config.seed).model;
    auto table = run_diffusion_limit(config, model);
    auto meta = make_meta(config);
    meta.notes.push_back("reference=finest level; horizon=" + format_number(config.diffusion.horizon));
    fs::path dir = config.output_dir;
    write_csv(dir / "diffusion.csv", diffusion_csv(table), meta);
    announce(dir / "diffusion.csv");
    auto describe = [](const std::vector<DiffusionRow>& rows) {
        auto s = summarise_diffusion(rows);
        return json{{"decrease_z", s.decrease_z}, {"slope", s.slope}};
    };
    json summary = {{"full_batch", describe(table.full_batch)},
                    {"minibatch", describe(table.minibatch)},
                    {"batch_size", table.batch_size},
                    {"replicas", table.replicas}};
    write_json(dir / "diffusion.json", summary, meta);
    announce(dir / "diffusion.json");
    return 0;
}

int cmd_validate_assumptions(const ExperimentConfig& config)
{
    auto model = resolve_model(config.model, config.seed).model;
    auto report = validate_assumptions(config, model);
    fs::path path = fs::path(config.output_dir) / "assumptions.json";
    write_json(path, report, make_meta(config));
    for (const char* key : {"assumption1", "assumption2", "assumption3"})
    {
        std::cout << key << ": " << report[key]["status"].get<std::string>() << '\n';
    }
    announce(path);
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Stochastic gradient Langevin dynamics experiments"};
    app.set_version_flag("--version", std::string(artifact_version()));
    app.require_subcommand(1);

    CommonOptions opt;
    std::map<std::string, std::function<int(const ExperimentConfig&)>> commands = {
        {"simulate-data", cmd_simulate_data},
        {"mse-sweep", cmd_mse_sweep},
        {"rate-fit", [&](const ExperimentConfig& c) { return cmd_rate_fit(c, opt); }},
        {"scaling-plot", [&](const ExperimentConfig& c) { return cmd_scaling_plot(c, opt); }},
        {"subsample-sweep", cmd_subsample_sweep},
        {"tune-heatmap", cmd_tune_heatmap},
        {"compare-mala", cmd_compare_mala},
        {"diffusion-limit", cmd_diffusion_limit},
        {"validate-assumptions", cmd_validate_assumptions},
    };
    std::map<std::string, std::string> help = {
        {"simulate-data", "write a simulated dataset (CSV + JSON sidecar)"},
        {"mse-sweep", "MSE of A psi against m for each alpha"},
        {"rate-fit", "fitted log-log MSE slopes from an mse-sweep table"},
        {"scaling-plot", "T_m * MSE from an mse-sweep table"},
        {"subsample-sweep", "MSE against likelihood evaluations for several batch sizes"},
        {"tune-heatmap", "MSE of the SGLD variance estimate over an (a, b) grid"},
        {"compare-mala", "matched-budget MSE curves of MALA and tuned SGLD"},
        {"diffusion-limit", "sup distance of coupled chains to the finest level"},
        {"validate-assumptions", "step-size, weight and drift diagnostics"},
    };

    std::string chosen;
    for (const auto& [name, fn] : commands)
    {
        auto* sub = app.add_subcommand(name, help[name]);
        sub->add_option("--config", opt.config_path, "experiment config (JSON)")->check(CLI::ExistingFile);
        sub->add_option("--seed", opt.seed, "master seed (overrides the config)");
        sub->add_option("--replicas", opt.replicas, "replica count (overrides the config)");
        sub->add_option("--out", opt.out, "output directory (overrides the config)");
        if (name == "rate-fit" || name == "scaling-plot")
        {
            sub->add_option("--input", opt.input, "mse-sweep CSV (default <out>/mse_sweep.csv)");
        }
        sub->callback([&chosen, name = name]() { chosen = name; });
    }

    try
    {
        app.parse(argc, argv);
    }
    catch (const CLI::CallForHelp& e)
    {
        return app.exit(e);
    }
    catch (const CLI::CallForVersion& e)
    {
        return app.exit(e);
    }
    catch (const CLI::ParseError& e)
    {
        app.exit(e);
        return exit_config_error;
    }

    try
    {
        auto config = load(opt);
        return commands.at(chosen)(config);
    }
    catch (const ConfigError& e)
    {
        std::cerr << "config error: " << e.what() << '\n';
        return exit_config_error;
    }
    catch (const std::exception& e)
    {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
