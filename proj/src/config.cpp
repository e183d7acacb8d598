#include "sgmcmc/config.hpp"

#include <cstdio>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>

#include <json.hpp>

#include "sgmcmc/dataset_io.hpp"
#include "sgmcmc/errors.hpp"

namespace sgmcmc
{
namespace
{
using nlohmann::json;

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where)
{
    if (!j.is_object())
    {
        throw ConfigError(where + " must be a JSON object");
    }
    for (const auto& [key, value] : j.items())
    {
        if (!allowed.count(key))
        {
            throw ConfigError("unknown key '" + key + "' in " + where);
        }
    }
}

template<class T>
void read(const json& j, const char* key, T& out, const std::string& where)
{
    if (!j.contains(key))
    {
        return;
    }
    try
    {
        out = j.at(key).get<T>();
    }
    catch (const json::exception& e)
    {
        throw ConfigError(where + "." + key + ": " + e.what());
    }
}

void require(bool ok, const std::string& message)
{
    if (!ok)
    {
        throw ConfigError(message);
    }
}

//---------------------------------------------------------------------------//
json to_json(const ModelSpec& s)
{
    return {{"kind", s.kind},
            {"dataset", s.dataset},
            {"n_data", s.n_data ? json(*s.n_data) : json(nullptr)},
            {"sigma_x", s.sigma_x},
            {"sigma_theta", s.sigma_theta},
            {"theta_true", s.theta_true},
            {"dim", s.dim}};
}

json to_json(const ScheduleSpec& s)
{
    json j = {{"kind", s.kind}};
    if (s.kind == "power")
    {
        j["m0"] = s.m0 ? json(*s.m0) : json(nullptr);
        j["alpha"] = s.alpha;
    }
    else if (s.kind == "affine_power")
    {
        j["a"] = s.a;
        j["b"] = s.b;
        j["gamma"] = s.gamma;
    }
    else
    {
        j["values"] = s.values;
    }
    return j;
}

json to_json(const ExperimentConfig& c)
{
    json j;
    j["model"] = to_json(c.model);
    j["schedule"] = to_json(c.schedule);
    j["batch_size"] = c.batch_size;
    j["m_steps"] = c.m_steps;
    j["budget"] = c.budget;
    j["replicas"] = c.replicas;
    j["seed"] = c.seed;
    j["test_functions"] = c.test_functions;
    j["output_dir"] = c.output_dir;
    j["sweep"] = {{"alphas", c.sweep.alphas},
                  {"checkpoint_ratio", c.sweep.checkpoint_ratio},
                  {"fit_window_decades", c.sweep.fit_window_decades}};
    j["subsample"] = {{"alpha", c.subsample.alpha},
                      {"n_values", c.subsample.n_values},
                      {"budget", c.subsample.budget}};
    j["heatmap"] = {{"a_values", c.heatmap.a_values}, {"b_values", c.heatmap.b_values},
                    {"gamma", c.heatmap.gamma},       {"budget", c.heatmap.budget},
                    {"batch_size", c.heatmap.batch_size}};
    j["mala"] = {{"target_accept", c.mala.target_accept},
                 {"tuning_budget", c.mala.tuning_budget},
                 {"steps_per_probe", c.mala.steps_per_probe},
                 {"tolerance", c.mala.tolerance}};
    j["reference"] = {{"steps", c.reference.steps},
                      {"chains", c.reference.chains},
                      {"path", c.reference.path},
                      {"max_stderr_fraction", c.reference.max_stderr_fraction}};
    j["diffusion"] = {{"horizon", c.diffusion.horizon},       {"levels", c.diffusion.levels},
                      {"replicas", c.diffusion.replicas},     {"batch_size", c.diffusion.batch_size},
                      {"grid_points", c.diffusion.grid_points}};
    j["assumptions"] = {{"horizon", c.assumptions.horizon},
                        {"weight_power", c.assumptions.weight_power},
                        {"grid_points", c.assumptions.grid_points},
                        {"grid_width", c.assumptions.grid_width}};
    return j;
}

//---------------------------------------------------------------------------//
ModelSpec model_from_json(const json& j)
{
    const std::string w = "model";
    check_keys(j, {"kind", "dataset", "n_data", "sigma_x", "sigma_theta", "theta_true", "dim"}, w);
    ModelSpec s;
    read(j, "kind", s.kind, w);
    read(j, "dataset", s.dataset, w);
    if (j.contains("n_data") && !j["n_data"].is_null())
    {
        std::size_t n = 0;
        read(j, "n_data", n, w);
        s.n_data = n;
    }
    read(j, "sigma_x", s.sigma_x, w);
    read(j, "sigma_theta", s.sigma_theta, w);
    read(j, "theta_true", s.theta_true, w);
    read(j, "dim", s.dim, w);
    require(s.kind == "gaussian" || s.kind == "logistic",
            "model.kind must be 'gaussian' or 'logistic'");
    require(s.data_size() >= 1, "model.n_data must be positive");
    require(s.sigma_x > 0 && s.sigma_theta > 0, "model sigmas must be positive");
    require(s.dim >= 1, "model.dim must be positive");
    return s;
}

ScheduleSpec schedule_from_json(const json& j)
{
    const std::string w = "schedule";
    ScheduleSpec s;
    check_keys(j, {"kind", "m0", "alpha", "a", "b", "gamma", "values"}, w);
    read(j, "kind", s.kind, w);
    if (s.kind == "power")
    {
        check_keys(j, {"kind", "m0", "alpha"}, w + " (power)");
        if (j.contains("m0") && !j["m0"].is_null())
        {
            double m0 = 0;
            read(j, "m0", m0, w);
            s.m0 = m0;
        }
        read(j, "alpha", s.alpha, w);
    }
    else if (s.kind == "affine_power")
    {
        check_keys(j, {"kind", "a", "b", "gamma"}, w + " (affine_power)");
        read(j, "a", s.a, w);
        read(j, "b", s.b, w);
        read(j, "gamma", s.gamma, w);
    }
    else if (s.kind == "explicit")
    {
        check_keys(j, {"kind", "values"}, w + " (explicit)");
        read(j, "values", s.values, w);
    }
    else
    {
        throw ConfigError("schedule.kind must be power, affine_power or explicit");
    }
    try
    {
        if (s.kind == "power")
        {
            validate(PowerSchedule{s.m0.value_or(0.0), s.alpha});
        }
        else if (s.kind == "affine_power")
        {
            validate(AffinePowerSchedule{s.a, s.b, s.gamma});
        }
        else
        {
            validate(ExplicitSchedule{s.values});
        }
    }
    catch (const ArgumentError& e)
    {
        throw ConfigError(std::string("schedule: ") + e.what());
    }
    return s;
}

ExperimentConfig config_from_json(const json& j)
{
    const std::string w = "config";
    check_keys(j,
               {"model", "schedule", "batch_size", "m_steps", "budget", "replicas", "seed",
                "test_functions", "output_dir", "sweep", "subsample", "heatmap", "mala",
                "reference", "diffusion", "assumptions"},
               w);
    ExperimentConfig c;
    if (j.contains("model"))
    {
        c.model = model_from_json(j["model"]);
    }
    if (j.contains("schedule"))
    {
        c.schedule = schedule_from_json(j["schedule"]);
    }
    read(j, "batch_size", c.batch_size, w);
    read(j, "m_steps", c.m_steps, w);
    read(j, "budget", c.budget, w);
    read(j, "replicas", c.replicas, w);
    read(j, "seed", c.seed, w);
    read(j, "test_functions", c.test_functions, w);
    read(j, "output_dir", c.output_dir, w);
    require(c.batch_size >= 1, "batch_size must be positive");
    require(c.m_steps >= 1, "m_steps must be positive");
    require(c.budget >= 1, "budget must be positive");
    require(c.replicas >= 2, "replicas must be at least 2");

    if (j.contains("sweep"))
    {
        const auto& s = j["sweep"];
        check_keys(s, {"alphas", "checkpoint_ratio", "fit_window_decades"}, "sweep");
        read(s, "alphas", c.sweep.alphas, "sweep");
        read(s, "checkpoint_ratio", c.sweep.checkpoint_ratio, "sweep");
        read(s, "fit_window_decades", c.sweep.fit_window_decades, "sweep");
    }
    require(!c.sweep.alphas.empty(), "sweep.alphas must be nonempty");
    for (double a : c.sweep.alphas)
    {
        require(a > 0 && a <= 1, "sweep.alphas must lie in (0, 1]");
    }
    require(c.sweep.checkpoint_ratio > 1, "sweep.checkpoint_ratio must exceed 1");
    require(c.sweep.fit_window_decades > 0, "sweep.fit_window_decades must be positive");

    if (j.contains("subsample"))
    {
        const auto& s = j["subsample"];
        check_keys(s, {"alpha", "n_values", "budget"}, "subsample");
        read(s, "alpha", c.subsample.alpha, "subsample");
        read(s, "n_values", c.subsample.n_values, "subsample");
        read(s, "budget", c.subsample.budget, "subsample");
    }
    require(c.subsample.alpha > 0 && c.subsample.alpha <= 1, "subsample.alpha must lie in (0, 1]");
    require(!c.subsample.n_values.empty(), "subsample.n_values must be nonempty");
    require(c.subsample.budget >= 1, "subsample.budget must be positive");

    if (j.contains("heatmap"))
    {
        const auto& s = j["heatmap"];
        check_keys(s, {"a_values", "b_values", "gamma", "budget", "batch_size"}, "heatmap");
        read(s, "a_values", c.heatmap.a_values, "heatmap");
        read(s, "b_values", c.heatmap.b_values, "heatmap");
        read(s, "gamma", c.heatmap.gamma, "heatmap");
        read(s, "budget", c.heatmap.budget, "heatmap");
        read(s, "batch_size", c.heatmap.batch_size, "heatmap");
    }
    require(c.heatmap.budget > 0, "heatmap.budget must be positive");
    require(c.heatmap.batch_size >= 1, "heatmap.batch_size must be positive");
    require(c.heatmap.gamma > 0 && c.heatmap.gamma <= 1, "heatmap.gamma must lie in (0, 1]");
    for (double v : c.heatmap.a_values)
    {
        require(v > 0, "heatmap.a_values must be positive");
    }
    for (double v : c.heatmap.b_values)
    {
        require(v > 0, "heatmap.b_values must be positive");
    }

    if (j.contains("mala"))
    {
        const auto& s = j["mala"];
        check_keys(s, {"target_accept", "tuning_budget", "steps_per_probe", "tolerance"}, "mala");
        read(s, "target_accept", c.mala.target_accept, "mala");
        read(s, "tuning_budget", c.mala.tuning_budget, "mala");
        read(s, "steps_per_probe", c.mala.steps_per_probe, "mala");
        read(s, "tolerance", c.mala.tolerance, "mala");
    }
    require(c.mala.target_accept > 0 && c.mala.target_accept < 1,
            "mala.target_accept must lie in (0, 1)");
    require(c.mala.tuning_budget > 0 && c.mala.steps_per_probe > 0, "mala budgets must be positive");

    if (j.contains("reference"))
    {
        const auto& s = j["reference"];
        check_keys(s, {"steps", "chains", "path", "max_stderr_fraction"}, "reference");
        read(s, "steps", c.reference.steps, "reference");
        read(s, "chains", c.reference.chains, "reference");
        read(s, "path", c.reference.path, "reference");
        read(s, "max_stderr_fraction", c.reference.max_stderr_fraction, "reference");
    }
    require(c.reference.chains >= 2, "reference.chains must be at least 2");
    require(c.reference.steps >= static_cast<std::int64_t>(c.reference.chains) * 10,
            "reference.steps too small for the chain count");

    if (j.contains("diffusion"))
    {
        const auto& s = j["diffusion"];
        check_keys(s, {"horizon", "levels", "replicas", "batch_size", "grid_points"}, "diffusion");
        read(s, "horizon", c.diffusion.horizon, "diffusion");
        read(s, "levels", c.diffusion.levels, "diffusion");
        read(s, "replicas", c.diffusion.replicas, "diffusion");
        read(s, "batch_size", c.diffusion.batch_size, "diffusion");
        read(s, "grid_points", c.diffusion.grid_points, "diffusion");
    }
    require(c.diffusion.horizon > 0, "diffusion.horizon must be positive");
    require(!c.diffusion.levels.empty(), "diffusion.levels must be nonempty");
    require(c.diffusion.replicas >= 2, "diffusion.replicas must be at least 2");

    if (j.contains("assumptions"))
    {
        const auto& s = j["assumptions"];
        check_keys(s, {"horizon", "weight_power", "grid_points", "grid_width"}, "assumptions");
        read(s, "horizon", c.assumptions.horizon, "assumptions");
        read(s, "weight_power", c.assumptions.weight_power, "assumptions");
        read(s, "grid_points", c.assumptions.grid_points, "assumptions");
        read(s, "grid_width", c.assumptions.grid_width, "assumptions");
    }
    require(c.assumptions.horizon >= 20, "assumptions.horizon must be at least 20");
    require(c.assumptions.grid_points >= 1, "assumptions.grid_points must be positive");
    return c;
}

} // namespace

//---------------------------------------------------------------------------//
ExperimentConfig parse_config(const std::string& json_text)
{
    json j;
    try
    {
        j = json::parse(json_text);
    }
    catch (const json::exception& e)
    {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    return config_from_json(j);
}

ExperimentConfig load_config(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
    {
        throw ConfigError("cannot open config " + path.string());
    }
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::string canonical_json(const ExperimentConfig& config)
{
    return to_json(config).dump();
}

std::string config_hash(const ExperimentConfig& config)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : canonical_json(config))
    {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

//---------------------------------------------------------------------------//
ResolvedModel resolve_model(const ModelSpec& spec, std::uint64_t seed)
{
    if (!spec.dataset.empty())
    {
        auto loaded = read_dataset(spec.dataset);
        bool gaussian = std::holds_alternative<GaussianLocationModel>(loaded.model);
        if (gaussian != (spec.kind == "gaussian"))
        {
            throw ConfigError("dataset " + spec.dataset + " is not a " + spec.kind + " dataset");
        }
        return {loaded.model, loaded.meta.generating_theta};
    }
    auto rng = make_stream(seed, StreamPurpose::dataset);
    if (spec.kind == "gaussian")
    {
        auto ds = simulate_dataset(
            rng, GaussianDatasetParams{spec.data_size(), spec.sigma_x, spec.sigma_theta, spec.theta_true});
        return {ds.model, ds.generating_theta};
    }
    auto ds = simulate_dataset(rng, LogisticDatasetParams{spec.data_size(), spec.dim});
    return {ds.model, ds.generating_theta};
}

double posterior_std(const Model& model)
{
    if (const auto* g = std::get_if<GaussianLocationModel>(&model))
    {
        return std::sqrt(g->sigma_p2());
    }
    Matrix h = negative_hessian(model, map_estimate(model));
    Eigen::SelfAdjointEigenSolver<Matrix> eig(h);
    return 1.0 / std::sqrt(eig.eigenvalues().maxCoeff());
}

StepSchedule resolve_schedule(const ScheduleSpec& spec, const Model& model)
{
    StepSchedule s;
    if (spec.kind == "power")
    {
        double m0 = spec.m0 ? *spec.m0
                            : static_cast<double>(choose_m0(spec.alpha, posterior_std(model)));
        s = PowerSchedule{m0, spec.alpha};
    }
    else if (spec.kind == "affine_power")
    {
        s = AffinePowerSchedule{spec.a, spec.b, spec.gamma};
    }
    else
    {
        s = ExplicitSchedule{spec.values};
    }
    validate(s);
    return s;
}

TestFunction resolve_test_function(const std::string& label, const Model& model)
{
    if (label == "one")
    {
        return constant_test_function(1.0);
    }
    if (label == "generator_psi")
    {
        const auto* g = std::get_if<GaussianLocationModel>(&model);
        if (!g)
        {
            throw ConfigError("test function generator_psi needs the gaussian model");
        }
        auto phi = generator_test_function(model, gaussian_experiment_psi(*g));
        phi.label = "generator_psi";
        return phi;
    }
    static const std::regex coordinate(R"(theta([0-9]+)(_sq)?)");
    std::smatch match;
    if (std::regex_match(label, match, coordinate))
    {
        int k = std::stoi(match[1].str());
        if (k < 1 || k > dimension(model))
        {
            throw ConfigError("test function " + label + " is out of range for the model dimension");
        }
        auto f = match[2].matched ? square_test_function(k - 1) : coordinate_test_function(k - 1);
        f.label = label;
        return f;
    }
    throw ConfigError("unknown test function '" + label + "'");
}

} // namespace sgmcmc
