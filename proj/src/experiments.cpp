#include "sgmcmc/experiments.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

#include "sgmcmc/errors.hpp"
#include "sgmcmc/parallel.hpp"
#include "sgmcmc/samplers.hpp"

namespace sgmcmc
{
namespace
{
using nlohmann::json;
constexpr double inf = std::numeric_limits<double>::infinity();
constexpr double nan = std::numeric_limits<double>::quiet_NaN();

std::ofstream open_output(const std::filesystem::path& path)
{
    if (path.has_parent_path())
    {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
    }
    std::ofstream out(path, std::ios::binary);
    if (!out)
    {
        throw IoError("cannot open " + path.string() + " for writing");
    }
    return out;
}

std::size_t column(const CsvTable& table, const std::string& name)
{
    auto it = std::find(table.header.begin(), table.header.end(), name);
    if (it == table.header.end())
    {
        throw ArgumentError("table has no column '" + name + "'");
    }
    return static_cast<std::size_t>(it - table.header.begin());
}

double parse_double(const std::string& s)
{
    if (s == "inf")
    {
        return inf;
    }
    if (s == "-inf")
    {
        return -inf;
    }
    if (s == "nan")
    {
        return nan;
    }
    double v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
    {
        throw ArgumentError("not a number: '" + s + "'");
    }
    return v;
}

std::string fmt_int(std::int64_t v)
{
    return std::to_string(v);
}

Vector start_point(const Model& model)
{
    return map_estimate(model);
}

const GaussianLocationModel& require_gaussian(const Model& model, const char* command)
{
    const auto* g = std::get_if<GaussianLocationModel>(&model);
    if (!g)
    {
        throw ConfigError(std::string(command) + " needs the gaussian model");
    }
    return *g;
}

const LogisticRegressionModel& require_logistic(const Model& model, const char* command)
{
    const auto* l = std::get_if<LogisticRegressionModel>(&model);
    if (!l)
    {
        throw ConfigError(std::string(command) + " needs the logistic model");
    }
    return *l;
}

double window_fraction(double m_min, double m_max, double decades)
{
    if (!(m_max > m_min))
    {
        return 1.0;
    }
    return std::min(1.0, decades * std::log(10.0) / std::log(m_max / m_min));
}

//! OLS slope of y on x with its standard error.
std::pair<double, double> ols(const std::vector<double>& x, const std::vector<double>& y)
{
    auto n = static_cast<double>(x.size());
    double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxx = 0;
    double sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i)
    {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    double slope = sxy / sxx;
    double rss = 0;
    for (std::size_t i = 0; i < x.size(); ++i)
    {
        double r = y[i] - my - slope * (x[i] - mx);
        rss += r * r;
    }
    double se = x.size() > 2 ? std::sqrt(rss / (n - 2) / sxx) : 0.0;
    return {slope, se};
}

} // namespace

const char* artifact_version()
{
    return SGMCMC_VERSION;
}

//---------------------------------------------------------------------------//
OutputMeta make_meta(const ExperimentConfig& config)
{
    return {config_hash(config), config.seed, {}};
}

std::string format_number(double value)
{
    if (std::isnan(value))
    {
        return "nan";
    }
    if (std::isinf(value))
    {
        return value > 0 ? "inf" : "-inf";
    }
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
    return std::string(buf, ptr);
}

void write_csv(const std::filesystem::path& path, const CsvTable& table, const OutputMeta& meta)
{
    auto out = open_output(path);
    out << "# config_hash=" << meta.config_hash << '\n';
    out << "# seed=" << meta.seed << '\n';
    out << "# version=" << artifact_version() << '\n';
    for (const auto& note : meta.notes)
    {
        out << "# " << note << '\n';
    }
    auto join = [&](const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i)
        {
            out << (i ? "," : "") << cells[i];
        }
        out << '\n';
    };
    join(table.header);
    for (const auto& row : table.rows)
    {
        join(row);
    }
    if (!out)
    {
        throw IoError("write failed for " + path.string());
    }
}

CsvTable read_csv(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
    {
        throw IoError("cannot open " + path.string());
    }
    CsvTable table;
    std::string line;
    bool have_header = false;
    while (std::getline(in, line))
    {
        if (line.empty() || line[0] == '#')
        {
            continue;
        }
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ','))
        {
            cells.push_back(cell);
        }
        if (!have_header)
        {
            table.header = std::move(cells);
            have_header = true;
        }
        else
        {
            table.rows.push_back(std::move(cells));
        }
    }
    if (!have_header)
    {
        throw IoError(path.string() + " has no header row");
    }
    return table;
}

void write_json(const std::filesystem::path& path, const json& body, const OutputMeta& meta)
{
    json doc;
    doc["meta"] = {{"config_hash", meta.config_hash},
                   {"seed", meta.seed},
                   {"version", artifact_version()},
                   {"notes", meta.notes}};
    doc["result"] = body;
    auto out = open_output(path);
    out << doc.dump(2) << '\n';
    if (!out)
    {
        throw IoError("write failed for " + path.string());
    }
}

//---------------------------------------------------------------------------//
CheckpointSamples collect_checkpoints(const std::vector<RunReport>& reports,
                                      const std::vector<std::int64_t>& marks, std::size_t slot)
{
    CheckpointSamples out;
    out.marks = marks;
    out.values.assign(marks.size(), {});
    out.diverged.assign(marks.size(), 0);
    for (const auto& rep : reports)
    {
        std::size_t k = 0;
        for (std::size_t c = 0; c < marks.size(); ++c)
        {
            while (k < rep.checkpoints.size() && rep.checkpoints[k].m < marks[c])
            {
                ++k;
            }
            bool alive = !rep.diverged || marks[c] < rep.diverged_at;
            if (alive && k < rep.checkpoints.size() && rep.checkpoints[k].m == marks[c])
            {
                out.values[c].push_back(rep.checkpoints[k].values.at(slot));
            }
            else
            {
                ++out.diverged[c];
            }
        }
    }
    return out;
}

MeanEstimate replica_mean(const std::vector<double>& values)
{
    if (values.size() < 2)
    {
        throw ArgumentError("replica statistics need at least two values");
    }
    auto n = static_cast<double>(values.size());
    double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
    double var = 0;
    for (double v : values)
    {
        var += (v - mean) * (v - mean);
    }
    var /= n - 1;
    return {mean, std::sqrt(var / n)};
}

//---------------------------------------------------------------------------//
// mse-sweep
//---------------------------------------------------------------------------//
MseSweepResult run_mse_sweep(const ExperimentConfig& config, const Model& model)
{
    const auto& g = require_gaussian(model, "mse-sweep");
    auto psi = gaussian_experiment_psi(g);
    auto phi = generator_test_function(model, psi);
    auto one = constant_test_function(1.0);
    Vector theta0 = start_point(model);
    double sd = std::sqrt(g.sigma_p2());

    MseSweepResult result;
    result.sigma2 = asymptotic_variance(model, psi);
    BiasOracleOptions bias_options;
    bias_options.seed = make_stream(config.seed, StreamPurpose::oracle).next_u64();
    result.unit_bias = asymptotic_bias(model, psi, config.batch_size, 1.0, bias_options);

    auto marks = geometric_checkpoints(config.m_steps, config.sweep.checkpoint_ratio);
    RunOptions options;
    options.checkpoints = marks;
    for (std::size_t a = 0; a < config.sweep.alphas.size(); ++a)
    {
        double alpha = config.sweep.alphas[a];
        AlphaSweep sweep;
        sweep.alpha = alpha;
        sweep.m0 = static_cast<double>(choose_m0(alpha, sd));
        StepSchedule schedule = PowerSchedule{sweep.m0, alpha};
        std::vector<RunReport> reports(config.replicas);
        parallel_for(config.replicas, [&](std::size_t r) {
            reports[r] = run_sgld(model, schedule, config.m_steps, theta0, config.batch_size,
                                  make_stream(config.seed, StreamPurpose::chain, r).split(a),
                                  {phi, one}, {}, options);
        });
        auto main = collect_checkpoints(reports, marks, 0);
        auto control = collect_checkpoints(reports, marks, 1);
        CompensatedSum time;
        CompensatedSum squares;
        std::int64_t m = 0;
        for (std::size_t c = 0; c < marks.size(); ++c)
        {
            for (; m < marks[c]; ++m)
            {
                double d = step(schedule, m + 1);
                time.add(d);
                squares.add(d * d);
            }
            SweepRow row;
            row.alpha = alpha;
            row.m = marks[c];
            row.T_m = time.value();
            row.sum_delta2 = squares.value();
            row.diverged_fraction =
                static_cast<double>(main.diverged[c]) / static_cast<double>(config.replicas);
            result.max_diverged_fraction = std::max(result.max_diverged_fraction, row.diverged_fraction);
            if (main.values[c].size() >= 2)
            {
                auto e = mse(main.values[c], 0.0);
                row.mse = e.mse;
                row.std_error = e.std_error;
                auto mean = replica_mean(main.values[c]);
                row.mean = mean.mean;
                row.mean_std_error = mean.std_error;
                row.control_mse = mse(control.values[c], 1.0).mse;
            }
            else
            {
                row.mse = row.std_error = row.mean = row.mean_std_error = row.control_mse = nan;
            }
            sweep.rows.push_back(row);
        }
        result.sweeps.push_back(std::move(sweep));
    }
    return result;
}

CsvTable sweep_table(const MseSweepResult& result)
{
    CsvTable t;
    t.header = {"alpha", "m", "T_m", "mse", "stderr", "mean", "mean_stderr", "sum_delta2",
                "diverged_fraction", "control_mse"};
    for (const auto& s : result.sweeps)
    {
        for (const auto& r : s.rows)
        {
            t.rows.push_back({format_number(r.alpha), fmt_int(r.m), format_number(r.T_m),
                              format_number(r.mse), format_number(r.std_error),
                              format_number(r.mean), format_number(r.mean_std_error),
                              format_number(r.sum_delta2), format_number(r.diverged_fraction),
                              format_number(r.control_mse)});
        }
    }
    return t;
}

std::vector<SweepRow> sweep_rows_from_table(const CsvTable& table)
{
    auto ia = column(table, "alpha");
    auto im = column(table, "m");
    auto it = column(table, "T_m");
    auto ie = column(table, "mse");
    auto is = column(table, "stderr");
    std::vector<SweepRow> rows;
    for (const auto& cells : table.rows)
    {
        SweepRow r;
        r.alpha = parse_double(cells.at(ia));
        r.m = static_cast<std::int64_t>(parse_double(cells.at(im)));
        r.T_m = parse_double(cells.at(it));
        r.mse = parse_double(cells.at(ie));
        r.std_error = parse_double(cells.at(is));
        rows.push_back(r);
    }
    return rows;
}

namespace
{
std::vector<std::pair<double, std::vector<SweepRow>>> group_by_alpha(const std::vector<SweepRow>& rows)
{
    std::vector<std::pair<double, std::vector<SweepRow>>> groups;
    for (const auto& r : rows)
    {
        auto it = std::find_if(groups.begin(), groups.end(),
                               [&](const auto& g) { return g.first == r.alpha; });
        if (it == groups.end())
        {
            groups.push_back({r.alpha, {r}});
        }
        else
        {
            it->second.push_back(r);
        }
    }
    return groups;
}
} // namespace

std::vector<RateRow> fit_rates(const std::vector<SweepRow>& rows, double window_decades)
{
    std::vector<RateRow> out;
    for (const auto& [alpha, group] : group_by_alpha(rows))
    {
        RateRow row;
        row.alpha = alpha;
        row.theory = -std::min(1.0 - alpha, 2.0 * alpha);
        std::vector<std::pair<double, double>> points;
        for (const auto& r : group)
        {
            if (r.mse > 0 && std::isfinite(r.mse))
            {
                points.emplace_back(static_cast<double>(r.m), r.mse);
            }
        }
        try
        {
            if (points.empty())
            {
                throw ArgumentError("no finite MSE values");
            }
            auto fit = fit_log_log_slope(
                points, window_fraction(points.front().first, points.back().first, window_decades));
            row.slope = fit.slope;
            row.std_error = fit.std_error;
            row.m_lo = fit.m_lo;
            row.m_hi = fit.m_hi;
            row.points = fit.points;
        }
        catch (const ArgumentError& e)
        {
            row.slope = row.std_error = nan;
            row.warning = std::string("insufficient tail points: ") + e.what();
        }
        out.push_back(row);
    }
    return out;
}

CsvTable rate_table(const std::vector<RateRow>& rates)
{
    CsvTable t;
    t.header = {"alpha", "slope", "stderr", "theoretical_slope", "m_lo", "m_hi", "points", "warning"};
    for (const auto& r : rates)
    {
        t.rows.push_back({format_number(r.alpha), format_number(r.slope), format_number(r.std_error),
                          format_number(r.theory), format_number(r.m_lo), format_number(r.m_hi),
                          std::to_string(r.points), r.warning});
    }
    return t;
}

std::vector<ScalingSummary> summarise_scaling(const std::vector<SweepRow>& rows,
                                              double window_decades)
{
    std::vector<ScalingSummary> out;
    for (const auto& [alpha, group] : group_by_alpha(rows))
    {
        ScalingSummary s;
        s.alpha = alpha;
        double m_max = static_cast<double>(group.back().m);
        double cut = m_max / std::pow(10.0, window_decades);
        std::vector<const SweepRow*> tail;
        for (const auto& r : group)
        {
            if (static_cast<double>(r.m) >= cut && std::isfinite(r.mse))
            {
                tail.push_back(&r);
            }
        }
        if (tail.size() < 2)
        {
            s.band_ratio = s.increase_z = nan;
            out.push_back(s);
            continue;
        }
        double lo = inf;
        double hi = 0;
        for (const auto* r : tail)
        {
            lo = std::min(lo, r->T_m * r->mse);
            hi = std::max(hi, r->T_m * r->mse);
        }
        s.band_ratio = hi / lo;
        const auto* first = tail.front();
        const auto* last = tail.back();
        double se = std::hypot(first->T_m * first->std_error, last->T_m * last->std_error);
        s.increase_z = (last->T_m * last->mse - first->T_m * first->mse) / se;
        s.final_value = last->T_m * last->mse;
        s.final_std_error = last->T_m * last->std_error;
        out.push_back(s);
    }
    return out;
}

CsvTable scaling_table(const std::vector<SweepRow>& rows)
{
    CsvTable t;
    t.header = {"alpha", "m", "Tm_times_mse", "stderr"};
    for (const auto& r : rows)
    {
        t.rows.push_back({format_number(r.alpha), fmt_int(r.m), format_number(r.T_m * r.mse),
                          format_number(r.T_m * r.std_error)});
    }
    return t;
}

//---------------------------------------------------------------------------//
// subsample-sweep
//---------------------------------------------------------------------------//
SubsampleResult run_subsample_sweep(const ExperimentConfig& config, const Model& model)
{
    const auto& g = require_gaussian(model, "subsample-sweep");
    auto phi = generator_test_function(model, gaussian_experiment_psi(g));
    Vector theta0 = start_point(model);
    double alpha = config.subsample.alpha;
    StepSchedule schedule =
        PowerSchedule{static_cast<double>(choose_m0(alpha, std::sqrt(g.sigma_p2()))), alpha};

    SubsampleResult result;
    for (std::size_t i = 0; i < config.subsample.n_values.size(); ++i)
    {
        std::size_t n = config.subsample.n_values[i];
        if (n < 1 || n > g.size())
        {
            throw ConfigError("subsample.n_values must lie in [1, N]");
        }
        std::int64_t steps = config.subsample.budget / static_cast<std::int64_t>(n);
        if (steps < 3)
        {
            throw ConfigError("subsample.budget too small for n = " + std::to_string(n));
        }
        auto marks = geometric_checkpoints(steps, config.sweep.checkpoint_ratio);
        RunOptions options;
        options.checkpoints = marks;
        std::vector<RunReport> reports(config.replicas);
        parallel_for(config.replicas, [&](std::size_t r) {
            reports[r] = run_sgld(model, schedule, steps, theta0, n,
                                  make_stream(config.seed, StreamPurpose::chain, r).split(100 + i),
                                  {phi}, {}, options);
        });
        auto samples = collect_checkpoints(reports, marks, 0);
        std::vector<std::pair<double, double>> curve;
        for (std::size_t c = 0; c < marks.size(); ++c)
        {
            SubsampleRow row;
            row.n = n;
            row.likelihood_evals = marks[c] * static_cast<std::int64_t>(n);
            row.diverged_fraction =
                static_cast<double>(samples.diverged[c]) / static_cast<double>(config.replicas);
            result.max_diverged_fraction = std::max(result.max_diverged_fraction, row.diverged_fraction);
            if (samples.values[c].size() >= 2)
            {
                auto e = mse(samples.values[c], 0.0);
                row.mse = e.mse;
                row.std_error = e.std_error;
                if (e.mse > 0)
                {
                    curve.emplace_back(static_cast<double>(row.likelihood_evals), e.mse);
                }
            }
            else
            {
                row.mse = row.std_error = nan;
            }
            result.rows.push_back(row);
        }
        RateFit fit;
        fit.slope = nan;
        if (curve.size() >= 3)
        {
            try
            {
                fit = fit_log_log_slope(curve, window_fraction(curve.front().first, curve.back().first,
                                                               config.sweep.fit_window_decades));
            }
            catch (const ArgumentError&)
            {
            }
        }
        result.fits.emplace_back(n, fit);
    }
    return result;
}

CsvTable subsample_table(const SubsampleResult& result)
{
    CsvTable t;
    t.header = {"n", "likelihood_evals", "mse", "stderr", "diverged_fraction"};
    for (const auto& r : result.rows)
    {
        t.rows.push_back({std::to_string(r.n), fmt_int(r.likelihood_evals), format_number(r.mse),
                          format_number(r.std_error), format_number(r.diverged_fraction)});
    }
    return t;
}

//---------------------------------------------------------------------------//
// Reference truth
//---------------------------------------------------------------------------//
std::string dataset_fingerprint(const Model& model)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&](double v) {
        unsigned char bytes[sizeof(double)];
        std::memcpy(bytes, &v, sizeof v);
        for (unsigned char c : bytes)
        {
            h ^= c;
            h *= 0x100000001b3ULL;
        }
    };
    std::visit(
        [&](const auto& m) {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, GaussianLocationModel>)
            {
                for (double x : m.data())
                {
                    mix(x);
                }
                mix(m.sigma_x());
                mix(m.sigma_theta());
            }
            else
            {
                for (Eigen::Index i = 0; i < m.covariates().size(); ++i)
                {
                    mix(m.covariates().data()[i]);
                }
                for (double y : m.labels())
                {
                    mix(y);
                }
                for (Eigen::Index i = 0; i < m.prior_covariance().size(); ++i)
                {
                    mix(m.prior_covariance().data()[i]);
                }
            }
        },
        model);
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

double variance_estimate(double first_moment, double second_moment)
{
    return second_moment - first_moment * first_moment;
}

namespace
{
MalaTuning tune_for(const ExperimentConfig& config, const Model& model, const Vector& theta0)
{
    MalaTuningOptions options;
    options.theta0 = theta0;
    options.steps_per_probe = config.mala.steps_per_probe;
    options.tolerance = config.mala.tolerance;
    return tune_mala(model, config.mala.target_accept,
                     make_stream(config.seed, StreamPurpose::tuning), config.mala.tuning_budget,
                     options);
}

std::vector<TestFunction> first_coordinate_moments(const Model& model)
{
    return {resolve_test_function("theta1", model), resolve_test_function("theta1_sq", model)};
}
} // namespace

ReferenceTruth compute_reference_truth(const ExperimentConfig& config, const Model& model)
{
    Vector theta0 = start_point(model);
    auto tuning = tune_for(config, model, theta0);
    auto tests = first_coordinate_moments(model);
    std::size_t chains = config.reference.chains;
    std::int64_t per_chain = config.reference.steps / static_cast<std::int64_t>(chains);
    std::vector<RunReport> reports(chains);
    RunOptions options;
    options.checkpoints = {per_chain};
    parallel_for(chains, [&](std::size_t c) {
        reports[c] = run_mala(model, tuning.delta, per_chain, theta0,
                              make_stream(config.seed, StreamPurpose::reference, c), tests, options);
    });
    std::vector<double> estimates;
    MalaStats pooled;
    for (const auto& rep : reports)
    {
        estimates.push_back(variance_estimate(rep.final_values[0], rep.final_values[1]));
        pooled.proposals += rep.mala.proposals;
        pooled.accepts += rep.mala.accepts;
    }
    auto mean = replica_mean(estimates);
    ReferenceTruth truth;
    truth.value = mean.mean;
    truth.std_error = mean.std_error;
    truth.steps = per_chain * static_cast<std::int64_t>(chains);
    truth.chains = chains;
    truth.delta = tuning.delta;
    truth.acceptance = pooled.acceptance_rate();
    truth.dataset_fingerprint = dataset_fingerprint(model);
    return truth;
}

json to_json(const ReferenceTruth& t)
{
    return {{"version", t.version},       {"quantity", t.quantity},
            {"value", t.value},           {"std_error", t.std_error},
            {"steps", t.steps},           {"chains", t.chains},
            {"delta", t.delta},           {"acceptance", t.acceptance},
            {"dataset_fingerprint", t.dataset_fingerprint}};
}

ReferenceTruth reference_from_json(const json& j)
{
    ReferenceTruth t;
    try
    {
        t.version = j.at("version").get<int>();
        t.quantity = j.at("quantity").get<std::string>();
        t.value = j.at("value").get<double>();
        t.std_error = j.at("std_error").get<double>();
        t.steps = j.at("steps").get<std::int64_t>();
        t.chains = j.at("chains").get<std::size_t>();
        t.delta = j.at("delta").get<double>();
        t.acceptance = j.at("acceptance").get<double>();
        t.dataset_fingerprint = j.at("dataset_fingerprint").get<std::string>();
    }
    catch (const json::exception& e)
    {
        throw ConfigError(std::string("malformed truth file: ") + e.what());
    }
    if (t.version != 1 || t.quantity != "posterior_variance_theta1")
    {
        throw ConfigError("unsupported truth file version or quantity");
    }
    return t;
}

ReferenceTruth obtain_reference_truth(const ExperimentConfig& config, const Model& model,
                                      const std::filesystem::path& default_path)
{
    require_logistic(model, "the reference truth");
    std::filesystem::path path = config.reference.path.empty() ? default_path
                                                               : std::filesystem::path(config.reference.path);
    if (std::filesystem::exists(path))
    {
        std::ifstream in(path);
        json j;
        try
        {
            in >> j;
        }
        catch (const json::exception& e)
        {
            throw ConfigError(path.string() + ": " + e.what());
        }
        auto truth = reference_from_json(j.contains("result") ? j["result"] : j);
        if (truth.dataset_fingerprint != dataset_fingerprint(model))
        {
            throw ConfigError(path.string() + " was computed for a different dataset");
        }
        return truth;
    }
    auto truth = compute_reference_truth(config, model);
    write_json(path, to_json(truth), make_meta(config));
    return truth;
}

void require_precise_truth(const ReferenceTruth& truth, double min_mse, double fraction)
{
    if (!(truth.std_error * truth.std_error <= fraction * min_mse))
    {
        throw ArgumentError("reference truth too noisy: stderr^2 = "
                            + format_number(truth.std_error * truth.std_error) + " exceeds "
                            + format_number(fraction) + " x smallest MSE "
                            + format_number(min_mse) + "; run a longer reference");
    }
}

//---------------------------------------------------------------------------//
// tune-heatmap
//---------------------------------------------------------------------------//
std::vector<double> default_heatmap_a()
{
    std::vector<double> v;
    for (int j = -2; j <= 2; ++j)
    {
        v.push_back(5.89e7 * std::pow(10.0, j));
    }
    return v;
}

std::vector<double> default_heatmap_b()
{
    std::vector<double> v;
    for (int j = -2; j <= 2; ++j)
    {
        v.push_back(7.90e8 * std::pow(10.0, j));
    }
    return v;
}

HeatmapResult run_tune_heatmap(const ExperimentConfig& config, const Model& model,
                               const ReferenceTruth& truth)
{
    const auto& l = require_logistic(model, "tune-heatmap");
    auto a_values = config.heatmap.a_values.empty() ? default_heatmap_a() : config.heatmap.a_values;
    auto b_values = config.heatmap.b_values.empty() ? default_heatmap_b() : config.heatmap.b_values;
    std::size_t n = config.heatmap.batch_size;
    if (n > l.size())
    {
        throw ConfigError("heatmap.batch_size exceeds the dataset size");
    }
    HeatmapResult result;
    result.truth = truth.value;
    result.steps = config.heatmap.budget / static_cast<std::int64_t>(n);
    result.passes = static_cast<double>(config.heatmap.budget) / static_cast<double>(l.size());
    if (result.steps < 1)
    {
        throw ConfigError("heatmap.budget is smaller than one minibatch");
    }
    Vector theta0 = start_point(model);
    auto tests = first_coordinate_moments(model);
    RunOptions options;
    options.checkpoints = {result.steps};

    std::size_t cell_index = 0;
    for (double a : a_values)
    {
        for (double b : b_values)
        {
            StepSchedule schedule = AffinePowerSchedule{a, b, config.heatmap.gamma};
            std::vector<RunReport> reports(config.replicas);
            parallel_for(config.replicas, [&](std::size_t r) {
                reports[r] = run_sgld(
                    model, schedule, result.steps, theta0, n,
                    make_stream(config.seed, StreamPurpose::chain, r).split(1000 + cell_index), tests,
                    {}, options);
            });
            HeatmapCell cell;
            cell.a = a;
            cell.b = b;
            std::vector<double> estimates;
            for (const auto& rep : reports)
            {
                if (rep.diverged)
                {
                    ++cell.diverged_replicas;
                }
                else
                {
                    estimates.push_back(variance_estimate(rep.final_values[0], rep.final_values[1]));
                }
            }
            result.max_diverged_fraction =
                std::max(result.max_diverged_fraction,
                         static_cast<double>(cell.diverged_replicas) / static_cast<double>(config.replicas));
            cell.diverged = cell.diverged_replicas > 0 || estimates.size() < 2;
            if (cell.diverged)
            {
                cell.mse = inf;
                cell.std_error = nan;
            }
            else
            {
                auto e = mse(estimates, truth.value);
                cell.mse = e.mse;
                cell.std_error = e.std_error;
            }
            result.cells.push_back(cell);
            ++cell_index;
        }
    }
    for (std::size_t i = 0; i < result.cells.size(); ++i)
    {
        if (!result.cells[i].diverged
            && (!result.argmin || result.cells[i].mse < result.cells[*result.argmin].mse))
        {
            result.argmin = i;
        }
    }
    return result;
}

CsvTable heatmap_table(const HeatmapResult& result)
{
    CsvTable t;
    t.header = {"a", "b", "mse", "stderr", "diverged", "diverged_replicas", "argmin"};
    for (std::size_t i = 0; i < result.cells.size(); ++i)
    {
        const auto& c = result.cells[i];
        t.rows.push_back({format_number(c.a), format_number(c.b), format_number(c.mse),
                          format_number(c.std_error), c.diverged ? "true" : "false",
                          std::to_string(c.diverged_replicas),
                          result.argmin && *result.argmin == i ? "true" : "false"});
    }
    return t;
}

//---------------------------------------------------------------------------//
// compare-mala
//---------------------------------------------------------------------------//
bool tail_monotone(const std::vector<std::pair<double, double>>& curve)
{
    if (curve.size() < 3)
    {
        return false;
    }
    double cut = curve.back().first / 10.0;
    std::vector<double> smooth;
    for (std::size_t i = 1; i + 1 < curve.size(); ++i)
    {
        if (curve[i].first >= cut)
        {
            smooth.push_back((curve[i - 1].second + curve[i].second + curve[i + 1].second) / 3.0);
        }
    }
    if (smooth.size() < 2)
    {
        return false;
    }
    for (std::size_t i = 1; i < smooth.size(); ++i)
    {
        if (smooth[i] > smooth[i - 1])
        {
            return false;
        }
    }
    return true;
}

namespace
{
std::vector<std::pair<double, double>> variance_mse_curve(const std::vector<RunReport>& reports,
                                                          const std::vector<std::int64_t>& marks,
                                                          std::int64_t evals_per_step, double truth,
                                                          const std::string& method,
                                                          std::vector<CompareRow>& rows,
                                                          double& diverged_fraction)
{
    auto first = collect_checkpoints(reports, marks, 0);
    auto second = collect_checkpoints(reports, marks, 1);
    std::vector<std::pair<double, double>> curve;
    for (std::size_t c = 0; c < marks.size(); ++c)
    {
        diverged_fraction = std::max(diverged_fraction, static_cast<double>(first.diverged[c])
                                                            / static_cast<double>(reports.size()));
        if (first.values[c].size() < 2)
        {
            continue;
        }
        std::vector<double> estimates(first.values[c].size());
        for (std::size_t r = 0; r < estimates.size(); ++r)
        {
            estimates[r] = variance_estimate(first.values[c][r], second.values[c][r]);
        }
        auto e = mse(estimates, truth);
        std::int64_t evals = marks[c] * evals_per_step;
        rows.push_back({method, evals, e.mse, e.std_error});
        curve.emplace_back(static_cast<double>(evals), e.mse);
    }
    return curve;
}

double interpolate_log(const std::vector<std::pair<double, double>>& curve, double x)
{
    auto it = std::lower_bound(curve.begin(), curve.end(), x,
                               [](const auto& p, double v) { return p.first < v; });
    if (it == curve.end())
    {
        return nan;
    }
    if (it->first == x || it == curve.begin())
    {
        return it->first == x ? it->second : nan;
    }
    auto lo = *(it - 1);
    auto hi = *it;
    double u = std::log(x / lo.first) / std::log(hi.first / lo.first);
    return std::exp((1 - u) * std::log(lo.second) + u * std::log(hi.second));
}
} // namespace

CompareResult run_compare_mala(const ExperimentConfig& config, const Model& model,
                               const ReferenceTruth& truth)
{
    const auto& l = require_logistic(model, "compare-mala");
    if (config.schedule.kind != "affine_power")
    {
        throw ConfigError("compare-mala needs an affine_power schedule (the tuned a, b)");
    }
    CompareResult result;
    result.truth = truth.value;
    Vector theta0 = start_point(model);
    auto tests = first_coordinate_moments(model);
    auto tuning = tune_for(config, model, theta0);
    result.mala_delta = tuning.delta;
    result.tuning_acceptance = tuning.acceptance;

    auto n_data = static_cast<std::int64_t>(l.size());
    auto n = static_cast<std::int64_t>(config.batch_size);
    std::int64_t mala_steps = config.budget / n_data;
    std::int64_t sgld_steps = config.budget / n;
    if (mala_steps < 3 || sgld_steps < 3)
    {
        throw ConfigError("budget too small for a MALA/SGLD comparison");
    }
    auto mala_marks = geometric_checkpoints(mala_steps, config.sweep.checkpoint_ratio);
    auto sgld_marks = geometric_checkpoints(sgld_steps, config.sweep.checkpoint_ratio);
    StepSchedule schedule = resolve_schedule(config.schedule, model);

    std::vector<RunReport> mala(config.replicas);
    std::vector<RunReport> sgld(config.replicas);
    RunOptions mala_options;
    mala_options.checkpoints = mala_marks;
    RunOptions sgld_options;
    sgld_options.checkpoints = sgld_marks;
    parallel_for(config.replicas, [&](std::size_t r) {
        auto base = make_stream(config.seed, StreamPurpose::chain, r);
        mala[r] = run_mala(model, tuning.delta, mala_steps, theta0, base.split(2000), tests,
                           mala_options);
        sgld[r] = run_sgld(model, schedule, sgld_steps, theta0, config.batch_size, base.split(2001),
                           tests, {}, sgld_options);
    });
    MalaStats pooled;
    for (const auto& rep : mala)
    {
        pooled.proposals += rep.mala.proposals;
        pooled.accepts += rep.mala.accepts;
    }
    result.mala_acceptance = pooled.acceptance_rate();
    auto mala_curve = variance_mse_curve(mala, mala_marks, n_data, truth.value, "mala", result.rows,
                                         result.max_diverged_fraction);
    auto sgld_curve = variance_mse_curve(sgld, sgld_marks, n, truth.value, "sgld", result.rows,
                                         result.max_diverged_fraction);
    result.mala_tail_monotone = tail_monotone(mala_curve);
    result.sgld_tail_monotone = tail_monotone(sgld_curve);

    // First MALA budget from which MALA stays below the interpolated SGLD curve.
    std::optional<std::int64_t> candidate;
    for (const auto& [x, v] : mala_curve)
    {
        double s = interpolate_log(sgld_curve, x);
        if (std::isnan(s))
        {
            continue;
        }
        if (v < s)
        {
            if (!candidate)
            {
                candidate = static_cast<std::int64_t>(x);
            }
        }
        else
        {
            candidate.reset();
        }
    }
    result.crossover = candidate;
    return result;
}

CsvTable compare_table(const CompareResult& result)
{
    CsvTable t;
    t.header = {"method", "likelihood_evals", "mse", "stderr"};
    for (const auto& r : result.rows)
    {
        t.rows.push_back({r.method, fmt_int(r.likelihood_evals), format_number(r.mse),
                          format_number(r.std_error)});
    }
    return t;
}

//---------------------------------------------------------------------------//
// diffusion-limit
//---------------------------------------------------------------------------//
DiffusionSummary summarise_diffusion(const std::vector<DiffusionRow>& rows)
{
    DiffusionSummary s;
    for (std::size_t l = 0; l + 1 < rows.size(); ++l)
    {
        const auto& a = rows[l].samples;
        const auto& b = rows[l + 1].samples;
        std::vector<double> diff(a.size());
        for (std::size_t r = 0; r < a.size(); ++r)
        {
            diff[r] = a[r] - b[r];
        }
        auto m = replica_mean(diff);
        s.decrease_z.push_back(m.std_error > 0 ? m.mean / m.std_error : (m.mean > 0 ? inf : 0.0));
    }
    std::vector<double> x;
    std::vector<double> y;
    for (const auto& r : rows)
    {
        if (r.mean_sup_dist > 0)
        {
            x.push_back(std::log(r.mesh));
            y.push_back(std::log(r.mean_sup_dist));
        }
    }
    s.slope = x.size() >= 2 ? ols(x, y).first : nan;
    return s;
}

DiffusionTable run_diffusion_limit(const ExperimentConfig& config, const Model& model)
{
    DiffusionOptions options;
    options.theta0 = start_point(model);
    options.grid_points = config.diffusion.grid_points;
    return diffusion_limit_experiment(model, config.diffusion.horizon, config.diffusion.levels,
                                      config.diffusion.batch_size, config.diffusion.replicas,
                                      config.seed, options);
}

CsvTable diffusion_csv(const DiffusionTable& table)
{
    CsvTable t;
    t.header = {"gradient", "level", "mesh", "mean_sup_dist", "stderr"};
    auto add = [&](const std::string& kind, const std::vector<DiffusionRow>& rows) {
        for (const auto& r : rows)
        {
            t.rows.push_back({kind, fmt_int(r.level), format_number(r.mesh),
                              format_number(r.mean_sup_dist), format_number(r.std_error)});
        }
    };
    add("full_batch", table.full_batch);
    add("minibatch", table.minibatch);
    return t;
}

//---------------------------------------------------------------------------//
// validate-assumptions
//---------------------------------------------------------------------------//
json validate_assumptions(const ExperimentConfig& config, const Model& model)
{
    auto schedule = resolve_schedule(config.schedule, model);
    std::int64_t horizon = std::min(config.assumptions.horizon, horizon_limit(schedule));
    std::int64_t half = horizon / 2;
    auto status = [](bool ok) { return ok ? "pass" : "warn"; };

    json report;
    report["regime"] = to_string(classify_regime(schedule));
    report["horizon"] = horizon;

    auto a1 = validate_assumption1(schedule, horizon);
    auto a1_half = validate_assumption1(schedule, std::max<std::int64_t>(half, 2));
    bool time_grows = a1.T_horizon >= (1 + plateau_tolerance) * a1_half.T_horizon;
    bool a1_ok = a1.is_decreasing && a1.delta_tail < step(schedule, 1) && time_grows;
    report["assumption1"] = {{"status", status(a1_ok)},
                             {"is_decreasing", a1.is_decreasing},
                             {"first_increase", a1.first_increase},
                             {"delta_tail", a1.delta_tail},
                             {"T_horizon", a1.T_horizon},
                             {"T_half_horizon", a1_half.T_horizon}};

    WeightSequence weights = StepPowerWeights{config.assumptions.weight_power};
    auto a2 = validate_assumption2(weights, schedule, horizon);
    auto a2_half = validate_assumption2(weights, schedule, std::max<std::int64_t>(half, 2));
    auto plateau = [](double full, double part) {
        return std::abs(full - part) <= plateau_tolerance * std::max(std::abs(full), 1e-300);
    };
    bool first_ok = plateau(a2.sum_abs_delta_ratio_over_Omega, a2_half.sum_abs_delta_ratio_over_Omega);
    bool second_ok = plateau(a2.sum_w2_over_delta_Omega2, a2_half.sum_w2_over_delta_Omega2);
    bool omega_ok = a2.omega_tail < weight(weights, schedule, 1)
                    && a2.Omega_horizon >= (1 + plateau_tolerance) * a2_half.Omega_horizon;
    report["assumption2"] = {{"status", status(first_ok && second_ok && omega_ok)},
                             {"weights", label(weights)},
                             {"sum_abs_delta_ratio_over_Omega", a2.sum_abs_delta_ratio_over_Omega},
                             {"sum_abs_delta_ratio_over_Omega_half", a2_half.sum_abs_delta_ratio_over_Omega},
                             {"sum_w2_over_delta_Omega2", a2.sum_w2_over_delta_Omega2},
                             {"sum_w2_over_delta_Omega2_half", a2_half.sum_w2_over_delta_Omega2},
                             {"omega_tail", a2.omega_tail},
                             {"Omega_horizon", a2.Omega_horizon}};

    auto grid = default_drift_grid(model, config.assumptions.grid_points, config.assumptions.grid_width);
    auto drift = verify_drift_condition(model, grid);
    std::vector<double> worst(drift.worst_point.data(),
                              drift.worst_point.data() + drift.worst_point.size());
    report["assumption3"] = {{"status", status(drift.feasible)},
                             {"alpha_hat", drift.alpha_hat},
                             {"beta_hat", drift.beta_hat},
                             {"beta_bound", drift.beta_bound},
                             {"grid_size", drift.grid_size},
                             {"worst_point", worst}};
    return report;
}

} // namespace sgmcmc
