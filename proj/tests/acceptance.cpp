// Acceptance run: one PASS/FAIL line per criterion. The exit status is 0 once
// every experiment has completed, whatever the verdicts; a failed verdict is a
// finding to report, not a broken build.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "sgmcmc/config.hpp"
#include "sgmcmc/diffusion.hpp"
#include "sgmcmc/errors.hpp"
#include "sgmcmc/experiments.hpp"
#include "sgmcmc/samplers.hpp"
#include "support.hpp"

using namespace sgmcmc;

namespace
{
int passed = 0;
int failed = 0;
std::FILE* report_file = nullptr;  // acceptance_report.txt in the working directory

void verdict(const std::string& id, bool ok, const std::string& detail)
{
    std::printf("%s [%s] %s\n", ok ? "PASS" : "FAIL", id.c_str(), detail.c_str());
    std::fflush(stdout);
    if (report_file)
    {
        std::fprintf(report_file, "%s [%s] %s\n", ok ? "PASS" : "FAIL", id.c_str(), detail.c_str());
        std::fflush(report_file);
    }
    (ok ? passed : failed) += 1;
}

std::string fmt(const char* pattern, double a, double b = 0, double c = 0, double d = 0)
{
    char buf[256];
    std::snprintf(buf, sizeof buf, pattern, a, b, c, d);
    return buf;
}

const AlphaSweep& sweep_for(const MseSweepResult& result, double alpha)
{
    for (const auto& s : result.sweeps)
    {
        if (std::abs(s.alpha - alpha) < 1e-12)
        {
            return s;
        }
    }
    throw ArgumentError("alpha not in the sweep");
}

Vector scalar(double x)
{
    return Vector::Constant(1, x);
}

//---------------------------------------------------------------------------//
void gaussian_rate_criteria()
{
    ExperimentConfig config;  // Gaussian, N = 100, n = 10, 512 replicas, m up to 1e5
    auto model = resolve_model(config.model, config.seed).model;
    const auto& g = std::get<GaussianLocationModel>(model);
    auto result = run_mse_sweep(config, model);

    std::vector<SweepRow> rows;
    for (const auto& s : result.sweeps)
    {
        rows.insert(rows.end(), s.rows.begin(), s.rows.end());
    }

    // 1. slopes and the best exponent
    auto rates = fit_rates(rows, config.sweep.fit_window_decades);
    double best_alpha = 0;
    double best_slope = 0;
    for (const auto& r : rates)
    {
        if (r.slope < best_slope)
        {
            best_slope = r.slope;
            best_alpha = r.alpha;
        }
        if (std::abs(r.alpha - 0.2) < 1e-12 || std::abs(r.alpha - 0.33) < 1e-12
            || std::abs(r.alpha - 0.5) < 1e-12)
        {
            verdict("1 slope alpha=" + fmt("%.2f", r.alpha), std::abs(r.slope - r.theory) <= 0.1,
                    fmt("fitted %.3f, theory %.3f, tolerance 0.1 (m in [%.0f, %.0f])", r.slope, r.theory,
                        r.m_lo, r.m_hi));
        }
    }
    std::string all;
    for (const auto& r : rates)
    {
        all += fmt(" %.2f:", r.alpha) + fmt("%.3f", r.slope);
    }
    verdict("1 best slope at alpha=0.33", std::abs(best_alpha - 0.33) < 1e-12,
            fmt("most negative slope %.3f at alpha %.2f;", best_slope, best_alpha) + all);

    // 2. T_m MSE over the last decade
    for (const auto& s : summarise_scaling(rows, config.sweep.fit_window_decades))
    {
        if (s.alpha >= 0.4)
        {
            verdict("2 bounded T*MSE alpha=" + fmt("%.1f", s.alpha), s.band_ratio <= 2.0,
                    fmt("max/min over the last decade %.3f, limit 2", s.band_ratio));
        }
        else if (s.alpha <= 0.2)
        {
            verdict("2 increasing T*MSE alpha=" + fmt("%.1f", s.alpha), s.increase_z > 3.0,
                    fmt("increase z = %.1f, need > 3", s.increase_z));
        }
    }

    // 3. variance constant
    double sp = std::sqrt(g.sigma_p2());
    double closed = 0.5 * (1 + std::cos(sp) * std::exp(-2 * g.sigma_p2()));
    verdict("3 variance oracle vs closed form", std::abs(result.sigma2 - closed) < 1e-10,
            fmt("quadrature %.15f, closed form %.15f", result.sigma2, closed));
    const auto& last_half = sweep_for(result, 0.5).rows.back();
    double scaled = last_half.T_m * last_half.mse;
    verdict("3 T*MSE vs sigma^2 at alpha=0.5", std::abs(scaled / result.sigma2 - 1) <= 0.5,
            fmt("T_m*MSE %.4f +- %.4f, sigma^2 %.4f, ratio %.3f", scaled, last_half.T_m * last_half.std_error,
                result.sigma2, scaled / result.sigma2));

    // 4. bias constant
    const auto& last_bias = sweep_for(result, 0.2).rows.back();
    double rescale = last_bias.sum_delta2 / last_bias.T_m;
    double rescaled = last_bias.mean / rescale;
    double rescaled_se = last_bias.mean_std_error / rescale;
    double z = (rescaled - result.unit_bias.value) / rescaled_se;
    verdict("4 rescaled bias at alpha=0.2", std::abs(z) <= 3,
            fmt("rescaled error %.4f +- %.4f, oracle %.4f +- %.4f", rescaled, rescaled_se, result.unit_bias.value,
                result.unit_bias.std_error)
                + fmt(", z = %.1f", z));

    // 6 (part). phi = 1 control column
    bool exact_one = true;
    for (const auto& r : rows)
    {
        exact_one = exact_one && r.control_mse == 0.0;
    }
    verdict("6 phi=1 gives exactly 1", exact_one, "control MSE is 0 at every checkpoint and alpha");
}

//---------------------------------------------------------------------------//
void unbiasedness_criterion()
{
    RngStream data(40, 0);
    std::vector<double> xs;
    for (int i = 0; i < 8; ++i)
    {
        xs.push_back(2 * data.normal());
    }
    RowMatrix cov(7, 2);
    std::vector<double> labels;
    for (int i = 0; i < 7; ++i)
    {
        cov(i, 0) = 1;
        cov(i, 1) = data.normal();
        labels.push_back(data.uniform() < 0.5 ? -1.0 : 1.0);
    }
    std::vector<Model> models{GaussianLocationModel(xs, 5, 1),
                              LogisticRegressionModel(cov, labels, Matrix::Identity(2, 2))};
    double worst = 0;
    RngStream rng(40, 1);
    for (const auto& model : models)
    {
        std::size_t big_n = data_size(model);
        int d = dimension(model);
        for (int t = 0; t < 20; ++t)
        {
            Vector theta(d);
            for (int a = 0; a < d; ++a)
            {
                theta[a] = 3 * rng.normal();
            }
            for (std::size_t n = 1; n <= big_n; ++n)
            {
                Vector total = Vector::Zero(d);
                double count = 0;
                testing::for_each_subset(big_n, n, [&](const std::vector<std::uint32_t>& idx) {
                    total += gradient_noise(model, theta, Minibatch{idx, true}).value;
                    count += 1;
                });
                worst = std::max(worst, (total / count).norm());
            }
        }
    }
    verdict("5 enumerated gradient noise mean", worst < 1e-10,
            fmt("largest |mean H| %.2e over both models, every n, 20 thetas", worst));
}

//---------------------------------------------------------------------------//
void exactness_criteria()
{
    ExperimentConfig config;
    auto model = resolve_model(config.model, config.seed).model;
    const auto& g = std::get<GaussianLocationModel>(model);

    double worst = 0;
    RngStream rng(41, 0);
    for (int t = 0; t < 100; ++t)
    {
        Vector theta = scalar(g.mu_p() + 3 * rng.normal());
        Minibatch all{std::vector<std::uint32_t>(g.size()), true};
        for (std::uint32_t i = 0; i < g.size(); ++i)
        {
            all.indices[i] = i;
        }
        worst = std::max(worst, std::abs(gradient_noise(model, theta, all).value[0]));
    }
    verdict("6 full-batch noise is zero", worst == 0.0, fmt("largest |H| %.1e over 100 thetas", worst));

    std::vector<double> means;
    std::vector<double> variances;
    for (std::uint64_t r = 0; r < 64; ++r)
    {
        auto report = run_mala(model, g.sigma_p2(), 10000, scalar(g.mu_p()), make_stream(41, StreamPurpose::chain, r),
                               {coordinate_test_function(), square_test_function()});
        means.push_back(report.final_values[0]);
        variances.push_back(report.final_values[1] - report.final_values[0] * report.final_values[0]);
    }
    double zm = (testing::mean_of(means) - g.mu_p()) / testing::stderr_of(means);
    double zv = (testing::mean_of(variances) - g.sigma_p2()) / testing::stderr_of(variances);
    verdict("6 MALA posterior mean", std::abs(zm) <= 3,
            fmt("estimate %.5f vs mu_p %.5f, z = %.2f", testing::mean_of(means), g.mu_p(), zm));
    verdict("6 MALA posterior variance", std::abs(zv) <= 3,
            fmt("estimate %.5f vs sigma_p^2 %.5f, z = %.2f", testing::mean_of(variances), g.sigma_p2(), zv));

    MalaKernel kernel(model);
    MalaStats stats;
    ChainState state{scalar(g.mu_p()), 0, false, RngStream(41, 1)};
    std::vector<double> chain;
    for (int k = 0; k < 1000 + 20 * 10000; ++k)
    {
        kernel.step(state, g.sigma_p2(), stats);
        if (k >= 1000 && (k - 1000) % 20 == 0)
        {
            chain.push_back(state.theta[0]);
        }
    }
    RngStream direct_rng(41, 2);
    std::vector<double> direct;
    for (std::size_t k = 0; k < chain.size(); ++k)
    {
        direct.push_back(g.mu_p() + std::sqrt(g.sigma_p2()) * direct_rng.normal());
    }
    double d = testing::ks_statistic(chain, direct);
    double p = testing::ks_p_value(d, chain.size(), direct.size());
    verdict("6 MALA KS vs direct draws", p > 0.01, fmt("D = %.4f, p = %.3f, n = %.0f", d, p, double(chain.size())));
}

//---------------------------------------------------------------------------//
void diffusion_criterion()
{
    ExperimentConfig config;  // T = 1, levels 8..512, 256 replicas, n = 10
    auto model = resolve_model(config.model, config.seed).model;
    auto table = run_diffusion_limit(config, model);
    for (const auto& [name, rows] : {std::pair{std::string("minibatch"), table.minibatch},
                                     std::pair{std::string("full batch"), table.full_batch}})
    {
        auto summary = summarise_diffusion(rows);
        double min_z = *std::min_element(summary.decrease_z.begin(), summary.decrease_z.end());
        std::string means;
        for (const auto& r : rows)
        {
            means += fmt(" m=%.0f:", double(r.level)) + fmt("%.4f", r.mean_sup_dist);
        }
        verdict("7 strict decrease, " + name, min_z > 3, fmt("smallest paired z %.1f;", min_z) + means);
        verdict("7 mesh slope >= 0.4, " + name, summary.slope >= 0.4, fmt("slope %.3f", summary.slope));
    }
}

//---------------------------------------------------------------------------//
void drift_criteria()
{
    ExperimentConfig config;
    auto model = resolve_model(config.model, config.seed).model;
    const auto& g = std::get<GaussianLocationModel>(model);
    auto grid = default_drift_grid(model);
    auto report = verify_drift_condition(model, grid);
    double target = 1 / g.sigma_p2();
    double spread = 0;
    for (const auto& theta : grid)
    {
        auto v = lyapunov(model, theta);
        double lhs = v.gradient.dot(0.5 * log_posterior_gradient(model, theta)) + target * v.value;
        spread = std::max(spread, std::abs(lhs - target) / target);
    }
    bool ok = report.feasible && std::abs(report.alpha_hat / target - 1) < 1e-12
              && std::abs(report.beta_hat / target - 1) < 1e-12 && spread < 1e-12;
    verdict("8 Gaussian drift alpha=beta=1/sigma_p^2", ok,
            fmt("alpha %.6f, beta %.6f, 1/sigma_p^2 %.6f, worst relative gap %.1e", report.alpha_hat,
                report.beta_hat, target, spread));

    ModelSpec spec;
    spec.kind = "logistic";
    auto logistic = resolve_model(spec, config.seed).model;
    const auto& lr = std::get<LogisticRegressionModel>(logistic);
    auto lreport = verify_drift_condition(logistic, default_drift_grid(logistic));
    verdict("8 logistic drift alpha=lambda_min/4",
            lreport.feasible && std::abs(lreport.alpha_hat - lr.lambda_min() / 4) < 1e-12,
            fmt("alpha %.4f, lambda_min/4 %.4f, beta %.2f <= bound %.2f", lreport.alpha_hat, lr.lambda_min() / 4,
                lreport.beta_hat, lreport.beta_bound));
}

//---------------------------------------------------------------------------//
void logistic_structure_criteria()
{
    ExperimentConfig config;
    config.model.kind = "logistic";
    config.schedule.kind = "affine_power";
    config.replicas = 128;
    config.reference.steps = 1000000;
    auto model = resolve_model(config.model, config.seed).model;
    auto cache = "acceptance_reference_truth_" + dataset_fingerprint(model) + ".json";
    auto truth = obtain_reference_truth(config, model, std::filesystem::path(cache));
    std::printf("info reference Var(theta_1) = %.6g +- %.2g from %lld MALA steps, acceptance %.3f\n", truth.value,
                truth.std_error, static_cast<long long>(truth.steps), truth.acceptance);

    auto heat = run_tune_heatmap(config, model, truth);
    bool has_argmin = heat.argmin.has_value();
    std::string where = has_argmin ? fmt("argmin a=%.3g b=%.3g mse %.3g", heat.cells[*heat.argmin].a,
                                         heat.cells[*heat.argmin].b, heat.cells[*heat.argmin].mse)
                                   : std::string("every cell diverged");
    verdict("9 heatmap has an argmin cell", has_argmin, where);
    if (has_argmin)
    {
        double min_mse = heat.cells[*heat.argmin].mse;
        bool precise = truth.std_error * truth.std_error <= config.reference.max_stderr_fraction * min_mse;
        verdict("9 reference precise enough for the heatmap", precise,
                fmt("truth stderr^2 %.2e vs %.2f * min MSE %.2e", truth.std_error * truth.std_error,
                    config.reference.max_stderr_fraction, min_mse));
    }

    auto cmp = run_compare_mala(config, model, truth);
    verdict("9 MALA acceptance in [0.534, 0.594]", cmp.mala_acceptance >= 0.534 && cmp.mala_acceptance <= 0.594,
            fmt("pooled acceptance %.4f (tuning %.4f, delta %.4g)", cmp.mala_acceptance, cmp.tuning_acceptance,
                cmp.mala_delta));
    verdict("9 SGLD MSE curve tail-monotone", cmp.sgld_tail_monotone, "3-point smoothed, last decade");
    verdict("9 MALA MSE curve tail-monotone", cmp.mala_tail_monotone, "3-point smoothed, last decade");
}

template<class F>
void timed(const char* name, F&& body)
{
    auto start = std::chrono::steady_clock::now();
    try
    {
        body();
    }
    catch (const std::exception& e)
    {
        verdict(name, false, std::string("experiment threw: ") + e.what());
    }
    double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("info %s took %.1f s\n", name, s);
}

} // namespace

int main()
{
    report_file = std::fopen("acceptance_report.txt", "w");
    timed("criteria 1-4", gaussian_rate_criteria);
    timed("criterion 5", unbiasedness_criterion);
    timed("criterion 6", exactness_criteria);
    timed("criterion 7", diffusion_criterion);
    timed("criterion 8", drift_criteria);
    timed("criterion 9", logistic_structure_criteria);
    std::printf("summary: %d passed, %d failed\n", passed, failed);
    if (report_file)
    {
        std::fprintf(report_file, "summary: %d passed, %d failed\n", passed, failed);
        std::fclose(report_file);
    }
    return 0;
}
