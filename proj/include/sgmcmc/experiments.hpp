#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "sgmcmc/config.hpp"
#include "sgmcmc/diffusion.hpp"
#include "sgmcmc/estimators.hpp"
#include "sgmcmc/models.hpp"
#include "sgmcmc/samplers.hpp"

namespace sgmcmc
{

const char* artifact_version();

//---------------------------------------------------------------------------//
// Tables
//---------------------------------------------------------------------------//
struct OutputMeta
{
    std::string config_hash;
    std::uint64_t seed = 0;
    std::vector<std::string> notes;  //!< extra `# key=value` header lines
};

OutputMeta make_meta(const ExperimentConfig& config);

struct CsvTable
{
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

//! Shortest text that reads back to the same double ("inf"/"nan" for non-finite values).
std::string format_number(double value);

//! `#` comment lines (config hash, seed, version, notes), then header and rows.
void write_csv(const std::filesystem::path& path, const CsvTable& table, const OutputMeta& meta);

//! Skips `#` lines; the first remaining line is the header.
CsvTable read_csv(const std::filesystem::path& path);

//! Writes {"meta": {...}, "result": body} with two-space indentation.
void write_json(const std::filesystem::path& path, const nlohmann::json& body,
                const OutputMeta& meta);

//---------------------------------------------------------------------------//
// Replica bookkeeping
//---------------------------------------------------------------------------//
/*!
 * Values of one report slot at the requested checkpoints, keeping replicas
 * that had not diverged by then; diverged[c] counts the others.
 */
struct CheckpointSamples
{
    std::vector<std::int64_t> marks;
    std::vector<std::vector<double>> values;
    std::vector<std::size_t> diverged;
};

CheckpointSamples collect_checkpoints(const std::vector<RunReport>& reports,
                                      const std::vector<std::int64_t>& marks, std::size_t slot);

//! Replica mean and its standard error.
struct MeanEstimate
{
    double mean = 0;
    double std_error = 0;
};

MeanEstimate replica_mean(const std::vector<double>& values);

//---------------------------------------------------------------------------//
// mse-sweep / rate-fit / scaling-plot
//---------------------------------------------------------------------------//
struct SweepRow
{
    double alpha = 0;
    std::int64_t m = 0;
    double T_m = 0;
    double mse = 0;
    double std_error = 0;
    double mean = 0;             //!< replica mean of pi_m(phi) (truth is 0)
    double mean_std_error = 0;
    double sum_delta2 = 0;       //!< sum of delta_k^2 up to m
    double diverged_fraction = 0;
    double control_mse = 0;      //!< MSE of the phi = 1 column against 1
};

struct AlphaSweep
{
    double alpha = 0;
    double m0 = 0;
    std::vector<SweepRow> rows;
};

struct MseSweepResult
{
    std::vector<AlphaSweep> sweeps;
    double sigma2 = 0;         //!< asymptotic variance of A psi
    BiasOracle unit_bias;      //!< asymptotic bias with B_inf = 1
    double max_diverged_fraction = 0;
};

MseSweepResult run_mse_sweep(const ExperimentConfig& config, const Model& model);
CsvTable sweep_table(const MseSweepResult& result);
//! Rows back from a table written by sweep_table.
std::vector<SweepRow> sweep_rows_from_table(const CsvTable& table);

struct RateRow
{
    double alpha = 0;
    double slope = 0;
    double std_error = 0;
    double theory = 0;  //!< -min(1 - alpha, 2 alpha)
    double m_lo = 0;
    double m_hi = 0;
    std::size_t points = 0;
    std::string warning;
};

//! Tail fit of log MSE on log m over the last `window_decades` decades per alpha.
std::vector<RateRow> fit_rates(const std::vector<SweepRow>& rows, double window_decades);
CsvTable rate_table(const std::vector<RateRow>& rates);

struct ScalingSummary
{
    double alpha = 0;
    double band_ratio = 0;      //!< max / min of T_m MSE over the window
    double increase_z = 0;      //!< (last - first) / combined standard error
    double final_value = 0;
    double final_std_error = 0;
};

std::vector<ScalingSummary> summarise_scaling(const std::vector<SweepRow>& rows,
                                              double window_decades);
CsvTable scaling_table(const std::vector<SweepRow>& rows);

//---------------------------------------------------------------------------//
// subsample-sweep
//---------------------------------------------------------------------------//
struct SubsampleRow
{
    std::size_t n = 0;
    std::int64_t likelihood_evals = 0;
    double mse = 0;
    double std_error = 0;
    double diverged_fraction = 0;
};

struct SubsampleResult
{
    std::vector<SubsampleRow> rows;
    std::vector<std::pair<std::size_t, RateFit>> fits;  //!< slope per n against likelihood evaluations
    double max_diverged_fraction = 0;
};

SubsampleResult run_subsample_sweep(const ExperimentConfig& config, const Model& model);
CsvTable subsample_table(const SubsampleResult& result);

//---------------------------------------------------------------------------//
// Reference truth for the logistic posterior
//---------------------------------------------------------------------------//
struct ReferenceTruth
{
    int version = 1;
    std::string quantity = "posterior_variance_theta1";
    double value = 0;
    double std_error = 0;
    std::int64_t steps = 0;
    std::size_t chains = 0;
    double delta = 0;
    double acceptance = 0;
    std::string dataset_fingerprint;
};

//! FNV-1a over the model's data and prior, used to match truth files to datasets.
std::string dataset_fingerprint(const Model& model);

/*!
 * Independent MALA chains from the MAP, tuned to the configured acceptance;
 * the value is the mean over chains of each chain's variance estimate of theta_1.
 */
ReferenceTruth compute_reference_truth(const ExperimentConfig& config, const Model& model);

nlohmann::json to_json(const ReferenceTruth& truth);
ReferenceTruth reference_from_json(const nlohmann::json& j);

//! Reads config.reference.path when it exists and matches the dataset, else computes and writes it.
ReferenceTruth obtain_reference_truth(const ExperimentConfig& config, const Model& model,
                                      const std::filesystem::path& default_path);

//! Throws ArgumentError unless std_error^2 <= fraction * min_mse.
void require_precise_truth(const ReferenceTruth& truth, double min_mse, double fraction);

//---------------------------------------------------------------------------//
// tune-heatmap
//---------------------------------------------------------------------------//
struct HeatmapCell
{
    double a = 0;
    double b = 0;
    double mse = 0;  //!< +inf when diverged
    double std_error = 0;
    std::size_t diverged_replicas = 0;
    bool diverged = false;
};

struct HeatmapResult
{
    std::vector<HeatmapCell> cells;
    std::optional<std::size_t> argmin;
    std::int64_t steps = 0;
    double passes = 0;
    double truth = 0;
    double max_diverged_fraction = 0;
};

std::vector<double> default_heatmap_a();
std::vector<double> default_heatmap_b();

//! Posterior variance estimate of theta_1 from averages of theta_1 and theta_1^2.
double variance_estimate(double first_moment, double second_moment);

HeatmapResult run_tune_heatmap(const ExperimentConfig& config, const Model& model,
                               const ReferenceTruth& truth);
CsvTable heatmap_table(const HeatmapResult& result);

//---------------------------------------------------------------------------//
// compare-mala
//---------------------------------------------------------------------------//
struct CompareRow
{
    std::string method;
    std::int64_t likelihood_evals = 0;
    double mse = 0;
    double std_error = 0;
};

struct CompareResult
{
    std::vector<CompareRow> rows;
    double mala_delta = 0;
    double tuning_acceptance = 0;
    double mala_acceptance = 0;  //!< pooled over the production runs
    bool sgld_tail_monotone = false;
    bool mala_tail_monotone = false;
    std::optional<std::int64_t> crossover;  //!< first budget from which MALA stays below SGLD
    double truth = 0;
    double max_diverged_fraction = 0;
};

//! 3-point moving average is non-increasing over the last decade of x.
bool tail_monotone(const std::vector<std::pair<double, double>>& curve);

CompareResult run_compare_mala(const ExperimentConfig& config, const Model& model,
                               const ReferenceTruth& truth);
CsvTable compare_table(const CompareResult& result);

//---------------------------------------------------------------------------//
// diffusion-limit
//---------------------------------------------------------------------------//
struct DiffusionSummary
{
    std::vector<double> decrease_z;  //!< paired z for each adjacent level pair
    double slope = 0;                //!< log distance on log mesh, reference level excluded
};

DiffusionSummary summarise_diffusion(const std::vector<DiffusionRow>& rows);
DiffusionTable run_diffusion_limit(const ExperimentConfig& config, const Model& model);
CsvTable diffusion_csv(const DiffusionTable& table);

//---------------------------------------------------------------------------//
// validate-assumptions
//---------------------------------------------------------------------------//
//! Pass/warn report for the schedule, weight and drift assumptions.
nlohmann::json validate_assumptions(const ExperimentConfig& config, const Model& model);

} // namespace sgmcmc
