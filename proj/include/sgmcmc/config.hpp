#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "sgmcmc/estimators.hpp"
#include "sgmcmc/models.hpp"
#include "sgmcmc/schedules.hpp"

namespace sgmcmc
{

struct ModelSpec
{
    std::string kind = "gaussian";  //!< gaussian | logistic
    std::string dataset;            //!< CSV written by simulate-data; empty: simulate from seed
    std::optional<std::size_t> n_data;  //!< unset: 100 (gaussian) or 1000 (logistic)
    double sigma_x = 5.0;
    double sigma_theta = 1.0;
    double theta_true = 0.0;
    int dim = 3;

    std::size_t data_size() const { return n_data.value_or(kind == "logistic" ? 1000 : 100); }

    bool operator==(const ModelSpec&) const = default;
};

struct ScheduleSpec
{
    std::string kind = "power";  //!< power | affine_power | explicit
    std::optional<double> m0;    //!< power only; absent: smallest m0 with delta_1 <= posterior std
    double alpha = 0.33;
    double a = 5.89e7;
    double b = 7.90e8;
    double gamma = 0.38;
    std::vector<double> values;

    bool operator==(const ScheduleSpec&) const = default;
};

struct SweepSpec
{
    std::vector<double> alphas{0.1, 0.2, 0.3, 0.33, 0.4, 0.5};
    double checkpoint_ratio = 1.2;
    double fit_window_decades = 1.0;

    bool operator==(const SweepSpec&) const = default;
};

struct SubsampleSpec
{
    double alpha = 0.33;
    std::vector<std::size_t> n_values{1, 5, 10, 50, 100};
    std::int64_t budget = 1000000;   //!< likelihood evaluations per replica

    bool operator==(const SubsampleSpec&) const = default;
};

struct HeatmapSpec
{
    std::vector<double> a_values;  //!< empty: 5.89e7 * 10^j, j = -2..2
    std::vector<double> b_values;  //!< empty: 7.90e8 * 10^j, j = -2..2
    double gamma = 0.38;
    std::int64_t budget = 20000;   //!< likelihood evaluations; passes = budget / N
    std::size_t batch_size = 30;

    bool operator==(const HeatmapSpec&) const = default;
};

struct MalaSpec
{
    double target_accept = 0.564;
    std::int64_t tuning_budget = 200000;  //!< MALA steps
    std::int64_t steps_per_probe = 2000;
    double tolerance = 0.03;

    bool operator==(const MalaSpec&) const = default;
};

struct ReferenceSpec
{
    std::int64_t steps = 10000000;  //!< total MALA steps across chains
    std::size_t chains = 16;
    std::string path;               //!< truth file; read if present, otherwise written
    double max_stderr_fraction = 0.1;

    bool operator==(const ReferenceSpec&) const = default;
};

struct DiffusionSpec
{
    double horizon = 1.0;
    std::vector<std::int64_t> levels{8, 32, 128, 512};
    std::size_t replicas = 256;
    std::size_t batch_size = 10;
    int grid_points = 1000;

    bool operator==(const DiffusionSpec&) const = default;
};

struct AssumptionsSpec
{
    std::int64_t horizon = 1000000;
    double weight_power = 1.0;  //!< omega = delta^p
    int grid_points = 201;
    double grid_width = 10.0;   //!< posterior standard deviations

    bool operator==(const AssumptionsSpec&) const = default;
};

struct ExperimentConfig
{
    ModelSpec model;
    ScheduleSpec schedule;
    std::size_t batch_size = 10;
    std::int64_t m_steps = 100000;
    std::int64_t budget = 1000000;  //!< likelihood evaluations for compare-mala
    std::size_t replicas = 512;
    std::uint64_t seed = 1;
    std::vector<std::string> test_functions{"generator_psi", "one"};
    std::string output_dir = "results";
    SweepSpec sweep;
    SubsampleSpec subsample;
    HeatmapSpec heatmap;
    MalaSpec mala;
    ReferenceSpec reference;
    DiffusionSpec diffusion;
    AssumptionsSpec assumptions;

    bool operator==(const ExperimentConfig&) const = default;
};

//! Parses JSON text; unknown keys and malformed values throw ConfigError.
ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::filesystem::path& path);

//! Canonical JSON (sorted keys, every field present).
std::string canonical_json(const ExperimentConfig& config);

//! FNV-1a 64 of the canonical JSON, as 16 hex digits.
std::string config_hash(const ExperimentConfig& config);

//---------------------------------------------------------------------------//
// Resolution of specs into runtime objects
//---------------------------------------------------------------------------//
struct ResolvedModel
{
    Model model;
    std::optional<Vector> generating_theta;
};

//! Loads the dataset if one is named, otherwise simulates it from the dataset stream of seed.
ResolvedModel resolve_model(const ModelSpec& spec, std::uint64_t seed);

//! Posterior standard deviation used by the m0 rule (sqrt of the smallest
//! eigenvalue of the inverse negative Hessian at the mode for logistic).
double posterior_std(const Model& model);

StepSchedule resolve_schedule(const ScheduleSpec& spec, const Model& model);

/*!
 * Test functions by label: "one", "generator_psi" (A psi on the Gaussian
 * model), "thetaK" and "thetaK_sq" for the K-th coordinate (1-based).
 */
TestFunction resolve_test_function(const std::string& label, const Model& model);

} // namespace sgmcmc
