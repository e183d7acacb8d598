#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sgmcmc/estimators.hpp"
#include "sgmcmc/models.hpp"
#include "sgmcmc/random.hpp"
#include "sgmcmc/schedules.hpp"

namespace sgmcmc
{

//! A chain is flagged diverged once |theta| exceeds this or turns non-finite.
inline constexpr double divergence_bound = 1e8;

struct ChainState
{
    Vector theta;
    std::int64_t step_index = 0;
    bool diverged = false;
    RngStream rng;
};

//---------------------------------------------------------------------------//
/*!
 * One SGLD transition:
 *   theta' = theta + delta/2 ghat(theta, U) + sqrt(delta) eta
 * with a fresh minibatch U and eta ~ N(0, I), both drawn from the chain's stream.
 */
class SgldKernel
{
  public:
    SgldKernel(const Model& model, std::size_t batch_size, bool without_replacement = true);

    void step(ChainState& state, double delta);

    std::size_t batch_size() const { return sampler_.batch_size(); }

  private:
    const Model& model_;
    MinibatchSampler sampler_;
    Minibatch batch_;
    Vector gradient_;
};

ChainState sgld_step(ChainState state, const Model& model, double delta, std::size_t batch_size);

//---------------------------------------------------------------------------//
struct MalaStats
{
    std::int64_t proposals = 0;
    std::int64_t accepts = 0;

    double acceptance_rate() const
    {
        return proposals ? static_cast<double>(accepts) / static_cast<double>(proposals) : 0.0;
    }
};

//! log [pi(to) q(from | to)] - log [pi(from) q(to | from)] for the Langevin proposal.
double mala_log_acceptance(const Model& model, const Vector& from, const Vector& to, double delta);

/*!
 * Metropolis-adjusted Langevin transition with cached log density and
 * gradient at the current state (one full-data pass per proposal).
 */
class MalaKernel
{
  public:
    explicit MalaKernel(const Model& model) : model_(model) {}

    void step(ChainState& state, double delta, MalaStats& stats);

  private:
    void refresh(const Vector& theta);

    const Model& model_;
    Vector cached_theta_;
    double cached_log_density_ = 0;
    Vector cached_gradient_;
    Vector proposal_gradient_;
};

ChainState mala_step(ChainState state, const Model& model, double delta, MalaStats& stats);

//---------------------------------------------------------------------------//
// Runs
//---------------------------------------------------------------------------//
struct Checkpoint
{
    std::int64_t m = 0;
    double T_m = 0;
    double B_m = 0;
    std::vector<double> values;  //!< one per (test function, weight) pair
};

struct RunReport
{
    std::string method;
    std::vector<std::string> labels;
    std::vector<Checkpoint> checkpoints;
    std::vector<double> final_values;
    std::int64_t steps_completed = 0;
    double T_m = 0;
    double B_m = 0;
    std::int64_t likelihood_evaluations = 0;
    bool diverged = false;
    std::int64_t diverged_at = 0;
    double delta = 0;  //!< MALA step size; 0 for SGLD
    MalaStats mala;
};

//! Unique values ceil(ratio^j) up to m_max, always including m_max.
std::vector<std::int64_t> geometric_checkpoints(std::int64_t m_max, double ratio = 1.2);

struct RunOptions
{
    //! Defaults to geometric_checkpoints(m_steps) when empty.
    std::vector<std::int64_t> checkpoints;
    bool without_replacement = true;
};

/*!
 * Runs m_steps SGLD transitions. Each average weights phi(theta_{k-1}), the
 * state before step k, by omega_k. Weight sequences default to delta itself.
 */
RunReport run_sgld(const Model& model, const StepSchedule& schedule, std::int64_t m_steps,
                   const Vector& theta0, std::size_t batch_size, RngStream rng,
                   const std::vector<TestFunction>& test_functions,
                   const std::vector<WeightSequence>& weights = {}, const RunOptions& options = {});

//! Uniformly weighted MALA averages; one full-data pass counted per step.
RunReport run_mala(const Model& model, double delta, std::int64_t m_steps, const Vector& theta0,
                   RngStream rng, const std::vector<TestFunction>& test_functions,
                   const RunOptions& options = {});

struct MalaTuningOptions
{
    Vector theta0;                     //!< empty: start at the MAP
    double initial_delta = 0;          //!< 0: inverse largest curvature at the start
    std::int64_t steps_per_probe = 2000;
    double tolerance = 0.03;
};

struct MalaTuning
{
    double delta = 0;
    double acceptance = 0;
    std::int64_t steps_used = 0;
};

/*!
 * Bisection on log(delta) until a probe run's acceptance is within tolerance
 * of the target. Throws TuningError carrying the best delta once `budget`
 * MALA steps are spent.
 */
MalaTuning tune_mala(const Model& model, double target_accept, RngStream rng, std::int64_t budget,
                     const MalaTuningOptions& options = {});

} // namespace sgmcmc
