#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

namespace sgmcmc
{

//! delta_m = (m + m0)^(-alpha)
struct PowerSchedule
{
    double m0 = 0;
    double alpha = 0.5;
};

//! delta_m = (a m + b)^(-gamma)
struct AffinePowerSchedule
{
    double a = 1;
    double b = 1;
    double gamma = 0.38;
};

//! delta_m = values[m - 1]
struct ExplicitSchedule
{
    std::vector<double> values;
};

using StepSchedule = std::variant<PowerSchedule, AffinePowerSchedule, ExplicitSchedule>;

//! Throws ArgumentError when the parameters violate the schedule's domain.
void validate(const StepSchedule& schedule);

double step(const StepSchedule& schedule, std::int64_t m);

//! Number of steps the schedule defines (unbounded kinds report INT64_MAX).
std::int64_t horizon_limit(const StepSchedule& schedule);

//! T_m = delta_1 + ... + delta_m, compensated summation.
double cumulative_time(const StepSchedule& schedule, std::int64_t m);

//! B_m = T_m^(-1/2) sum_{k<=m} delta_k^2.
double bias_variance_ratio(const StepSchedule& schedule, std::int64_t m);

enum class Regime
{
    fluctuation_dominated,
    balanced,
    bias_dominated,
    unknown,
};

std::string to_string(Regime regime);

//! Decided by the decay exponent alone: > 1/3, = 1/3 or < 1/3.
Regime classify_regime(const StepSchedule& schedule);

//---------------------------------------------------------------------------//
struct SameAsSteps
{
};

//! omega_m = delta_m^p
struct StepPowerWeights
{
    double p = 1;
};

struct ExplicitWeights
{
    std::vector<double> values;
};

using WeightSequence = std::variant<SameAsSteps, StepPowerWeights, ExplicitWeights>;

double weight(const WeightSequence& weights, const StepSchedule& schedule, std::int64_t m);

std::string label(const WeightSequence& weights);

//---------------------------------------------------------------------------//
struct Assumption1Diagnostics
{
    bool is_decreasing = true;
    double delta_tail = 0;   //!< delta at the horizon
    double T_horizon = 0;
    std::int64_t first_increase = 0;  //!< first m with delta_{m+1} > delta_m, 0 if none
};

Assumption1Diagnostics validate_assumption1(const StepSchedule& schedule, std::int64_t horizon);

struct Assumption2Diagnostics
{
    double sum_abs_delta_ratio_over_Omega = 0;
    double sum_w2_over_delta_Omega2 = 0;
    double omega_tail = 0;
    double Omega_horizon = 0;
};

Assumption2Diagnostics validate_assumption2(const WeightSequence& weights,
                                            const StepSchedule& schedule, std::int64_t horizon);

//! Relative change below which a partial sum is considered to plateau.
inline constexpr double plateau_tolerance = 0.01;

//! Smallest integer m0 >= 0 with (1 + m0)^(-alpha) <= bound.
std::int64_t choose_m0(double alpha, double bound);

//---------------------------------------------------------------------------//
/*!
 * Neumaier-compensated running sum.
 */
class CompensatedSum
{
  public:
    void add(double value)
    {
        double t = sum_ + value;
        if (std::abs(sum_) >= std::abs(value))
        {
            correction_ += (sum_ - t) + value;
        }
        else
        {
            correction_ += (value - t) + sum_;
        }
        sum_ = t;
    }
    double value() const { return sum_ + correction_; }

  private:
    double sum_ = 0;
    double correction_ = 0;
};

} // namespace sgmcmc
