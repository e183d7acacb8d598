#include "sgmcmc/schedules.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "sgmcmc/errors.hpp"

namespace sgmcmc
{
namespace
{

template<class... Ts>
struct Overloaded : Ts...
{
    using Ts::operator()...;
};
template<class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

void require_index(std::int64_t m)
{
    if (m < 1)
    {
        throw ArgumentError("step index must be >= 1, got " + std::to_string(m));
    }
}

double decay_exponent(const StepSchedule& schedule)
{
    return std::visit(Overloaded{[](const PowerSchedule& s) { return s.alpha; },
                                 [](const AffinePowerSchedule& s) { return s.gamma; },
                                 [](const ExplicitSchedule&) {
                                     return std::numeric_limits<double>::quiet_NaN();
                                 }},
                      schedule);
}

} // namespace

void validate(const StepSchedule& schedule)
{
    std::visit(Overloaded{[](const PowerSchedule& s) {
                              if (!(s.m0 >= 0) || !(s.alpha > 0 && s.alpha <= 1))
                              {
                                  throw ArgumentError("power schedule needs m0 >= 0 and alpha in (0, 1]");
                              }
                          },
                          [](const AffinePowerSchedule& s) {
                              if (!(s.a > 0) || !(s.b > 0) || !(s.gamma > 0 && s.gamma <= 1))
                              {
                                  throw ArgumentError(
                                      "affine power schedule needs a, b > 0 and gamma in (0, 1]");
                              }
                          },
                          [](const ExplicitSchedule& s) {
                              if (s.values.empty())
                              {
                                  throw ArgumentError("explicit schedule is empty");
                              }
                              for (double v : s.values)
                              {
                                  if (!(v > 0) || !std::isfinite(v))
                                  {
                                      throw ArgumentError("explicit step sizes must be positive");
                                  }
                              }
                          }},
               schedule);
}

double step(const StepSchedule& schedule, std::int64_t m)
{
    require_index(m);
    auto dm = static_cast<double>(m);
    return std::visit(Overloaded{[&](const PowerSchedule& s) { return std::pow(dm + s.m0, -s.alpha); },
                                 [&](const AffinePowerSchedule& s) {
                                     return std::pow(s.a * dm + s.b, -s.gamma);
                                 },
                                 [&](const ExplicitSchedule& s) {
                                     if (static_cast<std::size_t>(m) > s.values.size())
                                     {
                                         throw ArgumentError("explicit schedule has only "
                                                             + std::to_string(s.values.size())
                                                             + " steps");
                                     }
                                     return s.values[static_cast<std::size_t>(m - 1)];
                                 }},
                      schedule);
}

std::int64_t horizon_limit(const StepSchedule& schedule)
{
    if (const auto* e = std::get_if<ExplicitSchedule>(&schedule))
    {
        return static_cast<std::int64_t>(e->values.size());
    }
    return std::numeric_limits<std::int64_t>::max();
}

double cumulative_time(const StepSchedule& schedule, std::int64_t m)
{
    require_index(m);
    CompensatedSum total;
    for (std::int64_t k = 1; k <= m; ++k)
    {
        total.add(step(schedule, k));
    }
    return total.value();
}

double bias_variance_ratio(const StepSchedule& schedule, std::int64_t m)
{
    require_index(m);
    CompensatedSum total;
    CompensatedSum squares;
    for (std::int64_t k = 1; k <= m; ++k)
    {
        double d = step(schedule, k);
        total.add(d);
        squares.add(d * d);
    }
    return squares.value() / std::sqrt(total.value());
}

std::string to_string(Regime regime)
{
    switch (regime)
    {
    case Regime::fluctuation_dominated:
        return "fluctuation_dominated";
    case Regime::balanced:
        return "balanced";
    case Regime::bias_dominated:
        return "bias_dominated";
    case Regime::unknown:
        break;
    }
    return "unknown";
}

Regime classify_regime(const StepSchedule& schedule)
{
    double exponent = decay_exponent(schedule);
    if (std::isnan(exponent))
    {
        return Regime::unknown;
    }
    constexpr double third = 1.0 / 3.0;
    if (std::abs(exponent - third) <= 1e-12)
    {
        return Regime::balanced;
    }
    return exponent > third ? Regime::fluctuation_dominated : Regime::bias_dominated;
}

//---------------------------------------------------------------------------//
double weight(const WeightSequence& weights, const StepSchedule& schedule, std::int64_t m)
{
    return std::visit(Overloaded{[&](const SameAsSteps&) { return step(schedule, m); },
                                 [&](const StepPowerWeights& w) {
                                     return std::pow(step(schedule, m), w.p);
                                 },
                                 [&](const ExplicitWeights& w) {
                                     require_index(m);
                                     if (static_cast<std::size_t>(m) > w.values.size())
                                     {
                                         throw ArgumentError("explicit weights have only "
                                                             + std::to_string(w.values.size())
                                                             + " entries");
                                     }
                                     return w.values[static_cast<std::size_t>(m - 1)];
                                 }},
                      weights);
}

std::string label(const WeightSequence& weights)
{
    return std::visit(Overloaded{[](const SameAsSteps&) { return std::string("delta"); },
                                 [](const StepPowerWeights& w) {
                                     char buf[32];
                                     std::snprintf(buf, sizeof buf, "delta^%g", w.p);
                                     return std::string(buf);
                                 },
                                 [](const ExplicitWeights&) { return std::string("explicit"); }},
                      weights);
}

//---------------------------------------------------------------------------//
Assumption1Diagnostics validate_assumption1(const StepSchedule& schedule, std::int64_t horizon)
{
    if (horizon < 2)
    {
        throw ArgumentError("assumption 1 diagnostics need horizon >= 2");
    }
    horizon = std::min(horizon, horizon_limit(schedule));
    Assumption1Diagnostics diag;
    CompensatedSum total;
    double previous = 0;
    for (std::int64_t m = 1; m <= horizon; ++m)
    {
        double d = step(schedule, m);
        if (m > 1 && d > previous && diag.is_decreasing)
        {
            diag.is_decreasing = false;
            diag.first_increase = m - 1;
        }
        total.add(d);
        previous = d;
    }
    diag.delta_tail = previous;
    diag.T_horizon = total.value();
    return diag;
}

Assumption2Diagnostics validate_assumption2(const WeightSequence& weights,
                                            const StepSchedule& schedule, std::int64_t horizon)
{
    if (horizon < 2)
    {
        throw ArgumentError("assumption 2 diagnostics need horizon >= 2");
    }
    horizon = std::min(horizon, horizon_limit(schedule));
    Assumption2Diagnostics diag;
    CompensatedSum omega_total;
    CompensatedSum first;
    CompensatedSum second;
    double previous_ratio = 0;
    for (std::int64_t m = 1; m <= horizon; ++m)
    {
        double d = step(schedule, m);
        double w = weight(weights, schedule, m);
        omega_total.add(w);
        double big_omega = omega_total.value();
        double ratio = w / d;
        // |omega_m/delta_m - omega_{m-1}/delta_{m-1}| / Omega_{m-1}, with the m = 1
        // boundary term omega_1/delta_1 / Omega_1.
        if (m == 1)
        {
            first.add(std::abs(ratio) / big_omega);
        }
        else
        {
            first.add(std::abs(ratio - previous_ratio) / (big_omega - w));
        }
        second.add(w * w / (d * big_omega * big_omega));
        previous_ratio = ratio;
        diag.omega_tail = w;
    }
    diag.sum_abs_delta_ratio_over_Omega = first.value();
    diag.sum_w2_over_delta_Omega2 = second.value();
    diag.Omega_horizon = omega_total.value();
    return diag;
}

std::int64_t choose_m0(double alpha, double bound)
{
    if (!(alpha > 0) || !(bound > 0))
    {
        throw ArgumentError("choose_m0 needs alpha > 0 and bound > 0");
    }
    if (bound >= 1.0)
    {
        return 0;
    }
    auto m0 = static_cast<std::int64_t>(std::ceil(std::pow(bound, -1.0 / alpha) - 1.0));
    m0 = std::max<std::int64_t>(m0 - 1, 0);
    while (std::pow(1.0 + static_cast<double>(m0), -alpha) > bound)
    {
        ++m0;
    }
    return m0;
}

} // namespace sgmcmc
