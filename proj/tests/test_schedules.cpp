#include <doctest.h>

#include <cmath>
#include <numbers>

#include "sgmcmc/errors.hpp"
#include "sgmcmc/schedules.hpp"

using namespace sgmcmc;

namespace
{
double brute_time(const StepSchedule& s, std::int64_t m)
{
    long double t = 0;
    for (std::int64_t k = 1; k <= m; ++k)
    {
        t += step(s, k);
    }
    return static_cast<double>(t);
}
} // namespace

TEST_SUITE("schedules")
{
    TEST_CASE("step values")
    {
        CHECK(step(PowerSchedule{0, 0.5}, 4) == doctest::Approx(0.5).epsilon(1e-15));
        CHECK(step(PowerSchedule{0, 1.0}, 1) == 1.0);
        CHECK(step(PowerSchedule{10, 0.5}, 6) == doctest::Approx(0.25));
        CHECK(step(AffinePowerSchedule{2, 3, 0.5}, 3) == doctest::Approx(1.0 / 3.0));
        CHECK(step(AffinePowerSchedule{2, 3, 0.38}, 1) == doctest::Approx(std::pow(5.0, -0.38)).epsilon(1e-15));
        CHECK(step(AffinePowerSchedule{2, 3, 0.38}, 1) == doctest::Approx(0.54249).epsilon(1e-5));
        CHECK(step(ExplicitSchedule{{0.3, 0.2}}, 2) == 0.2);
        CHECK_THROWS_AS(step(ExplicitSchedule{{0.3}}, 2), ArgumentError);
        CHECK_THROWS_AS(step(PowerSchedule{0, 0.5}, 0), ArgumentError);
    }

    TEST_CASE("parameter validation")
    {
        CHECK_THROWS_AS(validate(PowerSchedule{0, 0.0}), ArgumentError);
        CHECK_THROWS_AS(validate(PowerSchedule{0, 1.5}), ArgumentError);
        CHECK_THROWS_AS(validate(PowerSchedule{-1, 0.5}), ArgumentError);
        CHECK_THROWS_AS(validate(AffinePowerSchedule{0, 1, 0.38}), ArgumentError);
        CHECK_THROWS_AS(validate(ExplicitSchedule{{0.1, -0.1}}), ArgumentError);
        CHECK_THROWS_AS(validate(ExplicitSchedule{{}}), ArgumentError);
        CHECK_NOTHROW(validate(ExplicitSchedule{{0.1, 0.2}}));
    }

    TEST_CASE("cumulative time against summation")
    {
        CHECK(cumulative_time(PowerSchedule{0, 1.0}, 3) == doctest::Approx(11.0 / 6.0).epsilon(1e-15));
        CHECK(cumulative_time(ExplicitSchedule{{0.5}}, 1) == 0.5);
        StepSchedule s = PowerSchedule{0, 0.5};
        CHECK(cumulative_time(s, 3) == doctest::Approx(1 + 1 / std::sqrt(2.0) + 1 / std::sqrt(3.0)));
        CHECK(std::abs(cumulative_time(s, 10000) - brute_time(s, 10000)) < 1e-9);
        for (std::int64_t m = 1; m < 200; ++m)
        {
            CHECK(cumulative_time(s, m + 1) - cumulative_time(s, m)
                  == doctest::Approx(step(s, m + 1)).epsilon(1e-12));
        }
    }

    TEST_CASE("bias-variance ratio")
    {
        StepSchedule s = PowerSchedule{0, 0.5};
        double t3 = 1 + std::pow(2.0, -0.5) + std::pow(3.0, -0.5);
        double q3 = 1 + 0.5 + 1.0 / 3.0;
        CHECK(t3 == doctest::Approx(2.28446).epsilon(1e-5));
        CHECK(bias_variance_ratio(s, 3) == doctest::Approx(q3 / std::sqrt(t3)).epsilon(1e-14));
        CHECK(bias_variance_ratio(s, 3) == doctest::Approx(1.21297).epsilon(1e-5));

        double c = 0.37;
        CHECK(bias_variance_ratio(ExplicitSchedule{{c}}, 1) == doctest::Approx(std::pow(c, 1.5)));

        // alpha = 1/3: ratio of successive values tends to one
        StepSchedule third = PowerSchedule{0, 1.0 / 3.0};
        double b1 = bias_variance_ratio(third, 500000);
        double b2 = bias_variance_ratio(third, 1000000);
        CHECK(b1 > 0);
        CHECK(std::abs(b2 / b1 - 1) < 0.01);
    }

    TEST_CASE("ratio is eventually monotone away from the balanced exponent")
    {
        StepSchedule fast = PowerSchedule{0, 0.5};
        StepSchedule slow = PowerSchedule{0, 0.2};
        double prev_fast = bias_variance_ratio(fast, 1000);
        double prev_slow = bias_variance_ratio(slow, 1000);
        for (std::int64_t m = 10000; m <= 1000000; m *= 10)
        {
            double f = bias_variance_ratio(fast, m);
            double s = bias_variance_ratio(slow, m);
            CHECK(f < prev_fast);
            CHECK(s > prev_slow);
            prev_fast = f;
            prev_slow = s;
        }
    }

    TEST_CASE("regimes depend only on the exponent")
    {
        CHECK(classify_regime(PowerSchedule{0, 0.5}) == Regime::fluctuation_dominated);
        CHECK(classify_regime(PowerSchedule{0, 1.0 / 3.0}) == Regime::balanced);
        CHECK(classify_regime(PowerSchedule{0, 0.2}) == Regime::bias_dominated);
        CHECK(classify_regime(PowerSchedule{1234, 0.2}) == Regime::bias_dominated);
        CHECK(classify_regime(AffinePowerSchedule{5.89e7, 7.9e8, 0.38}) == Regime::fluctuation_dominated);
        CHECK(classify_regime(AffinePowerSchedule{1, 1, 1.0 / 3.0}) == Regime::balanced);
        CHECK(classify_regime(ExplicitSchedule{{0.1}}) == Regime::unknown);
        CHECK(to_string(Regime::balanced) == "balanced");
    }

    TEST_CASE("steps strictly decrease for the parametric kinds")
    {
        for (StepSchedule s : {StepSchedule{PowerSchedule{3, 0.33}}, StepSchedule{AffinePowerSchedule{2, 5, 0.38}}})
        {
            double prev = step(s, 1);
            bool decreasing = true;
            for (std::int64_t m = 2; m <= 100000; ++m)
            {
                double d = step(s, m);
                decreasing = decreasing && d < prev;
                prev = d;
            }
            CHECK(decreasing);
        }
    }

    TEST_CASE("assumption 1 diagnostics")
    {
        CHECK(validate_assumption1(PowerSchedule{0, 0.5}, 1000).is_decreasing);
        auto up = validate_assumption1(ExplicitSchedule{{0.1, 0.2}}, 2);
        CHECK_FALSE(up.is_decreasing);
        CHECK(up.first_increase == 1);

        StepSchedule harmonic = PowerSchedule{0, 1.0};
        auto diag = validate_assumption1(harmonic, 1000000);
        CHECK(std::abs(diag.T_horizon - brute_time(harmonic, 1000000)) < 1e-3);
        CHECK(diag.T_horizon == doctest::Approx(std::log(1e6) + std::numbers::egamma).epsilon(1e-6));
        CHECK(diag.delta_tail == doctest::Approx(1e-6));
        CHECK_THROWS_AS(validate_assumption1(harmonic, 1), ArgumentError);
    }

    TEST_CASE("assumption 2 diagnostics")
    {
        StepSchedule s = PowerSchedule{0, 0.5};
        auto same = validate_assumption2(SameAsSteps{}, s, 1000);
        // omega / delta is constant: only the m = 1 boundary term remains
        CHECK(same.sum_abs_delta_ratio_over_Omega == doctest::Approx(1.0 / step(s, 1)));

        StepSchedule third = PowerSchedule{0, 1.0 / 3.0};
        WeightSequence squared = StepPowerWeights{2.0};
        for (std::int64_t h : {100000, 200000})
        {
            auto a = validate_assumption2(squared, third, h);
            auto b = validate_assumption2(squared, third, 2 * h);
            CHECK(std::abs(b.sum_abs_delta_ratio_over_Omega / a.sum_abs_delta_ratio_over_Omega - 1)
                  < plateau_tolerance);
            CHECK(std::abs(b.sum_w2_over_delta_Omega2 / a.sum_w2_over_delta_Omega2 - 1) < plateau_tolerance);
        }

        // omega_m = m increasing against delta_m = 1/m: second sum grows like log m
        std::vector<double> increasing(200000);
        for (std::size_t k = 0; k < increasing.size(); ++k)
        {
            increasing[k] = static_cast<double>(k + 1);
        }
        StepSchedule harmonic = PowerSchedule{0, 1.0};
        WeightSequence linear = ExplicitWeights{increasing};
        auto a = validate_assumption2(linear, harmonic, 50000);
        auto b = validate_assumption2(linear, harmonic, 100000);
        auto c = validate_assumption2(linear, harmonic, 200000);
        CHECK(b.sum_w2_over_delta_Omega2 / a.sum_w2_over_delta_Omega2 - 1 > plateau_tolerance);
        CHECK(c.sum_w2_over_delta_Omega2 - b.sum_w2_over_delta_Omega2
              == doctest::Approx(b.sum_w2_over_delta_Omega2 - a.sum_w2_over_delta_Omega2).epsilon(0.01));
    }

    TEST_CASE("weights")
    {
        StepSchedule s = PowerSchedule{0, 0.5};
        CHECK(weight(SameAsSteps{}, s, 4) == doctest::Approx(0.5));
        CHECK(weight(StepPowerWeights{2}, s, 4) == doctest::Approx(0.25));
        CHECK(weight(ExplicitWeights{{1, 2, 3}}, s, 2) == 2);
        CHECK(label(StepPowerWeights{2}) == "delta^2");
    }

    TEST_CASE("m0 rule")
    {
        double sd = std::sqrt(0.2);
        for (double alpha : {0.1, 0.2, 0.3, 0.33, 0.4, 0.5})
        {
            auto m0 = choose_m0(alpha, sd);
            CHECK(std::pow(1.0 + m0, -alpha) <= sd);
            if (m0 > 0)
            {
                CHECK(std::pow(static_cast<double>(m0), -alpha) > sd);
            }
        }
        CHECK(choose_m0(0.5, sd) == 4);
        CHECK(choose_m0(0.5, 2.0) == 0);
    }

    TEST_CASE("compensated sum")
    {
        CompensatedSum s;
        s.add(1.0);
        for (int i = 0; i < 1000000; ++i)
        {
            s.add(1e-16);
        }
        CHECK(s.value() == doctest::Approx(1.0 + 1e-10).epsilon(1e-15));
    }
}
