#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "sgmcmc/models.hpp"
#include "sgmcmc/schedules.hpp"

namespace sgmcmc
{

//---------------------------------------------------------------------------//
/*!
 * Streaming omega-weighted average: sum omega_k phi_k / sum omega_k.
 */
class WeightedAverage
{
  public:
    void update(double omega, double value);

    //! NaN until a positive weight has been added.
    double value() const;
    double omega_total() const { return omega_total_.value(); }
    double weighted_sum() const { return weighted_sum_.value(); }
    std::int64_t count() const { return count_; }

  private:
    CompensatedSum omega_total_;
    CompensatedSum weighted_sum_;
    std::int64_t count_ = 0;
};

//---------------------------------------------------------------------------//
/*!
 * A test function phi with optional closed-form derivatives.
 *
 * Derivatives are those of a one-dimensional function; for d > 1 only the
 * finite-difference gradient and Laplacian are available, and only when
 * allow_finite_differences is set.
 */
struct TestFunction
{
    using Scalar = std::function<double(double)>;

    std::string label;
    std::function<double(const Vector&)> value;
    //! derivatives[k] is the (k+1)-th derivative.
    std::array<Scalar, 4> derivatives{};
    bool allow_finite_differences = false;

    double operator()(const Vector& theta) const { return value(theta); }
    bool has_closed_form(int order) const;
    //! Closed-form derivative of the given order (1..4); throws CapabilityError if absent.
    double derivative(int order, double x) const;
};

TestFunction constant_test_function(double c = 1.0);
//! theta[component]
TestFunction coordinate_test_function(int component = 0);
//! theta[component]^2
TestFunction square_test_function(int component = 0);
//! psi(theta) = sin(theta - shift), one-dimensional.
TestFunction shifted_sine(double shift);
//! The psi used in the Gaussian experiments: sin(theta - mu_p - 0.5 sigma_p).
TestFunction gaussian_experiment_psi(const GaussianLocationModel& model);

//! phi = A psi, evaluated in closed form on the Gaussian model.
TestFunction generator_test_function(const Model& model, const TestFunction& psi);

//! A psi(theta) = 1/2 <grad log pi, grad psi> + 1/2 Laplacian psi.
double apply_generator(const Model& model, const TestFunction& psi, const Vector& theta);

//---------------------------------------------------------------------------//
// Quadrature oracles
//---------------------------------------------------------------------------//
struct GaussHermiteRule
{
    std::vector<double> nodes;    //!< standard-normal abscissae
    std::vector<double> weights;  //!< sum to one
};

GaussHermiteRule gauss_hermite_rule(int order);

inline constexpr int default_quadrature_order = 64;

//! E f(X) for X ~ N(mu, sigma^2).
double gauss_hermite_expectation(const std::function<double(double)>& f, double mu, double sigma,
                                 int order = default_quadrature_order);

//! sigma^2(phi) = pi((psi')^2) for phi = A psi on the Gaussian posterior.
double asymptotic_variance(const Model& model, const TestFunction& psi,
                           int order = default_quadrature_order);

struct BiasOracleOptions
{
    bool without_replacement = true;
    //! Enumerate batches exhaustively when C(N, n) is at most this.
    double enumeration_limit = 1e6;
    std::int64_t mc_batches = 100000;
    std::uint64_t seed = 0x5eed;
    int order = default_quadrature_order;
};

struct BiasOracle
{
    double value = 0;
    double std_error = 0;  //!< Monte Carlo error from the batch average, 0 when enumerated
    bool enumerated = false;
    std::int64_t batches = 0;
};

/*!
 * Asymptotic bias of pi_m(A psi):
 *   mu = -B_inf E[ 1/8 psi'' ghat^2 + 1/4 psi''' grad log pi + 1/8 psi'''' ]
 * with Theta ~ pi by quadrature and the minibatch by enumeration or Monte Carlo.
 * Pass B_inf = 1 for the limit of the error rescaled by sum(delta^2)/T_m in the
 * bias-dominated regime.
 */
BiasOracle asymptotic_bias(const Model& model, const TestFunction& psi, std::size_t batch_size,
                           double B_infinity, const BiasOracleOptions& options = {});

//! Coefficient of psi'''' in the bias: E[eta^4] / 4! for eta ~ N(0, 1).
inline constexpr double fourth_derivative_bias_coefficient = 3.0 / 24.0;

//---------------------------------------------------------------------------//
// Replica statistics
//---------------------------------------------------------------------------//
struct MseEstimate
{
    double mse = 0;
    double std_error = 0;
};

MseEstimate mse(const std::vector<double>& estimates, double truth);

struct RateFit
{
    double slope = 0;
    double intercept = 0;
    double m_lo = 0;
    double m_hi = 0;
    double std_error = 0;
    std::size_t points = 0;
};

/*!
 * OLS of log(value) on log(m) over the last window_fraction of the log-m range.
 */
RateFit fit_log_log_slope(const std::vector<std::pair<double, double>>& points,
                          double window_fraction);

} // namespace sgmcmc
