#pragma once

#include <cstddef>
#include <cstdint>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "sgmcmc/random.hpp"

namespace sgmcmc
{

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

//---------------------------------------------------------------------------//
/*!
 * Conjugate location model: x_i | theta ~ N(theta, sigma_x^2) with prior
 * theta ~ N(0, sigma_theta^2). The posterior is N(mu_p, sigma_p2).
 */
class GaussianLocationModel
{
  public:
    GaussianLocationModel(std::vector<double> data, double sigma_x, double sigma_theta);

    const std::vector<double>& data() const { return data_; }
    double sigma_x() const { return sigma_x_; }
    double sigma_theta() const { return sigma_theta_; }
    double mu_p() const { return mu_p_; }
    double sigma_p2() const { return sigma_p2_; }
    double data_sum() const { return data_sum_; }

    std::size_t size() const { return data_.size(); }
    int dimension() const { return 1; }

  private:
    std::vector<double> data_;
    double sigma_x_;
    double sigma_theta_;
    double data_sum_;
    double mu_p_;
    double sigma_p2_;
};

struct GaussianPosterior
{
    double mu_p;
    double sigma_p2;
};

GaussianPosterior gaussian_posterior_params(const std::vector<double>& data, double sigma_x,
                                            double sigma_theta);

//---------------------------------------------------------------------------//
/*!
 * Bayesian logistic regression, P(y_i = 1 | x_i, theta) = logit(<theta, x_i>)
 * with labels in {-1, +1} and a centred Gaussian prior N(0, C).
 */
class LogisticRegressionModel
{
  public:
    LogisticRegressionModel(RowMatrix covariates, std::vector<double> labels,
                            Matrix prior_covariance);

    const RowMatrix& covariates() const { return covariates_; }
    const std::vector<double>& labels() const { return labels_; }
    const Matrix& prior_covariance() const { return prior_covariance_; }
    const Matrix& prior_precision() const { return prior_precision_; }
    //! Smallest eigenvalue of the prior precision C^{-1}.
    double lambda_min() const { return lambda_min_; }
    //! Sum of covariate norms, the constant in the drift bound.
    double covariate_norm_sum() const { return covariate_norm_sum_; }

    std::size_t size() const { return labels_.size(); }
    int dimension() const { return static_cast<int>(covariates_.cols()); }

  private:
    RowMatrix covariates_;
    std::vector<double> labels_;
    Matrix prior_covariance_;
    Matrix prior_precision_;
    double lambda_min_;
    double covariate_norm_sum_;
};

using Model = std::variant<GaussianLocationModel, LogisticRegressionModel>;

int dimension(const Model& model);
std::size_t data_size(const Model& model);

// Numerically stable sigmoid and log-sigmoid.
double logistic(double z);
double log_logistic(double z);

//---------------------------------------------------------------------------//
// Minibatches
//---------------------------------------------------------------------------//
struct Minibatch
{
    std::vector<std::uint32_t> indices;
    bool sampled_without_replacement = true;
};

/*!
 * Reusable minibatch drawer.
 *
 * Without replacement uses a partial Fisher-Yates shuffle over a persistent
 * permutation; each draw is a uniform n-subset regardless of the permutation
 * left behind by earlier draws.
 */
class MinibatchSampler
{
  public:
    MinibatchSampler(std::size_t population, std::size_t batch_size, bool without_replacement = true);

    void draw(RngStream& rng, Minibatch& out);
    std::size_t population() const { return population_; }
    std::size_t batch_size() const { return batch_size_; }
    bool is_full_batch() const { return without_replacement_ && batch_size_ == population_; }

  private:
    std::size_t population_;
    std::size_t batch_size_;
    bool without_replacement_;
    std::vector<std::uint32_t> permutation_;
};

Minibatch sample_minibatch(RngStream& rng, std::size_t population, std::size_t batch_size,
                           bool without_replacement = true);

//---------------------------------------------------------------------------//
// Densities and gradients
//---------------------------------------------------------------------------//
//! Unnormalised log posterior: log prior + sum of log likelihoods.
double log_posterior(const Model& model, const Vector& theta);

Vector log_posterior_gradient(const Model& model, const Vector& theta);

//! Log posterior and its gradient in a single pass over the data.
double log_posterior_and_gradient(const Model& model, const Vector& theta, Vector& gradient);

Vector stochastic_gradient(const Model& model, const Vector& theta, const Minibatch& batch);

//! In-place variant used by the samplers; `out` must have the model dimension.
void stochastic_gradient_into(const Model& model, const Vector& theta, const Minibatch& batch,
                              Vector& out);

//! H(theta, U): stochastic minus exact gradient.
struct GradientNoiseSample
{
    Vector value;
};

GradientNoiseSample gradient_noise(const Model& model, const Vector& theta, const Minibatch& batch);

//! Posterior mode. Closed form for the Gaussian model, damped Newton otherwise.
Vector map_estimate(const Model& model, double tolerance = 1e-8, int max_iters = 100);

//! Negative Hessian of the log posterior (Fisher-type curvature at theta).
Matrix negative_hessian(const Model& model, const Vector& theta);

//---------------------------------------------------------------------------//
// Stability diagnostics
//---------------------------------------------------------------------------//
struct LyapunovValue
{
    double value;
    Vector gradient;
};

/*!
 * Model-specific Lyapunov function.
 * Gaussian: V = 1 + (theta - mu_p)^2 / (2 sigma_p2).
 * Logistic: V = 1 + |theta|^2.
 */
LyapunovValue lyapunov(const Model& model, const Vector& theta);

struct DriftReport
{
    double alpha_hat = 0;
    double beta_hat = 0;        //!< max over the grid of lhs + alpha_hat V
    double beta_bound = 0;      //!< analytic constant the empirical beta is checked against
    Vector worst_point;         //!< grid point attaining beta_hat
    std::size_t grid_size = 0;
    bool feasible = false;
};

//! Analytic drift rate: 1/sigma_p2 (Gaussian) or lambda_min/4 (logistic).
double analytic_drift_alpha(const Model& model);

DriftReport verify_drift_condition(const Model& model, const std::vector<Vector>& grid,
                                   double alpha_fraction = 1.0);

//! Grid over mode +/- width posterior standard deviations.
std::vector<Vector> default_drift_grid(const Model& model, int points_per_axis = 201,
                                       double width_in_std = 10.0);

//---------------------------------------------------------------------------//
// Simulated datasets
//---------------------------------------------------------------------------//
struct GaussianDatasetParams
{
    std::size_t n_data = 100;
    double sigma_x = 5.0;
    double sigma_theta = 1.0;
    double theta_true = 0.0;
};

struct LogisticDatasetParams
{
    std::size_t n_data = 1000;
    int dim = 3;  //!< includes the intercept column
};

struct SimulatedDataset
{
    Model model;
    Vector generating_theta;
};

SimulatedDataset simulate_dataset(RngStream& rng, const GaussianDatasetParams& params);
SimulatedDataset simulate_dataset(RngStream& rng, const LogisticDatasetParams& params);

} // namespace sgmcmc
