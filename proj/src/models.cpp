#include "sgmcmc/models.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

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

void require_finite(const Vector& theta)
{
    if (!theta.allFinite())
    {
        throw DivergenceError("non-finite parameter");
    }
}

void require_dimension(const Model& model, const Vector& theta)
{
    if (theta.size() != dimension(model))
    {
        throw ArgumentError("parameter has dimension " + std::to_string(theta.size())
                            + ", model expects " + std::to_string(dimension(model)));
    }
}

void require_batch(const Model& model, const Minibatch& batch)
{
    std::size_t n = data_size(model);
    if (batch.indices.empty())
    {
        throw ArgumentError("empty minibatch");
    }
    for (auto i : batch.indices)
    {
        if (i >= n)
        {
            throw ArgumentError("minibatch index " + std::to_string(i) + " out of range [0, "
                                + std::to_string(n) + ")");
        }
    }
}

bool is_full_batch(const Model& model, const Minibatch& batch)
{
    return batch.sampled_without_replacement && batch.indices.size() == data_size(model);
}

double gaussian_gradient(const GaussianLocationModel& m, double theta)
{
    double n = static_cast<double>(m.size());
    return -theta / (m.sigma_theta() * m.sigma_theta())
           + (m.data_sum() - n * theta) / (m.sigma_x() * m.sigma_x());
}

// sum_i logit(-y_i <theta, x_i>) y_i x_i over the given rows, scaled
template<class Indices>
void add_logistic_likelihood_gradient(const LogisticRegressionModel& m, const Vector& theta,
                                      const Indices& rows, double scale, Vector& out)
{
    const auto& x = m.covariates();
    const auto& y = m.labels();
    for (auto i : rows)
    {
        double z = x.row(i).dot(theta);
        double w = scale * logistic(-y[i] * z) * y[i];
        out.noalias() += w * x.row(i).transpose();
    }
}

struct AllRows
{
    std::size_t n;
    struct Iter
    {
        std::size_t i;
        std::size_t operator*() const { return i; }
        Iter& operator++()
        {
            ++i;
            return *this;
        }
        bool operator!=(const Iter& o) const { return i != o.i; }
    };
    Iter begin() const { return {0}; }
    Iter end() const { return {n}; }
};

} // namespace

//---------------------------------------------------------------------------//
GaussianPosterior gaussian_posterior_params(const std::vector<double>& data, double sigma_x,
                                            double sigma_theta)
{
    if (data.empty())
    {
        throw ModelError("Gaussian location model needs at least one observation");
    }
    if (!(sigma_x > 0) || !(sigma_theta > 0) || !std::isfinite(sigma_x)
        || !std::isfinite(sigma_theta))
    {
        throw ModelError("sigma_x and sigma_theta must be positive and finite");
    }
    double n = static_cast<double>(data.size());
    double mean = std::accumulate(data.begin(), data.end(), 0.0) / n;
    double shrink = 1.0 + sigma_x * sigma_x / (n * sigma_theta * sigma_theta);
    return {mean / shrink, sigma_x * sigma_x / n / shrink};
}

GaussianLocationModel::GaussianLocationModel(std::vector<double> data, double sigma_x,
                                             double sigma_theta)
    : data_(std::move(data)), sigma_x_(sigma_x), sigma_theta_(sigma_theta)
{
    auto post = gaussian_posterior_params(data_, sigma_x_, sigma_theta_);
    if (!std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); }))
    {
        throw ModelError("non-finite observation");
    }
    data_sum_ = std::accumulate(data_.begin(), data_.end(), 0.0);
    mu_p_ = post.mu_p;
    sigma_p2_ = post.sigma_p2;
}

//---------------------------------------------------------------------------//
LogisticRegressionModel::LogisticRegressionModel(RowMatrix covariates, std::vector<double> labels,
                                                 Matrix prior_covariance)
    : covariates_(std::move(covariates))
    , labels_(std::move(labels))
    , prior_covariance_(std::move(prior_covariance))
{
    auto n = static_cast<std::size_t>(covariates_.rows());
    auto d = covariates_.cols();
    if (n == 0 || d == 0)
    {
        throw ModelError("logistic model needs at least one observation and one covariate");
    }
    if (labels_.size() != n)
    {
        throw ModelError("label count does not match covariate rows");
    }
    for (double y : labels_)
    {
        if (y != 1.0 && y != -1.0)
        {
            throw ModelError("labels must be -1 or +1");
        }
    }
    if (!covariates_.allFinite())
    {
        throw ModelError("non-finite covariate");
    }
    if (prior_covariance_.rows() != d || prior_covariance_.cols() != d)
    {
        throw ModelError("prior covariance must be d x d");
    }
    double scale = std::max(1.0, prior_covariance_.cwiseAbs().maxCoeff());
    if ((prior_covariance_ - prior_covariance_.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
    {
        throw ModelError("prior covariance is not symmetric");
    }
    Eigen::LDLT<Matrix> ldlt(prior_covariance_);
    if (ldlt.info() != Eigen::Success || !(ldlt.vectorD().array() > 0).all())
    {
        throw ModelError("prior covariance is not positive definite");
    }
    prior_precision_ = ldlt.solve(Matrix::Identity(d, d));
    prior_precision_ = 0.5 * (prior_precision_ + prior_precision_.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> eig(prior_precision_, Eigen::EigenvaluesOnly);
    lambda_min_ = eig.eigenvalues().minCoeff();
    covariate_norm_sum_ = covariates_.rowwise().norm().sum();
}

//---------------------------------------------------------------------------//
int dimension(const Model& model)
{
    return std::visit([](const auto& m) { return m.dimension(); }, model);
}

std::size_t data_size(const Model& model)
{
    return std::visit([](const auto& m) { return m.size(); }, model);
}

double logistic(double z)
{
    if (z >= 0)
    {
        return 1.0 / (1.0 + std::exp(-z));
    }
    double e = std::exp(z);
    return e / (1.0 + e);
}

double log_logistic(double z)
{
    if (z >= 0)
    {
        return -std::log1p(std::exp(-z));
    }
    return z - std::log1p(std::exp(z));
}

//---------------------------------------------------------------------------//
MinibatchSampler::MinibatchSampler(std::size_t population, std::size_t batch_size,
                                   bool without_replacement)
    : population_(population), batch_size_(batch_size), without_replacement_(without_replacement)
{
    if (batch_size < 1 || batch_size > population)
    {
        throw ArgumentError("batch size " + std::to_string(batch_size) + " outside [1, "
                            + std::to_string(population) + "]");
    }
    if (population > 0xffffffffu)
    {
        throw ArgumentError("population too large for 32-bit indices");
    }
    if (without_replacement_)
    {
        permutation_.resize(population_);
        std::iota(permutation_.begin(), permutation_.end(), 0u);
    }
}

void MinibatchSampler::draw(RngStream& rng, Minibatch& out)
{
    out.sampled_without_replacement = without_replacement_;
    out.indices.resize(batch_size_);
    auto n = static_cast<std::uint32_t>(population_);
    if (!without_replacement_)
    {
        for (auto& idx : out.indices)
        {
            idx = rng.uniform_index(n);
        }
        return;
    }
    for (std::size_t k = 0; k < batch_size_; ++k)
    {
        auto remaining = static_cast<std::uint32_t>(population_ - k);
        std::size_t j = k + rng.uniform_index(remaining);
        std::swap(permutation_[k], permutation_[j]);
        out.indices[k] = permutation_[k];
    }
}

Minibatch sample_minibatch(RngStream& rng, std::size_t population, std::size_t batch_size,
                           bool without_replacement)
{
    MinibatchSampler sampler(population, batch_size, without_replacement);
    Minibatch batch;
    sampler.draw(rng, batch);
    return batch;
}

//---------------------------------------------------------------------------//
double log_posterior(const Model& model, const Vector& theta)
{
    require_dimension(model, theta);
    require_finite(theta);
    return std::visit(
        Overloaded{
            [&](const GaussianLocationModel& m) {
                double t = theta[0];
                double lp = -0.5 * t * t / (m.sigma_theta() * m.sigma_theta());
                double s2 = m.sigma_x() * m.sigma_x();
                for (double x : m.data())
                {
                    lp -= 0.5 * (x - t) * (x - t) / s2;
                }
                return lp;
            },
            [&](const LogisticRegressionModel& m) {
                double lp = -0.5 * theta.dot(m.prior_precision() * theta);
                const auto& x = m.covariates();
                for (std::size_t i = 0; i < m.size(); ++i)
                {
                    lp += log_logistic(m.labels()[i] * x.row(i).dot(theta));
                }
                return lp;
            }},
        model);
}

Vector log_posterior_gradient(const Model& model, const Vector& theta)
{
    require_dimension(model, theta);
    require_finite(theta);
    return std::visit(Overloaded{[&](const GaussianLocationModel& m) {
                                     Vector g(1);
                                     g[0] = gaussian_gradient(m, theta[0]);
                                     return g;
                                 },
                                 [&](const LogisticRegressionModel& m) {
                                     Vector g = -(m.prior_precision() * theta);
                                     add_logistic_likelihood_gradient(m, theta, AllRows{m.size()},
                                                                      1.0, g);
                                     return g;
                                 }},
                      model);
}

double log_posterior_and_gradient(const Model& model, const Vector& theta, Vector& gradient)
{
    require_dimension(model, theta);
    require_finite(theta);
    return std::visit(
        Overloaded{[&](const GaussianLocationModel& m) {
                       gradient.resize(1);
                       gradient[0] = gaussian_gradient(m, theta[0]);
                       return log_posterior(model, theta);
                   },
                   [&](const LogisticRegressionModel& m) {
                       Vector precision_theta = m.prior_precision() * theta;
                       double lp = -0.5 * theta.dot(precision_theta);
                       gradient = -precision_theta;
                       const auto& x = m.covariates();
                       const auto& y = m.labels();
                       for (std::size_t i = 0; i < m.size(); ++i)
                       {
                           double margin = y[i] * x.row(i).dot(theta);
                           lp += log_logistic(margin);
                           gradient.noalias() += (logistic(-margin) * y[i]) * x.row(i).transpose();
                       }
                       return lp;
                   }},
        model);
}

void stochastic_gradient_into(const Model& model, const Vector& theta, const Minibatch& batch,
                              Vector& out)
{
    if (is_full_batch(model, batch))
    {
        out = log_posterior_gradient(model, theta);
        return;
    }
    double scale = static_cast<double>(data_size(model))
                   / static_cast<double>(batch.indices.size());
    std::visit(Overloaded{[&](const GaussianLocationModel& m) {
                              double t = theta[0];
                              const auto& x = m.data();
                              double batch_sum = 0;
                              for (auto i : batch.indices)
                              {
                                  batch_sum += x[i];
                              }
                              double n = static_cast<double>(batch.indices.size());
                              out.resize(1);
                              out[0] = -t / (m.sigma_theta() * m.sigma_theta())
                                       + scale * (batch_sum - n * t) / (m.sigma_x() * m.sigma_x());
                          },
                          [&](const LogisticRegressionModel& m) {
                              out.noalias() = -(m.prior_precision() * theta);
                              add_logistic_likelihood_gradient(m, theta, batch.indices, scale, out);
                          }},
               model);
}

Vector stochastic_gradient(const Model& model, const Vector& theta, const Minibatch& batch)
{
    require_dimension(model, theta);
    require_finite(theta);
    require_batch(model, batch);
    Vector out(theta.size());
    stochastic_gradient_into(model, theta, batch, out);
    return out;
}

GradientNoiseSample gradient_noise(const Model& model, const Vector& theta, const Minibatch& batch)
{
    Vector estimate = stochastic_gradient(model, theta, batch);
    return {estimate - log_posterior_gradient(model, theta)};
}

//---------------------------------------------------------------------------//
Matrix negative_hessian(const Model& model, const Vector& theta)
{
    require_dimension(model, theta);
    require_finite(theta);
    return std::visit(Overloaded{[&](const GaussianLocationModel& m) -> Matrix {
                                     return Matrix::Constant(1, 1, 1.0 / m.sigma_p2());
                                 },
                                 [&](const LogisticRegressionModel& m) {
                                     Matrix h = m.prior_precision();
                                     const auto& x = m.covariates();
                                     for (std::size_t i = 0; i < m.size(); ++i)
                                     {
                                         double s = logistic(x.row(i).dot(theta));
                                         h.noalias() += s * (1 - s) * x.row(i).transpose()
                                                        * x.row(i);
                                     }
                                     return h;
                                 }},
                      model);
}

Vector map_estimate(const Model& model, double tolerance, int max_iters)
{
    if (const auto* g = std::get_if<GaussianLocationModel>(&model))
    {
        return Vector::Constant(1, g->mu_p());
    }
    Vector theta = Vector::Zero(dimension(model));
    Vector grad;
    double lp = log_posterior_and_gradient(model, theta, grad);
    for (int iter = 0; iter < max_iters; ++iter)
    {
        if (grad.norm() <= tolerance)
        {
            return theta;
        }
        Vector step = negative_hessian(model, theta).ldlt().solve(grad);
        double t = 1.0;
        Vector candidate;
        Vector candidate_grad;
        double candidate_lp = 0;
        for (int halving = 0; halving < 60; ++halving, t *= 0.5)
        {
            candidate = theta + t * step;
            candidate_lp = log_posterior_and_gradient(model, candidate, candidate_grad);
            // Accept any non-decreasing step; near the optimum lp is flat to rounding.
            if (candidate_lp >= lp - 1e-12 * std::abs(lp))
            {
                break;
            }
        }
        theta = candidate;
        grad = candidate_grad;
        lp = candidate_lp;
    }
    if (grad.norm() <= tolerance)
    {
        return theta;
    }
    throw ConvergenceError("MAP Newton iteration did not converge in "
                               + std::to_string(max_iters) + " iterations",
                           grad.norm());
}

//---------------------------------------------------------------------------//
LyapunovValue lyapunov(const Model& model, const Vector& theta)
{
    require_dimension(model, theta);
    require_finite(theta);
    return std::visit(Overloaded{[&](const GaussianLocationModel& m) {
                                     double r = theta[0] - m.mu_p();
                                     return LyapunovValue{1.0 + r * r / (2 * m.sigma_p2()),
                                                          Vector::Constant(1, r / m.sigma_p2())};
                                 },
                                 [&](const LogisticRegressionModel&) {
                                     return LyapunovValue{1.0 + theta.squaredNorm(), 2.0 * theta};
                                 }},
                      model);
}

double analytic_drift_alpha(const Model& model)
{
    return std::visit(
        Overloaded{[](const GaussianLocationModel& m) { return 1.0 / m.sigma_p2(); },
                   [](const LogisticRegressionModel& m) { return m.lambda_min() / 4.0; }},
        model);
}

namespace
{
double analytic_drift_beta(const Model& model)
{
    return std::visit(Overloaded{[](const GaussianLocationModel& m) { return 1.0 / m.sigma_p2(); },
                                 [](const LogisticRegressionModel& m) {
                                     // lhs <= -lambda r^2 + S r, so lhs + lambda/4 V is at most
                                     // max_r(-3/4 lambda r^2 + S r) + lambda/4.
                                     double lam = m.lambda_min();
                                     double s = m.covariate_norm_sum();
                                     return s * s / (3 * lam) + lam / 4;
                                 }},
                      model);
}
} // namespace

DriftReport verify_drift_condition(const Model& model, const std::vector<Vector>& grid,
                                   double alpha_fraction)
{
    if (grid.empty())
    {
        throw ArgumentError("drift verification grid is empty");
    }
    DriftReport report;
    report.alpha_hat = alpha_fraction * analytic_drift_alpha(model);
    report.beta_bound = analytic_drift_beta(model);
    report.beta_hat = -std::numeric_limits<double>::infinity();
    report.grid_size = grid.size();
    for (const auto& theta : grid)
    {
        auto v = lyapunov(model, theta);
        double lhs = v.gradient.dot(0.5 * log_posterior_gradient(model, theta));
        double b = lhs + report.alpha_hat * v.value;
        if (b > report.beta_hat)
        {
            report.beta_hat = b;
            report.worst_point = theta;
        }
    }
    double slack = 1e-9 * std::max(1.0, std::abs(report.beta_bound));
    report.feasible = report.alpha_hat > 0 && std::isfinite(report.beta_hat)
                      && report.beta_hat <= report.beta_bound + slack;
    return report;
}

std::vector<Vector> default_drift_grid(const Model& model, int points_per_axis,
                                       double width_in_std)
{
    if (points_per_axis < 1)
    {
        throw ArgumentError("points_per_axis must be positive");
    }
    Vector mode = map_estimate(model);
    int d = dimension(model);
    Vector std_dev = negative_hessian(model, mode).inverse().diagonal().cwiseSqrt();
    auto coordinate = [&](int axis, int k) {
        if (points_per_axis == 1)
        {
            return mode[axis];
        }
        double u = -1.0 + 2.0 * k / (points_per_axis - 1);
        return mode[axis] + u * width_in_std * std_dev[axis];
    };

    std::vector<Vector> grid;
    double full_size = std::pow(static_cast<double>(points_per_axis), d);
    if (full_size <= 1e5)
    {
        std::vector<int> counter(d, 0);
        grid.reserve(static_cast<std::size_t>(full_size));
        while (true)
        {
            Vector p(d);
            for (int a = 0; a < d; ++a)
            {
                p[a] = coordinate(a, counter[a]);
            }
            grid.push_back(p);
            int a = 0;
            while (a < d && ++counter[a] == points_per_axis)
            {
                counter[a++] = 0;
            }
            if (a == d)
            {
                break;
            }
        }
        return grid;
    }
    // Tensor grid too large: axis lines through the mode plus the main diagonals.
    for (int a = 0; a < d; ++a)
    {
        for (int k = 0; k < points_per_axis; ++k)
        {
            Vector p = mode;
            p[a] = coordinate(a, k);
            grid.push_back(p);
        }
    }
    for (int corner = 0; corner < (1 << (d - 1)); ++corner)
    {
        for (int k = 0; k < points_per_axis; ++k)
        {
            Vector p(d);
            for (int a = 0; a < d; ++a)
            {
                int kk = ((corner >> a) & 1) ? points_per_axis - 1 - k : k;
                p[a] = coordinate(a, kk);
            }
            grid.push_back(p);
        }
    }
    return grid;
}

//---------------------------------------------------------------------------//
SimulatedDataset simulate_dataset(RngStream& rng, const GaussianDatasetParams& params)
{
    if (params.n_data < 1 || !(params.sigma_x > 0) || !(params.sigma_theta > 0)
        || !std::isfinite(params.theta_true))
    {
        throw ArgumentError("invalid Gaussian dataset parameters");
    }
    std::vector<double> data(params.n_data);
    for (auto& x : data)
    {
        x = params.theta_true + params.sigma_x * rng.normal();
    }
    return {GaussianLocationModel(std::move(data), params.sigma_x, params.sigma_theta),
            Vector::Constant(1, params.theta_true)};
}

SimulatedDataset simulate_dataset(RngStream& rng, const LogisticDatasetParams& params)
{
    if (params.n_data < 1 || params.dim < 1)
    {
        throw ArgumentError("invalid logistic dataset parameters");
    }
    int d = params.dim;
    auto n = static_cast<Eigen::Index>(params.n_data);
    Vector theta0(d);
    for (int a = 0; a < d; ++a)
    {
        theta0[a] = rng.normal();
    }
    RowMatrix x(n, d);
    std::vector<double> y(params.n_data);
    for (Eigen::Index i = 0; i < n; ++i)
    {
        for (int a = 0; a + 1 < d; ++a)
        {
            x(i, a) = rng.normal();
        }
        x(i, d - 1) = 1.0;
        double p = logistic(x.row(i).dot(theta0));
        y[static_cast<std::size_t>(i)] = rng.uniform() < p ? 1.0 : -1.0;
    }
    return {LogisticRegressionModel(std::move(x), std::move(y), Matrix::Identity(d, d)), theta0};
}

} // namespace sgmcmc
