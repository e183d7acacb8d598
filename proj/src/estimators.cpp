#include "sgmcmc/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "sgmcmc/errors.hpp"

namespace sgmcmc
{
namespace
{

const GaussianLocationModel& require_gaussian(const Model& model, const char* operation)
{
    const auto* g = std::get_if<GaussianLocationModel>(&model);
    if (!g)
    {
        throw CapabilityError(std::string(operation)
                              + " is only available for the one-dimensional Gaussian posterior");
    }
    return *g;
}

double binomial_coefficient(std::size_t n, std::size_t k)
{
    k = std::min(k, n - k);
    double result = 1;
    for (std::size_t i = 1; i <= k; ++i)
    {
        result = result * static_cast<double>(n - k + i) / static_cast<double>(i);
    }
    return result;
}

// Advance to the next k-combination of [0, n) in lexicographic order.
bool next_combination(std::vector<std::uint32_t>& c, std::uint32_t n)
{
    auto k = c.size();
    for (std::size_t i = k; i-- > 0;)
    {
        if (c[i] < n - k + i)
        {
            ++c[i];
            for (std::size_t j = i + 1; j < k; ++j)
            {
                c[j] = c[j - 1] + 1;
            }
            return true;
        }
    }
    return false;
}

double fd_step(double x, double power)
{
    return std::pow(std::numeric_limits<double>::epsilon(), power) * std::max(1.0, std::abs(x));
}

} // namespace

//---------------------------------------------------------------------------//
void WeightedAverage::update(double omega, double value)
{
    if (!std::isfinite(omega) || !std::isfinite(value))
    {
        throw ArgumentError("weighted average update needs finite inputs");
    }
    if (omega < 0)
    {
        throw ArgumentError("negative weight");
    }
    if (omega == 0)
    {
        return;
    }
    omega_total_.add(omega);
    weighted_sum_.add(omega * value);
    ++count_;
}

double WeightedAverage::value() const
{
    double total = omega_total_.value();
    if (!(total > 0))
    {
        return std::numeric_limits<double>::quiet_NaN();
    }
    return weighted_sum_.value() / total;
}

//---------------------------------------------------------------------------//
bool TestFunction::has_closed_form(int order) const
{
    return order >= 1 && order <= 4 && static_cast<bool>(derivatives[order - 1]);
}

double TestFunction::derivative(int order, double x) const
{
    if (!has_closed_form(order))
    {
        throw CapabilityError("test function '" + label + "' has no closed-form derivative of order "
                              + std::to_string(order));
    }
    return derivatives[order - 1](x);
}

TestFunction constant_test_function(double c)
{
    TestFunction f;
    f.label = "one";
    if (c != 1.0)
    {
        f.label = "const(" + std::to_string(c) + ")";
    }
    f.value = [c](const Vector&) { return c; };
    for (auto& d : f.derivatives)
    {
        d = [](double) { return 0.0; };
    }
    return f;
}

TestFunction coordinate_test_function(int component)
{
    TestFunction f;
    f.label = "theta" + std::to_string(component + 1);
    f.value = [component](const Vector& t) { return t[component]; };
    f.derivatives = {[](double) { return 1.0; }, [](double) { return 0.0; },
                     [](double) { return 0.0; }, [](double) { return 0.0; }};
    return f;
}

TestFunction square_test_function(int component)
{
    TestFunction f;
    f.label = "theta" + std::to_string(component + 1) + "^2";
    f.value = [component](const Vector& t) { return t[component] * t[component]; };
    f.derivatives = {[](double x) { return 2 * x; }, [](double) { return 2.0; },
                     [](double) { return 0.0; }, [](double) { return 0.0; }};
    return f;
}

TestFunction shifted_sine(double shift)
{
    TestFunction f;
    f.label = "sin(theta-" + std::to_string(shift) + ")";
    f.value = [shift](const Vector& t) { return std::sin(t[0] - shift); };
    f.derivatives = {[shift](double x) { return std::cos(x - shift); },
                     [shift](double x) { return -std::sin(x - shift); },
                     [shift](double x) { return -std::cos(x - shift); },
                     [shift](double x) { return std::sin(x - shift); }};
    return f;
}

TestFunction gaussian_experiment_psi(const GaussianLocationModel& model)
{
    auto f = shifted_sine(model.mu_p() + 0.5 * std::sqrt(model.sigma_p2()));
    f.label = "sin(theta-mu_p-0.5sigma_p)";
    return f;
}

double apply_generator(const Model& model, const TestFunction& psi, const Vector& theta)
{
    Vector grad = log_posterior_gradient(model, theta);
    if (theta.size() == 1 && (psi.has_closed_form(2) || psi.allow_finite_differences)
        && (psi.has_closed_form(1) || psi.allow_finite_differences))
    {
        double x = theta[0];
        auto eval = [&](double y) { return psi(Vector::Constant(1, y)); };
        double d1 = 0;
        if (psi.has_closed_form(1))
        {
            d1 = psi.derivative(1, x);
        }
        else
        {
            double h = fd_step(x, 1.0 / 3.0);
            d1 = (eval(x + h) - eval(x - h)) / (2 * h);
        }
        double d2 = 0;
        if (psi.has_closed_form(2))
        {
            d2 = psi.derivative(2, x);
        }
        else
        {
            double h = fd_step(x, 0.25);
            d2 = (eval(x + h) - 2 * eval(x) + eval(x - h)) / (h * h);
        }
        return 0.5 * grad[0] * d1 + 0.5 * d2;
    }
    if (!psi.allow_finite_differences)
    {
        throw CapabilityError("generator needs first and second derivatives of '" + psi.label + "'");
    }
    double center = psi(theta);
    double drift = 0;
    double laplacian = 0;
    Vector shifted = theta;
    for (Eigen::Index a = 0; a < theta.size(); ++a)
    {
        double h1 = fd_step(theta[a], 1.0 / 3.0);
        shifted[a] = theta[a] + h1;
        double up = psi(shifted);
        shifted[a] = theta[a] - h1;
        double down = psi(shifted);
        drift += grad[a] * (up - down) / (2 * h1);

        double h2 = fd_step(theta[a], 0.25);
        shifted[a] = theta[a] + h2;
        up = psi(shifted);
        shifted[a] = theta[a] - h2;
        down = psi(shifted);
        laplacian += (up - 2 * center + down) / (h2 * h2);
        shifted[a] = theta[a];
    }
    return 0.5 * drift + 0.5 * laplacian;
}

TestFunction generator_test_function(const Model& model, const TestFunction& psi)
{
    TestFunction phi;
    phi.label = "A[" + psi.label + "]";
    const auto* gauss = std::get_if<GaussianLocationModel>(&model);
    if (gauss && psi.has_closed_form(1) && psi.has_closed_form(2))
    {
        double mu = gauss->mu_p();
        double inv_var = 1.0 / gauss->sigma_p2();
        auto d1 = psi.derivatives[0];
        auto d2 = psi.derivatives[1];
        phi.value = [mu, inv_var, d1, d2](const Vector& t) {
            double x = t[0];
            return -0.5 * (x - mu) * inv_var * d1(x) + 0.5 * d2(x);
        };
        return phi;
    }
    if (!psi.allow_finite_differences && !(psi.has_closed_form(1) && psi.has_closed_form(2)))
    {
        throw CapabilityError("generator needs first and second derivatives of '" + psi.label + "'");
    }
    phi.value = [model, psi](const Vector& t) { return apply_generator(model, psi, t); };
    return phi;
}

//---------------------------------------------------------------------------//
GaussHermiteRule gauss_hermite_rule(int order)
{
    if (order < 1)
    {
        throw ArgumentError("quadrature order must be >= 1");
    }
    // Newton iteration on orthonormal Hermite polynomials for the physicists'
    // rule, then rescaled to the standard normal density.
    const double pim4 = std::pow(std::numbers::pi, -0.25);
    auto n = static_cast<std::size_t>(order);
    std::vector<double> x(n);
    std::vector<double> w(n);
    double z = 0;
    for (std::size_t i = 0; i < (n + 1) / 2; ++i)
    {
        double dn = static_cast<double>(n);
        if (i == 0)
        {
            z = std::sqrt(2 * dn + 1) - 1.85575 * std::pow(2 * dn + 1, -0.16667);
        }
        else if (i == 1)
        {
            z -= 1.14 * std::pow(dn, 0.426) / z;
        }
        else if (i == 2)
        {
            z = 1.86 * z - 0.86 * x[0];
        }
        else if (i == 3)
        {
            z = 1.91 * z - 0.91 * x[1];
        }
        else
        {
            z = 2 * z - x[i - 2];
        }
        double pp = 0;
        for (int iter = 0; iter < 100; ++iter)
        {
            double p1 = pim4;
            double p2 = 0;
            for (std::size_t j = 0; j < n; ++j)
            {
                double p3 = p2;
                p2 = p1;
                double dj = static_cast<double>(j);
                p1 = z * std::sqrt(2 / (dj + 1)) * p2 - std::sqrt(dj / (dj + 1)) * p3;
            }
            pp = std::sqrt(2 * dn) * p2;
            double previous = z;
            z = previous - p1 / pp;
            if (std::abs(z - previous) <= 1e-15 * std::max(1.0, std::abs(z)))
            {
                break;
            }
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    GaussHermiteRule rule;
    rule.nodes.resize(n);
    rule.weights.resize(n);
    double total = 0;
    for (std::size_t i = 0; i < n; ++i)
    {
        rule.nodes[i] = std::numbers::sqrt2 * x[n - 1 - i];
        rule.weights[i] = w[n - 1 - i] / std::sqrt(std::numbers::pi);
        total += rule.weights[i];
    }
    for (auto& wi : rule.weights)
    {
        wi /= total;
    }
    return rule;
}

double gauss_hermite_expectation(const std::function<double(double)>& f, double mu, double sigma,
                                 int order)
{
    auto rule = gauss_hermite_rule(order);
    double sum = 0;
    for (std::size_t i = 0; i < rule.nodes.size(); ++i)
    {
        sum += rule.weights[i] * f(mu + sigma * rule.nodes[i]);
    }
    return sum;
}

double asymptotic_variance(const Model& model, const TestFunction& psi, int order)
{
    const auto& g = require_gaussian(model, "asymptotic_variance");
    if (!psi.has_closed_form(1))
    {
        throw CapabilityError("Poisson solution '" + psi.label + "' has no closed-form gradient");
    }
    return gauss_hermite_expectation(
        [&](double x) {
            double d = psi.derivative(1, x);
            return d * d;
        },
        g.mu_p(), std::sqrt(g.sigma_p2()), order);
}

BiasOracle asymptotic_bias(const Model& model, const TestFunction& psi, std::size_t batch_size,
                           double B_infinity, const BiasOracleOptions& options)
{
    const auto& g = require_gaussian(model, "asymptotic_bias");
    for (int order = 2; order <= 4; ++order)
    {
        if (!psi.has_closed_form(order))
        {
            throw CapabilityError("asymptotic bias needs closed-form derivatives up to order 4 of '"
                                  + psi.label + "'");
        }
    }
    std::size_t n_data = g.size();
    if (batch_size < 1 || batch_size > n_data)
    {
        throw ArgumentError("batch size outside [1, N]");
    }

    auto rule = gauss_hermite_rule(options.order);
    double sigma = std::sqrt(g.sigma_p2());
    std::size_t q = rule.nodes.size();
    std::vector<Vector> thetas(q);
    std::vector<double> second(q);
    double deterministic = 0;
    for (std::size_t i = 0; i < q; ++i)
    {
        double x = g.mu_p() + sigma * rule.nodes[i];
        thetas[i] = Vector::Constant(1, x);
        second[i] = psi.derivative(2, x);
        double drift = log_posterior_gradient(model, thetas[i])[0];
        deterministic += rule.weights[i]
                         * (0.25 * psi.derivative(3, x) * drift
                            + fourth_derivative_bias_coefficient * psi.derivative(4, x));
    }

    // E_Theta[1/8 psi''(Theta) ghat(Theta, U)^2] for one batch U
    Vector ghat(1);
    auto batch_term = [&](const Minibatch& batch) {
        double s = 0;
        for (std::size_t i = 0; i < q; ++i)
        {
            stochastic_gradient_into(model, thetas[i], batch, ghat);
            s += rule.weights[i] * 0.125 * second[i] * ghat[0] * ghat[0];
        }
        return s;
    };

    BiasOracle result;
    double count = binomial_coefficient(n_data, batch_size);
    double stochastic_mean = 0;
    if (options.without_replacement && count <= options.enumeration_limit)
    {
        Minibatch batch;
        batch.sampled_without_replacement = true;
        batch.indices.resize(batch_size);
        std::iota(batch.indices.begin(), batch.indices.end(), 0u);
        CompensatedSum total;
        std::int64_t visited = 0;
        do
        {
            total.add(batch_term(batch));
            ++visited;
        } while (next_combination(batch.indices, static_cast<std::uint32_t>(n_data)));
        stochastic_mean = total.value() / static_cast<double>(visited);
        result.enumerated = true;
        result.batches = visited;
    }
    else
    {
        auto rng = make_stream(options.seed, StreamPurpose::oracle);
        MinibatchSampler sampler(n_data, batch_size, options.without_replacement);
        Minibatch batch;
        double mean = 0;
        double m2 = 0;
        for (std::int64_t b = 1; b <= options.mc_batches; ++b)
        {
            sampler.draw(rng, batch);
            double v = batch_term(batch);
            double delta = v - mean;
            mean += delta / static_cast<double>(b);
            m2 += delta * (v - mean);
        }
        stochastic_mean = mean;
        auto nb = static_cast<double>(options.mc_batches);
        result.std_error = std::abs(B_infinity) * std::sqrt(m2 / (nb - 1) / nb);
        result.batches = options.mc_batches;
    }
    result.value = -B_infinity * (stochastic_mean + deterministic);
    return result;
}

//---------------------------------------------------------------------------//
MseEstimate mse(const std::vector<double>& estimates, double truth)
{
    if (estimates.size() < 2)
    {
        throw ArgumentError("MSE needs at least two replicas");
    }
    auto r = static_cast<double>(estimates.size());
    double mean = 0;
    for (double e : estimates)
    {
        mean += (e - truth) * (e - truth);
    }
    mean /= r;
    double var = 0;
    for (double e : estimates)
    {
        double s = (e - truth) * (e - truth) - mean;
        var += s * s;
    }
    var /= (r - 1);
    return {mean, std::sqrt(var / r)};
}

RateFit fit_log_log_slope(const std::vector<std::pair<double, double>>& points,
                          double window_fraction)
{
    if (!(window_fraction > 0 && window_fraction <= 1))
    {
        throw ArgumentError("window fraction must lie in (0, 1]");
    }
    if (points.empty())
    {
        throw ArgumentError("no points to fit");
    }
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (const auto& [m, v] : points)
    {
        if (!(m > 0) || !(v > 0))
        {
            throw ArgumentError("log-log fit needs positive m and values");
        }
        lo = std::min(lo, std::log(m));
        hi = std::max(hi, std::log(m));
    }
    double cut = hi - window_fraction * (hi - lo);
    std::vector<double> xs;
    std::vector<double> ys;
    for (const auto& [m, v] : points)
    {
        double lm = std::log(m);
        if (lm >= cut - 1e-12)
        {
            xs.push_back(lm);
            ys.push_back(std::log(v));
        }
    }
    if (xs.size() < 3)
    {
        throw ArgumentError("fewer than three points in the fit window");
    }
    auto k = static_cast<double>(xs.size());
    double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / k;
    double my = std::accumulate(ys.begin(), ys.end(), 0.0) / k;
    double sxx = 0;
    double sxy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i)
    {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        sxy += (xs[i] - mx) * (ys[i] - my);
    }
    if (!(sxx > 0))
    {
        throw ArgumentError("fit window has a single abscissa");
    }
    RateFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    double rss = 0;
    for (std::size_t i = 0; i < xs.size(); ++i)
    {
        double r = ys[i] - fit.intercept - fit.slope * xs[i];
        rss += r * r;
    }
    fit.std_error = std::sqrt(rss / (k - 2) / sxx);
    fit.m_lo = std::exp(*std::min_element(xs.begin(), xs.end()));
    fit.m_hi = std::exp(*std::max_element(xs.begin(), xs.end()));
    fit.points = xs.size();
    return fit;
}

} // namespace sgmcmc
