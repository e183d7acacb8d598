#include <doctest.h>

#include <cmath>
#include <limits>
#include <set>

#include "sgmcmc/errors.hpp"
#include "sgmcmc/models.hpp"
#include "support.hpp"

using namespace sgmcmc;

namespace
{

Model small_logistic(std::size_t n_data, int dim, std::uint64_t seed)
{
    RngStream rng(seed, 99);
    RowMatrix x(static_cast<Eigen::Index>(n_data), dim);
    std::vector<double> y(n_data);
    for (std::size_t i = 0; i < n_data; ++i)
    {
        for (int j = 0; j < dim; ++j)
        {
            x(static_cast<Eigen::Index>(i), j) = rng.normal();
        }
        y[i] = rng.uniform() < 0.5 ? -1.0 : 1.0;
    }
    Matrix c = Matrix::Identity(dim, dim);
    c(0, 0) = 2.0;
    return LogisticRegressionModel(x, y, c);
}

Model paper_gaussian(std::uint64_t seed = 1)
{
    auto rng = make_stream(seed, StreamPurpose::dataset);
    return simulate_dataset(rng, GaussianDatasetParams{}).model;
}

Model paper_logistic(std::uint64_t seed = 1)
{
    auto rng = make_stream(seed, StreamPurpose::dataset);
    return simulate_dataset(rng, LogisticDatasetParams{}).model;
}

} // namespace

TEST_SUITE("models")
{
    TEST_CASE("conjugate posterior parameters")
    {
        auto zero = gaussian_posterior_params({-1.0, 1.0, -2.0, 2.0}, 3.0, 0.5);
        CHECK(zero.mu_p == doctest::Approx(0.0));

        // x bar = 1, N = 100, sigma_x = 5, sigma_theta = 1: sigma_x^2/N = 0.25, divisor 1.25
        std::vector<double> data(100, 1.0);
        auto p = gaussian_posterior_params(data, 5.0, 1.0);
        CHECK(p.mu_p == doctest::Approx(0.8).epsilon(1e-14));
        CHECK(p.sigma_p2 == doctest::Approx(0.2).epsilon(1e-14));

        std::vector<double> big(1000000, 1.0);
        auto q = gaussian_posterior_params(big, 5.0, 1.0);
        CHECK(q.sigma_p2 == doctest::Approx(25.0 / 1e6).epsilon(1e-4));

        CHECK_THROWS_AS(gaussian_posterior_params({}, 1.0, 1.0), ModelError);
        CHECK_THROWS_AS(GaussianLocationModel({1.0}, -1.0, 1.0), ModelError);
    }

    TEST_CASE("exact gradients")
    {
        std::vector<double> data(100, 1.0);
        Model g = GaussianLocationModel(data, 5.0, 1.0);
        const auto& gm = std::get<GaussianLocationModel>(g);
        CHECK(log_posterior_gradient(g, Vector::Constant(1, gm.mu_p()))[0] == doctest::Approx(0.0));
        CHECK(log_posterior_gradient(g, Vector::Constant(1, 1.0))[0] == doctest::Approx(-1.0));

        RowMatrix x = RowMatrix::Zero(1, 1);
        Model l = LogisticRegressionModel(x, {1.0}, Matrix::Identity(1, 1));
        CHECK(log_posterior_gradient(l, Vector::Zero(1))[0] == doctest::Approx(0.0));

        Vector bad(1);
        bad[0] = std::numeric_limits<double>::quiet_NaN();
        CHECK_THROWS_AS(log_posterior_gradient(g, bad), DivergenceError);
    }

    TEST_CASE("gradients match central differences of the log density")
    {
        for (const Model& model : {paper_gaussian(), small_logistic(40, 3, 5), paper_logistic()})
        {
            RngStream rng(21, 0);
            int d = dimension(model);
            Vector mode = map_estimate(model);
            for (int trial = 0; trial < 50; ++trial)
            {
                Vector theta = mode;
                for (int a = 0; a < d; ++a)
                {
                    theta[a] += rng.normal();
                }
                Vector exact = log_posterior_gradient(model, theta);
                Vector fd(d);
                for (int a = 0; a < d; ++a)
                {
                    double h = 1e-5 * std::max(1.0, std::abs(theta[a]));
                    Vector up = theta;
                    Vector down = theta;
                    up[a] += h;
                    down[a] -= h;
                    fd[a] = (log_posterior(model, up) - log_posterior(model, down)) / (2 * h);
                }
                CHECK((exact - fd).norm() <= 1e-6 * std::max(1.0, exact.norm()));
            }
        }
    }

    TEST_CASE("log density and gradient in one pass")
    {
        auto model = paper_logistic();
        Vector theta(3);
        theta << 0.3, -0.2, 0.5;
        Vector g;
        double lp = log_posterior_and_gradient(model, theta, g);
        CHECK(lp == doctest::Approx(log_posterior(model, theta)).epsilon(1e-13));
        CHECK((g - log_posterior_gradient(model, theta)).norm() < 1e-10);
    }

    TEST_CASE("logistic model validation")
    {
        RowMatrix x = RowMatrix::Ones(2, 2);
        CHECK_THROWS_AS(LogisticRegressionModel(x, {1.0, 0.0}, Matrix::Identity(2, 2)), ModelError);
        Matrix asym = Matrix::Identity(2, 2);
        asym(0, 1) = 0.5;
        CHECK_THROWS_AS(LogisticRegressionModel(x, {1.0, -1.0}, asym), ModelError);
        Matrix indefinite = Matrix::Identity(2, 2);
        indefinite(1, 1) = -1.0;
        CHECK_THROWS_AS(LogisticRegressionModel(x, {1.0, -1.0}, indefinite), ModelError);
    }

    TEST_CASE("minibatch sampling")
    {
        RngStream rng(4, 0);
        auto full = sample_minibatch(rng, 3, 3);
        std::set<std::uint32_t> seen(full.indices.begin(), full.indices.end());
        CHECK(seen == std::set<std::uint32_t>{0, 1, 2});

        int zeros = 0;
        const int draws = 10000;
        for (int i = 0; i < draws; ++i)
        {
            zeros += sample_minibatch(rng, 2, 1).indices[0] == 0;
        }
        CHECK(std::abs(zeros - draws / 2.0) < 3 * std::sqrt(draws * 0.25));

        CHECK(sample_minibatch(rng, 1, 1).indices == std::vector<std::uint32_t>{0});
        CHECK_THROWS_AS(sample_minibatch(rng, 5, 0), ArgumentError);
        CHECK_THROWS_AS(sample_minibatch(rng, 5, 6), ArgumentError);

        // without replacement indices are distinct
        MinibatchSampler sampler(50, 20);
        Minibatch b;
        for (int i = 0; i < 100; ++i)
        {
            sampler.draw(rng, b);
            CHECK(std::set<std::uint32_t>(b.indices.begin(), b.indices.end()).size() == 20);
        }
    }

    TEST_CASE("stochastic gradient enumeration identities")
    {
        Model g = GaussianLocationModel({0.5, -1.0, 2.0}, 1.5, 1.0);
        Vector theta = Vector::Constant(1, 0.3);
        Vector sum = Vector::Zero(1);
        testing::for_each_subset(3, 1, [&](const std::vector<std::uint32_t>& idx) {
            sum += stochastic_gradient(g, theta, Minibatch{idx, true});
        });
        CHECK((sum / 3.0 - log_posterior_gradient(g, theta)).norm() < 1e-12);

        auto l = small_logistic(2, 2, 3);
        Vector t2(2);
        t2 << 0.4, -0.7;
        Vector s2 = Vector::Zero(2);
        testing::for_each_subset(2, 1, [&](const std::vector<std::uint32_t>& idx) {
            s2 += stochastic_gradient(l, t2, Minibatch{idx, true});
        });
        CHECK((s2 / 2.0 - log_posterior_gradient(l, t2)).norm() < 1e-12);

        CHECK_THROWS_AS(stochastic_gradient(g, theta, Minibatch{{3}, true}), ArgumentError);
    }

    TEST_CASE("full batch noise is exactly zero")
    {
        for (const Model& model : {paper_gaussian(), paper_logistic()})
        {
            std::vector<std::uint32_t> all(data_size(model));
            std::iota(all.begin(), all.end(), 0u);
            Vector theta = map_estimate(model).array() + 0.37;
            auto h = gradient_noise(model, theta, Minibatch{all, true});
            CHECK(h.value.norm() == 0.0);
            CHECK(stochastic_gradient(model, theta, Minibatch{all, true})
                  == log_posterior_gradient(model, theta));
        }
    }

    TEST_CASE("Gaussian noise has the closed form ((N/n) sum_batch x - sum x) / sigma_x^2")
    {
        auto model = paper_gaussian();
        const auto& g = std::get<GaussianLocationModel>(model);
        RngStream rng(8, 8);
        for (int k = 0; k < 20; ++k)
        {
            auto batch = sample_minibatch(rng, g.size(), 10);
            double batch_sum = 0;
            for (auto i : batch.indices)
            {
                batch_sum += g.data()[i];
            }
            double expected = (10.0 * batch_sum - g.data_sum()) / (g.sigma_x() * g.sigma_x());
            double theta = rng.normal();
            auto h = gradient_noise(model, Vector::Constant(1, theta), batch);
            CHECK(h.value[0] == doctest::Approx(expected).epsilon(1e-12));
        }
    }

    TEST_CASE("noise averages to zero over all batches (N <= 8)")
    {
        RngStream rng(12, 0);
        std::vector<double> data{0.3, -1.2, 2.5, 0.7, -0.4, 1.9, -2.2, 0.05};
        for (std::size_t n_data = 1; n_data <= 8; ++n_data)
        {
            std::vector<double> sub(data.begin(), data.begin() + static_cast<long>(n_data));
            Model g = GaussianLocationModel(sub, 2.0, 1.0);
            Model l = small_logistic(n_data, 3, 100 + n_data);
            for (const Model* model : {&g, &l})
            {
                int d = dimension(*model);
                for (std::size_t n = 1; n <= n_data; ++n)
                {
                    for (int t = 0; t < 3; ++t)
                    {
                        Vector theta(d);
                        for (int a = 0; a < d; ++a)
                        {
                            theta[a] = 2 * rng.normal();
                        }
                        Vector total = Vector::Zero(d);
                        double count = 0;
                        testing::for_each_subset(n_data, n, [&](const std::vector<std::uint32_t>& idx) {
                            total += gradient_noise(*model, theta, Minibatch{idx, true}).value;
                            count += 1;
                        });
                        CHECK((total / count).norm() < 1e-10);
                    }
                }
            }
        }
    }

    TEST_CASE("noise second moment grows at most linearly in V")
    {
        auto model = paper_logistic();
        Vector mode = map_estimate(model);
        RngStream rng(13, 1);
        double worst_ratio = 0;
        for (double scale : {0.0, 1.0, 3.0, 10.0, 30.0, 100.0})
        {
            Vector theta = mode + Vector::Constant(3, scale);
            double second = 0;
            const int draws = 400;
            for (int k = 0; k < draws; ++k)
            {
                second += gradient_noise(model, theta, sample_minibatch(rng, 1000, 30)).value.squaredNorm();
            }
            second /= draws;
            worst_ratio = std::max(worst_ratio, second / lyapunov(model, theta).value);
        }
        CHECK(std::isfinite(worst_ratio));
        // bounded logistic gradients give E|H|^2 <= (N * max|x|)^2 <= C V
        const auto& l = std::get<LogisticRegressionModel>(model);
        double bound = std::pow(static_cast<double>(l.size()) / 30.0 * l.covariate_norm_sum(), 2);
        CHECK(worst_ratio < bound);
    }

    TEST_CASE("MAP estimates")
    {
        auto g = paper_gaussian();
        CHECK(map_estimate(g)[0] == std::get<GaussianLocationModel>(g).mu_p());

        RowMatrix x = RowMatrix::Zero(5, 2);
        Model zero = LogisticRegressionModel(x, {1, -1, 1, 1, -1}, Matrix::Identity(2, 2));
        CHECK(map_estimate(zero).norm() < 1e-12);

        auto l = paper_logistic();
        CHECK(log_posterior_gradient(l, map_estimate(l)).norm() < 1e-8);
    }

    TEST_CASE("Lyapunov functions")
    {
        auto model = paper_gaussian();
        const auto& g = std::get<GaussianLocationModel>(model);
        auto at_mode = lyapunov(model, Vector::Constant(1, g.mu_p()));
        CHECK(at_mode.value == 1.0);
        CHECK(at_mode.gradient[0] == 0.0);
        double sp = std::sqrt(g.sigma_p2());
        auto one_sd = lyapunov(model, Vector::Constant(1, g.mu_p() + sp));
        CHECK(one_sd.value == doctest::Approx(1.5));
        CHECK(one_sd.gradient[0] == doctest::Approx(1.0 / sp));

        auto l = paper_logistic();
        auto origin = lyapunov(l, Vector::Zero(3));
        CHECK(origin.value == 1.0);
        CHECK(origin.gradient.norm() == 0.0);
    }

    TEST_CASE("drift verification")
    {
        auto model = paper_gaussian();
        const auto& g = std::get<GaussianLocationModel>(model);
        auto report = verify_drift_condition(model, default_drift_grid(model));
        CHECK(report.feasible);
        CHECK(report.alpha_hat == doctest::Approx(1.0 / g.sigma_p2()));
        CHECK(report.beta_hat == doctest::Approx(1.0 / g.sigma_p2()));

        auto l = paper_logistic();
        auto lr = verify_drift_condition(l, default_drift_grid(l));
        CHECK(lr.feasible);
        CHECK(lr.alpha_hat == doctest::Approx(std::get<LogisticRegressionModel>(l).lambda_min() / 4));

        // only the mode: lhs = 0, so beta = alpha V
        auto mode_only = verify_drift_condition(model, {Vector::Constant(1, g.mu_p())});
        CHECK(mode_only.beta_hat == doctest::Approx(mode_only.alpha_hat));
        CHECK_THROWS_AS(verify_drift_condition(model, {}), ArgumentError);
    }

    TEST_CASE("simulated datasets")
    {
        auto rng = make_stream(2, StreamPurpose::dataset);
        auto ds = simulate_dataset(rng, GaussianDatasetParams{});
        const auto& g = std::get<GaussianLocationModel>(ds.model);
        CHECK(g.size() == 100);
        std::vector<double> v = g.data();
        double m = testing::mean_of(v);
        double s2 = 0;
        for (double x : v)
        {
            s2 += (x - m) * (x - m);
        }
        double sd = std::sqrt(s2 / 99.0);
        // sd of the sample standard deviation is about sigma / sqrt(2 (N - 1))
        CHECK(std::abs(sd - 5.0) < 4 * 5.0 / std::sqrt(2 * 99.0));

        auto rng2 = make_stream(2, StreamPurpose::dataset);
        CHECK(std::get<GaussianLocationModel>(simulate_dataset(rng2, GaussianDatasetParams{}).model).data()
              == g.data());

        auto lr = make_stream(2, StreamPurpose::dataset);
        auto lds = simulate_dataset(lr, LogisticDatasetParams{});
        const auto& l = std::get<LogisticRegressionModel>(lds.model);
        CHECK(l.size() == 1000);
        CHECK(l.dimension() == 3);
        CHECK((l.covariates().col(2).array() == 1.0).all());
        CHECK(lds.generating_theta.size() == 3);

        CHECK_THROWS_AS(simulate_dataset(rng, GaussianDatasetParams{0, 5, 1, 0}), ArgumentError);
    }
}
