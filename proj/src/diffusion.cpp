#include "sgmcmc/diffusion.hpp"

#include <algorithm>
#include <cmath>

#include "sgmcmc/errors.hpp"
#include "sgmcmc/parallel.hpp"
#include "sgmcmc/schedules.hpp"

namespace sgmcmc
{

Partition refine_partition(double horizon, std::int64_t m)
{
    if (m < 1 || !(horizon > 0))
    {
        throw ArgumentError("partition needs m >= 1 and a positive horizon");
    }
    Partition p;
    p.horizon = horizon;
    p.steps.assign(static_cast<std::size_t>(m), horizon / static_cast<double>(m));
    p.mesh = p.steps.front();
    return p;
}

//---------------------------------------------------------------------------//
BrownianPath::BrownianPath(RngStream& rng, double horizon, std::int64_t fine_steps, int dim)
    : horizon_(horizon), fine_steps_(fine_steps), dim_(dim)
{
    if (fine_steps < 1 || dim < 1 || !(horizon > 0))
    {
        throw ArgumentError("Brownian path needs a positive horizon, steps and dimension");
    }
    increments_.resize(dim, fine_steps);
    double scale = std::sqrt(spacing());
    for (std::int64_t k = 0; k < fine_steps; ++k)
    {
        for (int a = 0; a < dim; ++a)
        {
            increments_(a, k) = scale * rng.normal();
        }
    }
}

Vector BrownianPath::increment(std::int64_t begin, std::int64_t end) const
{
    if (begin < 0 || end > fine_steps_ || begin > end)
    {
        throw ArgumentError("Brownian increment range out of bounds");
    }
    Vector sum = Vector::Zero(dim_);
    for (std::int64_t k = begin; k < end; ++k)
    {
        sum += increments_.col(k);
    }
    return sum;
}

//---------------------------------------------------------------------------//
InterpolatedPath::InterpolatedPath(std::vector<double> times, std::vector<Vector> values)
    : times_(std::move(times)), values_(std::move(values))
{
    if (times_.size() < 2 || times_.size() != values_.size())
    {
        throw ArgumentError("interpolated path needs matching knots, at least two");
    }
    for (std::size_t k = 1; k < times_.size(); ++k)
    {
        if (!(times_[k] > times_[k - 1]))
        {
            throw ArgumentError("knot times must increase");
        }
    }
}

Vector InterpolatedPath::operator()(double t) const
{
    if (t <= times_.front())
    {
        return values_.front();
    }
    if (t >= times_.back())
    {
        return values_.back();
    }
    auto it = std::upper_bound(times_.begin(), times_.end(), t);
    auto k = static_cast<std::size_t>(it - times_.begin());
    double t0 = times_[k - 1];
    double t1 = times_[k];
    if (t == t0)
    {
        return values_[k - 1];
    }
    double u = (t - t0) / (t1 - t0);
    return (1 - u) * values_[k - 1] + u * values_[k];
}

//---------------------------------------------------------------------------//
InterpolatedPath coupled_path(const GradientEstimator& gradient, const Partition& partition,
                              const BrownianPath& brownian, const Vector& theta0)
{
    if (std::abs(partition.horizon - brownian.horizon()) > 1e-12 * brownian.horizon())
    {
        throw ArgumentError("partition and Brownian path have different horizons");
    }
    if (theta0.size() != brownian.dimension())
    {
        throw ArgumentError("initial state and Brownian path dimensions differ");
    }
    double spacing = brownian.spacing();
    std::vector<double> times{0.0};
    std::vector<Vector> values{theta0};
    Vector theta = theta0;
    Vector drift(theta0.size());
    CompensatedSum clock;
    std::int64_t fine_index = 0;
    for (double delta : partition.steps)
    {
        clock.add(delta);
        double grid_position = clock.value() / spacing;
        auto next_index = static_cast<std::int64_t>(std::llround(grid_position));
        if (std::abs(grid_position - static_cast<double>(next_index)) > 1e-9
            || next_index <= fine_index || next_index > brownian.fine_steps())
        {
            throw ArgumentError("partition knots do not lie on the Brownian grid");
        }
        gradient(theta, drift);
        theta += 0.5 * delta * drift + brownian.increment(fine_index, next_index);
        fine_index = next_index;
        times.push_back(static_cast<double>(fine_index) * spacing);
        values.push_back(theta);
    }
    if (fine_index != brownian.fine_steps())
    {
        throw ArgumentError("partition does not cover the Brownian horizon");
    }
    return InterpolatedPath(std::move(times), std::move(values));
}

InterpolatedPath coupled_path(const Model& model, const Partition& partition,
                              const BrownianPath& brownian, std::size_t batch_size,
                              RngStream& batch_rng, const Vector& theta0)
{
    MinibatchSampler sampler(data_size(model), batch_size);
    Minibatch batch;
    auto estimate = [&](const Vector& theta, Vector& out) {
        sampler.draw(batch_rng, batch);
        stochastic_gradient_into(model, theta, batch, out);
    };
    return coupled_path(estimate, partition, brownian, theta0);
}

double sup_distance(const InterpolatedPath& a, const InterpolatedPath& b, int grid_points)
{
    double horizon = a.horizon();
    if (std::abs(horizon - b.horizon()) > 1e-12 * std::max(1.0, horizon)
        || a.times().front() != b.times().front())
    {
        throw ArgumentError("paths have different horizons");
    }
    if (grid_points < 1)
    {
        throw ArgumentError("grid_points must be positive");
    }
    double worst = 0;
    auto probe = [&](double t) { worst = std::max(worst, (a(t) - b(t)).norm()); };
    for (int i = 0; i <= grid_points; ++i)
    {
        probe(horizon * i / grid_points);
    }
    for (double t : a.times())
    {
        probe(t);
    }
    for (double t : b.times())
    {
        probe(t);
    }
    return worst;
}

//---------------------------------------------------------------------------//
DiffusionTable diffusion_limit_experiment(const Model& model, double horizon,
                                          const std::vector<std::int64_t>& levels,
                                          std::size_t batch_size, std::size_t replicas,
                                          std::uint64_t seed, const DiffusionOptions& options)
{
    if (levels.empty() || replicas < 2)
    {
        throw ArgumentError("diffusion experiment needs levels and at least two replicas");
    }
    auto sorted = levels;
    std::sort(sorted.begin(), sorted.end());
    std::int64_t finest = sorted.back();
    for (auto m : sorted)
    {
        if (m < 1 || finest % m != 0)
        {
            throw ArgumentError("levels must be positive and divide the finest level");
        }
    }
    Vector theta0 = options.theta0.size() ? options.theta0 : map_estimate(model);
    std::size_t n_levels = sorted.size();
    // distances[replica][level], first block full batch, second minibatch
    std::vector<std::vector<double>> distances(replicas, std::vector<double>(2 * n_levels));
    std::size_t n_data = data_size(model);

    parallel_for(replicas, [&](std::size_t r) {
        auto brownian_rng = make_stream(seed, StreamPurpose::brownian, r);
        BrownianPath w(brownian_rng, horizon, finest, dimension(model));
        std::vector<InterpolatedPath> full;
        std::vector<InterpolatedPath> mini;
        for (std::size_t l = 0; l < n_levels; ++l)
        {
            auto partition = refine_partition(horizon, sorted[l]);
            auto full_rng = make_stream(seed, StreamPurpose::minibatch, r).split(2 * l);
            full.push_back(coupled_path(model, partition, w, n_data, full_rng, theta0));
            auto mini_rng = make_stream(seed, StreamPurpose::minibatch, r).split(2 * l + 1);
            mini.push_back(coupled_path(model, partition, w, batch_size, mini_rng, theta0));
        }
        for (std::size_t l = 0; l < n_levels; ++l)
        {
            distances[r][l] = sup_distance(full[l], full.back(), options.grid_points);
            distances[r][n_levels + l] = sup_distance(mini[l], mini.back(), options.grid_points);
        }
    });

    DiffusionTable table;
    table.batch_size = batch_size;
    table.replicas = replicas;
    auto n = static_cast<double>(replicas);
    for (std::size_t block = 0; block < 2; ++block)
    {
        for (std::size_t l = 0; l < n_levels; ++l)
        {
            double mean = 0;
            for (const auto& row : distances)
            {
                mean += row[block * n_levels + l];
            }
            mean /= n;
            double var = 0;
            for (const auto& row : distances)
            {
                double d = row[block * n_levels + l] - mean;
                var += d * d;
            }
            var /= (n - 1);
            DiffusionRow out{sorted[l], horizon / static_cast<double>(sorted[l]), mean,
                             std::sqrt(var / n), {}};
            for (const auto& row : distances)
            {
                out.samples.push_back(row[block * n_levels + l]);
            }
            (block == 0 ? table.full_batch : table.minibatch).push_back(out);
        }
    }
    return table;
}

} // namespace sgmcmc
