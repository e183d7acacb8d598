#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "sgmcmc/models.hpp"
#include "sgmcmc/random.hpp"

namespace sgmcmc
{

struct Partition
{
    std::vector<double> steps;
    double horizon = 0;
    double mesh = 0;
};

//! m equal steps of length T/m.
Partition refine_partition(double horizon, std::int64_t m);

/*!
 * Brownian motion sampled on a uniform fine grid. Increments over coarser
 * partitions are sums of the fine increments, so every level sees the same W.
 */
class BrownianPath
{
  public:
    BrownianPath(RngStream& rng, double horizon, std::int64_t fine_steps, int dim);

    double horizon() const { return horizon_; }
    std::int64_t fine_steps() const { return fine_steps_; }
    double spacing() const { return horizon_ / static_cast<double>(fine_steps_); }
    int dimension() const { return dim_; }

    //! Fine increment k (0-based), N(0, spacing I).
    Eigen::Ref<const Vector> increment(std::int64_t k) const { return increments_.col(k); }

    //! W(t_end) - W(t_begin) for fine-grid indices begin <= end.
    Vector increment(std::int64_t begin, std::int64_t end) const;

    //! W at fine-grid index k (W(0) = 0).
    Vector value(std::int64_t k) const { return increment(0, k); }

  private:
    double horizon_;
    std::int64_t fine_steps_;
    int dim_;
    Matrix increments_;
};

/*!
 * Piecewise-linear interpolation of a chain on knot times 0 = T_0 < ... < T_m.
 */
class InterpolatedPath
{
  public:
    InterpolatedPath(std::vector<double> times, std::vector<Vector> values);

    Vector operator()(double t) const;
    double horizon() const { return times_.back(); }
    const std::vector<double>& times() const { return times_; }
    const std::vector<Vector>& values() const { return values_; }

  private:
    std::vector<double> times_;
    std::vector<Vector> values_;
};

//! Writes an estimate of grad log pi at theta into out.
using GradientEstimator = std::function<void(const Vector& theta, Vector& out)>;

/*!
 * theta_k = theta_{k-1} + delta_k/2 ghat(theta_{k-1}) + (W(T_k) - W(T_{k-1})).
 * Partition knots must fall on the Brownian fine grid.
 */
InterpolatedPath coupled_path(const GradientEstimator& gradient, const Partition& partition,
                              const BrownianPath& brownian, const Vector& theta0);

//! Model version: fresh minibatches from batch_rng at every step.
InterpolatedPath coupled_path(const Model& model, const Partition& partition,
                              const BrownianPath& brownian, std::size_t batch_size,
                              RngStream& batch_rng, const Vector& theta0);

//! Sup norm of a - b over a uniform grid plus every knot of both paths.
double sup_distance(const InterpolatedPath& a, const InterpolatedPath& b, int grid_points = 1000);

struct DiffusionRow
{
    std::int64_t level = 0;
    double mesh = 0;
    double mean_sup_dist = 0;
    double std_error = 0;
    std::vector<double> samples;  //!< per-replica sup distances
};

struct DiffusionTable
{
    std::vector<DiffusionRow> full_batch;
    std::vector<DiffusionRow> minibatch;
    std::size_t batch_size = 0;
    std::size_t replicas = 0;
};

struct DiffusionOptions
{
    Vector theta0;  //!< empty: MAP
    int grid_points = 1000;
};

/*!
 * For each replica, one Brownian path on the finest level drives every
 * level; distances are to the finest level's path, once with exact
 * gradients and once with minibatch gradients (minibatches independent
 * across levels).
 */
DiffusionTable diffusion_limit_experiment(const Model& model, double horizon,
                                          const std::vector<std::int64_t>& levels,
                                          std::size_t batch_size, std::size_t replicas,
                                          std::uint64_t seed, const DiffusionOptions& options = {});

} // namespace sgmcmc
