#include "sgmcmc/samplers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "sgmcmc/errors.hpp"

namespace sgmcmc
{
namespace
{

bool out_of_bounds(const Vector& theta)
{
    return !theta.allFinite() || theta.norm() > divergence_bound;
}

struct CheckpointCursor
{
    const std::vector<std::int64_t>& marks;
    std::size_t next = 0;

    bool hit(std::int64_t m)
    {
        while (next < marks.size() && marks[next] < m)
        {
            ++next;
        }
        if (next < marks.size() && marks[next] == m)
        {
            ++next;
            return true;
        }
        return false;
    }
};

std::vector<std::int64_t> resolve_checkpoints(const RunOptions& options, std::int64_t m_steps)
{
    auto marks = options.checkpoints.empty() ? geometric_checkpoints(m_steps) : options.checkpoints;
    std::sort(marks.begin(), marks.end());
    marks.erase(std::unique(marks.begin(), marks.end()), marks.end());
    return marks;
}

} // namespace

//---------------------------------------------------------------------------//
SgldKernel::SgldKernel(const Model& model, std::size_t batch_size, bool without_replacement)
    : model_(model)
    , sampler_(data_size(model), batch_size, without_replacement)
    , gradient_(dimension(model))
{
}

void SgldKernel::step(ChainState& state, double delta)
{
    if (state.diverged)
    {
        throw ArgumentError("cannot step a diverged chain");
    }
    if (!(delta > 0))
    {
        throw ArgumentError("step size must be positive");
    }
    sampler_.draw(state.rng, batch_);
    stochastic_gradient_into(model_, state.theta, batch_, gradient_);
    double scale = std::sqrt(delta);
    for (Eigen::Index a = 0; a < state.theta.size(); ++a)
    {
        state.theta[a] += 0.5 * delta * gradient_[a] + scale * state.rng.normal();
    }
    ++state.step_index;
    state.diverged = out_of_bounds(state.theta);
}

ChainState sgld_step(ChainState state, const Model& model, double delta, std::size_t batch_size)
{
    SgldKernel kernel(model, batch_size);
    kernel.step(state, delta);
    return state;
}

//---------------------------------------------------------------------------//
double mala_log_acceptance(const Model& model, const Vector& from, const Vector& to, double delta)
{
    Vector grad_from;
    Vector grad_to;
    double lp_from = log_posterior_and_gradient(model, from, grad_from);
    double lp_to = log_posterior_and_gradient(model, to, grad_to);
    double forward = (to - from - 0.5 * delta * grad_from).squaredNorm();
    double backward = (from - to - 0.5 * delta * grad_to).squaredNorm();
    return lp_to - lp_from - (backward - forward) / (2 * delta);
}

void MalaKernel::refresh(const Vector& theta)
{
    if (cached_theta_.size() != theta.size() || cached_theta_ != theta)
    {
        cached_log_density_ = log_posterior_and_gradient(model_, theta, cached_gradient_);
        cached_theta_ = theta;
    }
}

void MalaKernel::step(ChainState& state, double delta, MalaStats& stats)
{
    if (state.diverged)
    {
        throw ArgumentError("cannot step a diverged chain");
    }
    if (!(delta > 0))
    {
        throw ArgumentError("step size must be positive");
    }
    refresh(state.theta);
    double scale = std::sqrt(delta);
    Vector proposal = state.theta + 0.5 * delta * cached_gradient_;
    for (Eigen::Index a = 0; a < proposal.size(); ++a)
    {
        proposal[a] += scale * state.rng.normal();
    }
    double log_u = std::log(state.rng.uniform());
    ++stats.proposals;
    ++state.step_index;
    if (!proposal.allFinite())
    {
        return;
    }
    double lp_proposal = log_posterior_and_gradient(model_, proposal, proposal_gradient_);
    double forward = (proposal - state.theta - 0.5 * delta * cached_gradient_).squaredNorm();
    double backward = (state.theta - proposal - 0.5 * delta * proposal_gradient_).squaredNorm();
    double log_ratio = lp_proposal - cached_log_density_ - (backward - forward) / (2 * delta);
    if (std::isfinite(lp_proposal) && log_u < log_ratio)
    {
        ++stats.accepts;
        state.theta = proposal;
        cached_theta_ = proposal;
        cached_log_density_ = lp_proposal;
        std::swap(cached_gradient_, proposal_gradient_);
    }
}

ChainState mala_step(ChainState state, const Model& model, double delta, MalaStats& stats)
{
    MalaKernel kernel(model);
    kernel.step(state, delta, stats);
    return state;
}

//---------------------------------------------------------------------------//
std::vector<std::int64_t> geometric_checkpoints(std::int64_t m_max, double ratio)
{
    if (m_max < 1 || !(ratio > 1))
    {
        throw ArgumentError("geometric checkpoints need m_max >= 1 and ratio > 1");
    }
    std::vector<std::int64_t> marks;
    for (int j = 0;; ++j)
    {
        auto m = static_cast<std::int64_t>(std::ceil(std::pow(ratio, j) - 1e-9));
        if (m > m_max)
        {
            break;
        }
        if (marks.empty() || marks.back() != m)
        {
            marks.push_back(m);
        }
    }
    if (marks.back() != m_max)
    {
        marks.push_back(m_max);
    }
    return marks;
}

RunReport run_sgld(const Model& model, const StepSchedule& schedule, std::int64_t m_steps,
                   const Vector& theta0, std::size_t batch_size, RngStream rng,
                   const std::vector<TestFunction>& test_functions,
                   const std::vector<WeightSequence>& weights, const RunOptions& options)
{
    if (m_steps < 1)
    {
        throw ArgumentError("run needs at least one step");
    }
    validate(schedule);
    if (m_steps > horizon_limit(schedule))
    {
        throw ArgumentError("schedule defines fewer steps than requested");
    }
    if (theta0.size() != dimension(model) || !theta0.allFinite())
    {
        throw ArgumentError("initial state has wrong dimension or is not finite");
    }
    std::vector<WeightSequence> omegas = weights;
    if (omegas.empty())
    {
        omegas.emplace_back(SameAsSteps{});
    }

    RunReport report;
    report.method = "sgld";
    for (const auto& phi : test_functions)
    {
        for (const auto& w : omegas)
        {
            report.labels.push_back(omegas.size() == 1 ? phi.label : phi.label + "|" + label(w));
        }
    }
    auto marks = resolve_checkpoints(options, m_steps);
    CheckpointCursor cursor{marks};

    SgldKernel kernel(model, batch_size, options.without_replacement);
    ChainState state{theta0, 0, false, rng};
    std::vector<WeightedAverage> averages(report.labels.size());
    std::vector<double> omega_k(omegas.size());
    CompensatedSum total_time;
    CompensatedSum squared_steps;

    auto snapshot = [&]() {
        std::vector<double> values(averages.size());
        std::transform(averages.begin(), averages.end(), values.begin(),
                       [](const WeightedAverage& a) { return a.value(); });
        return values;
    };

    for (std::int64_t k = 1; k <= m_steps; ++k)
    {
        double delta = step(schedule, k);
        for (std::size_t j = 0; j < omegas.size(); ++j)
        {
            omega_k[j] = std::holds_alternative<SameAsSteps>(omegas[j]) ? delta
                                                                        : weight(omegas[j], schedule, k);
        }
        std::size_t slot = 0;
        for (const auto& phi : test_functions)
        {
            double v = phi(state.theta);
            for (double w : omega_k)
            {
                averages[slot++].update(w, v);
            }
        }
        total_time.add(delta);
        squared_steps.add(delta * delta);
        kernel.step(state, delta);

        double t = total_time.value();
        if (cursor.hit(k) || state.diverged)
        {
            report.checkpoints.push_back({k, t, squared_steps.value() / std::sqrt(t), snapshot()});
        }
        if (state.diverged)
        {
            report.diverged = true;
            report.diverged_at = k;
            break;
        }
    }
    report.steps_completed = state.step_index;
    report.T_m = total_time.value();
    report.B_m = squared_steps.value() / std::sqrt(report.T_m);
    report.final_values = snapshot();
    report.likelihood_evaluations = report.steps_completed * static_cast<std::int64_t>(batch_size);
    return report;
}

RunReport run_mala(const Model& model, double delta, std::int64_t m_steps, const Vector& theta0,
                   RngStream rng, const std::vector<TestFunction>& test_functions,
                   const RunOptions& options)
{
    if (m_steps < 1)
    {
        throw ArgumentError("run needs at least one step");
    }
    if (theta0.size() != dimension(model) || !theta0.allFinite())
    {
        throw ArgumentError("initial state has wrong dimension or is not finite");
    }
    RunReport report;
    report.method = "mala";
    report.delta = delta;
    for (const auto& phi : test_functions)
    {
        report.labels.push_back(phi.label);
    }
    auto marks = resolve_checkpoints(options, m_steps);
    CheckpointCursor cursor{marks};

    MalaKernel kernel(model);
    ChainState state{theta0, 0, false, rng};
    std::vector<WeightedAverage> averages(test_functions.size());
    for (std::int64_t k = 1; k <= m_steps; ++k)
    {
        for (std::size_t j = 0; j < test_functions.size(); ++j)
        {
            averages[j].update(1.0, test_functions[j](state.theta));
        }
        kernel.step(state, delta, report.mala);
        if (cursor.hit(k))
        {
            Checkpoint cp;
            cp.m = k;
            cp.T_m = static_cast<double>(k);
            for (const auto& a : averages)
            {
                cp.values.push_back(a.value());
            }
            report.checkpoints.push_back(std::move(cp));
        }
    }
    report.steps_completed = m_steps;
    report.T_m = static_cast<double>(m_steps);
    for (const auto& a : averages)
    {
        report.final_values.push_back(a.value());
    }
    report.likelihood_evaluations = m_steps * static_cast<std::int64_t>(data_size(model));
    return report;
}

//---------------------------------------------------------------------------//
MalaTuning tune_mala(const Model& model, double target_accept, RngStream rng, std::int64_t budget,
                     const MalaTuningOptions& options)
{
    if (!(target_accept > 0 && target_accept < 1))
    {
        throw ArgumentError("target acceptance must lie in (0, 1)");
    }
    if (options.steps_per_probe < 1)
    {
        throw ArgumentError("steps_per_probe must be positive");
    }
    Vector start = options.theta0.size() ? options.theta0 : map_estimate(model);
    double delta = options.initial_delta;
    if (!(delta > 0))
    {
        Eigen::SelfAdjointEigenSolver<Matrix> eig(negative_hessian(model, start),
                                                  Eigen::EigenvaluesOnly);
        delta = 1.0 / eig.eigenvalues().maxCoeff();
    }

    MalaKernel kernel(model);
    ChainState state{start, 0, false, rng};
    MalaTuning result;
    double best_delta = delta;
    double best_acceptance = 0;
    double best_gap = std::numeric_limits<double>::infinity();
    std::int64_t probe = 0;

    auto measure = [&](double d) {
        if (result.steps_used + options.steps_per_probe > budget)
        {
            throw TuningError("MALA tuning budget exhausted", best_delta, best_acceptance);
        }
        state.rng = rng.split(static_cast<std::uint64_t>(probe++));
        MalaStats stats;
        for (std::int64_t k = 0; k < options.steps_per_probe; ++k)
        {
            kernel.step(state, d, stats);
        }
        result.steps_used += options.steps_per_probe;
        double acc = stats.acceptance_rate();
        if (std::abs(acc - target_accept) < best_gap)
        {
            best_gap = std::abs(acc - target_accept);
            best_delta = d;
            best_acceptance = acc;
        }
        return acc;
    };
    auto done = [&](double acc) { return std::abs(acc - target_accept) <= options.tolerance; };

    // Acceptance decreases in delta: bracket the target in log(delta), then bisect.
    double log_lo = 0;
    double log_hi = 0;
    double acc = measure(delta);
    if (done(acc))
    {
        result.delta = delta;
        result.acceptance = acc;
        return result;
    }
    if (acc > target_accept)
    {
        log_lo = std::log(delta);
        for (;;)
        {
            delta *= 4;
            acc = measure(delta);
            if (done(acc))
            {
                result.delta = delta;
                result.acceptance = acc;
                return result;
            }
            if (acc < target_accept)
            {
                log_hi = std::log(delta);
                break;
            }
            log_lo = std::log(delta);
        }
    }
    else
    {
        log_hi = std::log(delta);
        for (;;)
        {
            delta /= 4;
            acc = measure(delta);
            if (done(acc))
            {
                result.delta = delta;
                result.acceptance = acc;
                return result;
            }
            if (acc > target_accept)
            {
                log_lo = std::log(delta);
                break;
            }
            log_hi = std::log(delta);
        }
    }
    for (;;)
    {
        double log_mid = 0.5 * (log_lo + log_hi);
        delta = std::exp(log_mid);
        acc = measure(delta);
        if (done(acc))
        {
            result.delta = delta;
            result.acceptance = acc;
            return result;
        }
        (acc > target_accept ? log_lo : log_hi) = log_mid;
    }
}

} // namespace sgmcmc
