#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "sgmcmc/models.hpp"

namespace testing
{

//! Two-sample Kolmogorov-Smirnov statistic.
inline double ks_statistic(std::vector<double> a, std::vector<double> b)
{
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    std::size_t i = 0;
    std::size_t j = 0;
    double d = 0;
    auto na = static_cast<double>(a.size());
    auto nb = static_cast<double>(b.size());
    while (i < a.size() && j < b.size())
    {
        double x = std::min(a[i], b[j]);
        while (i < a.size() && a[i] <= x)
        {
            ++i;
        }
        while (j < b.size() && b[j] <= x)
        {
            ++j;
        }
        d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
    }
    return d;
}

//! Asymptotic p-value of the two-sample KS statistic (Kolmogorov series).
inline double ks_p_value(double d, std::size_t na, std::size_t nb)
{
    double ne = static_cast<double>(na) * static_cast<double>(nb) / static_cast<double>(na + nb);
    double lambda = (std::sqrt(ne) + 0.12 + 0.11 / std::sqrt(ne)) * d;
    double sum = 0;
    for (int k = 1; k <= 100; ++k)
    {
        double term = 2.0 * ((k % 2) ? 1.0 : -1.0) * std::exp(-2.0 * k * k * lambda * lambda);
        sum += term;
        if (std::abs(term) < 1e-12)
        {
            break;
        }
    }
    return std::clamp(sum, 0.0, 1.0);
}

//! Calls visit(indices) for every n-subset of {0, ..., N-1} in lexicographic order.
template<class Visit>
void for_each_subset(std::size_t population, std::size_t n, Visit&& visit)
{
    std::vector<std::uint32_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0u);
    while (true)
    {
        visit(idx);
        std::size_t k = n;
        while (k > 0 && idx[k - 1] == population - n + k - 1)
        {
            --k;
        }
        if (k == 0)
        {
            return;
        }
        ++idx[k - 1];
        for (std::size_t t = k; t < n; ++t)
        {
            idx[t] = idx[t - 1] + 1;
        }
    }
}

inline double mean_of(const std::vector<double>& v)
{
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

inline double stderr_of(const std::vector<double>& v)
{
    double m = mean_of(v);
    double s = 0;
    for (double x : v)
    {
        s += (x - m) * (x - m);
    }
    return std::sqrt(s / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
}

} // namespace testing
