#pragma once

#include <span>
#include <vector>
#include <functional>

namespace mhm {

// Spearman rank correlation; average ranks for ties. Returns NaN when
// either side has fewer than two distinct values.
double spearman(std::span<const double> a, std::span<const double> b);

// One-sample Kolmogorov-Smirnov statistic against a CDF.
double ks_statistic(std::vector<double> samples, const std::function<double(double)>& cdf);

// Asymptotic critical value of the KS statistic at significance alpha
// (supported: 0.01, 0.05).
double ks_critical_value(double alpha, std::size_t n);

} // namespace mhm
