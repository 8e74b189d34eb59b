#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace turnover {

/// Ranks starting at 1; ties get the average of their positions.
std::vector<double> average_ranks(std::span<const double> values);

double pearson(std::span<const double> a, std::span<const double> b);

/// Pearson correlation of average ranks. Returns 0 when either side is constant.
double spearman(std::span<const double> a, std::span<const double> b);

/// P(X >= successes) for X ~ Binomial(trials, 1/2).
double sign_test_p(std::size_t successes, std::size_t trials);

double mean(std::span<const double> values);
/// Sample standard deviation (n - 1); 0 for fewer than two values.
double sample_sd(std::span<const double> values);

}  // namespace turnover
