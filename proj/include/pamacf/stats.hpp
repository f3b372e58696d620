#pragma once

#include <optional>
#include <span>
#include <vector>

namespace pamacf {

double mean(std::span<const double> xs);
// Sample standard deviation (n-1 denominator); 0 for fewer than two values.
double stddev(std::span<const double> xs);
double median(std::span<const double> xs);

/// Ranks starting at 1, ties share their average rank.
std::vector<double> average_ranks(std::span<const double> xs);

/// Spearman rank correlation; nullopt when either side is constant or the
/// inputs have fewer than two points.
std::optional<double> spearman(std::span<const double> x, std::span<const double> y);

}  // namespace pamacf
