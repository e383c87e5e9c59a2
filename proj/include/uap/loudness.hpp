#pragma once

#include <cstddef>
#include <span>

namespace uap {

enum class LoudnessMetric { kMax, kMean };

const char* metric_name(LoudnessMetric m);

// 20*log10(max |x_i|). Throws SilentSignal when every sample is zero.
double db_max(std::span<const double> x);

// 20*log10(mean |x_i|), mean taken over x.size(). Throws SilentSignal on zero.
double db_mean(std::span<const double> x);

double db(std::span<const double> x, LoudnessMetric metric);

// db(v) - db(x). Negative when v is quieter than x.
double relative_db(std::span<const double> v, std::span<const double> x,
                   LoudnessMetric metric);

// Contiguous vocal segment holding `fraction` of the signal energy. Bounds
// are 1-based and inclusive: samples x[a-1] .. x[b-1].
struct EnergyPartition {
  std::size_t a = 1;
  std::size_t b = 1;

  std::size_t begin() const { return a - 1; }  // 0-based, inclusive
  std::size_t end() const { return b; }        // 0-based, exclusive
  std::size_t length() const { return b - a + 1; }
};

// Symmetric-percentile rule: a is the first position whose cumulative energy
// reaches (1-fraction)/2 of the total, b the first reaching 1-(1-fraction)/2.
// Comparisons allow a 1e-12 relative slack on the thresholds so that exact
// fractions are not lost to rounding. Throws NoEnergy on an all-zero signal.
EnergyPartition energy_partition(std::span<const double> x, double fraction = 0.95);

inline constexpr double kPartitionSlack = 1e-12;

}  // namespace uap
