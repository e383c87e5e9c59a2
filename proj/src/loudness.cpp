#include "uap/loudness.hpp"

#include <cmath>
#include <string>

#include "uap/errors.hpp"

namespace uap {

const char* metric_name(LoudnessMetric m) {
  return m == LoudnessMetric::kMax ? "max" : "mean";
}

double db_max(std::span<const double> x) {
  double peak = 0.0;
  for (double s : x) peak = std::max(peak, std::abs(s));
  if (peak == 0.0) throw SilentSignal("dB of an all-zero signal");
  return 20.0 * std::log10(peak);
}

double db_mean(std::span<const double> x) {
  double sum = 0.0;
  for (double s : x) sum += std::abs(s);
  if (sum == 0.0) throw SilentSignal("dB of an all-zero signal");
  return 20.0 * std::log10(sum / static_cast<double>(x.size()));
}

double db(std::span<const double> x, LoudnessMetric metric) {
  return metric == LoudnessMetric::kMax ? db_max(x) : db_mean(x);
}

double relative_db(std::span<const double> v, std::span<const double> x,
                   LoudnessMetric metric) {
  return db(v, metric) - db(x, metric);
}

EnergyPartition energy_partition(std::span<const double> x, double fraction) {
  if (!(fraction > 0.0 && fraction < 1.0)) {
    throw ConfigError("energy fraction must lie in (0, 1), got " + std::to_string(fraction));
  }
  double total = 0.0;
  for (double s : x) total += s * s;
  if (total == 0.0) throw NoEnergy("signal has no energy");

  const double tail = 0.5 * (1.0 - fraction);
  const double lower = tail * total - kPartitionSlack * total;
  const double upper = (1.0 - tail) * total - kPartitionSlack * total;

  EnergyPartition part{0, 0};
  double cum = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    cum += x[i] * x[i];
    if (part.a == 0 && cum >= lower) part.a = i + 1;
    if (cum >= upper) {
      part.b = i + 1;
      break;
    }
  }
  if (part.b == 0) part.b = x.size();
  if (part.a == 0) part.a = part.b;
  return part;
}

}  // namespace uap
