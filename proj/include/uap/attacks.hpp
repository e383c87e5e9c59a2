#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "uap/classifier.hpp"
#include "uap/waveform.hpp"

namespace uap {

enum class NormOrder { kL2, kLinf };

const char* norm_name(NormOrder p);
NormOrder parse_norm(const std::string& s);  // "2" or "inf"

struct AttackConfig {
  double overshoot = 0.1;
  std::size_t deepfool_max_iters = 100;
  double xi = 0.1;
  NormOrder p = NormOrder::kL2;
  // UAP-HC stops once the raw fooling rate reaches 1 - alpha.
  double alpha = 0.1;
  std::size_t max_passes = 5;
  std::size_t trials = 5;
  std::uint64_t rng_seed = 0;

  // Throws ConfigError. alpha = 1 is accepted and means "no work".
  void validate() const;
};

struct Perturbation {
  std::vector<double> values;
  NormOrder p = NormOrder::kL2;
  double xi = 0.1;
};

double norm(std::span<const double> v, NormOrder p);

// Euclidean projection onto {v : |v|_p <= xi}. For p = 2 the result is a
// radial rescaling whose computed norm never exceeds xi, which makes the
// operator exactly idempotent; for p = inf it is a coordinate clamp.
std::vector<double> project(std::span<const double> v, NormOrder p, double xi);
Perturbation project(const Perturbation& v, NormOrder p, double xi);

enum class DeepfoolStatus { kSuccess, kMaxIterationsExceeded, kDegenerateGradient };

const char* status_name(DeepfoolStatus s);

struct DeepfoolResult {
  std::vector<double> perturbation;  // accumulated r, x_fooled = x + r
  std::size_t iterations = 0;
  DeepfoolStatus status = DeepfoolStatus::kSuccess;
  int original_class = 0;
  int final_class = 0;

  bool success() const { return status == DeepfoolStatus::kSuccess; }
};

// Untargeted Deepfool: repeatedly step to the nearest linearized decision
// boundary, each step scaled by (1 + overshoot), until the label changes or
// the iteration budget runs out.
DeepfoolResult deepfool(const DifferentiableClassifier& model, SampleView x,
                        const AttackConfig& cfg);

// Fraction of samples whose prediction changes under v (x + v is clipped by
// the model). Throws ConfigError on an empty set.
double raw_fooling_rate(const DifferentiableClassifier& model, std::span<const SampleView> samples,
                        SampleView v);
// Same, with clean predictions supplied; `perturbed` receives f(x + v).
double raw_fooling_rate(const DifferentiableClassifier& model, std::span<const SampleView> samples,
                        std::span<const int> clean, SampleView v,
                        std::vector<int>* perturbed = nullptr);

// Numerator and denominator of the fooling ratio: among samples whose clean
// prediction equals the ground truth, how many change under v.
struct FoolingCounts {
  std::size_t eligible = 0;
  std::size_t fooled = 0;

  // Undefined (nullopt) when no sample was originally correct.
  std::optional<double> ratio() const;
  FoolingCounts& operator+=(const FoolingCounts& o) {
    eligible += o.eligible;
    fooled += o.fooled;
    return *this;
  }
  bool operator==(const FoolingCounts&) const = default;
};

// truth[i] is the model's class index for sample i, or -1 when the sample's
// label is outside the model's label set (never counted as correct).
FoolingCounts fooling_counts(const DifferentiableClassifier& model,
                             std::span<const SampleView> samples, std::span<const int> truth,
                             SampleView v);
std::optional<double> fooling_ratio(const DifferentiableClassifier& model,
                                    std::span<const SampleView> samples,
                                    std::span<const int> truth, SampleView v);

struct AcceptanceEntry {
  std::size_t pass = 0;
  std::size_t sample = 0;
  double rate_before = 0.0;
  std::optional<double> rate_after;  // absent when Deepfool failed
  bool accepted = false;
  DeepfoolStatus deepfool = DeepfoolStatus::kSuccess;
  std::size_t deepfool_iterations = 0;
};

struct UapResult {
  Perturbation v;
  double rate = 0.0;  // raw fooling rate of v on the crafting set
  std::size_t passes = 0;
  bool reached_target = false;
  std::vector<AcceptanceEntry> log;
};

// Hill-climbing universal perturbation: for every sample not yet fooled,
// run Deepfool on x + v, project v + dv onto the norm ball and keep the
// candidate only if it raises the raw fooling rate on the whole set. Stops
// when the rate reaches 1 - alpha or after max_passes passes. Sample order
// is shuffled once with cfg.rng_seed.
UapResult uap_hc(const DifferentiableClassifier& model, std::span<const SampleView> samples,
                 const AttackConfig& cfg);

}  // namespace uap
