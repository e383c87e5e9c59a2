#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include "uap/waveform.hpp"

namespace uap {

// First index of the largest entry; ties go to the lowest index.
int argmax(std::span<const double> values);

// Logits and vector-Jacobian products at one fixed input.
class Linearization {
 public:
  virtual ~Linearization() = default;
  virtual const std::vector<double>& logits() const = 0;
  // Gradient of sum_j weights[j] * logit_j with respect to the input.
  virtual std::vector<double> vjp(std::span<const double> weights) const = 0;
};

// What the attacks need from a model: logits and input gradients. All
// methods are const and safe to call concurrently.
class DifferentiableClassifier {
 public:
  virtual ~DifferentiableClassifier() = default;
  virtual std::size_t num_classes() const = 0;
  virtual std::size_t input_size() const = 0;
  virtual std::vector<double> logits(SampleView x) const = 0;
  virtual std::unique_ptr<Linearization> linearize(SampleView x) const = 0;

  int predict(SampleView x) const { return argmax(logits(x)); }
  // Prediction on x + v; an empty v means the clean input.
  int predict(SampleView x, SampleView v) const;
};

}  // namespace uap
