#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "uap/classifier.hpp"
#include "uap/frontend.hpp"
#include "uap/model.hpp"

// Data-parallel batch kernels. Each has a serial reference in
// kernels::serial and an OpenMP version in kernels::omp that produces
// bit-identical results; the unqualified entry points dispatch on jobs().
namespace uap::kernels {

struct BatchGradient {
  std::vector<double> grad;  // summed over the batch, ModelParams layout
  double loss_sum = 0.0;
  std::size_t correct = 0;
};

// Cross-entropy loss and gradient for one sample; adds into `grad`.
double sample_gradient(const ModelParams& params, const FeatureMap& features, int target,
                       double* grad, bool* correct);

namespace serial {
std::vector<int> predict_labels(const DifferentiableClassifier& model,
                                std::span<const SampleView> samples, SampleView v);
std::vector<FeatureMap> extract_features(const MfccFrontend& frontend,
                                         std::span<const SampleView> samples);
BatchGradient batch_gradient(const ModelParams& params, std::span<const FeatureMap> features,
                             std::span<const int> targets, std::span<const std::size_t> batch);
}  // namespace serial

namespace omp {
std::vector<int> predict_labels(const DifferentiableClassifier& model,
                                std::span<const SampleView> samples, SampleView v);
std::vector<FeatureMap> extract_features(const MfccFrontend& frontend,
                                         std::span<const SampleView> samples);
BatchGradient batch_gradient(const ModelParams& params, std::span<const FeatureMap> features,
                             std::span<const int> targets, std::span<const std::size_t> batch);
}  // namespace omp

// Worker count for the dispatching entry points (1 = serial path).
void set_jobs(int jobs);
int jobs();

std::vector<int> predict_labels(const DifferentiableClassifier& model,
                                std::span<const SampleView> samples, SampleView v = {});
std::vector<FeatureMap> extract_features(const MfccFrontend& frontend,
                                         std::span<const SampleView> samples);
BatchGradient batch_gradient(const ModelParams& params, std::span<const FeatureMap> features,
                             std::span<const int> targets, std::span<const std::size_t> batch);

}  // namespace uap::kernels
