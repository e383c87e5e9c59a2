#include "uap/kernels.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace uap::kernels {
namespace {

std::atomic<int> g_jobs{1};

}  // namespace

double sample_gradient(const ModelParams& params, const FeatureMap& features, int target,
                       double* grad, bool* correct) {
  NetworkCache cache;
  const std::vector<double> logits = network_forward(params, features, &cache);
  const double mx = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double l : logits) sum += std::exp(l - mx);
  const double lse = mx + std::log(sum);
  std::vector<double> dlogits(logits.size());
  for (std::size_t j = 0; j < logits.size(); ++j) dlogits[j] = std::exp(logits[j] - lse);
  dlogits[static_cast<std::size_t>(target)] -= 1.0;
  network_backward(params, cache, dlogits, grad);
  if (correct != nullptr) *correct = argmax(logits) == target;
  return lse - logits[static_cast<std::size_t>(target)];
}

namespace serial {

std::vector<int> predict_labels(const DifferentiableClassifier& model,
                                std::span<const SampleView> samples, SampleView v) {
  std::vector<int> out(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) out[i] = model.predict(samples[i], v);
  return out;
}

std::vector<FeatureMap> extract_features(const MfccFrontend& frontend,
                                         std::span<const SampleView> samples) {
  std::vector<FeatureMap> out(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) out[i] = frontend.forward(samples[i]);
  return out;
}

BatchGradient batch_gradient(const ModelParams& params, std::span<const FeatureMap> features,
                             std::span<const int> targets, std::span<const std::size_t> batch) {
  BatchGradient out;
  out.grad.assign(params.values.size(), 0.0);
  std::vector<double> slot(params.values.size());
  for (std::size_t b = 0; b < batch.size(); ++b) {
    std::fill(slot.begin(), slot.end(), 0.0);
    bool ok = false;
    const std::size_t i = batch[b];
    out.loss_sum += sample_gradient(params, features[i], targets[i], slot.data(), &ok);
    out.correct += ok ? 1 : 0;
    for (std::size_t k = 0; k < slot.size(); ++k) out.grad[k] += slot[k];
  }
  return out;
}

}  // namespace serial

namespace omp {

std::vector<int> predict_labels(const DifferentiableClassifier& model,
                                std::span<const SampleView> samples, SampleView v) {
  std::vector<int> out(samples.size());
  const auto n = static_cast<std::ptrdiff_t>(samples.size());
#pragma omp parallel for schedule(dynamic, 4)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    out[static_cast<std::size_t>(i)] = model.predict(samples[static_cast<std::size_t>(i)], v);
  }
  return out;
}

std::vector<FeatureMap> extract_features(const MfccFrontend& frontend,
                                         std::span<const SampleView> samples) {
  std::vector<FeatureMap> out(samples.size());
  const auto n = static_cast<std::ptrdiff_t>(samples.size());
#pragma omp parallel for schedule(dynamic, 8)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    out[static_cast<std::size_t>(i)] = frontend.forward(samples[static_cast<std::size_t>(i)]);
  }
  return out;
}

BatchGradient batch_gradient(const ModelParams& params, std::span<const FeatureMap> features,
                             std::span<const int> targets, std::span<const std::size_t> batch) {
  const std::size_t np = params.values.size();
  std::vector<double> slots(batch.size() * np, 0.0);
  std::vector<double> losses(batch.size());
  std::vector<char> ok(batch.size());
  const auto n = static_cast<std::ptrdiff_t>(batch.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t b = 0; b < n; ++b) {
    const auto bi = static_cast<std::size_t>(b);
    const std::size_t i = batch[bi];
    bool correct = false;
    losses[bi] = sample_gradient(params, features[i], targets[i], slots.data() + bi * np, &correct);
    ok[bi] = correct ? 1 : 0;
  }
  // Reduce in sample order so the sum matches the serial kernel bit for bit.
  BatchGradient out;
  out.grad.assign(np, 0.0);
  for (std::size_t b = 0; b < batch.size(); ++b) {
    out.loss_sum += losses[b];
    out.correct += static_cast<std::size_t>(ok[b]);
    const double* s = slots.data() + b * np;
    for (std::size_t k = 0; k < np; ++k) out.grad[k] += s[k];
  }
  return out;
}

}  // namespace omp

void set_jobs(int jobs) {
  g_jobs = std::max(1, jobs);
#ifdef _OPENMP
  omp_set_num_threads(g_jobs);
#endif
}

int jobs() { return g_jobs; }

std::vector<int> predict_labels(const DifferentiableClassifier& model,
                                std::span<const SampleView> samples, SampleView v) {
  return jobs() > 1 ? omp::predict_labels(model, samples, v)
                    : serial::predict_labels(model, samples, v);
}

std::vector<FeatureMap> extract_features(const MfccFrontend& frontend,
                                         std::span<const SampleView> samples) {
  return jobs() > 1 ? omp::extract_features(frontend, samples)
                    : serial::extract_features(frontend, samples);
}

BatchGradient batch_gradient(const ModelParams& params, std::span<const FeatureMap> features,
                             std::span<const int> targets, std::span<const std::size_t> batch) {
  return jobs() > 1 ? omp::batch_gradient(params, features, targets, batch)
                    : serial::batch_gradient(params, features, targets, batch);
}

}  // namespace uap::kernels
