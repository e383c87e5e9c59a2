#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "uap/classifier.hpp"
#include "uap/frontend.hpp"
#include "uap/labels.hpp"
#include "uap/waveform.hpp"

namespace uap {

// Two valid-padded stride-1 convolutions with ReLU, then a dense layer to
// the logits. Kernel extents are time x frequency.
struct Architecture {
  std::size_t conv1_time = 8;
  std::size_t conv1_freq = 4;
  std::size_t conv1_channels = 8;
  std::size_t conv2_time = 4;
  std::size_t conv2_freq = 3;
  std::size_t conv2_channels = 8;

  bool operator==(const Architecture&) const = default;
};

Architecture architecture_compact();
// 8x20x64 and 4x10x64 kernels; needs at least 29 cepstral coefficients.
Architecture architecture_wide();

struct NetworkShape {
  std::size_t frames = 0, coeffs = 0;
  std::size_t t1 = 0, f1 = 0, t2 = 0, f2 = 0;
  std::size_t flat = 0, classes = 0;
};

// Offsets of each array inside ModelParams::values, in declaration order.
struct ParamLayout {
  std::size_t conv1_w, conv1_b, conv2_w, conv2_b, fc_w, fc_b, feat_mean, feat_scale, total;
};

struct ModelParams {
  Architecture arch;
  FrontendConfig frontend;
  std::vector<ClassLabel> label_set;
  std::uint64_t rng_seed = 0;
  // conv1 W[t][f][o], b; conv2 W[t][f][i][o], b; fc W[class][flat], b;
  // per-coefficient feature mean and 1/std applied before conv1.
  std::vector<double> values;

  std::size_t num_classes() const { return label_set.size(); }
  NetworkShape shape() const;
  ParamLayout layout() const;

  std::span<double> block(std::size_t offset, std::size_t count) {
    return std::span<double>(values).subspan(offset, count);
  }
  std::span<const double> block(std::size_t offset, std::size_t count) const {
    return std::span<const double>(values).subspan(offset, count);
  }

  // Index of `label` in label_set, or -1.
  int class_index(ClassLabel label) const;
  void validate() const;
};

NetworkShape network_shape(const Architecture& arch, const FrontendConfig& fe, std::size_t classes);
ParamLayout param_layout(const NetworkShape& s, const Architecture& arch);

// He-initialized weights, zero biases, identity feature normalization.
ModelParams init_params(const Architecture& arch, const FrontendConfig& fe,
                        std::vector<ClassLabel> labels, std::uint64_t seed);

struct Prediction {
  std::vector<double> logits;
  std::vector<double> probabilities;
  int index = 0;
  ClassLabel label = ClassLabel::kSilence;
};

std::vector<double> softmax(std::span<const double> logits);

// Activations kept for backpropagation.
struct NetworkCache {
  std::vector<double> z;   // normalized features
  std::vector<double> a1;  // conv1 after ReLU
  std::vector<double> a2;  // conv2 after ReLU
};

std::vector<double> network_forward(const ModelParams& p, const FeatureMap& features,
                                    NetworkCache* cache = nullptr);

// Backpropagates dlogits. Adds parameter gradients into `param_grads` when
// non-null (same layout as ModelParams::values) and returns d/dfeatures.
FeatureMap network_backward(const ModelParams& p, const NetworkCache& cache,
                            std::span<const double> dlogits, double* param_grads);

// Waveform-level model: clips its input to [-1, 1], then MFCC and network.
class WaveformModel : public DifferentiableClassifier {
 public:
  explicit WaveformModel(std::shared_ptr<const ModelParams> params);
  explicit WaveformModel(ModelParams params);

  const ModelParams& params() const { return *params_; }
  const MfccFrontend& frontend() const { return *frontend_; }

  std::size_t num_classes() const override { return params_->num_classes(); }
  std::size_t input_size() const override { return kWaveLength; }
  std::vector<double> logits(SampleView x) const override;
  std::unique_ptr<Linearization> linearize(SampleView x) const override;

  FeatureMap features(SampleView x) const;

 private:
  std::shared_ptr<const ModelParams> params_;
  std::shared_ptr<const MfccFrontend> frontend_;
};

Prediction forward(const WaveformModel& model, SampleView x);
Prediction forward(const ModelParams& params, SampleView x);

// Gradient of the pre-softmax logit `class_index` with respect to every
// waveform sample.
std::vector<double> input_gradient(const WaveformModel& model, SampleView x, int class_index);
std::vector<double> input_gradient(const ModelParams& params, SampleView x, int class_index);

}  // namespace uap
