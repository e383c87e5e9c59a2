#include "uap/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "uap/errors.hpp"

namespace uap {

Architecture architecture_compact() { return Architecture{}; }

Architecture architecture_wide() { return Architecture{8, 20, 64, 4, 10, 64}; }

NetworkShape network_shape(const Architecture& arch, const FrontendConfig& fe,
                           std::size_t classes) {
  NetworkShape s;
  s.frames = fe.num_frames(kWaveLength);
  s.coeffs = fe.dct_coeffs;
  if (arch.conv1_time == 0 || arch.conv1_freq == 0 || arch.conv2_time == 0 ||
      arch.conv2_freq == 0 || arch.conv1_channels == 0 || arch.conv2_channels == 0) {
    throw ConfigError("architecture extents must be positive");
  }
  if (s.frames < arch.conv1_time + arch.conv2_time - 1 ||
      s.coeffs < arch.conv1_freq + arch.conv2_freq - 1) {
    throw ConfigError("kernels do not fit the " + std::to_string(s.frames) + "x" +
                      std::to_string(s.coeffs) + " feature map");
  }
  s.t1 = s.frames - arch.conv1_time + 1;
  s.f1 = s.coeffs - arch.conv1_freq + 1;
  s.t2 = s.t1 - arch.conv2_time + 1;
  s.f2 = s.f1 - arch.conv2_freq + 1;
  s.flat = s.t2 * s.f2 * arch.conv2_channels;
  s.classes = classes;
  return s;
}

ParamLayout param_layout(const NetworkShape& s, const Architecture& a) {
  ParamLayout l{};
  std::size_t off = 0;
  l.conv1_w = off;
  off += a.conv1_time * a.conv1_freq * a.conv1_channels;
  l.conv1_b = off;
  off += a.conv1_channels;
  l.conv2_w = off;
  off += a.conv2_time * a.conv2_freq * a.conv1_channels * a.conv2_channels;
  l.conv2_b = off;
  off += a.conv2_channels;
  l.fc_w = off;
  off += s.classes * s.flat;
  l.fc_b = off;
  off += s.classes;
  l.feat_mean = off;
  off += s.coeffs;
  l.feat_scale = off;
  off += s.coeffs;
  l.total = off;
  return l;
}

NetworkShape ModelParams::shape() const { return network_shape(arch, frontend, num_classes()); }

ParamLayout ModelParams::layout() const { return param_layout(shape(), arch); }

int ModelParams::class_index(ClassLabel label) const {
  for (std::size_t i = 0; i < label_set.size(); ++i) {
    if (label_set[i] == label) return static_cast<int>(i);
  }
  return -1;
}

void ModelParams::validate() const {
  frontend.validate();
  if (label_set.size() < 2) throw ConfigError("a model needs at least two classes");
  if (values.size() != layout().total) {
    throw ShapeMismatch("parameter count " + std::to_string(values.size()) +
                        " does not match architecture (" + std::to_string(layout().total) + ")");
  }
  for (double v : values) {
    if (!std::isfinite(v)) throw ConfigError("non-finite model parameter");
  }
}

ModelParams init_params(const Architecture& arch, const FrontendConfig& fe,
                        std::vector<ClassLabel> labels, std::uint64_t seed) {
  ModelParams p;
  p.arch = arch;
  p.frontend = fe;
  p.label_set = std::move(labels);
  p.rng_seed = seed;
  const NetworkShape s = p.shape();
  const ParamLayout l = param_layout(s, arch);
  p.values.assign(l.total, 0.0);

  std::mt19937_64 rng(seed);
  auto fill = [&](std::size_t off, std::size_t n, double fan_in, double gain) {
    std::normal_distribution<double> dist(0.0, std::sqrt(gain / fan_in));
    for (std::size_t i = 0; i < n; ++i) p.values[off + i] = dist(rng);
  };
  fill(l.conv1_w, l.conv1_b - l.conv1_w, double(arch.conv1_time * arch.conv1_freq), 2.0);
  fill(l.conv2_w, l.conv2_b - l.conv2_w,
       double(arch.conv2_time * arch.conv2_freq * arch.conv1_channels), 2.0);
  fill(l.fc_w, l.fc_b - l.fc_w, double(s.flat), 1.0);
  std::fill_n(p.values.begin() + static_cast<std::ptrdiff_t>(l.feat_scale), s.coeffs, 1.0);
  return p;
}

std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> out(logits.size());
  if (logits.empty()) return out;
  const double mx = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - mx);
    sum += out[i];
  }
  for (double& v : out) v /= sum;
  return out;
}

namespace {

// Valid stride-1 convolution plus ReLU over a (time, freq, cin) tensor. For
// one output cell the kernel reads, per time offset, `patch` = kf * cin
// contiguous inputs; weights are laid out [dt][patch][out]. N > 0 fixes the
// output channel count at compile time.
template <std::size_t N>
void conv_relu_impl(const double* in, std::size_t row_stride, std::size_t cin,
                    std::size_t out_t, std::size_t out_f, std::size_t kt, std::size_t patch,
                    const double* w, const double* b, std::size_t n_dyn, double* out) {
  const std::size_t n = N > 0 ? N : n_dyn;
  std::vector<double> dyn(N > 0 ? 0 : n);
  double fixed[N > 0 ? N : 1];
  double* __restrict acc = N > 0 ? fixed : dyn.data();
  for (std::size_t t = 0; t < out_t; ++t) {
    for (std::size_t f = 0; f < out_f; ++f) {
      for (std::size_t o = 0; o < n; ++o) acc[o] = b[o];
      for (std::size_t dt = 0; dt < kt; ++dt) {
        const double* x = in + (t + dt) * row_stride + f * cin;
        const double* wrow = w + dt * patch * n;
        for (std::size_t i = 0; i < patch; ++i) {
          const double xi = x[i];
          if (xi == 0.0) continue;
          const double* __restrict wi = wrow + i * n;
          for (std::size_t o = 0; o < n; ++o) acc[o] += xi * wi[o];
        }
      }
      double* dst = out + (t * out_f + f) * n;
      for (std::size_t o = 0; o < n; ++o) dst[o] = std::max(acc[o], 0.0);
    }
  }
}

void conv_relu(const double* in, std::size_t row_stride, std::size_t cin, std::size_t out_t,
               std::size_t out_f, std::size_t kt, std::size_t patch, const double* w,
               const double* b, std::size_t n, double* out) {
#define UAP_CONV_RELU(K) \
  conv_relu_impl<K>(in, row_stride, cin, out_t, out_f, kt, patch, w, b, n, out)
  switch (n) {
    case 4: return UAP_CONV_RELU(4);
    case 8: return UAP_CONV_RELU(8);
    case 16: return UAP_CONV_RELU(16);
    case 32: return UAP_CONV_RELU(32);
    case 64: return UAP_CONV_RELU(64);
    default: return UAP_CONV_RELU(0);
  }
#undef UAP_CONV_RELU
}

// Backward pass of conv_relu_impl given the gradient d at the (already
// ReLU-masked) outputs: accumulates into din and, when non-null, into the
// weight and bias gradients gw, gb.
template <std::size_t N>
void conv_backward_impl(const double* in, std::size_t row_stride, std::size_t cin,
                        std::size_t out_t, std::size_t out_f, std::size_t kt, std::size_t patch,
                        const double* w, const double* dout, std::size_t n_dyn, double* din,
                        double* gw, double* gb) {
  const std::size_t n = N > 0 ? N : n_dyn;
  for (std::size_t t = 0; t < out_t; ++t) {
    for (std::size_t f = 0; f < out_f; ++f) {
      const double* __restrict d = dout + (t * out_f + f) * n;
      bool any = false;
      for (std::size_t o = 0; o < n; ++o) any = any || d[o] != 0.0;
      if (!any) continue;
      if (gb != nullptr) {
        for (std::size_t o = 0; o < n; ++o) gb[o] += d[o];
      }
      for (std::size_t dt = 0; dt < kt; ++dt) {
        const std::size_t in_off = (t + dt) * row_stride + f * cin;
        const std::size_t w_off = dt * patch * n;
        for (std::size_t i = 0; i < patch; ++i) {
          const double* __restrict wi = w + w_off + i * n;
          double acc = 0.0;
          for (std::size_t o = 0; o < n; ++o) acc += wi[o] * d[o];
          din[in_off + i] += acc;
          const double xi = in[in_off + i];
          if (gw != nullptr && xi != 0.0) {
            double* __restrict g = gw + w_off + i * n;
            for (std::size_t o = 0; o < n; ++o) g[o] += xi * d[o];
          }
        }
      }
    }
  }
}

void conv_backward(const double* in, std::size_t row_stride, std::size_t cin, std::size_t out_t,
                   std::size_t out_f, std::size_t kt, std::size_t patch, const double* w,
                   const double* dout, std::size_t n, double* din, double* gw, double* gb) {
#define UAP_CONV_BACKWARD(K) \
  conv_backward_impl<K>(in, row_stride, cin, out_t, out_f, kt, patch, w, dout, n, din, gw, gb)
  switch (n) {
    case 4: return UAP_CONV_BACKWARD(4);
    case 8: return UAP_CONV_BACKWARD(8);
    case 16: return UAP_CONV_BACKWARD(16);
    case 32: return UAP_CONV_BACKWARD(32);
    case 64: return UAP_CONV_BACKWARD(64);
    default: return UAP_CONV_BACKWARD(0);
  }
#undef UAP_CONV_BACKWARD
}

}  // namespace

std::vector<double> network_forward(const ModelParams& p, const FeatureMap& features,
                                    NetworkCache* cache) {
  const NetworkShape s = p.shape();
  const ParamLayout l = param_layout(s, p.arch);
  const Architecture& a = p.arch;
  if (features.frames != s.frames || features.coeffs != s.coeffs) {
    throw ShapeMismatch("feature map shape does not match the model");
  }
  const double* v = p.values.data();
  const std::size_t n1 = a.conv1_channels, n2 = a.conv2_channels;

  NetworkCache local;
  NetworkCache& c = cache != nullptr ? *cache : local;
  c.z.resize(s.frames * s.coeffs);
  for (std::size_t t = 0; t < s.frames; ++t) {
    for (std::size_t f = 0; f < s.coeffs; ++f) {
      c.z[t * s.coeffs + f] =
          (features.values[t * s.coeffs + f] - v[l.feat_mean + f]) * v[l.feat_scale + f];
    }
  }

  c.a1.assign(s.t1 * s.f1 * n1, 0.0);
  conv_relu(c.z.data(), s.coeffs, 1, s.t1, s.f1, a.conv1_time, a.conv1_freq, v + l.conv1_w,
            v + l.conv1_b, n1, c.a1.data());
  c.a2.assign(s.t2 * s.f2 * n2, 0.0);
  conv_relu(c.a1.data(), s.f1 * n1, n1, s.t2, s.f2, a.conv2_time, a.conv2_freq * n1,
            v + l.conv2_w, v + l.conv2_b, n2, c.a2.data());

  std::vector<double> logits(s.classes);
  for (std::size_t j = 0; j < s.classes; ++j) {
    const double* w = v + l.fc_w + j * s.flat;
    double acc = v[l.fc_b + j];
    for (std::size_t m = 0; m < s.flat; ++m) acc += w[m] * c.a2[m];
    logits[j] = acc;
  }
  return logits;
}

FeatureMap network_backward(const ModelParams& p, const NetworkCache& c,
                            std::span<const double> dlogits, double* g) {
  const NetworkShape s = p.shape();
  const ParamLayout l = param_layout(s, p.arch);
  const Architecture& a = p.arch;
  if (dlogits.size() != s.classes || c.a2.size() != s.t2 * s.f2 * a.conv2_channels) {
    throw ShapeMismatch("network backward: gradient or cache shape mismatch");
  }
  const double* v = p.values.data();
  const std::size_t n1 = a.conv1_channels, n2 = a.conv2_channels;

  std::vector<double> d2(s.flat, 0.0);
  for (std::size_t j = 0; j < s.classes; ++j) {
    const double dj = dlogits[j];
    if (dj == 0.0) continue;
    const double* w = v + l.fc_w + j * s.flat;
    for (std::size_t m = 0; m < s.flat; ++m) d2[m] += dj * w[m];
    if (g != nullptr) {
      double* gw = g + l.fc_w + j * s.flat;
      for (std::size_t m = 0; m < s.flat; ++m) gw[m] += dj * c.a2[m];
      g[l.fc_b + j] += dj;
    }
  }
  for (std::size_t m = 0; m < s.flat; ++m) {
    if (c.a2[m] <= 0.0) d2[m] = 0.0;
  }

  std::vector<double> d1(s.t1 * s.f1 * n1, 0.0);
  conv_backward(c.a1.data(), s.f1 * n1, n1, s.t2, s.f2, a.conv2_time, a.conv2_freq * n1,
                v + l.conv2_w, d2.data(), n2, d1.data(),
                g != nullptr ? g + l.conv2_w : nullptr, g != nullptr ? g + l.conv2_b : nullptr);
  for (std::size_t m = 0; m < d1.size(); ++m) {
    if (c.a1[m] <= 0.0) d1[m] = 0.0;
  }

  std::vector<double> dz(s.frames * s.coeffs, 0.0);
  conv_backward(c.z.data(), s.coeffs, 1, s.t1, s.f1, a.conv1_time, a.conv1_freq, v + l.conv1_w,
                d1.data(), n1, dz.data(), g != nullptr ? g + l.conv1_w : nullptr,
                g != nullptr ? g + l.conv1_b : nullptr);

  FeatureMap df{s.frames, s.coeffs, std::vector<double>(s.frames * s.coeffs)};
  for (std::size_t t = 0; t < s.frames; ++t) {
    for (std::size_t f = 0; f < s.coeffs; ++f) {
      df.values[t * s.coeffs + f] = dz[t * s.coeffs + f] * v[l.feat_scale + f];
    }
  }
  return df;
}

namespace {

class WaveformLinearization : public Linearization {
 public:
  WaveformLinearization(const ModelParams& params, const MfccFrontend& fe, SampleView x)
      : params_(params), frontend_(fe), mask_(x.size(), 1.0) {
    std::vector<double> clipped(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      clipped[i] = clip_unit(x[i]);
      if (x[i] > 1.0 || x[i] < -1.0) mask_[i] = 0.0;
    }
    const FeatureMap feats = frontend_.forward(clipped, &mfcc_);
    logits_ = network_forward(params_, feats, &net_);
  }

  const std::vector<double>& logits() const override { return logits_; }

  std::vector<double> vjp(std::span<const double> weights) const override {
    const FeatureMap up = network_backward(params_, net_, weights, nullptr);
    std::vector<double> grad = frontend_.backward(mfcc_, up);
    for (std::size_t i = 0; i < grad.size(); ++i) grad[i] *= mask_[i];
    return grad;
  }

 private:
  const ModelParams& params_;
  const MfccFrontend& frontend_;
  std::vector<double> mask_;
  MfccCache mfcc_;
  NetworkCache net_;
  std::vector<double> logits_;
};

}  // namespace

WaveformModel::WaveformModel(std::shared_ptr<const ModelParams> params)
    : params_(std::move(params)), frontend_(frontend_for(params_->frontend)) {
  params_->validate();
}

WaveformModel::WaveformModel(ModelParams params)
    : WaveformModel(std::make_shared<const ModelParams>(std::move(params))) {}

FeatureMap WaveformModel::features(SampleView x) const {
  bool in_range = true;
  for (double s : x) in_range = in_range && s >= -1.0 && s <= 1.0;
  if (in_range) return frontend_->forward(x);
  std::vector<double> clipped(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) clipped[i] = clip_unit(x[i]);
  return frontend_->forward(clipped);
}

std::vector<double> WaveformModel::logits(SampleView x) const {
  if (x.size() != kWaveLength) throw ShapeMismatch("model input must have 16000 samples");
  return network_forward(*params_, features(x));
}

std::unique_ptr<Linearization> WaveformModel::linearize(SampleView x) const {
  if (x.size() != kWaveLength) throw ShapeMismatch("model input must have 16000 samples");
  return std::make_unique<WaveformLinearization>(*params_, *frontend_, x);
}

Prediction forward(const WaveformModel& model, SampleView x) {
  Prediction pred;
  pred.logits = model.logits(x);
  pred.probabilities = softmax(pred.logits);
  pred.index = argmax(pred.logits);
  pred.label = model.params().label_set[static_cast<std::size_t>(pred.index)];
  return pred;
}

Prediction forward(const ModelParams& params, SampleView x) {
  return forward(WaveformModel(std::make_shared<const ModelParams>(params)), x);
}

std::vector<double> input_gradient(const WaveformModel& model, SampleView x, int class_index) {
  if (class_index < 0 || static_cast<std::size_t>(class_index) >= model.num_classes()) {
    throw ConfigError("class index out of range");
  }
  auto lin = model.linearize(x);
  std::vector<double> weights(model.num_classes(), 0.0);
  weights[static_cast<std::size_t>(class_index)] = 1.0;
  return lin->vjp(weights);
}

std::vector<double> input_gradient(const ModelParams& params, SampleView x, int class_index) {
  return input_gradient(WaveformModel(std::make_shared<const ModelParams>(params)), x,
                        class_index);
}

}  // namespace uap
