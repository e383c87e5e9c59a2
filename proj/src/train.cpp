#include "uap/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "uap/errors.hpp"
#include "uap/kernels.hpp"

namespace uap {

std::vector<ClassLabel> labels_in(const std::vector<Waveform>& set) {
  std::vector<bool> seen(kNumLabels, false);
  for (const auto& w : set) {
    if (w.label) seen[static_cast<std::size_t>(*w.label)] = true;
  }
  std::vector<ClassLabel> out;
  for (std::size_t i = 0; i < kNumLabels; ++i) {
    if (seen[i]) out.push_back(static_cast<ClassLabel>(i));
  }
  return out;
}

double accuracy(const WaveformModel& model, const std::vector<Waveform>& set) {
  if (set.empty()) return 0.0;
  const auto preds = kernels::predict_labels(model, views(set));
  std::size_t ok = 0;
  for (std::size_t i = 0; i < set.size(); ++i) {
    if (set[i].label && preds[i] == model.params().class_index(*set[i].label)) ++ok;
  }
  return static_cast<double>(ok) / static_cast<double>(set.size());
}

TrainResult train(const std::vector<Waveform>& train_set, const Architecture& arch,
                  const FrontendConfig& frontend, const TrainConfig& cfg,
                  std::vector<ClassLabel> labels, const std::vector<Waveform>* valid_set) {
  if (train_set.empty()) throw ConfigError("training set is empty");
  if (cfg.batch == 0 || cfg.epochs == 0) throw ConfigError("epochs and batch must be positive");
  if (labels.empty()) labels = labels_in(train_set);

  ModelParams params = init_params(arch, frontend, labels, cfg.seed);
  const ParamLayout layout = params.layout();
  const NetworkShape shape = params.shape();

  std::vector<int> targets(train_set.size());
  for (std::size_t i = 0; i < train_set.size(); ++i) {
    if (!train_set[i].label) throw ConfigError("training sample without a label");
    targets[i] = params.class_index(*train_set[i].label);
    if (targets[i] < 0) {
      throw ConfigError("training label '" + std::string(label_name(*train_set[i].label)) +
                        "' is not in the model label set");
    }
  }

  const auto fe = frontend_for(frontend);
  const auto feats = kernels::extract_features(*fe, views(train_set));

  // Per-coefficient standardization.
  for (std::size_t c = 0; c < shape.coeffs; ++c) {
    double sum = 0.0, sq = 0.0;
    std::size_t n = 0;
    for (const auto& f : feats) {
      for (std::size_t t = 0; t < f.frames; ++t) {
        const double v = f.at(t, c);
        sum += v;
        sq += v * v;
        ++n;
      }
    }
    const double mean = sum / static_cast<double>(n);
    const double var = std::max(sq / static_cast<double>(n) - mean * mean, 0.0);
    params.values[layout.feat_mean + c] = mean;
    params.values[layout.feat_scale + c] = 1.0 / std::max(std::sqrt(var), 1e-8);
  }

  std::vector<double> m(params.values.size(), 0.0), v(params.values.size(), 0.0);
  std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);

  TrainResult result;
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    const double lr = cfg.lr / (1.0 + cfg.lr_decay * static_cast<double>(epoch));
    double loss_sum = 0.0;
    std::size_t correct = 0;

    for (std::size_t start = 0; start < order.size(); start += cfg.batch) {
      const std::size_t end = std::min(order.size(), start + cfg.batch);
      std::span<const std::size_t> batch(order.data() + start, end - start);
      const auto bg = kernels::batch_gradient(params, feats, targets, batch);
      if (!std::isfinite(bg.loss_sum)) {
        throw TrainingDiverged("non-finite loss at epoch " + std::to_string(epoch) +
                               ", batch starting at " + std::to_string(start) +
                               " (lr " + std::to_string(lr) + ")");
      }
      loss_sum += bg.loss_sum;
      correct += bg.correct;

      ++step;
      const double inv_b = 1.0 / static_cast<double>(batch.size());
      const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
      // Normalization statistics are fixed; only network weights move.
      for (std::size_t k = 0; k < layout.feat_mean; ++k) {
        const double g = bg.grad[k] * inv_b;
        m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * g;
        v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * g * g;
        params.values[k] -= lr * (m[k] / c1) / (std::sqrt(v[k] / c2) + cfg.adam_eps);
      }
    }

    EpochRecord rec;
    rec.epoch = epoch + 1;
    rec.loss = loss_sum / static_cast<double>(order.size());
    rec.train_accuracy = static_cast<double>(correct) / static_cast<double>(order.size());
    if (valid_set != nullptr && !valid_set->empty()) {
      rec.valid_accuracy = accuracy(WaveformModel(params), *valid_set);
    }
    result.log.push_back(rec);
  }

  params.validate();
  result.params = std::move(params);
  return result;
}

}  // namespace uap
