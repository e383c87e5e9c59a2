#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "uap/model.hpp"
#include "uap/waveform.hpp"

namespace uap {

struct TrainConfig {
  std::size_t epochs = 30;
  std::size_t batch = 32;
  double lr = 2e-3;
  // Step size for epoch e is lr / (1 + lr_decay * e).
  double lr_decay = 0.1;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 1;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double loss = 0.0;  // mean cross-entropy over the epoch's minibatches
  double train_accuracy = 0.0;
  std::optional<double> valid_accuracy;
};

struct TrainResult {
  ModelParams params;
  std::vector<EpochRecord> log;
};

// Labels present in the set, in canonical order.
std::vector<ClassLabel> labels_in(const std::vector<Waveform>& set);

// Minibatch Adam on cross-entropy. Features are extracted once and
// normalized per coefficient with training-set statistics. Deterministic for
// a fixed seed regardless of the worker count. Throws TrainingDiverged on a
// non-finite loss.
TrainResult train(const std::vector<Waveform>& train_set, const Architecture& arch,
                  const FrontendConfig& frontend, const TrainConfig& cfg,
                  std::vector<ClassLabel> labels = {},
                  const std::vector<Waveform>* valid_set = nullptr);

// Fraction of labeled samples predicted correctly (clean inputs).
double accuracy(const WaveformModel& model, const std::vector<Waveform>& set);

}  // namespace uap
