#include "uap/experiment.hpp"

#include <algorithm>
#include <random>
#include <string>

#include "uap/errors.hpp"

namespace uap {

void UniversalityLevel::validate(const std::vector<ClassLabel>& model_labels) const {
  for (ClassLabel c : classes) {
    if (std::find(model_labels.begin(), model_labels.end(), c) == model_labels.end()) {
      throw ConfigError("class '" + std::string(label_name(c)) + "' is not known to the model");
    }
  }
  auto sorted = classes;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw ConfigError("--classes contains duplicates");
  }
  const std::size_t k = model_labels.size();
  switch (level) {
    case 1:
      if (classes.size() != 1) throw ConfigError("--level 1 needs exactly one class");
      break;
    case 2:
      if (classes.size() <= 1 || classes.size() >= k) {
        throw ConfigError("--level 2 needs more than one and fewer than all classes");
      }
      break;
    case 3:
      if (classes.size() != k) throw ConfigError("--level 3 covers every model class");
      break;
    default:
      throw ConfigError("--level must be 1, 2 or 3");
  }
}

UniversalityLevel make_level(int level, std::vector<ClassLabel> classes,
                             const std::vector<ClassLabel>& model_labels) {
  if (level == 3 && classes.empty()) classes = model_labels;
  std::sort(classes.begin(), classes.end());
  UniversalityLevel l{level, std::move(classes)};
  l.validate(model_labels);
  return l;
}

std::uint64_t trial_seed(std::uint64_t seed, std::size_t trial) {
  std::seed_seq seq{seed, static_cast<std::uint64_t>(trial), std::uint64_t{0x5541502d4843}};
  std::mt19937_64 rng(seq);
  return rng();
}

std::vector<std::size_t> draw_subset(const std::vector<Waveform>& pool,
                                     const std::vector<ClassLabel>& classes,
                                     std::size_t per_class, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> out;
  for (ClassLabel c : classes) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < pool.size(); ++i) {
      if (pool[i].label == c) idx.push_back(i);
    }
    if (idx.size() < per_class) {
      throw InsufficientSamples("class '" + std::string(label_name(c)) + "' has " +
                                std::to_string(idx.size()) + " samples, " +
                                std::to_string(per_class) + " requested");
    }
    std::shuffle(idx.begin(), idx.end(), rng);
    out.insert(out.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(per_class));
  }
  return out;
}

std::vector<int> truth_indices(const ModelParams& params, const std::vector<Waveform>& set) {
  std::vector<int> out(set.size(), -1);
  for (std::size_t i = 0; i < set.size(); ++i) {
    if (set[i].label) out[i] = params.class_index(*set[i].label);
  }
  return out;
}

ExperimentResult run_level_experiment(const UniversalityLevel& level,
                                      const std::vector<Waveform>& pool,
                                      const WaveformModel& model, const AttackConfig& cfg,
                                      std::size_t per_class) {
  cfg.validate();
  level.validate(model.params().label_set);
  if (per_class == 0) throw ConfigError("--per-class must be positive");

  ExperimentResult result;
  result.level = level;
  double best_score = -1.0;
  for (std::size_t t = 0; t < cfg.trials; ++t) {
    TrialRecord rec;
    rec.trial = t;
    rec.seed = trial_seed(cfg.rng_seed, t);
    rec.subset = draw_subset(pool, level.classes, per_class, rec.seed);

    std::vector<Waveform> subset;
    subset.reserve(rec.subset.size());
    for (std::size_t i : rec.subset) subset.push_back(pool[i]);
    const auto xs = views(subset);

    AttackConfig trial_cfg = cfg;
    trial_cfg.rng_seed = rec.seed;
    rec.uap = uap_hc(model, xs, trial_cfg);
    const auto truth = truth_indices(model.params(), subset);
    rec.train_counts = fooling_counts(model, xs, truth, rec.uap.v.values);
    rec.train_fr = rec.train_counts.ratio();

    // Undefined ratios rank below every defined one.
    const double score = rec.train_fr.value_or(-1.0);
    if (t == 0 || score > best_score) {
      result.best = t;
      best_score = score;
    }
    result.trials.push_back(std::move(rec));
  }
  return result;
}

}  // namespace uap
