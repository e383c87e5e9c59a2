#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "uap/attacks.hpp"
#include "uap/labels.hpp"
#include "uap/model.hpp"
#include "uap/waveform.hpp"

namespace uap {

// Level 1: one class. Level 2: a proper subset of more than one class.
// Level 3: every class of the model.
struct UniversalityLevel {
  int level = 3;
  std::vector<ClassLabel> classes;

  // Throws ConfigError when the class count does not fit the level.
  void validate(const std::vector<ClassLabel>& model_labels) const;
};

// Builds a level; for level 3 an empty class list means all model labels.
UniversalityLevel make_level(int level, std::vector<ClassLabel> classes,
                             const std::vector<ClassLabel>& model_labels);

struct TrialRecord {
  std::size_t trial = 0;
  std::uint64_t seed = 0;
  std::vector<std::size_t> subset;  // indices into the training pool
  UapResult uap;
  FoolingCounts train_counts;
  std::optional<double> train_fr;
};

struct ExperimentResult {
  UniversalityLevel level;
  std::vector<TrialRecord> trials;
  std::size_t best = 0;

  const TrialRecord& best_trial() const { return trials.at(best); }
};

// Seed of trial `trial` derived from the experiment seed.
std::uint64_t trial_seed(std::uint64_t seed, std::size_t trial);

// Draws `per_class` samples of each level class without replacement.
std::vector<std::size_t> draw_subset(const std::vector<Waveform>& pool,
                                     const std::vector<ClassLabel>& classes,
                                     std::size_t per_class, std::uint64_t seed);

// Runs cfg.trials independent UAP-HC trials, each on its own subset of the
// pool, and selects the perturbation with the highest training fooling ratio
// (ties go to the earlier trial).
ExperimentResult run_level_experiment(const UniversalityLevel& level,
                                      const std::vector<Waveform>& pool,
                                      const WaveformModel& model, const AttackConfig& cfg,
                                      std::size_t per_class);

// Ground-truth class indices of a set in the model's label space.
std::vector<int> truth_indices(const ModelParams& params, const std::vector<Waveform>& set);

}  // namespace uap
