#include "uap/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "uap/errors.hpp"
#include "uap/kernels.hpp"

namespace uap {

const char* norm_name(NormOrder p) { return p == NormOrder::kL2 ? "2" : "inf"; }

NormOrder parse_norm(const std::string& s) {
  if (s == "2" || s == "l2") return NormOrder::kL2;
  if (s == "inf" || s == "linf" || s == "Inf") return NormOrder::kLinf;
  throw ConfigError("--p must be 2 or inf, got '" + s + "'");
}

const char* status_name(DeepfoolStatus s) {
  switch (s) {
    case DeepfoolStatus::kSuccess:
      return "success";
    case DeepfoolStatus::kMaxIterationsExceeded:
      return "max_iterations_exceeded";
    case DeepfoolStatus::kDegenerateGradient:
      return "degenerate_gradient";
  }
  return "?";
}

void AttackConfig::validate() const {
  if (!(overshoot > 0.0)) throw ConfigError("--overshoot must be > 0");
  if (!(xi > 0.0)) throw ConfigError("--xi must be > 0");
  if (!(alpha > 0.0 && alpha <= 1.0)) throw ConfigError("--alpha must lie in (0, 1]");
  if (deepfool_max_iters == 0) throw ConfigError("--max-iters must be positive");
  if (max_passes == 0) throw ConfigError("--passes must be positive");
  if (trials == 0) throw ConfigError("--trials must be positive");
}

double norm(std::span<const double> v, NormOrder p) {
  if (p == NormOrder::kLinf) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
  }
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

std::vector<double> project(std::span<const double> v, NormOrder p, double xi) {
  std::vector<double> out(v.begin(), v.end());
  if (p == NormOrder::kLinf) {
    for (double& x : out) x = std::clamp(x, -xi, xi);
    return out;
  }
  const double n = norm(v, NormOrder::kL2);
  if (n <= xi) return out;
  double scale = xi / n;
  for (;;) {
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] * scale;
    if (norm(out, NormOrder::kL2) <= xi) break;
    scale = std::nextafter(scale, 0.0);
  }
  return out;
}

Perturbation project(const Perturbation& v, NormOrder p, double xi) {
  return Perturbation{project(v.values, p, xi), p, xi};
}

DeepfoolResult deepfool(const DifferentiableClassifier& model, SampleView x0,
                        const AttackConfig& cfg) {
  const std::size_t k = model.num_classes();
  DeepfoolResult res;
  res.perturbation.assign(x0.size(), 0.0);
  std::vector<double> x(x0.begin(), x0.end());

  auto lin = model.linearize(x);
  const int t = argmax(lin->logits());
  res.original_class = t;
  int current = t;
  std::vector<double> weights(k, 0.0);

  while (current == t) {
    if (res.iterations >= cfg.deepfool_max_iters) {
      res.status = DeepfoolStatus::kMaxIterationsExceeded;
      break;
    }
    const auto& f = lin->logits();
    double best = std::numeric_limits<double>::infinity();
    double best_fp = 0.0, best_norm = 0.0;
    std::vector<double> best_w;
    for (std::size_t j = 0; j < k; ++j) {
      if (static_cast<int>(j) == t) continue;
      std::fill(weights.begin(), weights.end(), 0.0);
      weights[j] = 1.0;
      weights[static_cast<std::size_t>(t)] = -1.0;
      std::vector<double> w = lin->vjp(weights);
      const double wn = norm(w, NormOrder::kL2);
      if (wn < 1e-12) continue;
      const double fp = f[j] - f[static_cast<std::size_t>(t)];
      const double ratio = std::abs(fp) / wn;
      if (ratio < best) {
        best = ratio;
        best_fp = fp;
        best_norm = wn;
        best_w = std::move(w);
      }
    }
    if (best_w.empty()) {
      res.status = DeepfoolStatus::kDegenerateGradient;
      break;
    }
    const double step = (1.0 + cfg.overshoot) * std::abs(best_fp) / (best_norm * best_norm);
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double r = step * best_w[i];
      res.perturbation[i] += r;
      x[i] += r;
    }
    ++res.iterations;
    lin = model.linearize(x);
    current = argmax(lin->logits());
  }
  res.final_class = current;
  if (current != t) res.status = DeepfoolStatus::kSuccess;
  return res;
}

double raw_fooling_rate(const DifferentiableClassifier& model, std::span<const SampleView> samples,
                        std::span<const int> clean, SampleView v, std::vector<int>* perturbed) {
  if (samples.empty()) throw ConfigError("fooling rate of an empty set");
  const auto after = kernels::predict_labels(model, samples, v);
  std::size_t fooled = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) fooled += after[i] != clean[i] ? 1 : 0;
  if (perturbed != nullptr) *perturbed = after;
  return static_cast<double>(fooled) / static_cast<double>(samples.size());
}

double raw_fooling_rate(const DifferentiableClassifier& model, std::span<const SampleView> samples,
                        SampleView v) {
  if (samples.empty()) throw ConfigError("fooling rate of an empty set");
  const auto clean = kernels::predict_labels(model, samples);
  return raw_fooling_rate(model, samples, clean, v);
}

std::optional<double> FoolingCounts::ratio() const {
  if (eligible == 0) return std::nullopt;
  return static_cast<double>(fooled) / static_cast<double>(eligible);
}

FoolingCounts fooling_counts(const DifferentiableClassifier& model,
                             std::span<const SampleView> samples, std::span<const int> truth,
                             SampleView v) {
  if (samples.size() != truth.size()) throw ShapeMismatch("labels and samples differ in count");
  const auto clean = kernels::predict_labels(model, samples);
  // Only originally correct samples need the perturbed prediction.
  std::vector<SampleView> eligible;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (truth[i] >= 0 && clean[i] == truth[i]) eligible.push_back(samples[i]);
  }
  FoolingCounts c;
  c.eligible = eligible.size();
  if (eligible.empty()) return c;
  const auto after = kernels::predict_labels(model, eligible, v);
  std::size_t e = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (truth[i] >= 0 && clean[i] == truth[i]) {
      c.fooled += after[e] != clean[i] ? 1 : 0;
      ++e;
    }
  }
  return c;
}

std::optional<double> fooling_ratio(const DifferentiableClassifier& model,
                                    std::span<const SampleView> samples,
                                    std::span<const int> truth, SampleView v) {
  return fooling_counts(model, samples, truth, v).ratio();
}

UapResult uap_hc(const DifferentiableClassifier& model, std::span<const SampleView> samples,
                 const AttackConfig& cfg) {
  cfg.validate();
  if (samples.empty()) throw ConfigError("UAP-HC needs a nonempty sample set");
  const std::size_t d = samples.front().size();

  UapResult res;
  res.v = Perturbation{std::vector<double>(d, 0.0), cfg.p, cfg.xi};
  const auto clean = kernels::predict_labels(model, samples);
  std::vector<int> current = clean;  // predictions under the current v

  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(cfg.rng_seed);
  std::shuffle(order.begin(), order.end(), rng);

  const double target = 1.0 - cfg.alpha;
  std::vector<double> shifted(d);
  std::vector<int> candidate_preds;
  while (res.rate < target && res.passes < cfg.max_passes) {
    for (std::size_t idx : order) {
      if (current[idx] != clean[idx]) continue;  // already fooled by v

      const SampleView x = samples[idx];
      for (std::size_t i = 0; i < d; ++i) shifted[i] = x[i] + res.v.values[i];
      const DeepfoolResult df = deepfool(model, shifted, cfg);

      AcceptanceEntry entry;
      entry.pass = res.passes;
      entry.sample = idx;
      entry.rate_before = res.rate;
      entry.deepfool = df.status;
      entry.deepfool_iterations = df.iterations;
      if (!df.success()) {
        res.log.push_back(entry);
        continue;
      }

      for (std::size_t i = 0; i < d; ++i) shifted[i] = res.v.values[i] + df.perturbation[i];
      std::vector<double> cand = project(shifted, cfg.p, cfg.xi);
      const double rate = raw_fooling_rate(model, samples, clean, cand, &candidate_preds);
      entry.rate_after = rate;
      if (res.rate < rate) {
        entry.accepted = true;
        res.v.values = std::move(cand);
        res.rate = rate;
        current = candidate_preds;
      }
      res.log.push_back(entry);
    }
    ++res.passes;
  }
  res.reached_target = res.rate >= target;
  return res;
}

}  // namespace uap
