#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "support.hpp"
#include "uap/kernels.hpp"
#include "uap/model.hpp"

using namespace uap;

namespace {

struct JobsGuard {
  int saved = kernels::jobs();
  ~JobsGuard() { kernels::set_jobs(saved); }
};

std::vector<SampleView> first_views(const std::vector<Waveform>& set, std::size_t n) {
  std::vector<SampleView> out;
  for (std::size_t i = 0; i < n && i < set.size(); ++i) out.push_back(set[i].samples);
  return out;
}

}  // namespace

TEST_SUITE("kernels") {
  TEST_CASE("prediction kernels agree") {
    const auto& s = testing::toy_setup();
    const auto xs = first_views(s.data.valid, 40);
    std::mt19937_64 rng(1);
    const auto v = testing::random_vector(kWaveLength, 0.002, rng);
    const auto a = kernels::serial::predict_labels(*s.model, xs, v);
    const auto b = kernels::omp::predict_labels(*s.model, xs, v);
    CHECK(a == b);
    CHECK(kernels::serial::predict_labels(*s.model, xs, {}) ==
          kernels::omp::predict_labels(*s.model, xs, {}));
  }

  TEST_CASE("feature kernels agree bit for bit") {
    const auto& s = testing::toy_setup();
    const auto xs = first_views(s.data.train, 24);
    const auto fe = frontend_for(frontend_model_b());
    const auto a = kernels::serial::extract_features(*fe, xs);
    const auto b = kernels::omp::extract_features(*fe, xs);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].values == b[i].values);
  }

  TEST_CASE("batch gradient kernels agree bit for bit") {
    const auto& s = testing::toy_setup();
    const auto xs = first_views(s.data.train, 48);
    const auto feats = kernels::serial::extract_features(s.model->frontend(), xs);
    std::vector<int> targets;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      targets.push_back(s.trained.params.class_index(*s.data.train[i].label));
    }
    std::vector<std::size_t> batch(xs.size());
    std::iota(batch.rbegin(), batch.rend(), 0);
    const auto a = kernels::serial::batch_gradient(s.trained.params, feats, targets, batch);
    JobsGuard guard;
    for (int j : {2, 3, 5}) {
      kernels::set_jobs(j);
      const auto b = kernels::omp::batch_gradient(s.trained.params, feats, targets, batch);
      CHECK(a.grad == b.grad);
      CHECK(a.loss_sum == b.loss_sum);
      CHECK(a.correct == b.correct);
    }
  }

  TEST_CASE("dispatch follows the job count") {
    JobsGuard guard;
    kernels::set_jobs(0);
    CHECK(kernels::jobs() == 1);
    kernels::set_jobs(4);
    CHECK(kernels::jobs() == 4);
    const auto& s = testing::toy_setup();
    const auto xs = first_views(s.data.valid, 8);
    const auto par = kernels::predict_labels(*s.model, xs);
    kernels::set_jobs(1);
    CHECK(kernels::predict_labels(*s.model, xs) == par);
  }

  TEST_CASE("parameter gradient matches finite differences") {
    const auto& s = testing::toy_setup();
    ModelParams p = s.trained.params;
    const auto feats = s.model->features(s.data.valid[3].samples);
    const int target = p.class_index(*s.data.valid[3].label);
    std::vector<double> grad(p.values.size(), 0.0);
    kernels::sample_gradient(p, feats, target, grad.data(), nullptr);
    const ParamLayout l = p.layout();
    std::mt19937_64 rng(2);
    std::vector<std::size_t> probes;
    for (std::size_t base : {l.conv1_w, l.conv1_b, l.conv2_w, l.conv2_b, l.fc_w, l.fc_b}) {
      for (int k = 0; k < 3; ++k) probes.push_back(base + rng() % 4);
    }
    for (std::size_t k : probes) {
      const double h = 1e-5, orig = p.values[k];
      std::vector<double> scratch(p.values.size());
      p.values[k] = orig + h;
      const double up = kernels::sample_gradient(p, feats, target, scratch.data(), nullptr);
      p.values[k] = orig - h;
      const double down = kernels::sample_gradient(p, feats, target, scratch.data(), nullptr);
      p.values[k] = orig;
      const double fd = (up - down) / (2 * h);
      CHECK(std::abs(fd - grad[k]) <= 1e-6 * std::max(1.0, std::abs(grad[k])));
    }
  }
}
