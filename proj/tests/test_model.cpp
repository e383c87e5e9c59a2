#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>
#include <thread>

#include <omp.h>

#include "support.hpp"
#include "uap/errors.hpp"
#include "uap/model.hpp"
#include "uap/serialize.hpp"

using namespace uap;

namespace {

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  long double s = 0.0L;
  for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<long double>(a[i]) * b[i];
  return static_cast<double>(s);
}

double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300});
}

std::vector<double> unit_vector(std::size_t n, std::mt19937_64& rng) {
  auto v = testing::random_vector(n, 1.0, rng);
  const double norm = std::sqrt(dot(v, v));
  for (double& e : v) e /= norm;
  return v;
}

// Random 12-class model with nonzero feature statistics.
ModelParams random_params(const FrontendConfig& fe, std::uint64_t seed) {
  ModelParams p = init_params(architecture_compact(), fe, all_labels(), seed);
  const ParamLayout l = p.layout();
  std::mt19937_64 rng(seed + 100);
  std::normal_distribution<double> nd(0.0, 1.0);
  for (std::size_t i = l.conv1_b; i < l.conv2_w; ++i) p.values[i] = 0.1 * nd(rng);
  for (std::size_t i = l.conv2_b; i < l.fc_w; ++i) p.values[i] = 0.1 * nd(rng);
  for (std::size_t c = 0; c < fe.dct_coeffs; ++c) {
    p.values[l.feat_mean + c] = -20.0 + nd(rng);
    p.values[l.feat_scale + c] = 0.2;
  }
  return p;
}

}  // namespace

TEST_SUITE("model") {
  TEST_CASE("softmax normalizes and ignores constant shifts") {
    std::mt19937_64 rng(3);
    for (int i = 0; i < 200; ++i) {
      auto z = testing::random_vector(12, 5.0, rng);
      const auto p = softmax(z);
      CHECK(std::abs(std::accumulate(p.begin(), p.end(), 0.0) - 1.0) < 1e-9);
      for (double& e : z) e += 123.0;
      const auto q = softmax(z);
      for (std::size_t j = 0; j < p.size(); ++j) CHECK(std::abs(p[j] - q[j]) < 1e-12);
      CHECK(argmax(p) == argmax(q));
    }
    CHECK(argmax(std::vector<double>{1.0, 3.0, 3.0, 2.0}) == 1);
  }

  TEST_CASE("zero dense layer yields uniform probabilities") {
    ModelParams p = init_params(architecture_compact(), frontend_model_a(), all_labels(), 5);
    const ParamLayout l = p.layout();
    std::fill(p.values.begin() + static_cast<std::ptrdiff_t>(l.fc_w),
              p.values.begin() + static_cast<std::ptrdiff_t>(l.feat_mean), 0.0);
    std::mt19937_64 rng(1);
    const auto pred = forward(p, testing::random_waveform(rng));
    REQUIRE(pred.probabilities.size() == 12);
    for (double q : pred.probabilities) CHECK(std::abs(q - 1.0 / 12.0) < 1e-15);
    CHECK(pred.index == 0);
    CHECK(pred.label == ClassLabel::kSilence);
  }

  TEST_CASE("prediction probabilities sum to one") {
    const ModelParams p = random_params(frontend_model_a(), 9);
    std::mt19937_64 rng(2);
    for (int i = 0; i < 10; ++i) {
      const auto pred = forward(p, testing::random_waveform(rng));
      CHECK(std::abs(std::accumulate(pred.probabilities.begin(), pred.probabilities.end(), 0.0) -
                     1.0) < 1e-9);
      CHECK(pred.index == argmax(pred.logits));
    }
  }

  TEST_CASE("shifting every dense bias leaves the prediction unchanged") {
    ModelParams p = random_params(frontend_model_a(), 4);
    ModelParams q = p;
    const ParamLayout l = q.layout();
    for (std::size_t j = 0; j < q.num_classes(); ++j) q.values[l.fc_b + j] += 7.5;
    std::mt19937_64 rng(6);
    for (int i = 0; i < 5; ++i) {
      const auto x = testing::random_waveform(rng);
      const auto a = forward(p, x), b = forward(q, x);
      CHECK(a.index == b.index);
      for (std::size_t j = 0; j < 12; ++j) {
        CHECK(std::abs(a.probabilities[j] - b.probabilities[j]) < 1e-12);
      }
    }
  }

  TEST_CASE("untrained model is near chance on a balanced 12-class set") {
    SynthConfig sc;
    sc.labels = toy_labels(12);
    sc.per_class = 30;
    sc.valid_fraction = 0.0;
    sc.seed = 3;
    const Dataset d = synth_dataset(sc);
    REQUIRE(d.train.size() == 360);
    const WaveformModel m(init_params(architecture_compact(), frontend_model_a(), all_labels(), 17));
    CHECK(std::abs(accuracy(m, d.train) - 1.0 / 12.0) <= 0.1);
  }

  TEST_CASE("input gradient matches finite differences for every class") {
    std::mt19937_64 rng(31);
    for (const auto& fe : {frontend_model_a(), frontend_model_b()}) {
      const WaveformModel m(random_params(fe, 12));
      for (int trial = 0; trial < 2; ++trial) {
        const auto x = testing::random_waveform(rng);
        const auto dir = unit_vector(x.size(), rng);
        const double h = 1e-4;
        std::vector<double> xp(x), xm(x);
        for (std::size_t i = 0; i < x.size(); ++i) {
          xp[i] += h * dir[i];
          xm[i] -= h * dir[i];
        }
        const auto lp = m.logits(xp), lm = m.logits(xm);
        for (int j = 0; j < 12; ++j) {
          const double fd = (lp[j] - lm[j]) / (2 * h);
          CHECK(rel_err(dot(input_gradient(m, x, j), dir), fd) < 1e-4);
        }
      }
    }
  }

  TEST_CASE("gradient of a logit difference with itself is zero") {
    const WaveformModel m(random_params(frontend_model_a(), 2));
    std::mt19937_64 rng(5);
    const auto x = testing::random_waveform(rng);
    const auto lin = m.linearize(x);
    std::vector<double> w(12, 0.0);
    w[3] = 1.0;
    const auto g3 = lin->vjp(w);
    CHECK(g3 == input_gradient(m, x, 3));
    w[3] = 1.0 - 1.0;
    for (double g : lin->vjp(w)) CHECK(g == 0.0);
  }

  TEST_CASE("samples outside every frame get zero input gradient") {
    const WaveformModel m(random_params(frontend_model_b(), 8));
    std::mt19937_64 rng(11);
    const auto g = input_gradient(m, testing::random_waveform(rng), 1);
    for (std::size_t i = frontend_model_b().reach(); i < kWaveLength; ++i) CHECK(g[i] == 0.0);
  }

  TEST_CASE("concurrent evaluation matches serial evaluation") {
    const WaveformModel m(random_params(frontend_model_a(), 21));
    std::mt19937_64 rng(4);
    std::vector<std::vector<double>> xs;
    for (int i = 0; i < 6; ++i) xs.push_back(testing::random_waveform(rng));
    std::vector<std::vector<double>> serial, parallel(xs.size());
    for (const auto& x : xs) serial.push_back(input_gradient(m, x, 2));
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < 3; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t i = w; i < xs.size(); i += 3) parallel[i] = input_gradient(m, xs[i], 2);
      });
    }
    for (auto& t : pool) t.join();
    CHECK(parallel == serial);
  }

  TEST_CASE("parameter files round trip bit-identically") {
    testing::TempDir dir;
    const ModelParams p = random_params(frontend_model_a(), 44);
    save_params(p, dir / "a.bin");
    const ModelParams q = load_params(dir / "a.bin");
    CHECK(q.values == p.values);
    CHECK(q.arch == p.arch);
    CHECK(q.frontend == p.frontend);
    CHECK(q.label_set == p.label_set);
    CHECK(q.rng_seed == p.rng_seed);
    std::mt19937_64 rng(1);
    const auto x = testing::random_waveform(rng);
    CHECK(forward(p, x).logits == forward(q, x).logits);
    CHECK(params_to_bytes(q) == params_to_bytes(p));
  }

  TEST_CASE("model B front-end survives a round trip") {
    testing::TempDir dir;
    save_params(random_params(frontend_model_b(), 1), dir / "b.bin");
    const ModelParams q = load_params(dir / "b.bin");
    CHECK(q.frontend.frame_length == 400);
    CHECK(q.frontend.mel_bands == 64);
    CHECK(q.frontend.dct_coeffs == 16);
  }

  TEST_CASE("damaged parameter files raise typed errors") {
    const std::string bytes = params_to_bytes(random_params(frontend_model_a(), 3));
    std::string flipped = bytes;
    flipped[flipped.size() - 9] ^= 0x10;
    CHECK_THROWS_AS(params_from_bytes(flipped), ChecksumError);
    CHECK_THROWS_AS(params_from_bytes(bytes.substr(0, bytes.size() - 8)), TruncatedFile);
    CHECK_THROWS_AS(params_from_bytes(bytes.substr(0, 20)), TruncatedFile);
    std::string newer = bytes;
    const auto pos = newer.find("\"format_version\":1");
    REQUIRE(pos != std::string::npos);
    newer.replace(pos, 18, "\"format_version\":2");
    CHECK_THROWS_AS(params_from_bytes(newer), VersionMismatch);
    CHECK_THROWS_AS(params_from_bytes("not json\n"), FormatError);
    CHECK_THROWS_AS(load_params("/nonexistent/params.bin"), Error);
  }

  TEST_CASE("training rejects bad input") {
    TrainConfig tc;
    CHECK_THROWS_AS(train({}, architecture_compact(), frontend_model_a(), tc), ConfigError);
    Waveform unlabeled;
    CHECK_THROWS_AS(train({unlabeled}, architecture_compact(), frontend_model_a(), tc), ConfigError);
    tc.lr = 1e300;
    const auto& d = testing::toy_setup().data;
    CHECK_THROWS_AS(train(d.train, architecture_compact(), frontend_model_a(), tc),
                    TrainingDiverged);
  }

  TEST_CASE("training is deterministic across runs and thread counts") {
    SynthConfig sc;
    sc.per_class = 30;
    sc.seed = 5;
    const Dataset d = synth_dataset(sc);
    TrainConfig tc;
    tc.epochs = 2;
    tc.seed = 9;
    const int threads = omp_get_max_threads();
    const auto a = train(d.train, architecture_compact(), frontend_model_a(), tc);
    omp_set_num_threads(3);
    const auto b = train(d.train, architecture_compact(), frontend_model_a(), tc);
    omp_set_num_threads(threads);
    CHECK(params_to_bytes(a.params) == params_to_bytes(b.params));
    tc.seed = 10;
    const auto c = train(d.train, architecture_compact(), frontend_model_a(), tc);
    CHECK(c.params.values != a.params.values);
  }

  TEST_CASE("toy training converges") {
    const auto& s = testing::toy_setup();
    const auto& log = s.trained.log;
    REQUIRE(log.size() >= 2);
    std::size_t non_increasing = 0;
    for (std::size_t e = 1; e < log.size(); ++e) non_increasing += log[e].loss <= log[e - 1].loss;
    CHECK(static_cast<double>(non_increasing) >= 0.8 * static_cast<double>(log.size() - 1));
    REQUIRE(log.back().valid_accuracy.has_value());
    CHECK(*log.back().valid_accuracy >= 0.95);
    CHECK(accuracy(*s.model, s.data.valid) == doctest::Approx(*log.back().valid_accuracy));
  }

  TEST_CASE("independently trained models disagree somewhere") {
    // Short training keeps both models imperfect, so disagreements are visible.
    SynthConfig sc;
    sc.labels = toy_labels(12);
    sc.per_class = 60;
    sc.seed = 13;
    const Dataset d = synth_dataset(sc);
    REQUIRE(d.valid.size() >= 100);
    TrainConfig tc;
    tc.epochs = 1;
    tc.seed = 1;
    const WaveformModel a(train(d.train, architecture_compact(), frontend_model_a(), tc).params);
    tc.seed = 2;
    const WaveformModel b(train(d.train, architecture_compact(), frontend_model_b(), tc).params);
    REQUIRE(accuracy(a, d.valid) > 1.0 / 12.0);
    REQUIRE(accuracy(b, d.valid) > 1.0 / 12.0);
    std::size_t disagree = 0;
    for (const auto& w : d.valid) disagree += a.predict(w.samples) != b.predict(w.samples);
    CHECK(disagree > 0);
  }
}
