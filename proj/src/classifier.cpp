#include "uap/classifier.hpp"

namespace uap {

int argmax(std::span<const double> values) {
  int best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
  }
  return best;
}

int DifferentiableClassifier::predict(SampleView x, SampleView v) const {
  if (v.empty()) return predict(x);
  std::vector<double> buf(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) buf[i] = x[i] + v[i];
  return predict(buf);
}

}  // namespace uap
