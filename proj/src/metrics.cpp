#include "serkit/metrics.hpp"

namespace serkit {

Metrics compute_metrics(const std::vector<int>& predictions, const std::vector<int>& truth,
                        const std::vector<std::string>& classes) {
  if (predictions.size() != truth.size())
    throw LengthMismatch("compute_metrics: prediction/truth length mismatch");
  const std::size_t k = classes.size();

  Metrics m;
  m.classes = classes;
  m.confusion = Mat(k, k);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const int t = truth[i], p = predictions[i];
    if (t < 0 || static_cast<std::size_t>(t) >= k || p < 0 || static_cast<std::size_t>(p) >= k)
      throw LengthMismatch("compute_metrics: label index out of range");
    m.confusion(static_cast<std::size_t>(t), static_cast<std::size_t>(p)) += 1.0;
  }

  m.precision.assign(k, 0.0);
  m.recall.assign(k, 0.0);
  m.f1.assign(k, 0.0);
  m.support.assign(k, 0);

  double f1_sum = 0.0;
  std::size_t supported = 0;
  for (std::size_t c = 0; c < k; ++c) {
    const double tp = m.confusion(c, c);
    double fp = 0.0, fn = 0.0;
    for (std::size_t o = 0; o < k; ++o) {
      if (o == c) continue;
      fp += m.confusion(o, c);
      fn += m.confusion(c, o);
    }
    m.support[c] = static_cast<std::size_t>(tp + fn);
    m.precision[c] = tp + fp > 0.0 ? tp / (tp + fp) : 0.0;
    m.recall[c] = tp + fn > 0.0 ? tp / (tp + fn) : 0.0;
    m.f1[c] = m.precision[c] + m.recall[c] > 0.0
                  ? 2.0 * m.precision[c] * m.recall[c] / (m.precision[c] + m.recall[c])
                  : 0.0;
    if (m.support[c] > 0) {
      f1_sum += m.f1[c];
      ++supported;
    }
  }
  m.macro_f1 = supported > 0 ? f1_sum / static_cast<double>(supported) : 0.0;
  return m;
}

MetricsReport aggregate_folds(const std::vector<Metrics>& folds) {
  if (folds.empty()) throw LengthMismatch("aggregate_folds: no folds");
  const std::size_t k = folds.front().classes.size();

  MetricsReport r;
  r.classes = folds.front().classes;
  r.folds = folds;
  r.pooled_confusion = Mat(k, k);
  r.mean_precision.assign(k, 0.0);
  r.mean_recall.assign(k, 0.0);
  r.mean_f1.assign(k, 0.0);

  for (const auto& fold : folds) {
    if (fold.classes != r.classes) throw LengthMismatch("aggregate_folds: inconsistent class sets");
    for (std::size_t i = 0; i < k * k; ++i) r.pooled_confusion.v[i] += fold.confusion.v[i];
    for (std::size_t c = 0; c < k; ++c) {
      r.mean_precision[c] += fold.precision[c];
      r.mean_recall[c] += fold.recall[c];
      r.mean_f1[c] += fold.f1[c];
    }
    r.mean_macro_f1 += fold.macro_f1;
  }
  const double inv = 1.0 / static_cast<double>(folds.size());
  for (std::size_t c = 0; c < k; ++c) {
    r.mean_precision[c] *= inv;
    r.mean_recall[c] *= inv;
    r.mean_f1[c] *= inv;
  }
  r.mean_macro_f1 *= inv;
  return r;
}

}  // namespace serkit
