#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "serkit/dsp.hpp"

namespace serkit {

class LengthMismatch : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Per-class precision/recall/F1 plus confusion matrix for one evaluation.
struct Metrics {
  std::vector<std::string> classes;
  Mat confusion;  // truth x predicted
  std::vector<double> precision, recall, f1;
  std::vector<std::size_t> support;
  double macro_f1 = 0.0;  // unweighted mean over classes with support > 0
};

/// precision = TP/(TP+FP), recall = TP/(TP+FN), F1 = 2PR/(P+R); each 0
/// when its denominator is 0.
Metrics compute_metrics(const std::vector<int>& predictions, const std::vector<int>& truth,
                        const std::vector<std::string>& classes);

/// Cross-validated evaluation: per-fold metrics and their mean.
struct MetricsReport {
  std::vector<std::string> classes;
  std::vector<Metrics> folds;
  Mat pooled_confusion;  // summed over folds
  std::vector<double> mean_precision, mean_recall, mean_f1;  // per class, across folds
  double mean_macro_f1 = 0.0;
};

MetricsReport aggregate_folds(const std::vector<Metrics>& folds);

}  // namespace serkit
