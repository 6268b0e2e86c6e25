#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "serkit/dsp.hpp"

namespace serkit {

class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeMismatch : public ModelError {
 public:
  using ModelError::ModelError;
};

class DegenerateData : public ModelError {
 public:
  using ModelError::ModelError;
};

class NonFiniteLoss : public ModelError {
 public:
  using ModelError::ModelError;
};

struct ConvParams {
  std::size_t in_ch = 0, out_ch = 0, kernel = 0;
  std::vector<double> w;  // out_ch x in_ch x kernel
  std::vector<double> b;  // out_ch
};

struct DenseParams {
  std::size_t in_dim = 0, out_dim = 0;
  std::vector<double> w;  // out_dim x in_dim
  std::vector<double> b;  // out_dim
};

/// Compact 1-D convolutional classifier over aggregated feature vectors:
///   Conv1D(64, k=5, same) + ReLU
///   Conv1D(64, k=5, same) + ReLU, Dropout(0.1), MaxPool(4)
///   Conv1D(128, k=5, same) + ReLU, Dropout(0.1), MaxPool(2)
///   Flatten, Dense(n_classes), Softmax
struct CnnModel {
  std::size_t input_dim = 0;
  std::size_t n_classes = 0;
  std::uint64_t rng_seed = 0;
  double dropout_rate = 0.1;

  ConvParams conv1, conv2, conv3;
  DenseParams dense;

  // per-dimension standardization fitted on training data
  std::vector<double> feat_mean, feat_std;

  // advanced only by train-mode forwards (dropout masks)
  std::mt19937_64 dropout_rng;

  std::size_t pooled1_len() const { return input_dim / 4; }
  std::size_t pooled2_len() const { return pooled1_len() / 2; }
  std::size_t flat_dim() const { return pooled2_len() * conv3.out_ch; }
  std::size_t parameter_count() const;
};

struct TrainConfig {
  std::size_t epochs = 150;
  std::size_t batch_size = 16;
  double learning_rate = 1e-3;
  std::string optimizer = "adam";  // "adam" or "sgd"
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;
};

struct TrainHistory {
  std::vector<double> train_loss;
  std::vector<double> train_accuracy;
  std::vector<double> val_loss;      // empty when no validation data given
  std::vector<double> val_accuracy;
};

/// He-uniform weights from the seeded generator, zero biases.
CnnModel init_model(std::size_t input_dim, std::size_t n_classes, std::uint64_t seed);

/// Raw network forward on a B x input_dim batch (no standardization);
/// rows of the result are softmax distributions. Dropout is sampled from
/// the model's generator only when train_mode is set.
Mat forward(CnnModel& model, const Mat& batch, bool train_mode);

/// Minimizes categorical cross-entropy with the configured optimizer.
/// Standardization statistics are computed from x and stored in the
/// model; data is reshuffled every epoch from cfg.seed. When validation
/// data is given, it is evaluated at the end of every epoch.
TrainHistory fit(CnnModel& model, const Mat& x, const std::vector<int>& y, const TrainConfig& cfg,
                 const Mat* x_val = nullptr, const std::vector<int>* y_val = nullptr);

/// Eval-mode forward on the standardized vector.
std::vector<double> predict(const CnnModel& model, std::span<const double> v);

/// Argmax of predict() per row.
std::vector<int> predict_labels(const CnnModel& model, const Mat& x);

/// Cross-entropy loss of one sample (standardized, eval mode).
double sample_loss(const CnnModel& model, std::span<const double> v, int label);

/// dLoss/dlogits for one sample, computed through the chained
/// cross-entropy and softmax backward passes (not the fused shortcut).
std::vector<double> logit_gradient(const CnnModel& model, std::span<const double> v, int label);

/// One optimizer step on a single sample with dropout disabled.
void train_single_step(CnnModel& model, std::span<const double> v, int label, const TrainConfig& cfg);

/// Compares analytic gradients of the cross-entropy loss against central
/// finite differences on a random 1% parameter subset (at least one entry
/// per tensor); dropout disabled. Returns the max relative error.
double gradient_check(CnnModel& model, std::span<const double> v, int label, double epsilon = 1e-4);

/// Versioned JSON checkpoint holding the architecture descriptor,
/// standardization statistics and parameter tensors. Round-trips exactly.
void save_checkpoint(const CnnModel& model, const std::filesystem::path& path);
CnnModel load_checkpoint(const std::filesystem::path& path);

}  // namespace serkit
