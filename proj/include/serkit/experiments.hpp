#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "serkit/features.hpp"
#include "serkit/manifest.hpp"
#include "serkit/metrics.hpp"
#include "serkit/model.hpp"

namespace serkit {

class ExperimentError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ClassTooSmall : public ExperimentError {
 public:
  using ExperimentError::ExperimentError;
};

enum class Protocol { Mono, Multi, Cross, Gender };
enum class LabelMode { Emotion, GenderEmotion };

const char* protocol_name(Protocol p);

struct ExperimentSpec {
  Protocol protocol = Protocol::Mono;
  std::vector<FeatureKind> feature_set = {FeatureKind::Mfcc, FeatureKind::Melspec, FeatureKind::Contrast};
  std::vector<std::string> train_languages;
  std::vector<std::string> test_languages;
  LabelMode label_mode = LabelMode::Emotion;
  std::size_t folds = 5;
  std::uint64_t seed = 0;
  TrainConfig train;
};

/// Protocol invariants: MONO trains and tests one language; MULTI trains
/// one language and tests disjoint ones; CROSS pools every language;
/// GENDER uses compound gender-emotion labels.
void validate_spec(const ExperimentSpec& spec);

/// Deterministic seed for one (cell, fold) unit of work.
std::uint64_t mix_seed(std::uint64_t global_seed, const std::string& cell_id, std::uint64_t fold);

/// Disjoint folds covering all indices; per-stratum counts across folds
/// differ by at most one. Assignment is a seeded shuffle within each
/// stratum.
std::vector<std::vector<std::size_t>> stratified_kfold(const std::vector<std::string>& strata, std::size_t k,
                                                       std::uint64_t seed);

/// Manifest rows aligned with their extracted feature vectors.
struct DataBundle {
  Manifest manifest;
  Mat x;  // n x dim
};

struct ExtractOutcome {
  DataBundle bundle;                                         // successfully extracted rows
  std::vector<FeatureVector::Segment> layout;
  std::vector<std::pair<std::string, std::string>> failures;  // path, error
};

/// Load every utterance (paths resolved against base_dir), resample to the
/// canonical rate and extract the requested kinds. Per-file failures are
/// collected, not fatal.
ExtractOutcome extract_features(const Manifest& manifest, const std::filesystem::path& base_dir,
                                const Extractor& extractor, std::span<const FeatureKind> kinds);

struct FoldPrediction {
  std::size_t fold = 0;
  std::string id;
  std::string dataset, language, gender;
  std::string truth, predicted;
};

struct RunResult {
  std::vector<std::string> classes;
  MetricsReport report;
  std::vector<FoldPrediction> predictions;
};

/// Stratified k-fold cross-validation within a single language.
RunResult run_mono_lingual(const ExperimentSpec& spec, const DataBundle& bundle);

/// One model fitted on the full train language, evaluated on each test
/// language. Labels must already be restricted to the shared set.
std::map<std::string, RunResult> run_multi_lingual(const ExperimentSpec& spec, const DataBundle& bundle);

/// Pooled k-fold CV over all languages, stratified on language x emotion.
RunResult run_cross_lingual(const ExperimentSpec& spec, const DataBundle& bundle);

struct GenderRunResult {
  RunResult combined;  // emotion labels, the gender-blind baseline
  RunResult compound;  // gender|emotion labels
};

GenderRunResult run_gender(const ExperimentSpec& spec, const DataBundle& bundle);

/// Per-kind aggregated feature vectors for one dataset, rows aligned with
/// the manifest.
struct KindFeatures {
  Manifest manifest;
  std::map<FeatureKind, Mat> per_kind;
};

struct FeatureSearchRow {
  std::vector<FeatureKind> set;
  std::size_t dims = 0;
  std::map<std::string, double> f1_per_dataset;  // dataset name -> mean CV macro-F1
  double mean_f1 = 0.0;
};

/// Mono-lingual CV macro-F1 per dataset for explicit feature sets, ranked
/// by mean F1 descending; ties broken by fewer dimensions.
std::vector<FeatureSearchRow> run_feature_sets(const std::vector<std::pair<std::string, KindFeatures>>& datasets,
                                               const std::vector<std::vector<FeatureKind>>& sets,
                                               const ExperimentSpec& base);

/// All single kinds and combinations up to max_set_size.
std::vector<FeatureSearchRow> run_feature_search(const std::vector<std::pair<std::string, KindFeatures>>& datasets,
                                                 std::span<const FeatureKind> candidates, std::size_t max_set_size,
                                                 const ExperimentSpec& base);

}  // namespace serkit
