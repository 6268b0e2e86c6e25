#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "serkit/experiments.hpp"

namespace serkit {

std::uint64_t fnv1a64(std::string_view s);
std::string hash_hex(std::string_view s);

/// Provenance and class space for one protocol run; every rendered
/// artifact and the predictions file embed it.
struct RunMeta {
  std::string protocol;  // mono | multi | cross | gender-combined | gender-compound
  std::string feature_set;
  std::uint64_t seed = 0;
  std::string config_hash;
  std::vector<std::string> classes;
  std::vector<std::string> notes;
};

/// Per-fold raw predictions as JSON Lines; the first line is a metadata
/// record. Reports are regenerable from this file alone, byte for byte.
void write_predictions_jsonl(const std::filesystem::path& path, const RunMeta& meta,
                             const std::vector<FoldPrediction>& predictions);
std::pair<RunMeta, std::vector<FoldPrediction>> read_predictions_jsonl(const std::filesystem::path& path);

/// CSV rows: dataset,language,gender_mode,class,precision,recall,f1,support
/// (mean across folds; `__macro__` rows carry the mean macro-F1).
std::string render_metrics_csv(const RunMeta& meta, const std::vector<FoldPrediction>& predictions);

/// Human-readable per-class table per language group.
std::string render_metrics_text(const RunMeta& meta, const std::vector<FoldPrediction>& predictions);

/// Per-emotion table with male / female / combined columns, built from a
/// compound-label run and its gender-blind baseline.
std::string render_gender_text(const RunMeta& compound_meta, const std::vector<FoldPrediction>& compound,
                               const std::vector<FoldPrediction>& combined);

std::string render_feature_search_csv(const std::vector<FeatureSearchRow>& rows);
std::string render_feature_search_text(const std::vector<FeatureSearchRow>& rows,
                                       const std::map<std::string, double>& amplitude_per_dataset);

/// Write via temp file + rename so partial output never lands.
void atomic_write(const std::filesystem::path& path, const std::string& content);

}  // namespace serkit
