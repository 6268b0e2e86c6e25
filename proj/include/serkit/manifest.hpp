#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace serkit {

class ManifestError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class EmptyManifest : public ManifestError {
 public:
  using ManifestError::ManifestError;
};

class UnmappedLabel : public ManifestError {
 public:
  using ManifestError::ManifestError;
};

enum class DatasetKind { Ravdess, Emodb, Emovo };

const char* dataset_name(DatasetKind kind);

/// One labeled recording. `emotion` holds the raw per-dataset label after
/// scanning (e.g. RAVDESS "Calm") and the canonical label after
/// map_labels().
struct Utterance {
  std::string path;
  std::string dataset;
  std::string language;
  std::string speaker;
  std::string gender;   // "male" | "female"
  std::string emotion;
  std::string intensity;  // optional
};

using Manifest = std::vector<Utterance>;

struct ScanResult {
  Manifest manifest;
  std::vector<std::pair<std::string, std::string>> skipped;  // path, reason
};

/// Walk a dataset root and decode each corpus's filename convention:
///   RAVDESS  MM-VV-EE-II-SS-RR-AA.wav (speech channel only)
///   EMO-DB   two-digit speaker + text code + emotion letter + version
///   EMOVO    emotion-speaker-sentence.wav
/// Unrecognized names land in the skip report; an empty result throws.
ScanResult scan_dataset(const std::filesystem::path& root, DatasetKind kind);

/// Canonical labels per dataset plus the shared cross-dataset set.
struct LabelScheme {
  std::map<std::string, std::map<std::string, std::string>> fold;  // dataset -> raw -> canonical
  std::map<std::string, std::set<std::string>> dataset_labels;     // post-fold label set per dataset
  std::set<std::string> shared;                                    // pairwise intersection
};

/// RAVDESS folds Calm into Neutral; EMO-DB has Boredom and no Surprise;
/// the shared set is {Anger, Disgust, Fear, Joy, Neutral, Sadness}.
const LabelScheme& default_label_scheme();

/// Replace raw labels by canonical ones; when restrict_to_shared, drop
/// utterances whose label is outside the shared set.
Manifest map_labels(const Manifest& manifest, const LabelScheme& scheme, bool restrict_to_shared);

/// JSON Lines, one utterance per line; hand-editable.
void write_manifest(const std::filesystem::path& path, const Manifest& manifest);
Manifest read_manifest(const std::filesystem::path& path);

/// Resolve an utterance path relative to the manifest's directory.
std::filesystem::path resolve_utterance_path(const std::filesystem::path& manifest_dir, const Utterance& utt);

}  // namespace serkit
