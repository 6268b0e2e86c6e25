#include "serkit/experiments.hpp"

#include <algorithm>
#include <set>

#include "serkit/audio.hpp"

namespace serkit {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

constexpr std::size_t kMinModelWidth = 8;

/// Vectors narrower than the model's minimum width are zero-padded; the
/// padded dimensions are constant and standardize to zero.
Mat pad_to_min_width(const Mat& x) {
  if (x.cols >= kMinModelWidth) return x;
  Mat out(x.rows, kMinModelWidth);
  for (std::size_t i = 0; i < x.rows; ++i)
    std::copy(x.row(i), x.row(i) + x.cols, out.row(i));
  return out;
}

std::vector<std::string> row_labels(const Manifest& manifest, LabelMode mode) {
  std::vector<std::string> labels;
  labels.reserve(manifest.size());
  for (const auto& u : manifest)
    labels.push_back(mode == LabelMode::Emotion ? u.emotion : u.gender + "|" + u.emotion);
  return labels;
}

std::vector<std::string> sorted_classes(const std::vector<std::string>& labels) {
  std::set<std::string> s(labels.begin(), labels.end());
  return {s.begin(), s.end()};
}

std::vector<int> encode(const std::vector<std::string>& labels, const std::vector<std::string>& classes) {
  std::map<std::string, int> index;
  for (std::size_t i = 0; i < classes.size(); ++i) index[classes[i]] = static_cast<int>(i);
  std::vector<int> y;
  y.reserve(labels.size());
  for (const auto& l : labels) {
    const auto it = index.find(l);
    if (it == index.end()) throw ExperimentError("label '" + l + "' missing from class set");
    y.push_back(it->second);
  }
  return y;
}

Mat take_rows(const Mat& x, const std::vector<std::size_t>& idx) {
  Mat out(idx.size(), x.cols);
  for (std::size_t i = 0; i < idx.size(); ++i)
    std::copy(x.row(idx[i]), x.row(idx[i]) + x.cols, out.row(i));
  return out;
}

std::vector<int> take(const std::vector<int>& y, const std::vector<std::size_t>& idx) {
  std::vector<int> out(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) out[i] = y[idx[i]];
  return out;
}

/// Train on the given rows and label the eval rows.
std::vector<int> fit_predict(const Mat& x, const std::vector<int>& y, const std::vector<std::size_t>& train_idx,
                             const std::vector<std::size_t>& eval_idx, std::size_t n_classes, TrainConfig cfg,
                             std::uint64_t model_seed) {
  const Mat xtr = take_rows(x, train_idx);
  const Mat xev = take_rows(x, eval_idx);
  const std::vector<int> ytr = take(y, train_idx);
  const std::vector<int> yev = take(y, eval_idx);

  CnnModel model = init_model(x.cols, n_classes, model_seed);
  cfg.seed = model_seed;
  fit(model, xtr, ytr, cfg, &xev, &yev);
  return predict_labels(model, xev);
}

struct CvOutcome {
  std::vector<Metrics> fold_metrics;
  std::vector<FoldPrediction> predictions;
};

CvOutcome run_cv(const Manifest& manifest, const Mat& x, const std::vector<int>& y,
                 const std::vector<std::string>& classes, const std::vector<std::string>& strata,
                 const ExperimentSpec& spec, const std::string& cell_id) {
  const auto folds = stratified_kfold(strata, spec.folds, mix_seed(spec.seed, cell_id, ~std::uint64_t{0}));

  CvOutcome out;
  for (std::size_t f = 0; f < folds.size(); ++f) {
    std::vector<std::size_t> train_idx;
    for (std::size_t g = 0; g < folds.size(); ++g)
      if (g != f) train_idx.insert(train_idx.end(), folds[g].begin(), folds[g].end());
    std::sort(train_idx.begin(), train_idx.end());

    const std::vector<int> pred =
        fit_predict(x, y, train_idx, folds[f], classes.size(), spec.train, mix_seed(spec.seed, cell_id, f));

    out.fold_metrics.push_back(compute_metrics(pred, take(y, folds[f]), classes));
    for (std::size_t i = 0; i < folds[f].size(); ++i) {
      const Utterance& u = manifest[folds[f][i]];
      out.predictions.push_back({f, u.path, u.dataset, u.language, u.gender,
                                 classes[static_cast<std::size_t>(y[folds[f][i]])],
                                 classes[static_cast<std::size_t>(pred[i])]});
    }
  }
  return out;
}

std::vector<std::size_t> rows_for_language(const Manifest& manifest, const std::string& language) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < manifest.size(); ++i)
    if (manifest[i].language == language) idx.push_back(i);
  return idx;
}

DataBundle sub_bundle(const DataBundle& bundle, const std::vector<std::size_t>& idx) {
  DataBundle out;
  out.x = take_rows(bundle.x, idx);
  out.manifest.reserve(idx.size());
  for (std::size_t i : idx) out.manifest.push_back(bundle.manifest[i]);
  return out;
}

}  // namespace

const char* protocol_name(Protocol p) {
  switch (p) {
    case Protocol::Mono: return "mono";
    case Protocol::Multi: return "multi";
    case Protocol::Cross: return "cross";
    case Protocol::Gender: return "gender";
  }
  return "?";
}

void validate_spec(const ExperimentSpec& spec) {
  if (spec.folds < 2) throw ExperimentError("spec: need at least 2 folds");
  switch (spec.protocol) {
    case Protocol::Mono:
      if (spec.train_languages.size() != 1)
        throw ExperimentError("spec: mono-lingual runs train on exactly one language");
      if (!spec.test_languages.empty() && spec.test_languages != spec.train_languages)
        throw ExperimentError("spec: mono-lingual train and test languages must match");
      break;
    case Protocol::Multi:
      if (spec.train_languages.size() != 1)
        throw ExperimentError("spec: multi-lingual runs train on exactly one language");
      if (spec.test_languages.empty()) throw ExperimentError("spec: multi-lingual runs need test languages");
      for (const auto& l : spec.test_languages)
        if (l == spec.train_languages.front())
          throw ExperimentError("spec: multi-lingual test languages must differ from the train language");
      break;
    case Protocol::Cross:
      if (spec.train_languages.size() < 2)
        throw ExperimentError("spec: cross-lingual runs pool at least two languages");
      break;
    case Protocol::Gender:
      if (spec.label_mode != LabelMode::GenderEmotion)
        throw ExperimentError("spec: gender protocol requires gender-emotion labels");
      if (spec.train_languages.size() != 1)
        throw ExperimentError("spec: gender runs operate on one language at a time");
      break;
  }
}

std::uint64_t mix_seed(std::uint64_t global_seed, const std::string& cell_id, std::uint64_t fold) {
  return splitmix64(global_seed ^ splitmix64(fnv1a(cell_id) + fold));
}

std::vector<std::vector<std::size_t>> stratified_kfold(const std::vector<std::string>& strata, std::size_t k,
                                                       std::uint64_t seed) {
  if (k < 2) throw ExperimentError("stratified_kfold: need k >= 2");
  if (strata.empty()) throw ExperimentError("stratified_kfold: empty input");

  std::map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < strata.size(); ++i) groups[strata[i]].push_back(i);

  std::mt19937_64 rng(seed);
  std::vector<std::vector<std::size_t>> folds(k);
  for (auto& [label, members] : groups) {
    if (members.size() < k)
      throw ClassTooSmall("stratified_kfold: class '" + label + "' has " + std::to_string(members.size()) +
                          " members, fewer than k=" + std::to_string(k));
    for (std::size_t i = members.size() - 1; i > 0; --i)
      std::swap(members[i], members[rng() % (i + 1)]);
    const std::size_t start = static_cast<std::size_t>(rng() % k);  // rotate so remainders spread over folds
    for (std::size_t i = 0; i < members.size(); ++i) folds[(start + i) % k].push_back(members[i]);
  }
  for (auto& fold : folds) std::sort(fold.begin(), fold.end());
  return folds;
}

ExtractOutcome extract_features(const Manifest& manifest, const std::filesystem::path& base_dir,
                                const Extractor& extractor, std::span<const FeatureKind> kinds) {
  if (manifest.empty()) throw EmptyManifest("extract_features: empty manifest");

  ExtractOutcome out;
  std::vector<std::vector<double>> rows;
  for (const auto& u : manifest) {
    try {
      const AudioClip clip = load_wav(resolve_utterance_path(base_dir, u));
      FeatureVector fv = extractor.vector(clip, kinds);
      if (out.layout.empty()) out.layout = fv.layout;
      rows.push_back(std::move(fv.values));
      out.bundle.manifest.push_back(u);
    } catch (const std::exception& e) {
      out.failures.emplace_back(u.path, e.what());
    }
  }
  if (rows.empty()) throw EmptyManifest("extract_features: every clip failed to decode");

  out.bundle.x = Mat(rows.size(), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    std::copy(rows[i].begin(), rows[i].end(), out.bundle.x.row(i));
  return out;
}

RunResult run_mono_lingual(const ExperimentSpec& spec, const DataBundle& bundle) {
  if (spec.protocol != Protocol::Mono) throw ExperimentError("run_mono_lingual: protocol mismatch");
  validate_spec(spec);

  const std::string& lang = spec.train_languages.front();
  const DataBundle sub = sub_bundle(bundle, rows_for_language(bundle.manifest, lang));
  if (sub.manifest.empty()) throw ExperimentError("run_mono_lingual: no rows for language " + lang);

  const Mat x = pad_to_min_width(sub.x);
  const std::vector<std::string> labels = row_labels(sub.manifest, LabelMode::Emotion);
  const std::vector<std::string> classes = sorted_classes(labels);
  const std::vector<int> y = encode(labels, classes);

  CvOutcome cv = run_cv(sub.manifest, x, y, classes, labels, spec, "mono:" + lang);

  RunResult result;
  result.classes = classes;
  result.report = aggregate_folds(cv.fold_metrics);
  result.predictions = std::move(cv.predictions);
  return result;
}

std::map<std::string, RunResult> run_multi_lingual(const ExperimentSpec& spec, const DataBundle& bundle) {
  if (spec.protocol != Protocol::Multi) throw ExperimentError("run_multi_lingual: protocol mismatch");
  validate_spec(spec);

  const std::string& train_lang = spec.train_languages.front();
  const std::vector<std::size_t> train_idx = rows_for_language(bundle.manifest, train_lang);
  if (train_idx.empty()) throw ExperimentError("run_multi_lingual: no rows for train language " + train_lang);

  // one shared class space across train and every test language
  std::vector<std::string> involved = row_labels(bundle.manifest, LabelMode::Emotion);
  const std::vector<std::string> classes = sorted_classes(involved);
  std::set<std::string> train_classes;
  for (std::size_t i : train_idx) train_classes.insert(bundle.manifest[i].emotion);
  for (const auto& c : classes)
    if (!train_classes.count(c))
      throw ExperimentError("run_multi_lingual: class '" + c +
                            "' absent from the train language; restrict labels to the shared set first");

  const Mat x = pad_to_min_width(bundle.x);
  const std::vector<int> y = encode(involved, classes);

  const std::string cell = "multi:" + train_lang;
  Mat xtr = take_rows(x, train_idx);
  std::vector<int> ytr = take(y, train_idx);
  CnnModel model = init_model(x.cols, classes.size(), mix_seed(spec.seed, cell, 0));
  TrainConfig cfg = spec.train;
  cfg.seed = mix_seed(spec.seed, cell, 0);
  fit(model, xtr, ytr, cfg);

  std::map<std::string, RunResult> results;
  for (const auto& test_lang : spec.test_languages) {
    const std::vector<std::size_t> test_idx = rows_for_language(bundle.manifest, test_lang);
    if (test_idx.empty()) throw ExperimentError("run_multi_lingual: no rows for test language " + test_lang);

    const Mat xte = take_rows(x, test_idx);
    const std::vector<int> pred = predict_labels(model, xte);
    const std::vector<int> yte = take(y, test_idx);

    RunResult r;
    r.classes = classes;
    r.report = aggregate_folds({compute_metrics(pred, yte, classes)});
    for (std::size_t i = 0; i < test_idx.size(); ++i) {
      const Utterance& u = bundle.manifest[test_idx[i]];
      r.predictions.push_back({0, u.path, u.dataset, u.language, u.gender,
                               classes[static_cast<std::size_t>(yte[i])],
                               classes[static_cast<std::size_t>(pred[i])]});
    }
    results.emplace(test_lang, std::move(r));
  }
  return results;
}

RunResult run_cross_lingual(const ExperimentSpec& spec, const DataBundle& bundle) {
  if (spec.protocol != Protocol::Cross) throw ExperimentError("run_cross_lingual: protocol mismatch");
  validate_spec(spec);

  std::vector<std::size_t> idx;
  for (const auto& lang : spec.train_languages) {
    const auto rows = rows_for_language(bundle.manifest, lang);
    if (rows.empty()) throw ExperimentError("run_cross_lingual: no rows for language " + lang);
    idx.insert(idx.end(), rows.begin(), rows.end());
  }
  std::sort(idx.begin(), idx.end());
  const DataBundle sub = sub_bundle(bundle, idx);

  const Mat x = pad_to_min_width(sub.x);
  const std::vector<std::string> labels = row_labels(sub.manifest, LabelMode::Emotion);
  const std::vector<std::string> classes = sorted_classes(labels);
  const std::vector<int> y = encode(labels, classes);

  // folds balanced jointly on language x emotion
  std::vector<std::string> strata;
  strata.reserve(sub.manifest.size());
  for (const auto& u : sub.manifest) strata.push_back(u.language + "|" + u.emotion);

  CvOutcome cv = run_cv(sub.manifest, x, y, classes, strata, spec, "cross");

  RunResult result;
  result.classes = classes;
  result.report = aggregate_folds(cv.fold_metrics);
  result.predictions = std::move(cv.predictions);
  return result;
}

GenderRunResult run_gender(const ExperimentSpec& spec, const DataBundle& bundle) {
  if (spec.protocol != Protocol::Gender) throw ExperimentError("run_gender: protocol mismatch");
  validate_spec(spec);

  const std::string& lang = spec.train_languages.front();
  const DataBundle sub = sub_bundle(bundle, rows_for_language(bundle.manifest, lang));
  if (sub.manifest.empty()) throw ExperimentError("run_gender: no rows for language " + lang);
  for (const auto& u : sub.manifest)
    if (u.gender != "male" && u.gender != "female")
      throw ExperimentError("run_gender: utterance without known gender: " + u.path);

  const Mat x = pad_to_min_width(sub.x);
  GenderRunResult result;

  {  // pass 1: emotion labels, the gender-blind baseline
    const std::vector<std::string> labels = row_labels(sub.manifest, LabelMode::Emotion);
    const std::vector<std::string> classes = sorted_classes(labels);
    const std::vector<int> y = encode(labels, classes);
    CvOutcome cv = run_cv(sub.manifest, x, y, classes, labels, spec, "gender-combined:" + lang);
    result.combined.classes = classes;
    result.combined.report = aggregate_folds(cv.fold_metrics);
    result.combined.predictions = std::move(cv.predictions);
  }
  {  // pass 2: compound gender|emotion labels
    const std::vector<std::string> labels = row_labels(sub.manifest, LabelMode::GenderEmotion);
    const std::vector<std::string> classes = sorted_classes(labels);
    const std::vector<int> y = encode(labels, classes);
    CvOutcome cv = run_cv(sub.manifest, x, y, classes, labels, spec, "gender-compound:" + lang);
    result.compound.classes = classes;
    result.compound.report = aggregate_folds(cv.fold_metrics);
    result.compound.predictions = std::move(cv.predictions);
  }
  return result;
}

std::vector<FeatureSearchRow> run_feature_sets(const std::vector<std::pair<std::string, KindFeatures>>& datasets,
                                               const std::vector<std::vector<FeatureKind>>& sets,
                                               const ExperimentSpec& base) {
  if (datasets.empty()) throw ExperimentError("run_feature_sets: no datasets");
  if (sets.empty()) throw ExperimentError("run_feature_sets: no feature sets");

  std::vector<FeatureSearchRow> rows;
  for (const auto& set : sets) {
    FeatureSearchRow row;
    row.set = set;

    for (const auto& [name, kf] : datasets) {
      // assemble the combined matrix for this set
      std::size_t dim = 0;
      for (FeatureKind kind : set) {
        const auto it = kf.per_kind.find(kind);
        if (it == kf.per_kind.end())
          throw ExperimentError("run_feature_sets: dataset " + name + " missing kind " + kind_name(kind));
        dim += it->second.cols;
      }
      Mat x(kf.manifest.size(), dim);
      std::size_t offset = 0;
      for (FeatureKind kind : set) {
        const Mat& part = kf.per_kind.at(kind);
        if (part.rows != kf.manifest.size())
          throw ExperimentError("run_feature_sets: row count mismatch for kind " + std::string(kind_name(kind)));
        for (std::size_t i = 0; i < part.rows; ++i)
          std::copy(part.row(i), part.row(i) + part.cols, x.row(i) + offset);
        offset += part.cols;
      }
      row.dims = dim;

      const Mat xp = pad_to_min_width(x);
      const std::vector<std::string> labels = row_labels(kf.manifest, LabelMode::Emotion);
      const std::vector<std::string> classes = sorted_classes(labels);
      const std::vector<int> y = encode(labels, classes);

      std::string cell = "search:" + name + ":";
      for (FeatureKind kind : set) cell += std::string(kind_name(kind)) + ",";

      ExperimentSpec spec = base;
      spec.protocol = Protocol::Mono;
      CvOutcome cv = run_cv(kf.manifest, xp, y, classes, labels, spec, cell);
      row.f1_per_dataset[name] = aggregate_folds(cv.fold_metrics).mean_macro_f1;
    }

    double mean = 0.0;
    for (const auto& [name, f1] : row.f1_per_dataset) mean += f1;
    row.mean_f1 = mean / static_cast<double>(row.f1_per_dataset.size());
    rows.push_back(std::move(row));
  }

  std::stable_sort(rows.begin(), rows.end(), [](const FeatureSearchRow& a, const FeatureSearchRow& b) {
    if (a.mean_f1 != b.mean_f1) return a.mean_f1 > b.mean_f1;
    return a.dims < b.dims;
  });
  return rows;
}

std::vector<FeatureSearchRow> run_feature_search(const std::vector<std::pair<std::string, KindFeatures>>& datasets,
                                                 std::span<const FeatureKind> candidates, std::size_t max_set_size,
                                                 const ExperimentSpec& base) {
  if (candidates.empty()) throw ExperimentError("run_feature_search: no candidate kinds");
  const std::size_t n = candidates.size();
  const std::size_t cap = std::min(max_set_size, n);

  std::vector<std::vector<FeatureKind>> sets;
  std::vector<std::size_t> pick;
  auto recurse = [&](auto&& self, std::size_t start) -> void {
    if (!pick.empty() && pick.size() <= cap) {
      std::vector<FeatureKind> set;
      for (std::size_t i : pick) set.push_back(candidates[i]);
      sets.push_back(std::move(set));
    }
    if (pick.size() == cap) return;
    for (std::size_t i = start; i < n; ++i) {
      pick.push_back(i);
      self(self, i + 1);
      pick.pop_back();
    }
  };
  recurse(recurse, 0);

  std::stable_sort(sets.begin(), sets.end(),
                   [](const auto& a, const auto& b) { return a.size() < b.size(); });
  return run_feature_sets(datasets, sets, base);
}

}  // namespace serkit
