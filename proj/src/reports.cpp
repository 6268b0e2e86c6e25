#include "serkit/reports.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace serkit {

std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

std::string hash_hex(std::string_view s) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fnv1a64(s)));
  return buf;
}

namespace {

std::string fmt(double x, const char* spec = "%.6f") {
  char buf[40];
  std::snprintf(buf, sizeof(buf), spec, x);
  return buf;
}

int class_index(const std::vector<std::string>& classes, const std::string& label) {
  const auto it = std::find(classes.begin(), classes.end(), label);
  if (it == classes.end()) throw ExperimentError("report: label '" + label + "' not in class set");
  return static_cast<int>(it - classes.begin());
}

/// Mean across folds of per-class P/R/F1 and macro-F1 for one group of
/// predictions; support is pooled over folds.
struct GroupStats {
  std::vector<double> precision, recall, f1;
  std::vector<std::size_t> support;
  double macro_f1 = 0.0;
};

GroupStats group_stats(const std::vector<const FoldPrediction*>& preds, const std::vector<std::string>& classes) {
  std::set<std::size_t> fold_ids;
  for (const auto* p : preds) fold_ids.insert(p->fold);

  GroupStats stats;
  stats.precision.assign(classes.size(), 0.0);
  stats.recall.assign(classes.size(), 0.0);
  stats.f1.assign(classes.size(), 0.0);
  stats.support.assign(classes.size(), 0);

  for (std::size_t fold : fold_ids) {
    std::vector<int> truth, pred;
    for (const auto* p : preds) {
      if (p->fold != fold) continue;
      truth.push_back(class_index(classes, p->truth));
      pred.push_back(class_index(classes, p->predicted));
    }
    const Metrics m = compute_metrics(pred, truth, classes);
    for (std::size_t c = 0; c < classes.size(); ++c) {
      stats.precision[c] += m.precision[c];
      stats.recall[c] += m.recall[c];
      stats.f1[c] += m.f1[c];
      stats.support[c] += m.support[c];
    }
    stats.macro_f1 += m.macro_f1;
  }
  const double inv = 1.0 / static_cast<double>(fold_ids.size());
  for (std::size_t c = 0; c < classes.size(); ++c) {
    stats.precision[c] *= inv;
    stats.recall[c] *= inv;
    stats.f1[c] *= inv;
  }
  stats.macro_f1 *= inv;
  return stats;
}

/// Group predictions by language; cross-lingual runs pool everything.
std::vector<std::pair<std::string, std::vector<const FoldPrediction*>>> group_predictions(
    const RunMeta& meta, const std::vector<FoldPrediction>& predictions) {
  std::vector<std::pair<std::string, std::vector<const FoldPrediction*>>> groups;
  if (meta.protocol == "cross") {
    groups.emplace_back("all", std::vector<const FoldPrediction*>{});
    for (const auto& p : predictions) groups.back().second.push_back(&p);
    return groups;
  }
  std::map<std::string, std::vector<const FoldPrediction*>> by_lang;
  for (const auto& p : predictions) by_lang[p.language].push_back(&p);
  for (auto& [lang, preds] : by_lang) groups.emplace_back(lang, std::move(preds));
  return groups;
}

std::string dataset_of_group(const std::vector<const FoldPrediction*>& preds) {
  std::set<std::string> names;
  for (const auto* p : preds) names.insert(p->dataset);
  if (names.size() == 1) return *names.begin();
  std::string joined;
  for (const auto& n : names) joined += (joined.empty() ? "" : "+") + n;
  return joined;
}

void split_compound(const std::string& label, std::string& gender, std::string& emotion) {
  const std::size_t sep = label.find('|');
  if (sep == std::string::npos) {
    gender = "combined";
    emotion = label;
  } else {
    gender = label.substr(0, sep);
    emotion = label.substr(sep + 1);
  }
}

std::string provenance_lines(const RunMeta& meta) {
  std::ostringstream out;
  out << "# protocol=" << meta.protocol << " features=" << meta.feature_set << " seed=" << meta.seed
      << " config=" << meta.config_hash << '\n';
  for (const auto& note : meta.notes) out << "# note: " << note << '\n';
  return out.str();
}

}  // namespace

void write_predictions_jsonl(const std::filesystem::path& path, const RunMeta& meta,
                             const std::vector<FoldPrediction>& predictions) {
  std::ostringstream out;
  nlohmann::json m{{"record", "meta"},       {"protocol", meta.protocol}, {"features", meta.feature_set},
                   {"seed", meta.seed},      {"config", meta.config_hash}, {"classes", meta.classes},
                   {"notes", meta.notes}};
  out << m.dump() << '\n';
  for (const auto& p : predictions) {
    nlohmann::json j{{"fold", p.fold},     {"id", p.id},         {"dataset", p.dataset},
                     {"language", p.language}, {"gender", p.gender}, {"truth", p.truth},
                     {"pred", p.predicted}};
    out << j.dump() << '\n';
  }
  atomic_write(path, out.str());
}

std::pair<RunMeta, std::vector<FoldPrediction>> read_predictions_jsonl(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ExperimentError("read_predictions: cannot open " + path.string());

  RunMeta meta;
  std::vector<FoldPrediction> predictions;
  std::string line;
  bool have_meta = false;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line);
    if (!have_meta) {
      if (j.value("record", "") != "meta") throw ExperimentError("read_predictions: first line must be the meta record");
      meta.protocol = j.value("protocol", "");
      meta.feature_set = j.value("features", "");
      meta.seed = j.value("seed", std::uint64_t{0});
      meta.config_hash = j.value("config", "");
      meta.classes = j.value("classes", std::vector<std::string>{});
      meta.notes = j.value("notes", std::vector<std::string>{});
      have_meta = true;
      continue;
    }
    predictions.push_back({j.value("fold", std::size_t{0}), j.value("id", ""), j.value("dataset", ""),
                           j.value("language", ""), j.value("gender", ""), j.value("truth", ""),
                           j.value("pred", "")});
  }
  if (!have_meta) throw ExperimentError("read_predictions: empty file " + path.string());
  return {meta, predictions};
}

std::string render_metrics_csv(const RunMeta& meta, const std::vector<FoldPrediction>& predictions) {
  std::ostringstream out;
  out << "# serkit metrics report\n" << provenance_lines(meta);
  out << "dataset,language,gender_mode,class,precision,recall,f1,support\n";

  for (const auto& [lang, preds] : group_predictions(meta, predictions)) {
    const GroupStats stats = group_stats(preds, meta.classes);
    const std::string dataset = dataset_of_group(preds);
    for (std::size_t c = 0; c < meta.classes.size(); ++c) {
      std::string gender, emotion;
      split_compound(meta.classes[c], gender, emotion);
      out << dataset << ',' << lang << ',' << gender << ',' << emotion << ',' << fmt(stats.precision[c]) << ','
          << fmt(stats.recall[c]) << ',' << fmt(stats.f1[c]) << ',' << stats.support[c] << '\n';
    }
    out << dataset << ',' << lang << ",combined,__macro__,,," << fmt(stats.macro_f1) << ",\n";
  }
  return out.str();
}

std::string render_metrics_text(const RunMeta& meta, const std::vector<FoldPrediction>& predictions) {
  std::ostringstream out;
  out << "protocol: " << meta.protocol << "   features: " << meta.feature_set << "   seed: " << meta.seed
      << "   config: " << meta.config_hash << "\n";

  for (const auto& [lang, preds] : group_predictions(meta, predictions)) {
    const GroupStats stats = group_stats(preds, meta.classes);
    out << "\n[" << dataset_of_group(preds) << " / " << lang << "]\n";
    out << "  class                 prec    rec     f1   support\n";
    for (std::size_t c = 0; c < meta.classes.size(); ++c) {
      char line[128];
      std::snprintf(line, sizeof(line), "  %-20s %6.2f %6.2f %6.2f %8zu\n", meta.classes[c].c_str(),
                    stats.precision[c], stats.recall[c], stats.f1[c], stats.support[c]);
      out << line;
    }
    out << "  macro-F1 (mean over folds): " << fmt(stats.macro_f1, "%.4f") << '\n';
  }
  if (!meta.notes.empty()) {
    out << "\nnotes:\n";
    for (const auto& note : meta.notes) out << "  - " << note << '\n';
  }
  return out.str();
}

std::string render_gender_text(const RunMeta& compound_meta, const std::vector<FoldPrediction>& compound,
                               const std::vector<FoldPrediction>& combined) {
  // compound classes are "gender|emotion"; the baseline classes are emotions
  std::vector<std::string> emotions;
  for (const auto& c : compound_meta.classes) {
    std::string g, e;
    split_compound(c, g, e);
    if (std::find(emotions.begin(), emotions.end(), e) == emotions.end()) emotions.push_back(e);
  }
  std::sort(emotions.begin(), emotions.end());

  std::vector<const FoldPrediction*> comp_ptrs;
  for (const auto& p : compound) comp_ptrs.push_back(&p);
  const GroupStats comp_stats = group_stats(comp_ptrs, compound_meta.classes);

  std::vector<std::string> base_classes = emotions;
  std::vector<const FoldPrediction*> base_ptrs;
  for (const auto& p : combined) base_ptrs.push_back(&p);
  const GroupStats base_stats = group_stats(base_ptrs, base_classes);

  std::ostringstream out;
  out << "gender-emotion classification (" << dataset_of_group(comp_ptrs) << ")\n";
  out << "                          Male                  Female                Combined\n";
  out << "  emotion          prec   rec    f1      prec   rec    f1      prec   rec    f1\n";
  for (const auto& emotion : emotions) {
    auto cell = [&](const std::string& gender) -> std::string {
      const std::string label = gender + "|" + emotion;
      const auto it = std::find(compound_meta.classes.begin(), compound_meta.classes.end(), label);
      if (it == compound_meta.classes.end()) return "   -      -      -  ";
      const std::size_t c = static_cast<std::size_t>(it - compound_meta.classes.begin());
      char buf[40];
      std::snprintf(buf, sizeof(buf), " %5.2f  %5.2f  %5.2f ", comp_stats.precision[c], comp_stats.recall[c],
                    comp_stats.f1[c]);
      return buf;
    };
    const std::size_t b = static_cast<std::size_t>(
        std::find(base_classes.begin(), base_classes.end(), emotion) - base_classes.begin());
    char base_buf[40];
    std::snprintf(base_buf, sizeof(base_buf), " %5.2f  %5.2f  %5.2f", base_stats.precision[b],
                  base_stats.recall[b], base_stats.f1[b]);
    char name[32];
    std::snprintf(name, sizeof(name), "  %-15s", emotion.c_str());
    out << name << cell("male") << "  " << cell("female") << "  " << base_buf << '\n';
  }
  out << "  compound-label macro-F1: " << fmt(comp_stats.macro_f1, "%.4f")
      << "   baseline macro-F1: " << fmt(base_stats.macro_f1, "%.4f") << '\n';
  return out.str();
}

std::string render_feature_search_csv(const std::vector<FeatureSearchRow>& rows) {
  std::set<std::string> datasets;
  for (const auto& row : rows)
    for (const auto& [name, f1] : row.f1_per_dataset) datasets.insert(name);

  std::ostringstream out;
  out << "feature_set,dims";
  for (const auto& d : datasets) out << ',' << d;
  out << ",mean_f1\n";
  for (const auto& row : rows) {
    std::string set_name;
    for (FeatureKind kind : row.set) set_name += (set_name.empty() ? "" : "+") + std::string(kind_name(kind));
    out << set_name << ',' << row.dims;
    for (const auto& d : datasets) {
      const auto it = row.f1_per_dataset.find(d);
      out << ',' << (it != row.f1_per_dataset.end() ? fmt(it->second, "%.4f") : "");
    }
    out << ',' << fmt(row.mean_f1, "%.4f") << '\n';
  }
  return out.str();
}

std::string render_feature_search_text(const std::vector<FeatureSearchRow>& rows,
                                       const std::map<std::string, double>& amplitude_per_dataset) {
  std::set<std::string> datasets;
  for (const auto& row : rows)
    for (const auto& [name, f1] : row.f1_per_dataset) datasets.insert(name);

  std::ostringstream out;
  out << "feature-set F1 by dataset (descending mean)\n";
  char head[160];
  std::snprintf(head, sizeof(head), "  %-36s %6s", "features", "dims");
  out << head;
  for (const auto& d : datasets) {
    std::snprintf(head, sizeof(head), " %10s", d.c_str());
    out << head;
  }
  out << "       mean\n";
  for (const auto& row : rows) {
    std::string set_name;
    for (FeatureKind kind : row.set) set_name += (set_name.empty() ? "" : "+") + std::string(kind_name(kind));
    char line[160];
    std::snprintf(line, sizeof(line), "  %-36s %6zu", set_name.c_str(), row.dims);
    out << line;
    for (const auto& d : datasets) {
      const auto it = row.f1_per_dataset.find(d);
      if (it != row.f1_per_dataset.end())
        std::snprintf(line, sizeof(line), " %10.4f", it->second);
      else
        std::snprintf(line, sizeof(line), " %10s", "-");
      out << line;
    }
    std::snprintf(line, sizeof(line), " %10.4f\n", row.mean_f1);
    out << line;
  }
  if (!amplitude_per_dataset.empty()) {
    out << "\nmean absolute amplitude per dataset (linear scale, not dB):\n";
    for (const auto& [name, amp] : amplitude_per_dataset)
      out << "  " << name << ": " << fmt(amp, "%.4f") << '\n';
  }
  return out.str();
}

void atomic_write(const std::filesystem::path& path, const std::string& content) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("atomic_write: cannot open " + tmp.string());
    f.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!f) throw std::runtime_error("atomic_write: short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace serkit
