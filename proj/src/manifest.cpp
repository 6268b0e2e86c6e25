#include "serkit/manifest.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>

#include <json.hpp>

namespace serkit {

namespace {

bool is_wav(const std::filesystem::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".wav";
}

bool two_digits(const std::string& s) {
  return s.size() == 2 && std::isdigit(static_cast<unsigned char>(s[0])) &&
         std::isdigit(static_cast<unsigned char>(s[1]));
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = s.find(sep, start);
    if (pos == std::string::npos) {
      parts.push_back(s.substr(start));
      break;
    }
    parts.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
  return parts;
}

bool parse_ravdess(const std::string& stem, Utterance& u, std::string& reason) {
  const std::vector<std::string> f = split(stem, '-');
  if (f.size() != 7 || !std::all_of(f.begin(), f.end(), two_digits)) {
    reason = "not a 7-field RAVDESS name";
    return false;
  }
  if (f[1] != "01") {
    reason = "song channel excluded (vocal channel " + f[1] + ")";
    return false;
  }
  static const std::map<std::string, std::string> emotions = {
      {"01", "Neutral"}, {"02", "Calm"},    {"03", "Joy"},     {"04", "Sadness"},
      {"05", "Anger"},   {"06", "Fear"},    {"07", "Disgust"}, {"08", "Surprise"}};
  const auto it = emotions.find(f[2]);
  if (it == emotions.end()) {
    reason = "unknown RAVDESS emotion code " + f[2];
    return false;
  }
  const int actor = std::stoi(f[6]);
  if (actor < 1) {
    reason = "bad actor number";
    return false;
  }
  u.emotion = it->second;
  u.speaker = "Actor_" + f[6];
  u.gender = actor % 2 == 1 ? "male" : "female";
  u.intensity = f[3] == "02" ? "strong" : "normal";
  return true;
}

bool parse_emodb(const std::string& stem, Utterance& u, std::string& reason) {
  if (stem.size() < 7 || !two_digits(stem.substr(0, 2))) {
    reason = "not an EMO-DB name";
    return false;
  }
  static const std::map<char, std::string> emotions = {{'W', "Anger"},   {'L', "Boredom"}, {'E', "Disgust"},
                                                       {'A', "Fear"},    {'F', "Joy"},     {'T', "Sadness"},
                                                       {'N', "Neutral"}};
  const auto it = emotions.find(stem[5]);
  if (it == emotions.end()) {
    reason = std::string("unknown EMO-DB emotion letter '") + stem[5] + "'";
    return false;
  }
  static const std::set<std::string> males = {"03", "10", "11", "12", "15"};
  static const std::set<std::string> females = {"08", "09", "13", "14", "16"};
  const std::string speaker = stem.substr(0, 2);
  if (males.count(speaker)) {
    u.gender = "male";
  } else if (females.count(speaker)) {
    u.gender = "female";
  } else {
    reason = "unknown EMO-DB speaker " + speaker;
    return false;
  }
  u.emotion = it->second;
  u.speaker = speaker;
  return true;
}

bool parse_emovo(const std::string& stem, Utterance& u, std::string& reason) {
  const std::vector<std::string> f = split(stem, '-');
  if (f.size() != 3) {
    reason = "not a 3-field EMOVO name";
    return false;
  }
  static const std::map<std::string, std::string> emotions = {
      {"rab", "Anger"}, {"pau", "Fear"},     {"gio", "Joy"},    {"tri", "Sadness"},
      {"dis", "Disgust"}, {"sor", "Surprise"}, {"neu", "Neutral"}};
  const auto it = emotions.find(f[0]);
  if (it == emotions.end()) {
    reason = "unknown EMOVO emotion prefix " + f[0];
    return false;
  }
  if (f[1].size() != 2 || (f[1][0] != 'm' && f[1][0] != 'f') || !std::isdigit(static_cast<unsigned char>(f[1][1]))) {
    reason = "unknown EMOVO speaker " + f[1];
    return false;
  }
  u.emotion = it->second;
  u.speaker = f[1];
  u.gender = f[1][0] == 'm' ? "male" : "female";
  return true;
}

}  // namespace

const char* dataset_name(DatasetKind kind) {
  switch (kind) {
    case DatasetKind::Ravdess: return "RAVDESS";
    case DatasetKind::Emodb: return "EMODB";
    case DatasetKind::Emovo: return "EMOVO";
  }
  return "?";
}

ScanResult scan_dataset(const std::filesystem::path& root, DatasetKind kind) {
  if (!std::filesystem::is_directory(root)) throw ManifestError("scan_dataset: not a directory: " + root.string());

  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::recursive_directory_iterator(root))
    if (entry.is_regular_file() && is_wav(entry.path())) files.push_back(entry.path());
  std::sort(files.begin(), files.end());

  const char* language = kind == DatasetKind::Ravdess ? "English" : kind == DatasetKind::Emodb ? "German" : "Italian";

  ScanResult result;
  for (const auto& file : files) {
    Utterance u;
    u.path = file.string();
    u.dataset = dataset_name(kind);
    u.language = language;
    std::string reason;
    bool ok = false;
    switch (kind) {
      case DatasetKind::Ravdess: ok = parse_ravdess(file.stem().string(), u, reason); break;
      case DatasetKind::Emodb: ok = parse_emodb(file.stem().string(), u, reason); break;
      case DatasetKind::Emovo: ok = parse_emovo(file.stem().string(), u, reason); break;
    }
    if (ok)
      result.manifest.push_back(std::move(u));
    else
      result.skipped.emplace_back(file.string(), reason);
  }
  if (result.manifest.empty()) throw EmptyManifest("scan_dataset: no recognized recordings under " + root.string());
  return result;
}

const LabelScheme& default_label_scheme() {
  static const LabelScheme scheme = [] {
    LabelScheme s;
    const std::vector<std::string> ravdess = {"Anger", "Fear", "Joy", "Sadness", "Disgust", "Surprise", "Neutral"};
    const std::vector<std::string> emodb = {"Anger", "Fear", "Joy", "Boredom", "Sadness", "Disgust", "Neutral"};
    const std::vector<std::string> emovo = ravdess;

    for (const auto& label : ravdess) s.fold["RAVDESS"][label] = label;
    s.fold["RAVDESS"]["Calm"] = "Neutral";  // Calm and Neutral combined
    for (const auto& label : emodb) s.fold["EMODB"][label] = label;
    for (const auto& label : emovo) s.fold["EMOVO"][label] = label;

    s.dataset_labels["RAVDESS"] = {ravdess.begin(), ravdess.end()};
    s.dataset_labels["EMODB"] = {emodb.begin(), emodb.end()};
    s.dataset_labels["EMOVO"] = {emovo.begin(), emovo.end()};

    s.shared = {"Anger", "Fear", "Joy", "Sadness", "Disgust", "Neutral"};
    return s;
  }();
  return scheme;
}

Manifest map_labels(const Manifest& manifest, const LabelScheme& scheme, bool restrict_to_shared) {
  if (manifest.empty()) throw EmptyManifest("map_labels: empty manifest");

  Manifest out;
  out.reserve(manifest.size());
  for (const auto& u : manifest) {
    Utterance m = u;
    const auto ds = scheme.fold.find(u.dataset);
    if (ds != scheme.fold.end()) {
      const auto it = ds->second.find(u.emotion);
      if (it == ds->second.end())
        throw UnmappedLabel("map_labels: no mapping for '" + u.emotion + "' in dataset " + u.dataset);
      m.emotion = it->second;
    }
    // datasets outside the scheme (e.g. synthetic) pass through unchanged
    if (restrict_to_shared && !scheme.shared.count(m.emotion)) continue;
    out.push_back(std::move(m));
  }
  return out;
}

void write_manifest(const std::filesystem::path& path, const Manifest& manifest) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw ManifestError("write_manifest: cannot open " + path.string());
  for (const auto& u : manifest) {
    nlohmann::json j{{"path", u.path},   {"dataset", u.dataset}, {"language", u.language},
                     {"speaker", u.speaker}, {"gender", u.gender},   {"emotion", u.emotion}};
    if (!u.intensity.empty()) j["intensity"] = u.intensity;
    f << j.dump() << '\n';
  }
}

Manifest read_manifest(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ManifestError("read_manifest: cannot open " + path.string());
  Manifest manifest;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ManifestError("read_manifest: bad JSON at line " + std::to_string(lineno) + ": " + e.what());
    }
    Utterance u;
    u.path = j.value("path", "");
    u.dataset = j.value("dataset", "");
    u.language = j.value("language", "");
    u.speaker = j.value("speaker", "");
    u.gender = j.value("gender", "");
    u.emotion = j.value("emotion", "");
    u.intensity = j.value("intensity", "");
    if (u.path.empty() || u.emotion.empty())
      throw ManifestError("read_manifest: line " + std::to_string(lineno) + " missing path or emotion");
    manifest.push_back(std::move(u));
  }
  if (manifest.empty()) throw EmptyManifest("read_manifest: no utterances in " + path.string());
  return manifest;
}

std::filesystem::path resolve_utterance_path(const std::filesystem::path& manifest_dir, const Utterance& utt) {
  const std::filesystem::path p(utt.path);
  return p.is_absolute() ? p : manifest_dir / p;
}

}  // namespace serkit
