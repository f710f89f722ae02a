#include "focusclf/data/manifest.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <json.hpp>

#include "focusclf/errors.hpp"

namespace focusclf::data {

using nlohmann::json;

namespace {

std::string upper(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  return s;
}

}  // namespace

std::string to_string(Zone zone) {
  switch (zone) {
    case Zone::PZ: return "PZ";
    case Zone::CG: return "CG";
    case Zone::Other: return "other";
  }
  return "other";
}

std::string to_string(Label label) {
  switch (label) {
    case Label::Benign: return "benign";
    case Label::Malignant: return "malignant";
    case Label::Unknown: return "unknown";
  }
  return "unknown";
}

Zone parse_zone(const std::string& text) {
  const std::string u = upper(text);
  if (u == "PZ") return Zone::PZ;
  if (u == "CG") return Zone::CG;
  return Zone::Other;
}

Label parse_label(const std::string& text) {
  const std::string u = upper(text);
  if (u == "MALIGNANT" || u == "1" || u == "TRUE") return Label::Malignant;
  if (u == "BENIGN" || u == "0" || u == "FALSE") return Label::Benign;
  if (u == "UNKNOWN" || u.empty()) return Label::Unknown;
  throw InputError("unrecognized label '" + text + "'");
}

int class_index(Label label) {
  switch (label) {
    case Label::Benign: return 0;
    case Label::Malignant: return 1;
    case Label::Unknown: break;
  }
  throw InputError("label 'unknown' has no class index");
}

std::filesystem::path Manifest::resolve(const LesionRecord& record, const std::string& modality) const {
  auto it = record.modalities.find(modality);
  if (it == record.modalities.end()) {
    throw InputError("lesion " + record.lesion_id + ": missing modality " + modality);
  }
  std::filesystem::path p(it->second);
  return p.is_absolute() ? p : directory / p;
}

LesionRecord parse_record(const std::string& json_line) {
  json j;
  try {
    j = json::parse(json_line);
  } catch (const json::exception& e) {
    throw FormatError(std::string("manifest: invalid JSON: ") + e.what());
  }
  LesionRecord r;
  try {
    r.patient_id = j.at("patient_id").get<std::string>();
    r.lesion_id = j.at("lesion_id").get<std::string>();
    r.zone = parse_zone(j.value("zone", std::string("other")));
    r.label = parse_label(j.value("label", std::string("unknown")));
    const auto& c = j.at("center");
    if (!c.is_array() || c.size() != 3) throw FormatError("manifest: center must be [z,y,x]");
    for (std::size_t i = 0; i < 3; ++i) r.center[i] = c[i].get<int>();
    for (const auto& [name, path] : j.at("modalities").items()) r.modalities[name] = path.get<std::string>();
  } catch (const json::exception& e) {
    throw FormatError(std::string("manifest: ") + e.what());
  }
  return r;
}

std::string format_record(const LesionRecord& r) {
  json j;
  j["patient_id"] = r.patient_id;
  j["lesion_id"] = r.lesion_id;
  j["zone"] = to_string(r.zone);
  j["label"] = to_string(r.label);
  j["center"] = {r.center[0], r.center[1], r.center[2]};
  j["modalities"] = r.modalities;
  return j.dump();
}

Manifest load_manifest(const std::filesystem::path& path, bool allow_unknown) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path.string());
  Manifest m;
  m.directory = path.parent_path();
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    LesionRecord r;
    try {
      r = parse_record(line);
    } catch (const FormatError& e) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
    if (r.label == Label::Unknown && !allow_unknown) {
      throw InputError(path.string() + ":" + std::to_string(line_no) + ": lesion " + r.lesion_id +
                       " has label 'unknown' (only allowed in test manifests)");
    }
    m.records.push_back(std::move(r));
  }
  return m;
}

void write_manifest(const std::filesystem::path& path, const std::vector<LesionRecord>& records) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write manifest " + path.string());
  for (const auto& r : records) out << format_record(r) << '\n';
}

std::size_t count_label(const std::vector<LesionRecord>& records, Label label) {
  return static_cast<std::size_t>(
      std::count_if(records.begin(), records.end(), [label](const LesionRecord& r) { return r.label == label; }));
}

}  // namespace focusclf::data
