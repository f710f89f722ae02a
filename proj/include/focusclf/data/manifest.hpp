#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace focusclf::data {

enum class Zone { PZ, CG, Other };
enum class Label { Benign, Malignant, Unknown };

std::string to_string(Zone zone);
std::string to_string(Label label);
Zone parse_zone(const std::string& text);
Label parse_label(const std::string& text);

/// Class index used by every classifier: benign 0, malignant 1 (positive class).
int class_index(Label label);

struct LesionRecord {
  std::string patient_id;
  std::string lesion_id;
  Zone zone = Zone::Other;
  Label label = Label::Unknown;
  std::array<int, 3> center{0, 0, 0};  // z, y, x
  std::map<std::string, std::string> modalities;  // name -> path (relative paths resolve against the manifest dir)
};

struct Manifest {
  std::filesystem::path directory;
  std::vector<LesionRecord> records;

  std::filesystem::path resolve(const LesionRecord& record, const std::string& modality) const;
};

/// One JSON object per line. Unknown labels are rejected unless `allow_unknown`.
Manifest load_manifest(const std::filesystem::path& path, bool allow_unknown = false);
LesionRecord parse_record(const std::string& json_line);
std::string format_record(const LesionRecord& record);
void write_manifest(const std::filesystem::path& path, const std::vector<LesionRecord>& records);

std::size_t count_label(const std::vector<LesionRecord>& records, Label label);

}  // namespace focusclf::data
