#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "focusclf/cnn/train.hpp"
#include "focusclf/eval/metrics.hpp"
#include "focusclf/eval/sweep.hpp"
#include "focusclf/eval/tsne.hpp"

namespace focusclf::eval {

struct ReportRow {
  std::string name;
  MetricsReport metrics;
};

nlohmann::json to_json(std::span<const ReportRow> rows);

/// Aligned columns: name, sensitivity, specificity, G-mean, AUC, accuracy (two decimals).
std::string format_table(std::span<const ReportRow> rows, const std::string& title = "");
std::string format_csv(std::span<const ReportRow> rows);

/// Per-fold rows (CV1…CVk) followed by the "Average" row.
std::vector<ReportRow> fold_rows(std::span<const MetricsReport> folds, const MetricsReport& average);
std::vector<ReportRow> cv_rows(const cnn::CvResult& result);
std::vector<ReportRow> sweep_rows(const SweepTable& table);

nlohmann::json cv_summary_json(const cnn::CvResult& result);

/// Writes <stem>.json, <stem>.txt and <stem>.csv; returns the paths.
std::vector<std::filesystem::path> write_report(const std::filesystem::path& directory, const std::string& stem,
                                                std::span<const ReportRow> rows, const nlohmann::json& extra = {});

/// lesion_id,label,x,y
void write_embedding_csv(const std::filesystem::path& path, std::span<const std::string> ids, std::span<const int> labels,
                         const Embedding2D& embedding);

void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace focusclf::eval
