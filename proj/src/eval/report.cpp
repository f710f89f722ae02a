#include "focusclf/eval/report.hpp"

#include <cmath>
#include <fstream>

#include <fmt/format.h>

#include "focusclf/errors.hpp"

namespace focusclf::eval {

using nlohmann::json;

namespace {

std::string cell(double v, bool defined = true) {
  if (!defined || std::isnan(v)) return "n/a";
  return fmt::format("{:.2f}", round2(v));
}

std::string raw(double v) { return std::isnan(v) ? "" : fmt::format("{}", v); }

}  // namespace

json to_json(std::span<const ReportRow> rows) {
  json out = json::array();
  for (const auto& r : rows) out.push_back({{"name", r.name}, {"metrics", cnn::to_json(r.metrics)}});
  return out;
}

std::string format_table(std::span<const ReportRow> rows, const std::string& title) {
  std::size_t width = 4;
  for (const auto& r : rows) width = std::max(width, r.name.size());
  std::string out;
  if (!title.empty()) out += title + "\n";
  out += fmt::format("{:<{}}  {:>5}  {:>5}  {:>6}  {:>5}  {:>5}  {:>4} {:>4} {:>4} {:>4}\n", "", width, "Sens", "Spec",
                     "G-mean", "AUC", "Acc", "TP", "FN", "TN", "FP");
  for (const auto& r : rows) {
    const auto& m = r.metrics;
    out += fmt::format("{:<{}}  {:>5}  {:>5}  {:>6}  {:>5}  {:>5}  {:>4} {:>4} {:>4} {:>4}\n", r.name, width,
                       cell(m.sensitivity, m.sensitivity_defined || r.name == "Average"),
                       cell(m.specificity, m.specificity_defined || r.name == "Average"), cell(m.g_mean),
                       cell(m.auc), cell(m.accuracy), m.tp, m.fn, m.tn, m.fp);
  }
  return out;
}

std::string format_csv(std::span<const ReportRow> rows) {
  std::string out = "name,sensitivity,specificity,g_mean,auc,accuracy,tp,fn,tn,fp\n";
  for (const auto& r : rows) {
    const auto& m = r.metrics;
    out += fmt::format("{},{},{},{},{},{},{},{},{},{}\n", r.name, raw(m.sensitivity), raw(m.specificity), raw(m.g_mean),
                       raw(m.auc), raw(m.accuracy), m.tp, m.fn, m.tn, m.fp);
  }
  return out;
}

std::vector<ReportRow> fold_rows(std::span<const MetricsReport> folds, const MetricsReport& average) {
  std::vector<ReportRow> rows;
  for (std::size_t i = 0; i < folds.size(); ++i) {
    // Reports that do not carry their fold index are numbered by position.
    const std::size_t index = folds[i].fold >= 0 ? static_cast<std::size_t>(folds[i].fold) : i;
    rows.push_back({"CV" + std::to_string(index + 1), folds[i]});
  }
  rows.push_back({"Average", average});
  return rows;
}

std::vector<ReportRow> cv_rows(const cnn::CvResult& result) {
  std::vector<MetricsReport> folds;
  for (const auto& f : result.folds) folds.push_back(f.metrics);
  return fold_rows(folds, result.average);
}

std::vector<ReportRow> sweep_rows(const SweepTable& table) {
  std::vector<ReportRow> rows;
  for (const auto& r : table.rows) rows.push_back({combo_name(r.channels), r.metrics});
  return rows;
}

json cv_summary_json(const cnn::CvResult& result) {
  json folds = json::array();
  for (const auto& f : result.folds) {
    folds.push_back({{"fold", f.fold},
                     {"metrics", cnn::to_json(f.metrics)},
                     {"best_epoch", f.checkpoint.log.best_epoch},
                     {"epochs_run", f.checkpoint.log.epochs.size()},
                     {"train_patches", f.train_patches},
                     {"validation_lesions", f.val_ids.size()}});
  }
  return json{{"folds", folds}, {"average", cnn::to_json(result.average)}, {"k", result.split.k}};
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

std::vector<std::filesystem::path> write_report(const std::filesystem::path& directory, const std::string& stem,
                                                std::span<const ReportRow> rows, const json& extra) {
  std::filesystem::create_directories(directory);
  json j{{"rows", to_json(rows)}};
  if (!extra.is_null()) j["details"] = extra;
  const auto base = directory / stem;
  std::vector<std::filesystem::path> paths{base, base, base};
  paths[0] += ".json";
  paths[1] += ".txt";
  paths[2] += ".csv";
  write_text_file(paths[0], j.dump(2) + "\n");
  write_text_file(paths[1], format_table(rows));
  write_text_file(paths[2], format_csv(rows));
  return paths;
}

void write_embedding_csv(const std::filesystem::path& path, std::span<const std::string> ids, std::span<const int> labels,
                         const Embedding2D& embedding) {
  if (ids.size() != embedding.coords.size() || labels.size() != ids.size()) {
    throw ShapeError("embedding CSV: ids, labels and coordinates differ in length");
  }
  std::string out = "lesion_id,label,x,y\n";
  for (std::size_t i = 0; i < ids.size(); ++i) {
    out += fmt::format("{},{},{},{}\n", ids[i], labels[i] >= 0 ? std::to_string(labels[i]) : "",
                       embedding.coords[i][0], embedding.coords[i][1]);
  }
  write_text_file(path, out);
}

}  // namespace focusclf::eval
