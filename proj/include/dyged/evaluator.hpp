#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace dyged {

/// Scores and diagnostics for a list of windows, all vectors index-aligned.
struct EvalReport {
  std::vector<std::size_t> t;          // target timestamp of each window
  std::vector<double> scores;          // event-class probability Y_{t,1}
  std::vector<int> labels;
  std::optional<double> auc;           // absent when the labels hold a single class
  std::vector<std::vector<double>> node_attention;  // current-snapshot v-Att weights
  std::vector<std::vector<double>> time_attention;  // k+1 t-Att weights, oldest first
  std::vector<std::vector<double>> embeddings;      // z″_t

  std::size_t size() const noexcept { return t.size(); }
};

/// Rank-based (Mann-Whitney) ROC AUC, ties credited ½.
/// Throws ErrorKind::undefined_metric unless both classes are present.
double auc(std::span<const double> scores, std::span<const int> labels);

/// (s - min) / (max - min); a constant vector maps to 0.5 everywhere.
std::vector<double> minmax_scale(std::span<const double> scores);

/// Mean node-attention vector over all windows of the report.
std::vector<double> node_importance(const EvalReport& report);

struct TimeAttentionSummary {
  std::vector<double> mean;   // per offset, oldest first
  std::vector<double> stdev;  // population standard deviation
};
TimeAttentionSummary time_attention_summary(const EvalReport& report);

struct ExportPaths {
  std::filesystem::path scores = "scores.tsv";
  std::filesystem::path node_attention = "node_attention.tsv";
  std::filesystem::path time_attention = "time_attention.tsv";
  std::filesystem::path embeddings = "embeddings.tsv";

  static ExportPaths in_directory(const std::filesystem::path& dir);
};

/// Writes the four delimited exports (with header rows). Time-attention
/// offsets are written as -k … 0.
void export_report(const EvalReport& report, const ExportPaths& paths);

/// Re-reads scores.tsv into (t, score, label) columns.
EvalReport read_scores(const std::filesystem::path& path);

}  // namespace dyged
