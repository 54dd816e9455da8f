#include "dyged/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "dyged/error.hpp"
#include "dyged/text.hpp"

namespace dyged {

double auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) {
    fail(ErrorKind::dimension, "auc: " + std::to_string(scores.size()) + " scores vs " +
                                   std::to_string(labels.size()) + " labels");
  }
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Sum of (1-based, tie-averaged) ranks of the positives, kept as twice the
  // value so every intermediate is an exact integer.
  double twice_rank_sum = 0.0;
  std::size_t positives = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double twice_avg_rank = static_cast<double>(i + 1 + j);  // 2·(i+1 + j)/2
    for (std::size_t r = i; r < j; ++r) {
      if (labels[order[r]] == 1) {
        twice_rank_sum += twice_avg_rank;
        ++positives;
      }
    }
    i = j;
  }
  const std::size_t negatives = scores.size() - positives;
  if (positives == 0 || negatives == 0) {
    fail(ErrorKind::undefined_metric, "auc is undefined with " + std::to_string(positives) + " positives and " +
                                          std::to_string(negatives) + " negatives");
  }
  const double p = static_cast<double>(positives);
  const double twice_u = twice_rank_sum - p * (p + 1.0);
  return twice_u / (2.0 * p * static_cast<double>(negatives));
}

std::vector<double> minmax_scale(std::span<const double> scores) {
  if (scores.empty()) return {};
  const auto [lo, hi] = std::minmax_element(scores.begin(), scores.end());
  const double min = *lo;
  const double range = *hi - *lo;
  std::vector<double> out(scores.size(), 0.5);
  if (range > 0.0) {
    for (std::size_t i = 0; i < scores.size(); ++i) out[i] = (scores[i] - min) / range;
  }
  return out;
}

std::vector<double> node_importance(const EvalReport& report) {
  std::vector<double> mean;
  std::size_t count = 0;
  for (const auto& alpha : report.node_attention) {
    if (alpha.empty()) continue;
    if (mean.empty()) mean.assign(alpha.size(), 0.0);
    if (alpha.size() != mean.size()) fail(ErrorKind::dimension, "node attention vectors differ in length");
    for (std::size_t i = 0; i < alpha.size(); ++i) mean[i] += alpha[i];
    ++count;
  }
  for (auto& v : mean) v /= static_cast<double>(count);
  return mean;
}

TimeAttentionSummary time_attention_summary(const EvalReport& report) {
  TimeAttentionSummary s;
  std::size_t count = 0;
  for (const auto& w : report.time_attention) {
    if (w.empty()) continue;
    if (s.mean.empty()) s.mean.assign(w.size(), 0.0);
    if (w.size() != s.mean.size()) fail(ErrorKind::dimension, "time attention vectors differ in length");
    for (std::size_t i = 0; i < w.size(); ++i) s.mean[i] += w[i];
    ++count;
  }
  for (auto& v : s.mean) v /= static_cast<double>(count);
  s.stdev.assign(s.mean.size(), 0.0);
  for (const auto& w : report.time_attention) {
    for (std::size_t i = 0; i < w.size(); ++i) s.stdev[i] += (w[i] - s.mean[i]) * (w[i] - s.mean[i]);
  }
  for (auto& v : s.stdev) v = std::sqrt(v / static_cast<double>(count));
  return s;
}

ExportPaths ExportPaths::in_directory(const std::filesystem::path& dir) {
  ExportPaths p;
  p.scores = dir / "scores.tsv";
  p.node_attention = dir / "node_attention.tsv";
  p.time_attention = dir / "time_attention.tsv";
  p.embeddings = dir / "embeddings.tsv";
  return p;
}

void export_report(const EvalReport& report, const ExportPaths& paths) {
  using text::format_real;
  {
    std::ostringstream os;
    os << "t\tscore\tlabel\n";
    for (std::size_t i = 0; i < report.size(); ++i) {
      os << report.t[i] << '\t' << format_real(report.scores[i]) << '\t' << report.labels[i] << '\n';
    }
    text::write_file(paths.scores, os.str());
  }
  {
    std::ostringstream os;
    os << "node\tmean_weight\n";
    const auto importance = node_importance(report);
    for (std::size_t i = 0; i < importance.size(); ++i) os << i << '\t' << format_real(importance[i]) << '\n';
    text::write_file(paths.node_attention, os.str());
  }
  {
    std::ostringstream os;
    os << "offset\tmean\tstdev\n";
    const auto summary = time_attention_summary(report);
    const auto k = static_cast<long>(summary.mean.size()) - 1;
    for (std::size_t i = 0; i < summary.mean.size(); ++i) {
      os << static_cast<long>(i) - k << '\t' << format_real(summary.mean[i]) << '\t'
         << format_real(summary.stdev[i]) << '\n';
    }
    text::write_file(paths.time_attention, os.str());
  }
  {
    std::ostringstream os;
    os << 't';
    const std::size_t h = report.embeddings.empty() ? 0 : report.embeddings.front().size();
    for (std::size_t j = 0; j < h; ++j) os << "\te" << j;
    os << '\n';
    for (std::size_t i = 0; i < report.embeddings.size(); ++i) {
      os << report.t[i];
      for (double v : report.embeddings[i]) os << '\t' << format_real(v);
      os << '\n';
    }
    text::write_file(paths.embeddings, os.str());
  }
}

EvalReport read_scores(const std::filesystem::path& path) {
  const auto content = text::read_file(path);
  EvalReport report;
  int line_no = 0;
  for (auto line : text::split(content, '\n')) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    const auto where = path.string() + ":" + std::to_string(line_no);
    auto cols = text::split(line, '\t');
    if (line_no == 1) {
      if (cols.size() != 3 || cols[0] != "t") fail(ErrorKind::parse, where + ": expected header t/score/label");
      continue;
    }
    if (cols.size() != 3) fail(ErrorKind::parse, where + ": expected 3 columns");
    report.t.push_back(static_cast<std::size_t>(text::parse_int(cols[0], where)));
    report.scores.push_back(text::parse_real(cols[1], where));
    report.labels.push_back(static_cast<int>(text::parse_int(cols[2], where)));
  }
  const auto positives = std::count(report.labels.begin(), report.labels.end(), 1);
  if (positives > 0 && static_cast<std::size_t>(positives) < report.labels.size()) {
    report.auc = auc(report.scores, report.labels);
  }
  return report;
}

}  // namespace dyged
