#include "lcgan/metrics/metrics.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace lcgan::metrics {

SegScore score(const img::MaskImage& pred, const img::MaskImage& truth) {
  if (pred.width() != truth.width() || pred.height() != truth.height()) {
    throw std::invalid_argument("score: prediction is " + std::to_string(pred.width()) + "x" +
                                std::to_string(pred.height()) + " but truth is " + std::to_string(truth.width()) +
                                "x" + std::to_string(truth.height()));
  }
  std::int64_t both = 0, p = 0, t = 0;
  const auto& a = pred.values();
  const auto& b = truth.values();
  for (std::size_t i = 0; i < a.size(); ++i) {
    p += a[i];
    t += b[i];
    both += a[i] & b[i];
  }
  if (p + t == 0) return {1.0, 1.0};
  const double inter = static_cast<double>(both);
  return {2.0 * inter / static_cast<double>(p + t), inter / static_cast<double>(p + t - both)};
}

SegScore mean_scores(const std::vector<SegScore>& scores) {
  if (scores.empty()) throw std::invalid_argument("mean_scores: no images to average");
  SegScore m;
  for (const auto& s : scores) {
    m.dsc += s.dsc;
    m.iou += s.iou;
  }
  m.dsc /= static_cast<double>(scores.size());
  m.iou /= static_cast<double>(scores.size());
  return m;
}

namespace {

std::string percent(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", 100.0 * v);
  return buf;
}

}  // namespace

std::string format_percent_pair(const SegScore& s) { return percent(s.dsc) + "/" + percent(s.iou); }

std::string report_csv(const std::vector<ScoredImage>& rows) {
  std::vector<SegScore> all;
  std::ostringstream os;
  os << "id,dsc,iou\n";
  for (const auto& r : rows) {
    os << r.id << ',' << percent(r.score.dsc) << ',' << percent(r.score.iou) << '\n';
    all.push_back(r.score);
  }
  const auto m = mean_scores(all);
  os << "mean," << percent(m.dsc) << ',' << percent(m.iou) << '\n';
  return os.str();
}

void write_report(const std::filesystem::path& path, const std::vector<ScoredImage>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write report " + path.string());
  out << report_csv(rows);
}

}  // namespace lcgan::metrics
