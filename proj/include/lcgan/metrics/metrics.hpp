#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "lcgan/imagecore/image.hpp"

namespace lcgan::metrics {

struct SegScore {
  double dsc = 0;
  double iou = 0;
};

/// Overlap of instrument pixels. Two empty masks score a perfect 1.
SegScore score(const img::MaskImage& pred, const img::MaskImage& truth);

/// Unweighted mean over images. Rejects an empty list.
SegScore mean_scores(const std::vector<SegScore>& scores);

struct ScoredImage {
  std::string id;
  SegScore score;
};

/// "id,dsc,iou" rows in percent with one decimal, then a "mean" row.
std::string report_csv(const std::vector<ScoredImage>& rows);
void write_report(const std::filesystem::path& path, const std::vector<ScoredImage>& rows);

/// "79.9/73.1" style percentage pair.
std::string format_percent_pair(const SegScore& s);

}  // namespace lcgan::metrics
