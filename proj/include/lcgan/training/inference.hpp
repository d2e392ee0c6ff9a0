#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "lcgan/metrics/metrics.hpp"
#include "lcgan/networks/checkpoint.hpp"
#include "lcgan/networks/networks.hpp"
#include "lcgan/synthdata/synth.hpp"

namespace lcgan::train {

/// G maps X to Y, F maps Y to X.
enum class Direction { XtoY, YtoX };

/// Accepts "x2y" / "y2x" (case-insensitive); throws std::invalid_argument.
Direction parse_direction(const std::string& text);
std::string direction_name(Direction d);

/// The translator for `direction` from an LC-GAN checkpoint. Throws
/// nn::CheckpointError when it is absent or does not match its record.
std::unique_ptr<nn::Generator<float>> load_generator(const nn::Checkpoint& checkpoint, Direction direction);

std::vector<img::ImageRGB> translate_images(const nn::Generator<float>& generator,
                                            const std::vector<img::ImageRGB>& images);

/// Translates every .ppm in `in_dir` (or in its images/ subdirectory) into a
/// same-named file under `out_dir`. Returns the number of images written.
std::size_t translate(const std::filesystem::path& checkpoint_dir, Direction direction,
                      const std::filesystem::path& in_dir, const std::filesystem::path& out_dir);

img::MaskImage segment(const nn::Segmentor<float>& segmentor, const img::ImageRGB& image,
                       const nn::Generator<float>* translator = nullptr);

/// Per-image scores of S (optionally applied after a translator) against the
/// dataset's masks.
std::vector<metrics::ScoredImage> score_segmentor(const nn::Segmentor<float>& segmentor, const synth::Dataset& data,
                                                  const nn::Generator<float>* translator = nullptr);

std::vector<metrics::SegScore> scores_of(const std::vector<metrics::ScoredImage>& rows);

struct CrossDomainReport {
  std::vector<metrics::ScoredImage> cross_domain;  // S(F(y))
  std::vector<metrics::ScoredImage> baseline;      // S(y)
  std::vector<metrics::ScoredImage> mainstream;    // S_Y(y), when given
  metrics::SegScore cross_domain_mean;
  metrics::SegScore baseline_mean;
  std::optional<metrics::SegScore> mainstream_mean;
};

/// Masks of `y` are used for scoring only.
CrossDomainReport evaluate_cross_domain(const nn::Segmentor<float>& segmentor, const nn::Generator<float>& f,
                                        const synth::Dataset& y,
                                        const nn::Segmentor<float>* mainstream = nullptr);

}  // namespace lcgan::train
