#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "lcgan/imagecore/image.hpp"

// Procedural stand-ins for the two surgical domains: one rigid instrument per
// image over a textured background, with a ground-truth mask.
namespace lcgan::synth {

enum class InstrumentShape { Capsule, Wedge };

struct Background {
  std::array<double, 3> base{0.78, 0.71, 0.59};
  double noise = 0.03;          // per-pixel uniform noise amplitude
  int blobs = 4;                // low-frequency tint blobs
  double blob_strength = 0.08;
};

struct InstrumentStyle {
  double gray_min = 0.35;
  double gray_max = 0.55;
  double width_min = 0.08;  // fraction of the image side
  double width_max = 0.16;
  InstrumentShape shape = InstrumentShape::Capsule;
  bool highlight_stripe = false;
};

struct Nuisance {
  int specular_min = 0;
  int specular_max = 0;
  double specular_size_min = 0.02;  // ellipse semi-axis, fraction of the side
  double specular_size_max = 0.06;
  double shadow_probability = 0.2;
  double red_cast = 0.0;
};

struct DomainSpec {
  std::string tag = "X";
  Background background;
  InstrumentStyle instrument;
  Nuisance nuisance;
  int image_size = 64;
  std::uint64_t seed = 1;

  /// Throws std::invalid_argument for empty ranges or a size below 16.
  void validate() const;
};

struct DefaultSpecs {
  DomainSpec x;
  DomainSpec y;
};
DefaultSpecs default_specs(std::uint64_t seed = 1);

void to_json(nlohmann::json& j, const DomainSpec& s);
void from_json(const nlohmann::json& j, DomainSpec& s);

struct Sample {
  std::string id;
  img::ImageRGB image;
  img::MaskImage mask;
};

// Accepted instrument coverage, as a fraction of all pixels.
inline constexpr double kMinCoverage = 0.02;
inline constexpr double kMaxCoverage = 0.25;

/// Sample `index` of the domain; a pure function of (spec, index).
Sample render_sample(const DomainSpec& spec, std::int64_t index);

/// "0042"-style id of a global sample index.
std::string sample_id(std::int64_t index);

/// Renders indices [first, first + count) into
/// <root>/<tag>/{images,masks}/<id>.ppm|.pgm and writes <root>/<tag>/spec.json.
/// Work is split over `threads` workers; output does not depend on it.
void generate(const DomainSpec& spec, std::int64_t first, std::int64_t count, const std::filesystem::path& root,
              int threads = 1);

/// Images (and masks when present) of one domain directory, sorted by id.
struct Dataset {
  std::vector<std::string> ids;
  std::vector<img::ImageRGB> images;
  std::vector<img::MaskImage> masks;

  std::size_t size() const { return images.size(); }
  bool has_masks() const { return !masks.empty(); }
};

/// The samples generate() would write for the same range, kept in memory.
Dataset render_dataset(const DomainSpec& spec, std::int64_t first, std::int64_t count);

/// Reads <dir>/images/*.ppm and, if the directory exists, <dir>/masks/*.pgm.
/// Throws img::ImageIoError when the directory holds no images or a mask is
/// missing for some image.
Dataset load_dataset(const std::filesystem::path& dir, bool require_masks = false);

}  // namespace lcgan::synth
