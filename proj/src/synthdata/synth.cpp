#include "lcgan/synthdata/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <thread>

#include "lcgan/diffcomp/random.hpp"

namespace lcgan::synth {

namespace fs = std::filesystem;

namespace {

void require_range(double lo, double hi, const char* what) {
  if (!(lo <= hi)) throw std::invalid_argument(std::string("domain spec: empty range for ") + what);
}

struct Vec2 {
  double x, y;
};

// Signed distance from p to a shaft running from `tip` along `dir`, whose
// radius grows from r_tip to r over `taper` pixels. Also reports the signed
// offset across the shaft and the radius there.
struct ShaftDistance {
  double sd;
  double across;
  double radius;
};

ShaftDistance shaft_distance(Vec2 p, Vec2 tip, Vec2 dir, double r_tip, double r, double taper) {
  const double dx = p.x - tip.x, dy = p.y - tip.y;
  const double along = std::max(0.0, dx * dir.x + dy * dir.y);
  const double radius = taper > 0 ? r_tip + (r - r_tip) * std::min(along / taper, 1.0) : r;
  const double cx = tip.x + along * dir.x, cy = tip.y + along * dir.y;
  const double across = (p.x - cx) * -dir.y + (p.y - cy) * dir.x;
  return {std::hypot(p.x - cx, p.y - cy) - radius, across, radius};
}

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

// Stored values are exactly representable at 8 bits, so an image read back
// from disk equals the rendered one.
float to_8bit(double v) { return static_cast<float>(std::lround(clamp01(v) * 255.0)) / 255.0f; }

}  // namespace

void DomainSpec::validate() const {
  if (image_size < 16) throw std::invalid_argument("domain spec: image_size must be at least 16");
  if (tag.empty()) throw std::invalid_argument("domain spec: empty tag");
  for (double b : background.base)
    if (b < 0 || b > 1) throw std::invalid_argument("domain spec: background base outside [0, 1]");
  require_range(instrument.gray_min, instrument.gray_max, "instrument gray");
  require_range(instrument.width_min, instrument.width_max, "instrument width");
  if (instrument.width_min <= 0) throw std::invalid_argument("domain spec: instrument width must be positive");
  if (nuisance.specular_min < 0 || nuisance.specular_min > nuisance.specular_max) {
    throw std::invalid_argument("domain spec: empty range for specular count");
  }
  require_range(nuisance.specular_size_min, nuisance.specular_size_max, "specular size");
  if (nuisance.shadow_probability < 0 || nuisance.shadow_probability > 1) {
    throw std::invalid_argument("domain spec: shadow probability outside [0, 1]");
  }
}

DefaultSpecs default_specs(std::uint64_t seed) {
  DefaultSpecs d;
  d.x.tag = "X";
  d.x.seed = seed;

  d.y.tag = "Y";
  d.y.seed = seed + 1;
  d.y.background = {{0.55, 0.22, 0.18}, 0.04, 5, 0.08};
  d.y.instrument.gray_min = 0.6;
  d.y.instrument.gray_max = 0.8;
  d.y.instrument.highlight_stripe = true;
  d.y.nuisance.specular_min = 2;
  d.y.nuisance.specular_max = 5;
  d.y.nuisance.shadow_probability = 0.3;
  d.y.nuisance.red_cast = 0.1;
  return d;
}

void to_json(nlohmann::json& j, const DomainSpec& s) {
  j = {{"tag", s.tag},
       {"image_size", s.image_size},
       {"seed", s.seed},
       {"background",
        {{"base", s.background.base},
         {"noise", s.background.noise},
         {"blobs", s.background.blobs},
         {"blob_strength", s.background.blob_strength}}},
       {"instrument",
        {{"gray_min", s.instrument.gray_min},
         {"gray_max", s.instrument.gray_max},
         {"width_min", s.instrument.width_min},
         {"width_max", s.instrument.width_max},
         {"shape", s.instrument.shape == InstrumentShape::Capsule ? "capsule" : "wedge"},
         {"highlight_stripe", s.instrument.highlight_stripe}}},
       {"nuisance",
        {{"specular_min", s.nuisance.specular_min},
         {"specular_max", s.nuisance.specular_max},
         {"specular_size_min", s.nuisance.specular_size_min},
         {"specular_size_max", s.nuisance.specular_size_max},
         {"shadow_probability", s.nuisance.shadow_probability},
         {"red_cast", s.nuisance.red_cast}}}};
}

void from_json(const nlohmann::json& j, DomainSpec& s) {
  s.tag = j.value("tag", s.tag);
  s.image_size = j.value("image_size", s.image_size);
  s.seed = j.value("seed", s.seed);
  if (j.contains("background")) {
    const auto& b = j.at("background");
    s.background.base = b.value("base", s.background.base);
    s.background.noise = b.value("noise", s.background.noise);
    s.background.blobs = b.value("blobs", s.background.blobs);
    s.background.blob_strength = b.value("blob_strength", s.background.blob_strength);
  }
  if (j.contains("instrument")) {
    const auto& i = j.at("instrument");
    s.instrument.gray_min = i.value("gray_min", s.instrument.gray_min);
    s.instrument.gray_max = i.value("gray_max", s.instrument.gray_max);
    s.instrument.width_min = i.value("width_min", s.instrument.width_min);
    s.instrument.width_max = i.value("width_max", s.instrument.width_max);
    const auto shape = i.value("shape", std::string("capsule"));
    if (shape != "capsule" && shape != "wedge") {
      throw std::invalid_argument("domain spec: unknown instrument shape '" + shape + "'");
    }
    s.instrument.shape = shape == "capsule" ? InstrumentShape::Capsule : InstrumentShape::Wedge;
    s.instrument.highlight_stripe = i.value("highlight_stripe", s.instrument.highlight_stripe);
  }
  if (j.contains("nuisance")) {
    const auto& n = j.at("nuisance");
    s.nuisance.specular_min = n.value("specular_min", s.nuisance.specular_min);
    s.nuisance.specular_max = n.value("specular_max", s.nuisance.specular_max);
    s.nuisance.specular_size_min = n.value("specular_size_min", s.nuisance.specular_size_min);
    s.nuisance.specular_size_max = n.value("specular_size_max", s.nuisance.specular_size_max);
    s.nuisance.shadow_probability = n.value("shadow_probability", s.nuisance.shadow_probability);
    s.nuisance.red_cast = n.value("red_cast", s.nuisance.red_cast);
  }
}

std::string sample_id(std::int64_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04lld", static_cast<long long>(index));
  return buf;
}

Sample render_sample(const DomainSpec& spec, std::int64_t index) {
  spec.validate();
  Rng rng(Rng::derive(spec.seed, static_cast<std::uint64_t>(index)));
  const int n = spec.image_size;
  const double side = n;
  const std::size_t npix = static_cast<std::size_t>(n) * n;

  // Background: base colour, soft tint blobs.
  std::vector<double> bg(npix * 3);
  for (std::size_t i = 0; i < npix; ++i)
    for (int c = 0; c < 3; ++c) bg[i * 3 + c] = spec.background.base[c];
  for (int b = 0; b < spec.background.blobs; ++b) {
    const Vec2 centre{rng.uniform(0, side), rng.uniform(0, side)};
    const double sigma = rng.uniform(0.15, 0.35) * side;
    const double shared = rng.uniform(-1, 1) * spec.background.blob_strength;
    std::array<double, 3> tint{};
    for (auto& t : tint) t = shared + rng.uniform(-0.3, 0.3) * spec.background.blob_strength;
    for (int y = 0; y < n; ++y)
      for (int x = 0; x < n; ++x) {
        const double d2 = (x + 0.5 - centre.x) * (x + 0.5 - centre.x) + (y + 0.5 - centre.y) * (y + 0.5 - centre.y);
        const double w = std::exp(-0.5 * d2 / (sigma * sigma));
        for (int c = 0; c < 3; ++c) bg[(static_cast<std::size_t>(y) * n + x) * 3 + c] += w * tint[c];
      }
  }

  // Instrument geometry, resampled until the coverage is acceptable.
  Vec2 tip{}, dir{};
  double radius = 0, r_tip = 0, taper = 0;
  std::vector<ShaftDistance> dist(npix);
  std::int64_t covered = 0;
  bool accepted = false;
  for (int attempt = 0; attempt < 200 && !accepted; ++attempt) {
    const double angle = rng.uniform(0, 2 * M_PI);
    dir = {std::cos(angle), std::sin(angle)};
    tip = {rng.uniform(0.2, 0.8) * side, rng.uniform(0.2, 0.8) * side};
    radius = 0.5 * rng.uniform(spec.instrument.width_min, spec.instrument.width_max) * side;
    const bool wedge = spec.instrument.shape == InstrumentShape::Wedge;
    r_tip = wedge ? 0.35 * radius : radius;
    taper = wedge ? 0.5 * side : 0.0;
    covered = 0;
    for (int y = 0; y < n; ++y)
      for (int x = 0; x < n; ++x) {
        const auto d = shaft_distance({x + 0.5, y + 0.5}, tip, dir, r_tip, radius, taper);
        dist[static_cast<std::size_t>(y) * n + x] = d;
        covered += d.sd <= 0 ? 1 : 0;
      }
    const double frac = static_cast<double>(covered) / static_cast<double>(npix);
    accepted = frac >= kMinCoverage && frac <= kMaxCoverage;
  }
  if (!accepted) throw std::runtime_error("synth: could not place an instrument for sample " + sample_id(index));

  // Optional soft shadow cast beside the shaft.
  if (rng.uniform() < spec.nuisance.shadow_probability) {
    const double offset = rng.uniform(0.04, 0.1) * side;
    const Vec2 shift{-dir.y * offset, dir.x * offset};
    const Vec2 stip{tip.x + shift.x, tip.y + shift.y};
    const double depth = rng.uniform(0.2, 0.4);
    for (int y = 0; y < n; ++y)
      for (int x = 0; x < n; ++x) {
        const auto d = shaft_distance({x + 0.5, y + 0.5}, stip, dir, r_tip * 1.3, radius * 1.3, taper);
        const double s = clamp01(0.5 - d.sd / 3.0);
        for (int c = 0; c < 3; ++c) bg[(static_cast<std::size_t>(y) * n + x) * 3 + c] *= 1.0 - depth * s;
      }
  }

  // Shaded metal over the background with a one-pixel anti-aliasing ramp.
  const double gray = rng.uniform(spec.instrument.gray_min, spec.instrument.gray_max);
  std::vector<double> rgb(npix * 3);
  std::vector<std::uint8_t> mask(npix);
  for (std::size_t i = 0; i < npix; ++i) {
    const auto& d = dist[i];
    const double alpha = clamp01(0.5 - d.sd);
    const double t = std::min(std::abs(d.across) / std::max(d.radius, 1e-9), 1.0);
    double metal = gray * (1.0 - 0.25 * t * t);
    if (spec.instrument.highlight_stripe) {
      const double u = (d.across - 0.3 * d.radius) / std::max(0.15 * d.radius, 0.5);
      metal += 0.2 * std::exp(-u * u);
    }
    for (int c = 0; c < 3; ++c) rgb[i * 3 + c] = alpha * metal + (1.0 - alpha) * bg[i * 3 + c];
    mask[i] = d.sd <= 0 ? 1 : 0;
  }

  // Specular highlights.
  const int speculars =
      spec.nuisance.specular_min +
      static_cast<int>(rng.below(static_cast<std::uint64_t>(spec.nuisance.specular_max - spec.nuisance.specular_min + 1)));
  for (int s = 0; s < speculars; ++s) {
    const Vec2 c{rng.uniform(0, side), rng.uniform(0, side)};
    const double a = rng.uniform(spec.nuisance.specular_size_min, spec.nuisance.specular_size_max) * side;
    const double b = a * rng.uniform(0.3, 0.8);
    const double phi = rng.uniform(0, M_PI);
    const double cp = std::cos(phi), sp = std::sin(phi);
    for (int y = 0; y < n; ++y)
      for (int x = 0; x < n; ++x) {
        const double dx = x + 0.5 - c.x, dy = y + 0.5 - c.y;
        const double u = (dx * cp + dy * sp) / a, v = (-dx * sp + dy * cp) / b;
        const double w = 0.9 * std::exp(-2.0 * (u * u + v * v));
        for (int k = 0; k < 3; ++k) {
          auto& p = rgb[(static_cast<std::size_t>(y) * n + x) * 3 + k];
          p += (1.0 - p) * w;
        }
      }
  }

  // Global cast and sensor noise.
  const double cast = spec.nuisance.red_cast;
  const std::array<double, 3> gain{1.0 + cast, 1.0 - 0.5 * cast, 1.0 - 0.5 * cast};
  std::vector<float> out(npix * 3);
  for (std::size_t i = 0; i < npix; ++i)
    for (int c = 0; c < 3; ++c) {
      const double noise = rng.uniform(-spec.background.noise, spec.background.noise);
      out[i * 3 + c] = to_8bit(rgb[i * 3 + c] * gain[c] + noise);
    }

  return {sample_id(index), img::ImageRGB(n, n, std::move(out)), img::MaskImage(n, n, std::move(mask))};
}

void generate(const DomainSpec& spec, std::int64_t first, std::int64_t count, const fs::path& root, int threads) {
  spec.validate();
  if (count < 1) throw std::invalid_argument("generate: need at least one sample");
  const auto dir = root / spec.tag;
  fs::create_directories(dir / "images");
  fs::create_directories(dir / "masks");

  auto work = [&](int worker, int workers) {
    for (std::int64_t i = worker; i < count; i += workers) {
      const auto s = render_sample(spec, first + i);
      img::write_ppm(dir / "images" / (s.id + ".ppm"), s.image);
      img::write_mask(dir / "masks" / (s.id + ".pgm"), s.mask);
    }
  };
  threads = std::max(1, std::min<int>(threads, static_cast<int>(count)));
  if (threads == 1) {
    work(0, 1);
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(work, t, threads);
  }

  nlohmann::json record = spec;
  record["first_index"] = first;
  record["count"] = count;
  std::ofstream out(dir / "spec.json");
  out << record.dump(2) << '\n';
  if (!out) throw std::runtime_error("generate: cannot write " + (dir / "spec.json").string());
}

Dataset render_dataset(const DomainSpec& spec, std::int64_t first, std::int64_t count) {
  spec.validate();
  if (count < 1) throw std::invalid_argument("render_dataset: need at least one sample");
  Dataset d;
  for (std::int64_t i = 0; i < count; ++i) {
    auto s = render_sample(spec, first + i);
    d.ids.push_back(std::move(s.id));
    d.images.push_back(std::move(s.image));
    d.masks.push_back(std::move(s.mask));
  }
  return d;
}

Dataset load_dataset(const fs::path& dir, bool require_masks) {
  const auto images = dir / "images";
  if (!fs::is_directory(images)) throw img::ImageIoError("dataset: no images directory in " + dir.string());
  std::vector<std::string> ids;
  for (const auto& e : fs::directory_iterator(images))
    if (e.is_regular_file() && e.path().extension() == ".ppm") ids.push_back(e.path().stem().string());
  if (ids.empty()) throw img::ImageIoError("dataset: " + images.string() + " holds no .ppm images");
  std::sort(ids.begin(), ids.end());

  Dataset d;
  d.ids = ids;
  for (const auto& id : ids) d.images.push_back(img::read_ppm(images / (id + ".ppm")));
  const auto masks = dir / "masks";
  if (fs::is_directory(masks)) {
    for (const auto& id : ids) {
      const auto p = masks / (id + ".pgm");
      if (!fs::exists(p)) throw img::ImageIoError("dataset: image " + id + " has no mask " + p.string());
      d.masks.push_back(img::read_mask(p));
    }
  } else if (require_masks) {
    throw img::ImageIoError("dataset: no masks directory in " + dir.string());
  }
  return d;
}

}  // namespace lcgan::synth
