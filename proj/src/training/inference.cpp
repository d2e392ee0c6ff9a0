#include "lcgan/training/inference.hpp"

#include <algorithm>
#include <cctype>

namespace lcgan::train {

namespace fs = std::filesystem;

Direction parse_direction(const std::string& text) {
  std::string t;
  for (char c : text) t += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (t == "x2y") return Direction::XtoY;
  if (t == "y2x") return Direction::YtoX;
  throw std::invalid_argument("direction must be x2y or y2x, got '" + text + "'");
}

std::string direction_name(Direction d) { return d == Direction::XtoY ? "x2y" : "y2x"; }

std::unique_ptr<nn::Generator<float>> load_generator(const nn::Checkpoint& checkpoint, Direction direction) {
  const std::string key = direction == Direction::XtoY ? "G" : "F";
  if (!checkpoint.architecture.contains(key))
    throw nn::CheckpointError("checkpoint: no generator '" + key + "' for direction " + direction_name(direction));
  std::unique_ptr<nn::Generator<float>> g;
  try {
    g = nn::make_generator<float>(checkpoint.architecture[key], 0);
  } catch (const nlohmann::json::exception& e) {
    throw nn::CheckpointError("checkpoint: bad generator record '" + key + "': " + e.what());
  } catch (const std::invalid_argument& e) {
    throw nn::CheckpointError("checkpoint: bad generator record '" + key + "': " + e.what());
  }
  nn::restore_parameters(checkpoint, g->parameters(), key + ".");
  return g;
}

std::vector<img::ImageRGB> translate_images(const nn::Generator<float>& generator,
                                            const std::vector<img::ImageRGB>& images) {
  std::vector<img::ImageRGB> out;
  out.reserve(images.size());
  for (const auto& im : images) out.push_back(img::from_model_range(generator.forward(img::to_model_range<float>(im))));
  return out;
}

std::size_t translate(const fs::path& checkpoint_dir, Direction direction, const fs::path& in_dir,
                      const fs::path& out_dir) {
  const auto generator = load_generator(nn::load_checkpoint(checkpoint_dir), direction);
  const auto source = fs::is_directory(in_dir / "images") ? in_dir / "images" : in_dir;
  if (!fs::is_directory(source)) throw img::ImageIoError("translate: no directory " + source.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(source))
    if (e.is_regular_file() && e.path().extension() == ".ppm") files.push_back(e.path());
  if (files.empty()) throw img::ImageIoError("translate: " + source.string() + " holds no .ppm images");
  std::sort(files.begin(), files.end());
  fs::create_directories(out_dir);
  for (const auto& p : files) {
    const auto fake = translate_images(*generator, {img::read_ppm(p)});
    img::write_ppm(out_dir / p.filename(), fake.front());
  }
  return files.size();
}

img::MaskImage segment(const nn::Segmentor<float>& segmentor, const img::ImageRGB& image,
                       const nn::Generator<float>* translator) {
  auto x = img::to_model_range<float>(image);
  if (translator) x = translator->forward(x);
  return img::mask_from_logits(segmentor.forward(x));
}

std::vector<metrics::ScoredImage> score_segmentor(const nn::Segmentor<float>& segmentor, const synth::Dataset& data,
                                                  const nn::Generator<float>* translator) {
  if (data.masks.size() != data.size()) throw std::invalid_argument("score_segmentor: dataset has no masks");
  std::vector<metrics::ScoredImage> rows;
  rows.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i)
    rows.push_back({data.ids[i], metrics::score(segment(segmentor, data.images[i], translator), data.masks[i])});
  return rows;
}

std::vector<metrics::SegScore> scores_of(const std::vector<metrics::ScoredImage>& rows) {
  std::vector<metrics::SegScore> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(r.score);
  return out;
}

CrossDomainReport evaluate_cross_domain(const nn::Segmentor<float>& segmentor, const nn::Generator<float>& f,
                                        const synth::Dataset& y, const nn::Segmentor<float>* mainstream) {
  CrossDomainReport r;
  r.cross_domain = score_segmentor(segmentor, y, &f);
  r.baseline = score_segmentor(segmentor, y);
  r.cross_domain_mean = metrics::mean_scores(scores_of(r.cross_domain));
  r.baseline_mean = metrics::mean_scores(scores_of(r.baseline));
  if (mainstream) {
    r.mainstream = score_segmentor(*mainstream, y);
    r.mainstream_mean = metrics::mean_scores(scores_of(r.mainstream));
  }
  return r;
}

}  // namespace lcgan::train
