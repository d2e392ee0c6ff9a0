#include "lcgan/cli/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "lcgan/losses/gradient_checks.hpp"
#include "lcgan/training/experiment.hpp"
#include "lcgan/training/inference.hpp"
#include "lcgan/training/lcgan_training.hpp"
#include "lcgan/training/segmentor_training.hpp"

namespace lcgan::cli {

namespace fs = std::filesystem;
using train::RunConfig;

int threads_from_env(int fallback) {
  const char* v = std::getenv("LCGAN_THREADS");
  if (!v || !*v) return fallback;
  char* end = nullptr;
  const long n = std::strtol(v, &end, 10);
  if (*end != '\0' || n < 1 || n > 1024) return fallback;
  return static_cast<int>(n);
}

namespace {

struct Common {
  std::string config = "default";
  std::optional<std::uint64_t> seed;
  std::string out;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "JSON config file, or 'default'")->capture_default_str();
  cmd->add_option("--seed", c.seed, "Run seed (data seed for synth)");
  cmd->add_option("--out", c.out, "Output directory")->required();
}

train::AblationFlags parse_flags(const std::string& text) {
  train::AblationFlags f{false, false, false};
  if (text == "none") return f;
  if (text == "all") return {};
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, text.find(',') != std::string::npos ? ',' : '+')) {
    if (item == "ssim") f.ssim = true;
    else if (item == "seg") f.seg = true;
    else if (item == "backbone") f.trained_backbone = true;
    else throw train::ConfigError("--flags: unknown component '" + item + "' (use ssim, seg, backbone, all, none)");
  }
  return f;
}

RunConfig resolve(const Common& c, bool seed_is_data_seed) {
  auto cfg = train::load_config(c.config);
  if (c.seed) (seed_is_data_seed ? cfg.data.seed : cfg.run.seed) = *c.seed;
  cfg.run.threads = threads_from_env(cfg.run.threads);
  return cfg;
}

void finish_config(RunConfig& cfg, const fs::path& out) {
  cfg.validate();
  fs::create_directories(out);
  train::write_config(out / "resolved_config.json", cfg);
}

fs::path checkpoint_dir(const fs::path& p) {
  return fs::exists(p / "checkpoint" / "manifest.json") ? p / "checkpoint" : p;
}

nn::Checkpoint load_ck(const std::string& p) { return nn::load_checkpoint(checkpoint_dir(p)); }

// Datasets on disk must match the configured image size.
synth::Dataset load(const fs::path& dir, const RunConfig& cfg, bool require_masks = false) {
  auto d = synth::load_dataset(dir, require_masks);
  for (std::size_t i = 0; i < d.size(); ++i) {
    const auto& im = d.images[i];
    if (im.width() != cfg.data.image_size || im.height() != cfg.data.image_size) {
      throw train::ConfigError(dir.string() + ": image " + d.ids[i] + " is " + std::to_string(im.width()) + "x" +
                               std::to_string(im.height()) + " but data.image_size is " +
                               std::to_string(cfg.data.image_size));
    }
  }
  return d;
}

std::string pct(const metrics::SegScore& s) { return metrics::format_percent_pair(s); }

// real | fake | mask, one row per image.
img::ImageRGB preview_grid(const std::vector<std::array<img::ImageRGB, 3>>& rows) {
  const int w = rows.front()[0].width(), h = rows.front()[0].height();
  auto grid = img::ImageRGB::filled(3 * w, static_cast<int>(rows.size()) * h, 0, 0, 0);
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (int k = 0; k < 3; ++k)
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
          for (int c = 0; c < 3; ++c) grid.set(k * w + x, static_cast<int>(r) * h + y, c, rows[r][k].at(x, y, c));
  return grid;
}

img::ImageRGB mask_image(const img::MaskImage& m) {
  auto im = img::ImageRGB::filled(m.width(), m.height(), 0, 0, 0);
  for (int y = 0; y < m.height(); ++y)
    for (int x = 0; x < m.width(); ++x)
      for (int c = 0; c < 3; ++c) im.set(x, y, c, m.at(x, y) ? 1.0f : 0.0f);
  return im;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Unpaired image translation with structure and segmentation consistency"};
  app.name("lcgan");
  app.require_subcommand(1);

  Common c;
  std::string data_dir, domain = "X", segmentor, mainstream, checkpoint, direction = "y2x", in_dir, flags;
  std::optional<int> epochs, count;
  std::optional<std::int64_t> iterations, size;
  int seeds = 5, entries = 48;

  auto* synth = app.add_subcommand("synth", "Render the train/test splits of both synthetic domains");
  add_common(synth, c);

  auto* train_seg = app.add_subcommand("train-seg", "Train a segmentor on a labeled domain");
  add_common(train_seg, c);
  train_seg->add_option("--data", data_dir, "Data root (default: data.root of the config)");
  train_seg->add_option("--domain", domain, "X or Y")->check(CLI::IsMember({"X", "Y"}))->capture_default_str();
  train_seg->add_option("--epochs", epochs, "Override run.seg_epochs")->check(CLI::PositiveNumber);

  auto* train_lcgan = app.add_subcommand("train-lcgan", "Train the translation networks");
  add_common(train_lcgan, c);
  train_lcgan->add_option("--data", data_dir, "Data root (default: data.root of the config)");
  train_lcgan->add_option("--segmentor", segmentor, "Segmentor checkpoint trained on X");
  train_lcgan->add_option("--iterations", iterations, "Override run.iterations")->check(CLI::PositiveNumber);
  train_lcgan->add_option("--flags", flags, "Components: all, none, or a list like ssim,seg,backbone");

  auto* translate = app.add_subcommand("translate", "Translate a directory of PPM images");
  add_common(translate, c);
  translate->add_option("--checkpoint", checkpoint, "LC-GAN run or checkpoint directory")->required();
  translate->add_option("--direction", direction, "x2y or y2x")->capture_default_str();
  translate->add_option("--in", in_dir, "Directory of .ppm images (or a domain directory)")->required();

  auto* evaluate = app.add_subcommand("evaluate", "Score the cross-domain strategy on labeled test Y");
  add_common(evaluate, c);
  evaluate->add_option("--data", data_dir, "Data root (default: data.root of the config)");
  evaluate->add_option("--segmentor", segmentor, "Segmentor checkpoint trained on X")->required();
  evaluate->add_option("--checkpoint", checkpoint, "LC-GAN run or checkpoint directory")->required();
  evaluate->add_option("--mainstream", mainstream, "Segmentor checkpoint trained on labeled Y");

  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of every loss gradient");
  add_common(gradcheck, c);
  gradcheck->add_option("--seeds", seeds, "Number of seeds")->check(CLI::PositiveNumber)->capture_default_str();
  gradcheck->add_option("--size", size, "Image side (default: data.image_size)")->check(CLI::PositiveNumber);
  gradcheck->add_option("--entries", entries, "Entries probed per input, 0 for all")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();

  auto* ablate = app.add_subcommand("ablate", "Train and score all 8 component combinations");
  add_common(ablate, c);
  ablate->add_option("--data", data_dir, "Data root (default: data.root of the config)");
  ablate->add_option("--segmentor", segmentor, "Segmentor checkpoint trained on X")->required();
  ablate->add_option("--iterations", iterations, "Override run.iterations")->check(CLI::PositiveNumber);

  auto* preview = app.add_subcommand("preview", "Write a real | fake | mask grid as PPM");
  add_common(preview, c);
  preview->add_option("--checkpoint", checkpoint, "LC-GAN run or checkpoint directory")->required();
  preview->add_option("--in", in_dir, "Domain directory with images/ (and masks/)")->required();
  preview->add_option("--direction", direction, "x2y or y2x")->capture_default_str();
  preview->add_option("--segmentor", segmentor, "Segment the fakes instead of showing ground truth");
  preview->add_option("--count", count, "Number of rows (default 8)")->check(CLI::PositiveNumber);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kValidationError;
  }

  try {
    const fs::path out_dir = c.out;
    auto data_root = [&](const RunConfig& cfg) { return fs::path(data_dir.empty() ? cfg.data.root : data_dir); };

    if (synth->parsed()) {
      auto cfg = resolve(c, true);
      cfg.data.root = out_dir.string();
      finish_config(cfg, out_dir);
      train::write_data(cfg.data, out_dir, cfg.run.threads);
      out << "wrote " << cfg.data.train_count << " train and " << cfg.data.test_count
          << " test images per domain to " << out_dir.string() << '\n';
    } else if (train_seg->parsed()) {
      auto cfg = resolve(c, false);
      if (!data_dir.empty()) cfg.data.root = data_dir;
      if (epochs) cfg.run.seg_epochs = *epochs;
      finish_config(cfg, out_dir);
      const auto root = data_root(cfg);
      const auto data = load(root / "train" / domain, cfg, true);
      auto opts = train::segmentor_options(cfg);
      opts.log_path = out_dir / "log.csv";
      const auto result = train::train_segmentor(data, opts);
      nn::save_checkpoint(out_dir / "checkpoint", result.best);
      out << "best epoch " << result.best_epoch << ", validation mDSC " << std::fixed << std::setprecision(4)
          << result.best_val_dsc << '\n';
      if (fs::exists(root / "test" / domain)) {
        const auto test = load(root / "test" / domain, cfg, true);
        const auto rows = train::score_segmentor(*train::load_segmentor(result.best), test);
        metrics::write_report(out_dir / "test_scores.csv", rows);
        out << "test " << domain << " mDSC/mIoU " << pct(metrics::mean_scores(train::scores_of(rows))) << '\n';
      }
    } else if (train_lcgan->parsed()) {
      auto cfg = resolve(c, false);
      if (!data_dir.empty()) cfg.data.root = data_dir;
      if (iterations) cfg.run.iterations = *iterations;
      if (!flags.empty()) cfg.flags = parse_flags(flags);
      finish_config(cfg, out_dir);
      const auto root = data_root(cfg);
      const auto x = load(root / "train" / "X", cfg, cfg.flags.seg);
      const auto y = load(root / "train" / "Y", cfg);
      std::optional<nn::Checkpoint> s;
      if (!segmentor.empty()) s = load_ck(segmentor);
      const auto result = train::train_lcgan(x, y, s ? &*s : nullptr, cfg, out_dir);
      const auto& last = result.log.back().terms;
      out << "finished " << cfg.run.iterations << " iterations (" << cfg.flags.label() << "): generator "
          << last.total_generator << ", discriminators " << last.total_discriminator << '\n';
    } else if (translate->parsed()) {
      auto cfg = resolve(c, false);
      finish_config(cfg, out_dir);
      const auto n = train::translate(checkpoint_dir(checkpoint), train::parse_direction(direction), in_dir, out_dir);
      out << "translated " << n << " images\n";
    } else if (evaluate->parsed()) {
      auto cfg = resolve(c, false);
      if (!data_dir.empty()) cfg.data.root = data_dir;
      finish_config(cfg, out_dir);
      const auto y = load(data_root(cfg) / "test" / "Y", cfg, true);
      const auto s = train::load_segmentor(load_ck(segmentor));
      const auto f = train::load_generator(load_ck(checkpoint), train::Direction::YtoX);
      std::unique_ptr<nn::Segmentor<float>> s_y;
      if (!mainstream.empty()) s_y = train::load_segmentor(load_ck(mainstream));
      const auto r = train::evaluate_cross_domain(*s, *f, y, s_y.get());
      metrics::write_report(out_dir / "cross_domain.csv", r.cross_domain);
      metrics::write_report(out_dir / "baseline.csv", r.baseline);
      nlohmann::json summary = {
          {"cross_domain", {{"mdsc", r.cross_domain_mean.dsc}, {"miou", r.cross_domain_mean.iou}}},
          {"baseline", {{"mdsc", r.baseline_mean.dsc}, {"miou", r.baseline_mean.iou}}},
          {"images", y.size()}};
      out << "cross-domain " << pct(r.cross_domain_mean) << ", no translation " << pct(r.baseline_mean);
      if (r.mainstream_mean) {
        metrics::write_report(out_dir / "mainstream.csv", r.mainstream);
        summary["mainstream"] = {{"mdsc", r.mainstream_mean->dsc}, {"miou", r.mainstream_mean->iou}};
        out << ", mainstream " << pct(*r.mainstream_mean);
      }
      out << '\n';
      std::ofstream(out_dir / "summary.json") << summary.dump(2) << '\n';
    } else if (gradcheck->parsed()) {
      auto cfg = resolve(c, false);
      finish_config(cfg, out_dir);
      loss::LossGradientOptions opt;
      opt.image_size = size ? *size : cfg.data.image_size;
      opt.entries_per_param = entries;
      opt.config = cfg.loss;
      std::ofstream csv(out_dir / "gradcheck.csv");
      csv << "loss,seed,max_relative_error,entries,passed\n";
      double worst = 0;
      bool ok = true;
      for (int k = 0; k < seeds; ++k) {
        const auto seed = cfg.run.seed + static_cast<std::uint64_t>(k);
        for (const auto& r : loss::check_loss_gradients(seed, opt)) {
          csv << r.loss << ',' << seed << ',' << std::setprecision(6) << r.report.max_relative_error << ','
              << r.report.entries_checked << ',' << (r.report.passed ? 1 : 0) << '\n';
          worst = std::max(worst, r.report.max_relative_error);
          ok = ok && r.report.passed;
        }
      }
      out << "max relative error " << std::setprecision(3) << worst << " over " << seeds << " seeds: "
          << (ok ? "pass" : "FAIL") << '\n';
      if (!ok) return kRuntimeFailure;
    } else if (ablate->parsed()) {
      auto cfg = resolve(c, false);
      if (!data_dir.empty()) cfg.data.root = data_dir;
      if (iterations) cfg.run.iterations = *iterations;
      finish_config(cfg, out_dir);
      const auto root = data_root(cfg);
      train::ExperimentData data;
      data.x_train = load(root / "train" / "X", cfg, true);
      data.y_train = load(root / "train" / "Y", cfg);
      data.y_test = load(root / "test" / "Y", cfg, true);
      const auto s_ck = load_ck(segmentor);
      std::vector<train::LcganJob> jobs;
      for (const auto& f : train::ablation_grid()) {
        auto job_cfg = cfg;
        job_cfg.flags = f;
        jobs.push_back({job_cfg, out_dir / f.label()});
      }
      const auto results = train::run_lcgan_jobs(data, &s_ck, jobs, cfg.run.threads);
      std::ofstream csv(out_dir / "ablation.csv");
      csv << "ssim,seg,trained_backbone,label,mdsc,miou\n";
      for (std::size_t i = 0; i < jobs.size(); ++i) {
        const auto& f = jobs[i].config.flags;
        const auto& r = results[i];
        csv << f.ssim << ',' << f.seg << ',' << f.trained_backbone << ',' << f.label() << ',' << std::setprecision(6)
            << r.cross_domain.dsc << ',' << r.cross_domain.iou << '\n';
        out << std::left << std::setw(20) << f.label() << pct(r.cross_domain) << "  (" << std::setprecision(3)
            << r.seconds << " s)\n";
      }
      const auto s = train::load_segmentor(s_ck);
      out << std::left << std::setw(20) << "no translation"
          << pct(metrics::mean_scores(train::scores_of(train::score_segmentor(*s, data.y_test)))) << '\n';
    } else if (preview->parsed()) {
      auto cfg = resolve(c, false);
      finish_config(cfg, out_dir);
      const auto data = synth::load_dataset(in_dir);
      const auto g = train::load_generator(load_ck(checkpoint), train::parse_direction(direction));
      std::unique_ptr<nn::Segmentor<float>> s;
      if (!segmentor.empty()) s = train::load_segmentor(load_ck(segmentor));
      const auto n = std::min<std::size_t>(data.size(), static_cast<std::size_t>(count.value_or(8)));
      std::vector<std::array<img::ImageRGB, 3>> rows;
      for (std::size_t i = 0; i < n; ++i) {
        const auto fake = train::translate_images(*g, {data.images[i]}).front();
        img::ImageRGB mask = img::ImageRGB::filled(fake.width(), fake.height(), 0, 0, 0);
        if (s) mask = mask_image(train::segment(*s, fake));
        else if (data.has_masks()) mask = mask_image(data.masks[i]);
        rows.push_back({data.images[i], fake, mask});
      }
      img::write_ppm(out_dir / "preview.ppm", preview_grid(rows));
      out << "wrote " << n << " rows to " << (out_dir / "preview.ppm").string() << '\n';
    }
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return kValidationError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kRuntimeFailure;
  }
  return kOk;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, out, err);
}

}  // namespace lcgan::cli
