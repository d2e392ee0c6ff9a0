#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "doctest.h"
#include "lcgan/losses/losses.hpp"
#include "lcgan/training/buffer.hpp"
#include "lcgan/training/config.hpp"
#include "lcgan/training/experiment.hpp"
#include "lcgan/training/inference.hpp"
#include "lcgan/training/lcgan_training.hpp"
#include "lcgan/training/optim.hpp"
#include "lcgan/training/segmentor_training.hpp"
#include "test_util.hpp"

using namespace lcgan;
using namespace lcgan::train;
using lcgan::testing::random_tensor;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("lcgan_test_training_" + name);
  fs::remove_all(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

// Small but complete configuration: 32x32 images, a handful of samples.
RunConfig tiny_config() {
  RunConfig c;
  c.data.image_size = 32;
  c.data.train_count = 8;
  c.data.test_count = 4;
  c.run.iterations = 4;
  c.run.seg_epochs = 2;
  c.run.seg_batch = 3;
  c.run.validation_fraction = 0.25;
  c.run.log_every = 2;
  c.run.checkpoint_every = 2;
  return c;
}

const ExperimentData& tiny_data() {
  static const ExperimentData data = synthesize_data(tiny_config().data);
  return data;
}

const nn::Checkpoint& tiny_segmentor() {
  static const nn::Checkpoint ck = train_segmentor(tiny_data().x_train, segmentor_options(tiny_config())).best;
  return ck;
}

bool same_values(const nn::Checkpoint& a, const nn::Checkpoint& b) {
  if (a.tensors.size() != b.tensors.size()) return false;
  for (std::size_t i = 0; i < a.tensors.size(); ++i) {
    if (a.tensors[i].name != b.tensors[i].name || a.tensors[i].values != b.tensors[i].values) return false;
  }
  return true;
}

// Passes images through unchanged.
class IdentityGenerator final : public nn::Generator<float> {
 public:
  Tensor<float> forward(const Tensor<float>& x) const override { return x; }
  nn::ParameterStore<float>& parameters() override { return params_; }
  const nn::ParameterStore<float>& parameters() const override { return params_; }
  nlohmann::json architecture() const override { return {{"type", "identity"}}; }

 private:
  nn::ParameterStore<float> params_;
};

}  // namespace

TEST_CASE("learning-rate schedule") {
  for (std::int64_t total : {1, 2, 7, 3000}) {
    const LrSchedule s(8e-5, total);
    CHECK(s.at(0) == 8e-5);
    CHECK(s.at(total) == 0.0);
    if (total % 2 == 0) CHECK(s.at(total / 2) == 8e-5);
    double prev = s.at(0);
    for (std::int64_t t = 1; t <= total; ++t) {
      CHECK(s.at(t) <= prev);
      prev = s.at(t);
    }
  }
  const LrSchedule s(1.0, 3000);
  CHECK(s.at(2250) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(s.at(2999) == doctest::Approx(1.0 / 1500).epsilon(1e-12));
  // Linear on the decay half: equal steps drop by equal amounts.
  CHECK(s.at(1600) - s.at(1700) == doctest::Approx(s.at(2700) - s.at(2800)).epsilon(1e-9));
  CHECK_THROWS_AS(LrSchedule(1.0, 0), std::invalid_argument);
}

TEST_CASE("adam") {
  SUBCASE("zero gradient leaves parameters unchanged") {
    auto p = random_tensor({3, 4}, 1, -1, 1, true);
    const std::vector<double> before(p.data().begin(), p.data().end());
    Adam<double> opt;
    opt.add("p", p);
    ops::sum(ops::mul_scalar(p, 0.0)).backward();
    REQUIRE(p.has_grad());
    for (int i = 0; i < 5; ++i) opt.step(0.1);
    CHECK(std::vector<double>(p.data().begin(), p.data().end()) == before);
  }
  SUBCASE("parameters without a gradient are skipped") {
    auto p = random_tensor({5}, 2, -1, 1, true);
    const std::vector<double> before(p.data().begin(), p.data().end());
    Adam<double> opt;
    opt.add("p", p);
    opt.step(0.1);
    CHECK(opt.steps(0) == 0);
    CHECK(std::vector<double>(p.data().begin(), p.data().end()) == before);
  }
  SUBCASE("matches a scalar reference over several steps") {
    const AdamConfig cfg{0.5, 0.999, 1e-8};
    auto p = random_tensor({6}, 3, -1, 1, true);
    std::vector<double> ref(p.data().begin(), p.data().end()), m(6, 0), v(6, 0);
    Adam<double> opt(cfg);
    opt.add("p", p);
    for (int t = 1; t <= 5; ++t) {
      // loss = sum(c * p^2), gradient 2 c p
      const double c = 0.3 * t;
      opt.zero_grad();
      ops::sum(ops::mul_scalar(ops::square(p), c)).backward();
      const double lr = 0.01 / t;
      opt.step(lr);
      for (int i = 0; i < 6; ++i) {
        const double g = 2 * c * ref[i];
        m[i] = cfg.beta1 * m[i] + (1 - cfg.beta1) * g;
        v[i] = cfg.beta2 * v[i] + (1 - cfg.beta2) * g * g;
        const double mh = m[i] / (1 - std::pow(cfg.beta1, t)), vh = v[i] / (1 - std::pow(cfg.beta2, t));
        ref[i] -= lr * mh / (std::sqrt(vh) + cfg.eps);
      }
    }
    for (int i = 0; i < 6; ++i) CHECK(p.data()[i] == doctest::Approx(ref[i]).epsilon(1e-12));
  }
  SUBCASE("first step moves each entry by lr against its gradient sign") {
    auto p = Tensor<double>({3}, {0.5, -2.0, 1.0}, true);
    Adam<double> opt;
    opt.add("p", p);
    ops::sum(ops::mul(p, Tensor<double>({3}, {3.0, -1.0, 0.25}))).backward();
    opt.step(0.01);
    CHECK(p.data()[0] == doctest::Approx(0.49).epsilon(1e-9));
    CHECK(p.data()[1] == doctest::Approx(-1.99).epsilon(1e-9));
    CHECK(p.data()[2] == doctest::Approx(0.99).epsilon(1e-9));
  }
  SUBCASE("state round trip") {
    nn::ParameterStore<float> store;
    store.add("w", {4}, {1, 2, 3, 4});
    Adam<float> opt;
    opt.add(store, "net.");
    ops::sum(ops::square(store.get("w"))).backward();
    opt.step(0.1);
    nn::Checkpoint ck;
    opt.append_state(ck, "adam.");
    CHECK(ck.find("adam.m.net.w"));
    CHECK(ck.metadata["optimizer"]["adam."]["steps"]["net.w"] == 1);

    Adam<float> other;
    other.add(store, "net.");
    other.restore_state(ck, "adam.");
    CHECK(other.steps(0) == 1);
    nn::Checkpoint again;
    other.append_state(again, "adam.");
    CHECK(same_values(ck, again));
    Adam<float> missing;
    missing.add(store, "x.");
    CHECK_THROWS_AS(missing.restore_state(ck, "adam."), nn::CheckpointError);
  }
}

TEST_CASE("image buffer") {
  auto fake = [](int k) { return Tensor<float>::full({1, 1, 2, 2}, static_cast<float>(k), true); };
  SUBCASE("returns the newest fake until full, never exceeds capacity") {
    ImageBuffer<float> buf(5, 1);
    for (int k = 0; k < 5; ++k) {
      const auto out = buf.query(fake(k));
      CHECK(out.data()[0] == static_cast<float>(k));
      CHECK_FALSE(out.requires_grad());
      CHECK(buf.size() == static_cast<std::size_t>(k + 1));
    }
    int old = 0;
    const int n = 4000;
    std::set<float> seen;
    for (int k = 5; k < 5 + n; ++k) {
      const float v = buf.query(fake(k)).data()[0];
      CHECK(buf.size() == 5);
      if (v != static_cast<float>(k)) {
        ++old;
        CHECK(v < static_cast<float>(k));
        CHECK(seen.insert(v).second);  // a swapped-out fake leaves the buffer
      }
    }
    // Binomial(4000, 1/2): mean 2000, sd ~32.
    CHECK(old > 2000 - 160);
    CHECK(old < 2000 + 160);
  }
  SUBCASE("capacity zero passes through") {
    ImageBuffer<float> buf(0, 1);
    for (int k = 0; k < 20; ++k) CHECK(buf.query(fake(k)).data()[0] == static_cast<float>(k));
    CHECK(buf.size() == 0);
  }
}

TEST_CASE("sampler visits every index once per pass") {
  Sampler a(7, 3), b(7, 3);
  for (int pass = 0; pass < 4; ++pass) {
    std::set<std::size_t> seen;
    for (int i = 0; i < 7; ++i) {
      const auto k = a.next();
      CHECK(k == b.next());
      seen.insert(k);
    }
    CHECK(seen.size() == 7);
  }
  CHECK_THROWS_AS(Sampler(0, 1), std::invalid_argument);
}

TEST_CASE("run configuration") {
  const RunConfig d;
  CHECK(d.data.image_size == 64);
  CHECK(d.data.train_count == 400);
  CHECK(d.run.iterations == 3000);
  CHECK(d.optim.lr == 8e-5);
  CHECK(d.optim.beta1 == 0.5);
  CHECK(d.optim.buffer_capacity == 50);
  CHECK(d.loss.lambda_cycle == 5.0);

  const auto j = to_json(d);
  for (const char* section : {"data", "model", "loss", "optim", "run"}) CHECK(j.contains(section));
  CHECK(to_json(config_from_json(j)) == j);
  CHECK(to_json(config_from_json(nlohmann::json::object())) == j);

  const auto partial = config_from_json(
      {{"run", {{"iterations", 10}}}, {"loss", {{"flags", {{"seg", false}}}}}, {"model", {{"segmentor", {{"aspp_width", 8}}}}}});
  CHECK(partial.run.iterations == 10);
  CHECK_FALSE(partial.flags.seg);
  CHECK(partial.flags.ssim);
  CHECK(partial.model.segmentor.aspp_width == 8);
  CHECK(partial.model.segmentor.decoder_width == d.model.segmentor.decoder_width);

  CHECK_THROWS_AS(config_from_json({{"runs", {}}}), ConfigError);
  CHECK_THROWS_AS(config_from_json({{"run", {{"iteration", 5}}}}), ConfigError);
  CHECK_THROWS_AS(config_from_json({{"run", {{"iterations", "many"}}}}), ConfigError);
  CHECK_THROWS_AS(config_from_json({{"run", {{"iterations", 0}}}}), ConfigError);
  CHECK_THROWS_AS(config_from_json({{"data", {{"image_size", 30}}}}), ConfigError);
  CHECK_THROWS_AS(config_from_json({{"loss", {{"gamma", {0.5, 0.5}}}}}), ConfigError);
  CHECK_THROWS_AS(config_from_json({{"model", {{"segmentor", {{"low_level_stage", 9}}}}}}), ConfigError);

  CHECK(to_json(load_config("default")) == j);
  CHECK_THROWS_AS(load_config("/nonexistent/config.json"), ConfigError);

  const auto dir = scratch_dir("config");
  write_config(dir / "resolved_config.json", partial);
  CHECK(to_json(load_config((dir / "resolved_config.json").string())) == to_json(partial));
  std::ofstream(dir / "bad.json") << "{";
  CHECK_THROWS_AS(load_config((dir / "bad.json").string()), ConfigError);
  fs::remove_all(dir);
}

TEST_CASE("ablation grid") {
  const auto grid = ablation_grid();
  REQUIRE(grid.size() == 8);
  CHECK(grid.front() == AblationFlags{false, false, false});
  CHECK(grid.back() == AblationFlags{true, true, true});
  std::set<std::string> labels;
  for (const auto& f : grid) labels.insert(f.label());
  CHECK(labels.size() == 8);
  CHECK(grid[0].label() == "none");
  CHECK(grid[4].label() == "ssim+seg");
  CHECK(grid[7].label() == "ssim+seg+backbone");
  // Component count is non-decreasing down the table.
  auto count = [](const AblationFlags& f) { return int(f.ssim) + int(f.seg) + int(f.trained_backbone); };
  for (std::size_t i = 1; i < grid.size(); ++i) CHECK(count(grid[i]) >= count(grid[i - 1]));
}

TEST_CASE("segmentor training") {
  const auto cfg = tiny_config();
  const auto& data = tiny_data();
  const auto opts = segmentor_options(cfg);
  const auto a = train_segmentor(data.x_train, opts);
  REQUIRE(a.history.size() == 2);
  CHECK(a.history[1].train_loss < a.history[0].train_loss);
  CHECK(a.best_epoch >= 1);
  CHECK(a.best.metadata["kind"] == "segmentor");
  CHECK(a.best.metadata["validation_images"] == 2);

  SUBCASE("same seed, identical checkpoint") {
    const auto b = train_segmentor(data.x_train, opts);
    CHECK(same_values(a.best, b.best));
    CHECK(a.best.metadata == b.best.metadata);
    auto other = opts;
    other.seed = 2;
    CHECK_FALSE(same_values(a.best, train_segmentor(data.x_train, other).best));
  }
  SUBCASE("checkpoint rebuilds the segmentor") {
    const auto s = load_segmentor(a.best);
    CHECK(s->config().encoder_widths == cfg.model.segmentor.encoder_widths);
    nn::Checkpoint empty;
    CHECK_THROWS_AS(load_segmentor(empty), nn::CheckpointError);
  }
  SUBCASE("log file") {
    const auto dir = scratch_dir("seglog");
    auto o = opts;
    o.log_path = dir / "seg_log.csv";
    train_segmentor(data.x_train, o);
    std::ifstream in(o.log_path);
    std::string line;
    std::getline(in, line);
    CHECK(line == "epoch,lr,train_loss,val_mdsc,val_miou");
    int rows = 0;
    while (std::getline(in, line)) ++rows;
    CHECK(rows == 2);
    fs::remove_all(dir);
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(train_segmentor(synth::Dataset{}, opts), std::invalid_argument);
    auto unlabeled = data.x_train;
    unlabeled.masks.clear();
    CHECK_THROWS_AS(train_segmentor(unlabeled, opts), std::invalid_argument);
    auto wild = opts;
    wild.lr = 1e38;
    CHECK_THROWS_AS(train_segmentor(data.x_train, wild), TrainingDiverged);
  }
}

TEST_CASE("all flags off reduces the objective to adversarial plus cycle") {
  const auto x = random_tensor({1, 3, 32, 32}, 1), y = random_tensor({1, 3, 32, 32}, 2);
  const auto g_x = random_tensor({1, 3, 32, 32}, 3, -1, 1, true), f_y = random_tensor({1, 3, 32, 32}, 4, -1, 1, true);
  loss::ObjectiveInputs<double> in;
  in.x = x;
  in.y = y;
  in.g_x = g_x;
  in.f_y = f_y;
  in.f_g_x = ops::tanh(g_x);
  in.g_f_y = ops::tanh(f_y);
  in.d_y_fake = ops::mul_scalar(ops::avg_pool2(g_x), 0.7);
  in.d_x_fake = ops::mul_scalar(ops::avg_pool2(f_y), 0.3);
  const loss::LossConfig cfg;
  const auto obj = loss::total_objective(in, cfg, {false, false});
  // Reference: each piece computed directly from its definition.
  double gan = 0;
  for (const auto* m : {&in.d_y_fake, &in.d_x_fake}) {
    double s = 0;
    for (double v : m->data()) s += (v - 1) * (v - 1);
    gan += s / static_cast<double>(m->numel());
  }
  double cyc = 0;
  for (const auto& [real, rec] : {std::pair{&x, &in.f_g_x}, std::pair{&y, &in.g_f_y}}) {
    double s = 0;
    for (std::size_t i = 0; i < real->data().size(); ++i) s += std::abs(rec->data()[i] - real->data()[i]);
    cyc += s / static_cast<double>(real->numel());
  }
  CHECK(obj.generator_total.item() == doctest::Approx(gan + cfg.lambda_cycle * cyc).epsilon(1e-12));
  CHECK(obj.breakdown.ssim == 0.0);
  CHECK(obj.breakdown.seg == 0.0);
  CHECK_FALSE(obj.discriminator_total.defined());
  CHECK(obj.breakdown.total_generator == doctest::Approx(gan + cfg.lambda_cycle * cyc).epsilon(1e-12));
}

TEST_CASE("lcgan trainer") {
  const auto cfg = tiny_config();
  const auto& data = tiny_data();
  const auto& s_ck = tiny_segmentor();
  const auto s_reference = load_segmentor(s_ck);
  const auto s_sum = s_reference->parameters().checksum();

  LcganTrainer t(data.x_train, data.y_train, &s_ck, cfg);
  CHECK(t.g().architecture()["type"] == "backbone_generator");
  CHECK(t.f().architecture()["type"] == "resnet_generator");
  CHECK(t.segmentor()->parameters().trainable_count() == 0);
  for (const auto& name : t.g().parameters().trainable_names()) CHECK_FALSE(name.starts_with("enc."));
  CHECK(t.g().parameters().checksum("enc.") == s_reference->parameters().checksum("enc."));

  const auto g0 = t.g().parameters().checksum(), f0 = t.f().parameters().checksum();
  const auto dx0 = t.d_x().parameters().checksum(), dy0 = t.d_y().parameters().checksum();
  for (int i = 0; i < 3; ++i) {
    const auto terms = t.step();
    CHECK(terms.ssim > 0);
    CHECK(terms.seg > 0);
    CHECK(terms.d_X > 0);
    CHECK(terms.total_generator == doctest::Approx(terms.gan_G + terms.gan_F + 5 * terms.cyc + terms.ssim +
                                                   2 * terms.seg));
  }
  CHECK(t.iteration() == 3);
  CHECK(t.g().parameters().checksum() != g0);
  CHECK(t.f().parameters().checksum() != f0);
  CHECK(t.d_x().parameters().checksum() != dx0);
  CHECK(t.d_y().parameters().checksum() != dy0);
  // Frozen sets, checked against an independently loaded copy of S.
  CHECK(t.segmentor()->parameters().checksum() == s_sum);
  CHECK(t.g().parameters().checksum("enc.") == s_reference->parameters().checksum("enc."));
  CHECK_NOTHROW(t.verify_frozen());

  const auto ck = t.checkpoint();
  CHECK(ck.metadata["iteration"] == 3);
  for (const char* name : {"G", "F", "D_X", "D_Y"}) CHECK(ck.architecture.contains(name));
  CHECK(ck.find("adam.GF.m.F.head.weight"));
  CHECK_FALSE(ck.find("adam.GF.m.G.enc.conv0.weight"));

  SUBCASE("deterministic") {
    LcganTrainer u(data.x_train, data.y_train, &s_ck, cfg);
    for (int i = 0; i < 3; ++i) u.step();
    CHECK(same_values(u.checkpoint(), ck));
  }
}

TEST_CASE("lcgan without optional components") {
  auto cfg = tiny_config();
  cfg.flags = {false, false, false};
  const auto& data = tiny_data();
  auto unlabeled_x = data.x_train;
  unlabeled_x.masks.clear();
  LcganTrainer t(unlabeled_x, data.y_train, nullptr, cfg);
  CHECK(t.g().architecture()["type"] == "resnet_generator");
  CHECK(t.segmentor() == nullptr);
  CHECK(t.frozen_checksums().empty());
  const auto terms = t.step();
  CHECK(terms.ssim == 0.0);
  CHECK(terms.seg == 0.0);
  CHECK(terms.total_generator == doctest::Approx(terms.gan_G + terms.gan_F + 5 * terms.cyc).epsilon(1e-12));

  cfg.flags = {true, false, false};
  CHECK(LcganTrainer(unlabeled_x, data.y_train, nullptr, cfg).step().ssim > 0);
  cfg.flags = {false, true, false};
  CHECK_THROWS_AS(LcganTrainer(data.x_train, data.y_train, nullptr, cfg), std::invalid_argument);
  CHECK_THROWS_AS(LcganTrainer(unlabeled_x, data.y_train, &tiny_segmentor(), cfg), std::invalid_argument);
  cfg.flags = {false, false, true};
  CHECK_THROWS_AS(LcganTrainer(data.x_train, data.y_train, nullptr, cfg), std::invalid_argument);
  CHECK_THROWS_AS(LcganTrainer(data.x_train, synth::Dataset{}, &tiny_segmentor(), cfg), std::invalid_argument);
}

TEST_CASE("train_lcgan writes logs and checkpoints") {
  const auto cfg = tiny_config();
  const auto& data = tiny_data();
  const auto dir = scratch_dir("lcgan");
  const auto r = train_lcgan(data.x_train, data.y_train, &tiny_segmentor(), cfg, dir);
  CHECK(r.log.size() == 2);
  CHECK(r.frozen_start == r.frozen_end);
  CHECK(r.frozen_start.count("S") == 1);
  CHECK(r.frozen_start.count("G.enc") == 1);

  std::ifstream in(dir / "log.csv");
  std::string line;
  std::getline(in, line);
  CHECK(line == loss::LossBreakdown::csv_header());
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 2);

  const auto ck = nn::load_checkpoint(dir / "checkpoint");
  CHECK(same_values(ck, r.final));
  CHECK(ck.metadata["iteration"] == 4);

  SUBCASE("translate a directory") {
    const auto images = dir / "y_images";
    synth::generate(experiment_specs(cfg.data).y, 100, 10, images);
    const auto out1 = dir / "fake1", out2 = dir / "fake2";
    CHECK(translate(dir / "checkpoint", Direction::YtoX, images / "Y", out1) == 10);
    CHECK(translate(dir / "checkpoint", parse_direction("Y2X"), images / "Y" / "images", out2) == 10);
    for (const auto& e : fs::directory_iterator(images / "Y" / "images")) {
      const auto name = e.path().filename();
      REQUIRE(fs::exists(out1 / name));
      CHECK(slurp(out1 / name) == slurp(out2 / name));
      CHECK(slurp(out1 / name) != slurp(e.path()));
    }
    CHECK(translate(dir / "checkpoint", Direction::XtoY, images / "Y", dir / "fake_y") == 10);
    CHECK_THROWS_AS(translate(dir / "nowhere", Direction::YtoX, images / "Y", out1), nn::CheckpointError);
    CHECK_THROWS_AS(translate(dir / "checkpoint", Direction::YtoX, dir / "nothing", out1), img::ImageIoError);
    const auto seg_dir = dir / "segmentor";
    nn::save_checkpoint(seg_dir, tiny_segmentor());
    CHECK_THROWS_AS(translate(seg_dir, Direction::YtoX, images / "Y", out1), nn::CheckpointError);
    CHECK_THROWS_AS(parse_direction("sideways"), std::invalid_argument);
  }
  fs::remove_all(dir);
}

TEST_CASE("divergence aborts and keeps the last checkpoint") {
  auto cfg = tiny_config();
  cfg.optim.lr = 1e38;
  cfg.run.iterations = 20;
  cfg.run.checkpoint_every = 1;
  const auto dir = scratch_dir("nan");
  CHECK_THROWS_AS(train_lcgan(tiny_data().x_train, tiny_data().y_train, &tiny_segmentor(), cfg, dir),
                  TrainingDiverged);
  const auto ck = nn::load_checkpoint(dir / "checkpoint");
  CHECK(ck.metadata["iteration"].get<int>() >= 1);
  CHECK(ck.metadata["iteration"].get<int>() < 20);
  fs::remove_all(dir);
}

TEST_CASE("translation and cross-domain evaluation") {
  const auto& data = tiny_data();
  const IdentityGenerator identity;
  SUBCASE("identity translator returns the input after the range round trip") {
    const auto out = translate_images(identity, data.y_test.images);
    REQUIRE(out.size() == data.y_test.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
      for (std::size_t k = 0; k < out[i].values().size(); ++k) {
        CHECK(img::quantize(out[i].values()[k]) == img::quantize(data.y_test.images[i].values()[k]));
      }
    }
  }
  SUBCASE("identity F scores exactly the no-translation baseline") {
    const auto s = load_segmentor(tiny_segmentor());
    const auto s_y = load_segmentor(train_segmentor(data.y_train, segmentor_options(tiny_config())).best);
    const auto r = evaluate_cross_domain(*s, identity, data.y_test, s_y.get());
    CHECK(r.cross_domain_mean.dsc == r.baseline_mean.dsc);
    CHECK(r.cross_domain_mean.iou == r.baseline_mean.iou);
    REQUIRE(r.cross_domain.size() == r.baseline.size());
    for (std::size_t i = 0; i < r.baseline.size(); ++i) CHECK(r.cross_domain[i].score.dsc == r.baseline[i].score.dsc);
    REQUIRE(r.mainstream_mean.has_value());
    CHECK(r.mainstream.size() == data.y_test.size());
    const auto without = evaluate_cross_domain(*s, identity, data.y_test);
    CHECK_FALSE(without.mainstream_mean.has_value());
    auto unlabeled = data.y_test;
    unlabeled.masks.clear();
    CHECK_THROWS_AS(evaluate_cross_domain(*s, identity, unlabeled), std::invalid_argument);
  }
}

TEST_CASE("experiment drivers") {
  SUBCASE("parallel_for") {
    std::vector<int> out(37, 0);
    parallel_for(out.size(), 4, [&](std::size_t i) { out[i] = static_cast<int>(i * i); });
    for (std::size_t i = 0; i < out.size(); ++i) CHECK(out[i] == static_cast<int>(i * i));
    CHECK_THROWS_AS(parallel_for(10, 3,
                                 [](std::size_t i) {
                                   if (i == 4) throw std::runtime_error("boom");
                                 }),
                    std::runtime_error);
  }
  SUBCASE("median") {
    CHECK(median({3, 1, 2}) == 2);
    CHECK(median({4, 1, 2, 3}) == 2.5);
    CHECK_THROWS_AS(median({}), std::invalid_argument);
  }
  SUBCASE("data on disk matches data in memory") {
    const auto cfg = tiny_config();
    const auto dir = scratch_dir("data");
    write_data(cfg.data, dir, 2);
    const auto disk = load_data(dir);
    const auto& mem = tiny_data();
    for (const auto& [a, b] : {std::pair{&disk.x_train, &mem.x_train}, std::pair{&disk.y_train, &mem.y_train},
                               std::pair{&disk.x_test, &mem.x_test}, std::pair{&disk.y_test, &mem.y_test}}) {
      REQUIRE(a->size() == b->size());
      CHECK(a->ids == b->ids);
      for (std::size_t i = 0; i < a->size(); ++i) {
        CHECK(a->images[i].values() == b->images[i].values());
        CHECK(a->masks[i].values() == b->masks[i].values());
      }
    }
    CHECK(disk.x_test.ids.front() == "0008");
    fs::remove_all(dir);
  }
  SUBCASE("parallel jobs match serial jobs") {
    auto cfg = tiny_config();
    cfg.run.iterations = 2;
    std::vector<LcganJob> jobs;
    for (std::uint64_t seed : {1, 2, 3}) {
      LcganJob j{cfg, {}};
      j.config.run.seed = seed;
      jobs.push_back(j);
    }
    const auto serial = run_lcgan_jobs(tiny_data(), &tiny_segmentor(), jobs, 1);
    const auto parallel = run_lcgan_jobs(tiny_data(), &tiny_segmentor(), jobs, 3);
    for (std::size_t i = 0; i < jobs.size(); ++i) {
      CHECK(serial[i].cross_domain.dsc == parallel[i].cross_domain.dsc);
      CHECK(serial[i].cross_domain.iou == parallel[i].cross_domain.iou);
    }
  }
}
