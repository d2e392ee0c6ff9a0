// End-to-end acceptance checks A1-A6. Prints one PASS/FAIL line per
// criterion and exits nonzero when any fails. Pass criterion names (A1 A4 ...)
// to run a subset.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "../unit/test_util.hpp"
#include "lcgan/cli/cli.hpp"
#include "lcgan/diffcomp/ops.hpp"
#include "lcgan/diffcomp/random.hpp"
#include "lcgan/losses/gradient_checks.hpp"
#include "lcgan/metrics/metrics.hpp"
#include "lcgan/networks/networks.hpp"
#include "lcgan/training/experiment.hpp"
#include "lcgan/training/lcgan_training.hpp"
#include "lcgan/training/segmentor_training.hpp"

namespace fs = std::filesystem;
using namespace lcgan;

namespace {

// Tolerances and budgets.
constexpr double kGradTolerance = 1e-4;
constexpr int kGradSeeds = 5;
constexpr double kA1Seconds = 120;
constexpr double kZnccSelfTol = 1e-6;
constexpr double kAffineTol = 1e-3;
constexpr double kZnccEpsilon = 1e-4;
constexpr double kSsimIdentityTol = 1e-9;
constexpr int kSsimPairs = 1000;
constexpr double kA2Seconds = 60;
constexpr double kDscIouTol = 1e-12;
constexpr int kMaskPairs = 1000;
constexpr int kFullScaleField = 70;
constexpr int kFrozenIterations = 100;
constexpr double kA4Seconds = 300;
constexpr double kSegmentorFloor = 0.90;
constexpr double kCrossDomainGain = 0.10;
constexpr double kA5BudgetSeconds = 3600;
constexpr int kA5BudgetCores = 8;

struct Outcome {
  bool pass = true;
  std::string detail;
};

double since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string num(double v, int precision = 4) {
  std::ostringstream os;
  os.precision(precision);
  os << v;
  return os.str();
}

Tensor<double> uniform(Rng& rng, Shape shape, double lo, double hi) {
  std::vector<double> v(static_cast<std::size_t>(shape_numel(shape)));
  for (auto& e : v) e = rng.uniform(lo, hi);
  return Tensor<double>(std::move(shape), std::move(v));
}

int threads() {
  return cli::threads_from_env(static_cast<int>(std::max(1u, std::thread::hardware_concurrency())));
}

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("lcgan_acceptance_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// A1: every loss against central differences in double precision.
Outcome a1() {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  double worst = 0;
  std::string worst_name;
  int checks = 0;
  loss::LossGradientOptions opt;  // desk-scale 64x64 inputs
  opt.tolerance = kGradTolerance;
  for (int seed = 1; seed <= kGradSeeds; ++seed) {
    for (const auto& c : loss::check_loss_gradients(static_cast<std::uint64_t>(seed), opt)) {
      ++checks;
      o.pass = o.pass && c.report.passed;
      if (c.report.max_relative_error >= worst) {
        worst = c.report.max_relative_error;
        worst_name = c.loss;
      }
    }
  }
  const double secs = since(t0);
  o.pass = o.pass && checks == 6 * kGradSeeds && worst < kGradTolerance && secs < kA1Seconds;
  o.detail = std::to_string(checks) + " loss/seed checks, max rel err " + num(worst, 3) + " (" + worst_name +
             ") < " + num(kGradTolerance) + ", " + num(secs, 3) + " s < " + num(kA1Seconds) + " s";
  return o;
}

// A2: ZNCC and structural-loss properties.
Outcome a2() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(2);
  Outcome o;
  const auto a = uniform(rng, {1, 1, 64, 64}, 0, 1);
  const double self = loss::zncc(a, a, kZnccEpsilon).item();
  const auto c1 = Tensor<double>::full({1, 1, 64, 64}, 0.3);
  const auto c2 = Tensor<double>::full({1, 1, 64, 64}, 0.8);
  const double constant = loss::zncc(c1, c2, kZnccEpsilon).item();
  const double affine = loss::zncc(a, ops::add_scalar(ops::mul_scalar(a, 2.0), 0.3), kZnccEpsilon).item();

  loss::LossConfig cfg;
  cfg.epsilon = kZnccEpsilon;
  const auto x = uniform(rng, {1, 3, 64, 64}, -1, 1);
  const auto y = uniform(rng, {1, 3, 64, 64}, -1, 1);
  const double identity = loss::ssim_loss(x, x, y, y, cfg).item();

  double lo = 1e300, hi = -1e300;
  for (int i = 0; i < kSsimPairs; ++i) {
    const auto xi = uniform(rng, {1, 3, 64, 64}, -1, 1);
    const auto yi = uniform(rng, {1, 3, 64, 64}, -1, 1);
    // Every fourth pair is anti-correlated to probe the upper end.
    const auto gx = i % 4 == 3 ? ops::mul_scalar(xi, -1.0) : uniform(rng, {1, 3, 64, 64}, -1, 1);
    const auto fy = i % 4 == 3 ? ops::mul_scalar(yi, -1.0) : uniform(rng, {1, 3, 64, 64}, -1, 1);
    const double v = loss::ssim_loss(xi, gx, yi, fy, cfg).item();
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  const double secs = since(t0);
  o.pass = std::abs(self - 1) <= kZnccSelfTol && constant == 1.0 && std::abs(affine - 1) <= kAffineTol &&
           std::abs(identity) <= kSsimIdentityTol && lo >= 0 && hi <= 4 && secs < kA2Seconds;
  o.detail = "zncc(a,a)-1 = " + num(self - 1, 3) + ", constant pair " + num(constant, 17) + ", affine " +
             num(affine, 8) + ", identity loss " + num(identity, 3) + ", range [" + num(lo) + ", " + num(hi) +
             "] over " + std::to_string(kSsimPairs) + " pairs, " + num(secs, 3) + " s";
  return o;
}

// A3: DSC and IoU agree with each other and with a hand count.
Outcome a3() {
  Rng rng(3);
  Outcome o;
  double worst = 0;
  for (int i = 0; i < kMaskPairs; ++i) {
    const int w = 8 + static_cast<int>(rng.below(25)), h = 8 + static_cast<int>(rng.below(25));
    const double pa = rng.uniform(0, 0.6), pb = rng.uniform(0, 0.6);
    std::vector<std::uint8_t> va(static_cast<std::size_t>(w * h)), vb(va.size());
    for (std::size_t k = 0; k < va.size(); ++k) {
      va[k] = rng.uniform() < pa;
      vb[k] = rng.uniform() < pb;
    }
    const auto s = metrics::score(img::MaskImage(w, h, va), img::MaskImage(w, h, vb));
    worst = std::max(worst, std::abs(s.dsc - 2 * s.iou / (1 + s.iou)));
    // Independent count for the same pair.
    double inter = 0, sa = 0, sb = 0;
    for (std::size_t k = 0; k < va.size(); ++k) {
      inter += va[k] && vb[k];
      sa += va[k];
      sb += vb[k];
    }
    if (sa + sb > 0) {
      worst = std::max(worst, std::abs(s.dsc - 2 * inter / (sa + sb)));
      worst = std::max(worst, std::abs(s.iou - inter / (sa + sb - inter)));
    }
  }
  const auto hand = metrics::score(img::MaskImage(4, 1, {1, 1, 0, 0}), img::MaskImage(4, 1, {0, 1, 1, 0}));
  o.pass = worst <= kDscIouTol && hand.dsc == 0.5 && hand.iou == 1.0 / 3.0;
  o.detail = "max |DSC - 2IoU/(1+IoU)| and count mismatch " + num(worst, 3) + " over " +
             std::to_string(kMaskPairs) + " pairs, hand case (" + num(hand.dsc, 17) + ", " + num(hand.iou, 17) + ")";
  return o;
}

// A4: receptive fields and frozen parameters.
Outcome a4() {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  const int full = nn::receptive_field(nn::DiscriminatorConfig::full_scale());
  const auto desk = nn::DiscriminatorConfig::desk();
  const int desk_rf = nn::receptive_field(desk);
  const auto [pw, ph] = nn::probe_receptive_field(desk, 4 * desk_rf);

  train::RunConfig cfg;
  cfg.data.train_count = 16;
  cfg.run.seg_epochs = 1;
  cfg.run.iterations = kFrozenIterations;
  const auto data = train::synthesize_data(cfg.data);
  const auto s_ck = train::train_segmentor(data.x_train, train::segmentor_options(cfg)).best;
  train::LcganTrainer trainer(data.x_train, data.y_train, &s_ck, cfg);
  const auto before = trainer.frozen_checksums();
  for (int i = 0; i < kFrozenIterations; ++i) trainer.step();
  const auto after = trainer.frozen_checksums();

  // Second route: raw values against the segmentor checkpoint.
  const auto ck = trainer.checkpoint();
  nn::Checkpoint s_now;
  nn::append_parameters(s_now, trainer.segmentor()->parameters(), "S.");
  bool values_equal = !s_now.tensors.empty();
  std::size_t compared = 0;
  for (const auto& t : s_now.tensors) {
    const auto* ref = s_ck.find(t.name);
    values_equal = values_equal && ref && ref->values == t.values;
    ++compared;
  }
  for (const auto& t : ck.tensors) {
    if (t.name.rfind("G.enc.", 0) != 0) continue;
    const auto* ref = s_ck.find("S.enc." + t.name.substr(6));
    values_equal = values_equal && ref && ref->values == t.values;
    ++compared;
  }
  const bool trained = ck.metadata["iteration"] == kFrozenIterations;
  const double secs = since(t0);
  o.pass = full == kFullScaleField && pw == desk_rf && ph == desk_rf && before.size() == 2 && before == after &&
           values_equal && trained && secs < kA4Seconds;
  o.detail = "full-scale RF " + std::to_string(full) + ", desk RF " + std::to_string(desk_rf) + " vs probe " +
             std::to_string(pw) + "x" + std::to_string(ph) + ", S and G.enc checksums " +
             (before == after ? "unchanged" : "CHANGED") + " over " + std::to_string(kFrozenIterations) +
             " iterations, " + std::to_string(compared) + " frozen tensors value-identical: " +
             (values_equal ? "yes" : "no") + ", " + num(secs, 3) + " s";
  return o;
}

// A5: desk-scale ordering claims.
Outcome a5() {
  Outcome o;
  const train::RunConfig cfg;  // desk defaults: 64x64, 400 + 400 training images
  const int n_threads = threads();
  const auto data = train::synthesize_data(cfg.data);
  const auto r = train::run_desk_experiment(data, cfg, {1, 2, 3}, n_threads,
                                            [](const std::string& line) { std::cout << "  A5 " << line << std::endl; });
  std::vector<double> gains;
  double lcgan_seconds = 0;
  for (const auto& run : r.runs) {
    lcgan_seconds = std::max(lcgan_seconds, run.seconds);
    if (run.flags.ssim) gains.push_back(run.score.dsc - r.baseline.dsc);
  }
  const double gain = train::median(gains);
  const bool i = r.segmentor_x_test.dsc >= kSegmentorFloor;
  const bool ii = gain >= kCrossDomainGain;
  const bool iii = r.median_full >= r.median_none;
  const bool iv = r.mainstream.dsc >= r.median_full;
  // With at least as many workers as jobs the wall time is the slowest
  // segmentor plus the slowest LC-GAN run.
  const double critical = std::max(r.segmentor_seconds[0], r.segmentor_seconds[1]) + lcgan_seconds;
  const bool budget = n_threads >= kA5BudgetCores ? r.seconds <= kA5BudgetSeconds : critical <= kA5BudgetSeconds;
  o.pass = i && ii && iii && iv && budget;
  auto mark = [](bool b) { return b ? "ok" : "FAIL"; };
  o.detail = std::string("(i) X test mDSC ") + num(r.segmentor_x_test.dsc) + " >= " + num(kSegmentorFloor) + " " +
             mark(i) + "; (ii) median gain over no-translation " + num(gain) + " (baseline " + num(r.baseline.dsc) +
             ") >= " + num(kCrossDomainGain) + " " + mark(ii) + "; (iii) all-on " + num(r.median_full) +
             " >= all-off " + num(r.median_none) + " " + mark(iii) + "; (iv) mainstream " + num(r.mainstream.dsc) +
             " >= cross-domain " + num(r.median_full) + " " + mark(iv) + "; runtime " + num(r.seconds / 60, 3) +
             " min on " + std::to_string(n_threads) + " thread(s)" +
             (n_threads >= kA5BudgetCores ? std::string("")
                                          : ", critical path " + num(critical / 60, 3) + " min for " +
                                                std::to_string(kA5BudgetCores) + " cores") +
             " <= 60 min " + mark(budget);
  return o;
}

int cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  if (code != 0) std::cout << "  cli " << args.front() << " failed: " << err.str();
  return code;
}

// A6: byte-identical reruns through the command line.
Outcome a6() {
  Outcome o;
  const auto root = scratch("a6");
  const auto a = (root / "synth_a").string(), b = (root / "synth_b").string();
  const bool synth_ok = cli({"synth", "--config", "default", "--out", a}) == 0 &&
                        cli({"synth", "--config", "default", "--out", b}) == 0;
  auto ta = testing::read_tree(a), tb = testing::read_tree(b);
  // The config snapshot names its own output directory.
  const bool snapshots = ta.count("resolved_config.json") && tb.count("resolved_config.json");
  ta.erase("resolved_config.json");
  tb.erase("resolved_config.json");
  const bool synth_same = synth_ok && snapshots && !ta.empty() && ta == tb;

  ::setenv("LCGAN_THREADS", "1", 1);
  const auto cfg = a + "/resolved_config.json";
  const auto s1 = (root / "seg_a").string(), s2 = (root / "seg_b").string();
  const bool seg_ok = cli({"train-seg", "--config", cfg, "--seed", "7", "--out", s1}) == 0 &&
                      cli({"train-seg", "--config", cfg, "--seed", "7", "--out", s2}) == 0;
  ::unsetenv("LCGAN_THREADS");
  const auto c1 = testing::read_tree(fs::path(s1) / "checkpoint");
  const auto c2 = testing::read_tree(fs::path(s2) / "checkpoint");
  const bool seg_same = seg_ok && !c1.empty() && c1 == c2;
  o.pass = synth_same && seg_same;
  o.detail = "synth x2: " + std::to_string(ta.size()) + " files " + (synth_same ? "byte-identical" : "DIFFER") +
             "; train-seg x2 (1 thread, seed 7): checkpoint " + (seg_same ? "byte-identical" : "DIFFERS");
  fs::remove_all(root);
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"A1", a1}, {"A2", a2}, {"A3", a3}, {"A4", a4}, {"A5", a5}, {"A6", a6}};
  std::set<std::string> only(argv + 1, argv + argc);
  int failed = 0;
  for (const auto& [name, check] : criteria) {
    if (!only.empty() && !only.count(name)) continue;
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failed += !o.pass;
    std::cout << name << (o.pass ? " PASS " : " FAIL ") << o.detail << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
