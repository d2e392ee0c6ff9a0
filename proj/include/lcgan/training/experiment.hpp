#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "lcgan/metrics/metrics.hpp"
#include "lcgan/networks/checkpoint.hpp"
#include "lcgan/synthdata/synth.hpp"
#include "lcgan/training/config.hpp"

// Multi-run drivers shared by the command line and the acceptance checks.
namespace lcgan::train {

struct ExperimentData {
  synth::Dataset x_train, y_train, x_test, y_test;
};

/// Default domains at data.image_size seeded by data.seed. Train samples use
/// indices [0, train_count), test samples the next test_count indices.
synth::DefaultSpecs experiment_specs(const DataConfig& data);
ExperimentData synthesize_data(const DataConfig& data);
/// Writes <root>/train/{X,Y} and <root>/test/{X,Y}.
void write_data(const DataConfig& data, const std::filesystem::path& root, int threads);
/// Reads the layout write_data produces; every split must carry masks.
ExperimentData load_data(const std::filesystem::path& root);

/// Runs fn(0..n-1) on up to `threads` workers; the first exception thrown by
/// any call is rethrown after all workers finish.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

struct LcganJob {
  RunConfig config;
  std::filesystem::path out_dir;  // optional
};

struct LcganJobResult {
  metrics::SegScore cross_domain;  // S(F(y)) on the Y test split
  double seconds = 0;
};

/// Trains each job on the train splits and scores S o F on y_test.
std::vector<LcganJobResult> run_lcgan_jobs(const ExperimentData& data, const nn::Checkpoint* segmentor,
                                           const std::vector<LcganJob>& jobs, int threads);

struct DeskRun {
  std::uint64_t seed = 0;
  AblationFlags flags;
  metrics::SegScore score;
  double seconds = 0;
};

struct DeskExperimentResult {
  metrics::SegScore segmentor_x_test;  // S on held-out X
  metrics::SegScore baseline;          // S on Y test, no translation
  metrics::SegScore mainstream;        // S_Y trained on labeled Y train
  std::vector<DeskRun> runs;
  double segmentor_seconds[2] = {0, 0};  // S on X, S_Y on Y
  double median_full = 0;  // mDSC over seeds, all flags on
  double median_none = 0;  // mDSC over seeds, all flags off
  double seconds = 0;
};

/// S on X, S_Y on Y, then LC-GAN with all flags on and all off for every
/// seed. `progress` receives one line per finished stage.
DeskExperimentResult run_desk_experiment(const ExperimentData& data, const RunConfig& config,
                                         const std::vector<std::uint64_t>& seeds, int threads,
                                         const std::function<void(const std::string&)>& progress = {});

double median(std::vector<double> values);

}  // namespace lcgan::train
