#include "lcgan/training/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <exception>
#include <mutex>
#include <sstream>
#include <thread>

#include "lcgan/training/inference.hpp"
#include "lcgan/training/lcgan_training.hpp"
#include "lcgan/training/segmentor_training.hpp"

namespace lcgan::train {

namespace fs = std::filesystem;

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(4);
  os << v;
  return os.str();
}

}  // namespace

synth::DefaultSpecs experiment_specs(const DataConfig& data) {
  auto specs = synth::default_specs(data.seed);
  specs.x.image_size = data.image_size;
  specs.y.image_size = data.image_size;
  return specs;
}

ExperimentData synthesize_data(const DataConfig& data) {
  const auto specs = experiment_specs(data);
  ExperimentData d;
  d.x_train = synth::render_dataset(specs.x, 0, data.train_count);
  d.y_train = synth::render_dataset(specs.y, 0, data.train_count);
  d.x_test = synth::render_dataset(specs.x, data.train_count, data.test_count);
  d.y_test = synth::render_dataset(specs.y, data.train_count, data.test_count);
  return d;
}

void write_data(const DataConfig& data, const fs::path& root, int threads) {
  const auto specs = experiment_specs(data);
  for (const auto* spec : {&specs.x, &specs.y}) {
    synth::generate(*spec, 0, data.train_count, root / "train", threads);
    synth::generate(*spec, data.train_count, data.test_count, root / "test", threads);
  }
}

ExperimentData load_data(const fs::path& root) {
  ExperimentData d;
  d.x_train = synth::load_dataset(root / "train" / "X", true);
  d.y_train = synth::load_dataset(root / "train" / "Y", true);
  d.x_test = synth::load_dataset(root / "test" / "X", true);
  d.y_test = synth::load_dataset(root / "test" / "Y", true);
  return d;
}

void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn) {
  const auto workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, threads)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::mutex mu;
  std::size_t next = 0;
  std::exception_ptr error;
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (;;) {
          std::size_t i;
          {
            std::lock_guard lock(mu);
            if (next == n || error) return;
            i = next++;
          }
          try {
            fn(i);
          } catch (...) {
            std::lock_guard lock(mu);
            if (!error) error = std::current_exception();
          }
        }
      });
    }
  }
  if (error) std::rethrow_exception(error);
}

std::vector<LcganJobResult> run_lcgan_jobs(const ExperimentData& data, const nn::Checkpoint* segmentor,
                                           const std::vector<LcganJob>& jobs, int threads) {
  if (!segmentor) throw std::invalid_argument("run_lcgan_jobs: scoring needs a segmentor checkpoint");
  std::vector<LcganJobResult> out(jobs.size());
  parallel_for(jobs.size(), threads, [&](std::size_t i) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto run = train_lcgan(data.x_train, data.y_train, segmentor, jobs[i].config, jobs[i].out_dir);
    const auto s = load_segmentor(*segmentor);
    const auto f = load_generator(run.final, Direction::YtoX);
    out[i].cross_domain = metrics::mean_scores(scores_of(score_segmentor(*s, data.y_test, f.get())));
    out[i].seconds = seconds_since(t0);
  });
  return out;
}

double median(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("median of an empty list");
  std::sort(values.begin(), values.end());
  const auto n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

DeskExperimentResult run_desk_experiment(const ExperimentData& data, const RunConfig& config,
                                         const std::vector<std::uint64_t>& seeds, int threads,
                                         const std::function<void(const std::string&)>& progress) {
  if (seeds.empty()) throw std::invalid_argument("run_desk_experiment: no seeds");
  const auto t0 = std::chrono::steady_clock::now();
  auto say = [&](const std::string& line) {
    if (progress) progress(line + " [" + fmt(seconds_since(t0)) + " s]");
  };
  DeskExperimentResult r;

  // Segmentor on labeled X and the mainstream segmentor on labeled Y.
  std::vector<SegTrainResult> seg(2);
  parallel_for(2, threads, [&](std::size_t i) {
    const auto t1 = std::chrono::steady_clock::now();
    seg[i] = train_segmentor(i == 0 ? data.x_train : data.y_train, segmentor_options(config));
    r.segmentor_seconds[i] = seconds_since(t1);
  });
  const auto s = load_segmentor(seg[0].best);
  const auto s_y = load_segmentor(seg[1].best);
  r.segmentor_x_test = metrics::mean_scores(scores_of(score_segmentor(*s, data.x_test)));
  r.baseline = metrics::mean_scores(scores_of(score_segmentor(*s, data.y_test)));
  r.mainstream = metrics::mean_scores(scores_of(score_segmentor(*s_y, data.y_test)));
  say("segmentors: X test mDSC " + fmt(r.segmentor_x_test.dsc) + ", Y baseline " + fmt(r.baseline.dsc) +
      ", mainstream " + fmt(r.mainstream.dsc));

  std::vector<LcganJob> jobs;
  for (const auto seed : seeds) {
    for (const AblationFlags flags : {AblationFlags{true, true, true}, AblationFlags{false, false, false}}) {
      LcganJob job{config, {}};
      job.config.run.seed = seed;
      job.config.flags = flags;
      jobs.push_back(job);
      r.runs.push_back({seed, flags, {}, 0});
    }
  }
  const auto results = run_lcgan_jobs(data, &seg[0].best, jobs, threads);
  std::vector<double> full, none;
  for (std::size_t i = 0; i < results.size(); ++i) {
    r.runs[i].score = results[i].cross_domain;
    r.runs[i].seconds = results[i].seconds;
    (r.runs[i].flags.ssim ? full : none).push_back(results[i].cross_domain.dsc);
    say("lcgan seed " + std::to_string(r.runs[i].seed) + " " + r.runs[i].flags.label() + ": mDSC " +
        fmt(results[i].cross_domain.dsc) + " in " + fmt(results[i].seconds) + " s");
  }
  r.median_full = median(full);
  r.median_none = median(none);
  r.seconds = seconds_since(t0);
  return r;
}

}  // namespace lcgan::train
