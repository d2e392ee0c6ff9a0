#include "lcgan/training/segmentor_training.hpp"

#include <fstream>
#include <iomanip>

#include "detail.hpp"
#include "lcgan/losses/losses.hpp"
#include "lcgan/metrics/metrics.hpp"
#include "lcgan/training/inference.hpp"
#include "lcgan/training/optim.hpp"

namespace lcgan::train {

namespace fs = std::filesystem;

SegTrainOptions segmentor_options(const RunConfig& config) {
  SegTrainOptions o;
  o.model = config.model.segmentor;
  o.epochs = config.run.seg_epochs;
  o.batch = config.run.seg_batch;
  o.lr = config.optim.seg_lr;
  o.beta1 = config.optim.seg_beta1;
  o.beta2 = config.optim.beta2;
  o.eps = config.optim.eps;
  o.validation_fraction = config.run.validation_fraction;
  o.seed = config.run.seed;
  return o;
}

namespace {

synth::Dataset subset(const synth::Dataset& d, const std::vector<std::size_t>& idx) {
  synth::Dataset out;
  for (auto i : idx) {
    out.ids.push_back(d.ids[i]);
    out.images.push_back(d.images[i]);
    out.masks.push_back(d.masks[i]);
  }
  return out;
}

nn::Checkpoint snapshot(const nn::Segmentor<float>& s, const Adam<float>& opt, const nlohmann::json& metadata) {
  nn::Checkpoint ck;
  ck.architecture = {{"S", s.architecture()}};
  ck.metadata = metadata;
  nn::append_parameters(ck, s.parameters(), "S.");
  opt.append_state(ck, "adam.S.");
  return ck;
}

}  // namespace

SegTrainResult train_segmentor(const synth::Dataset& data, const SegTrainOptions& o) {
  if (data.size() == 0) throw std::invalid_argument("train_segmentor: empty dataset");
  if (data.masks.size() != data.size()) throw std::invalid_argument("train_segmentor: dataset has no masks");
  if (o.epochs < 1 || o.batch < 1) throw std::invalid_argument("train_segmentor: epochs and batch must be positive");

  Rng split_rng(Rng::derive(o.seed, 100));
  const auto order = detail::permutation(data.size(), split_rng);
  const auto n_val = static_cast<std::size_t>(o.validation_fraction * static_cast<double>(data.size()));
  if (n_val >= data.size()) throw std::invalid_argument("train_segmentor: validation split leaves no training data");
  const std::vector<std::size_t> val_idx(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  const std::vector<std::size_t> train_idx(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
  const auto val = subset(data, val_idx);

  nn::Segmentor<float> s(o.model, Rng::derive(o.seed, 101));
  Adam<float> opt({o.beta1, o.beta2, o.eps});
  opt.add(s.parameters());

  const auto batches = static_cast<std::int64_t>((train_idx.size() + o.batch - 1) / o.batch);
  const LrSchedule schedule(o.lr, batches * o.epochs);
  Rng rng(Rng::derive(o.seed, 102));

  std::ofstream log;
  if (!o.log_path.empty()) {
    if (o.log_path.has_parent_path()) fs::create_directories(o.log_path.parent_path());
    log.open(o.log_path, std::ios::trunc);
    if (!log) throw std::runtime_error("train_segmentor: cannot write " + o.log_path.string());
    log << "epoch,lr,train_loss,val_mdsc,val_miou\n" << std::setprecision(17);
  }

  SegTrainResult result;
  std::int64_t step = 0;
  for (int epoch = 1; epoch <= o.epochs; ++epoch) {
    const auto perm = detail::permutation(train_idx.size(), rng);
    double loss_sum = 0;
    SegEpochRecord rec;
    rec.epoch = epoch;
    rec.lr = schedule.at(step);
    for (std::size_t start = 0; start < perm.size(); start += static_cast<std::size_t>(o.batch)) {
      const auto end = std::min(perm.size(), start + static_cast<std::size_t>(o.batch));
      std::vector<img::ImageRGB> images;
      std::vector<img::MaskImage> masks;
      for (auto k = start; k < end; ++k) {
        images.push_back(data.images[train_idx[perm[k]]]);
        masks.push_back(data.masks[train_idx[perm[k]]]);
      }
      const auto loss = loss::cross_entropy(s.forward(img::to_model_range<float>(images)),
                                            img::mask_tensor<float>(masks));
      const double value = loss.item();
      if (!detail::finite(value)) {
        throw TrainingDiverged("train_segmentor: loss is " + std::to_string(value) + " at epoch " +
                               std::to_string(epoch) + ", step " + std::to_string(step));
      }
      loss_sum += value * static_cast<double>(end - start);
      opt.zero_grad();
      loss.backward();
      opt.step(schedule.at(step));
      ++step;
    }
    rec.train_loss = loss_sum / static_cast<double>(train_idx.size());
    if (n_val > 0) {
      const auto m = metrics::mean_scores(scores_of(score_segmentor(s, val)));
      rec.val_dsc = m.dsc;
      rec.val_iou = m.iou;
    }
    result.history.push_back(rec);
    if (log) log << epoch << ',' << rec.lr << ',' << rec.train_loss << ',' << rec.val_dsc << ',' << rec.val_iou << '\n';

    const bool better = n_val == 0 || result.best_epoch == 0 || rec.val_dsc > result.best_val_dsc;
    if (better) {
      result.best_epoch = epoch;
      result.best_val_dsc = rec.val_dsc;
      result.best = snapshot(s, opt,
                             {{"kind", "segmentor"},
                              {"epoch", epoch},
                              {"step", step},
                              {"seed", o.seed},
                              {"validation_images", n_val},
                              {"val_mdsc", rec.val_dsc},
                              {"val_miou", rec.val_iou},
                              {"train_loss", rec.train_loss}});
    }
  }
  return result;
}

std::unique_ptr<nn::Segmentor<float>> load_segmentor(const nn::Checkpoint& checkpoint) {
  if (!checkpoint.architecture.contains("S")) throw nn::CheckpointError("checkpoint: no segmentor record 'S'");
  const auto& arch = checkpoint.architecture["S"];
  if (arch.value("type", "") != "segmentor") throw nn::CheckpointError("checkpoint: record 'S' is not a segmentor");
  nn::SegmentorConfig cfg;
  try {
    cfg = arch.at("config").get<nn::SegmentorConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw nn::CheckpointError(std::string("checkpoint: bad segmentor record: ") + e.what());
  }
  auto s = std::make_unique<nn::Segmentor<float>>(cfg, 0);
  nn::restore_parameters(checkpoint, s->parameters(), "S.");
  return s;
}

}  // namespace lcgan::train
