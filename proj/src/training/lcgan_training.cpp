#include "lcgan/training/lcgan_training.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

#include "detail.hpp"

namespace lcgan::train {

namespace fs = std::filesystem;

Sampler::Sampler(std::size_t n, std::uint64_t seed) : order_(n), pos_(n), rng_(seed) {
  if (n == 0) throw std::invalid_argument("Sampler: empty index set");
}

void Sampler::reshuffle() {
  order_ = detail::permutation(order_.size(), rng_);
  pos_ = 0;
}

std::size_t Sampler::next() {
  if (pos_ == order_.size()) reshuffle();
  return order_[pos_++];
}

namespace {

std::unique_ptr<nn::Segmentor<float>> frozen_segmentor(const nn::Checkpoint* ck) {
  if (!ck) return nullptr;
  auto s = load_segmentor(*ck);
  s->parameters().freeze("");
  return s;
}

std::unique_ptr<nn::Generator<float>> make_g(const RunConfig& c, const nn::Segmentor<float>* s) {
  const auto seed = Rng::derive(c.run.seed, 10);
  if (!c.flags.trained_backbone) return std::make_unique<nn::ResnetGenerator<float>>(c.model.resnet_generator, seed);
  auto cfg = c.model.backbone_generator;
  cfg.backbone = s->config();
  return std::make_unique<nn::BackboneGenerator<float>>(cfg, &s->parameters(), seed);
}

const nn::Checkpoint* checked_segmentor(const synth::Dataset& x, const synth::Dataset& y, const nn::Checkpoint* s,
                                        const RunConfig& c) {
  c.validate();
  if (x.size() == 0 || y.size() == 0) throw std::invalid_argument("train_lcgan: both domains need images");
  if (c.flags.seg && x.masks.size() != x.size())
    throw std::invalid_argument("train_lcgan: segmentation consistency needs masks for domain X");
  if ((c.flags.seg || c.flags.trained_backbone) && !s)
    throw std::invalid_argument("train_lcgan: a trained segmentor checkpoint is required for seg or trained_backbone");
  return s;
}

std::string hex(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

}  // namespace

LcganTrainer::LcganTrainer(const synth::Dataset& x, const synth::Dataset& y, const nn::Checkpoint* segmentor,
                           const RunConfig& config)
    : config_(config),
      s_(frozen_segmentor(checked_segmentor(x, y, segmentor, config))),
      g_(make_g(config, s_.get())),
      f_(std::make_unique<nn::ResnetGenerator<float>>(config.model.resnet_generator, Rng::derive(config.run.seed, 11))),
      d_x_(config.model.discriminator, Rng::derive(config.run.seed, 12)),
      d_y_(config.model.discriminator, Rng::derive(config.run.seed, 13)),
      opt_gf_({config.optim.beta1, config.optim.beta2, config.optim.eps}),
      opt_dx_({config.optim.beta1, config.optim.beta2, config.optim.eps}),
      opt_dy_({config.optim.beta1, config.optim.beta2, config.optim.eps}),
      buffer_x_(static_cast<std::size_t>(config.optim.buffer_capacity), Rng::derive(config.run.seed, 14)),
      buffer_y_(static_cast<std::size_t>(config.optim.buffer_capacity), Rng::derive(config.run.seed, 15)),
      sample_x_(x.size(), Rng::derive(config.run.seed, 16)),
      sample_y_(y.size(), Rng::derive(config.run.seed, 17)),
      schedule_(config.optim.lr, config.run.iterations) {
  for (std::size_t i = 0; i < x.size(); ++i) {
    x_.push_back(img::to_model_range<float>(x.images[i]));
    if (config.flags.seg) x_mask_.push_back(img::mask_tensor<float>({x.masks[i]}));
  }
  for (const auto& im : y.images) y_.push_back(img::to_model_range<float>(im));
  s_y_cache_.resize(y_.size());

  opt_gf_.add(g_->parameters(), "G.");
  opt_gf_.add(f_->parameters(), "F.");
  opt_dx_.add(d_x_.parameters());
  opt_dy_.add(d_y_.parameters());
  frozen_ = frozen_checksums();
}

const Tensor<float>& LcganTrainer::pseudo_target(std::size_t index) {
  // S and y are both fixed, so S(y) is computed once per image.
  auto& slot = s_y_cache_[index];
  if (!slot.defined()) slot = s_->forward(y_[index]).detach();
  return slot;
}

loss::LossBreakdown LcganTrainer::step() {
  const auto ix = sample_x_.next();
  const auto iy = sample_y_.next();
  const auto& x = x_[ix];
  const auto& y = y_[iy];
  const double lr = schedule_.at(iteration_);

  // Generator update with both discriminators parked.
  d_x_.parameters().set_trainable(false);
  d_y_.parameters().set_trainable(false);
  loss::ObjectiveInputs<float> in;
  in.x = x;
  in.y = y;
  in.g_x = g_->forward(x);
  in.f_y = f_->forward(y);
  in.f_g_x = f_->forward(in.g_x);
  in.g_f_y = g_->forward(in.f_y);
  in.d_y_fake = d_y_.forward(in.g_x);
  in.d_x_fake = d_x_.forward(in.f_y);
  if (config_.flags.seg) {
    in.x_mask = x_mask_[ix];
    in.s_f_g_x = s_->forward(in.f_g_x);
    in.s_y = pseudo_target(iy);
    in.s_g_f_y = s_->forward(in.g_f_y);
  }
  const auto objective = loss::total_objective(in, config_.loss, {config_.flags.ssim, config_.flags.seg});
  auto terms = objective.breakdown;
  for (double v : {terms.gan_G, terms.gan_F, terms.cyc, terms.ssim, terms.seg, terms.total_generator}) {
    if (!detail::finite(v)) {
      throw TrainingDiverged("train_lcgan: generator objective is " + std::to_string(v) + " at iteration " +
                             std::to_string(iteration_));
    }
  }
  opt_gf_.zero_grad();
  objective.generator_total.backward();
  opt_gf_.step(lr);

  // Discriminator update on real images against buffered fakes.
  d_x_.parameters().set_trainable(true);
  d_y_.parameters().set_trainable(true);
  const auto fake_y = buffer_y_.query(in.g_x);
  const auto fake_x = buffer_x_.query(in.f_y);
  const auto d_y_loss = loss::discriminator_adversarial(d_y_.forward(y), d_y_.forward(fake_y));
  const auto d_x_loss = loss::discriminator_adversarial(d_x_.forward(x), d_x_.forward(fake_x));
  terms.d_Y = d_y_loss.item();
  terms.d_X = d_x_loss.item();
  if (!detail::finite(terms.d_X) || !detail::finite(terms.d_Y)) {
    throw TrainingDiverged("train_lcgan: discriminator loss is not finite at iteration " + std::to_string(iteration_));
  }
  opt_dx_.zero_grad();
  opt_dy_.zero_grad();
  ops::add(d_x_loss, d_y_loss).backward();
  opt_dx_.step(lr);
  opt_dy_.step(lr);

  ++iteration_;
  return loss::compose(terms, config_.loss);
}

std::map<std::string, std::uint64_t> LcganTrainer::frozen_checksums() const {
  std::map<std::string, std::uint64_t> out;
  if (s_) out["S"] = s_->parameters().checksum();
  if (config_.flags.trained_backbone) out["G.enc"] = g_->parameters().checksum("enc.");
  return out;
}

void LcganTrainer::verify_frozen() const {
  const auto now = frozen_checksums();
  for (const auto& [name, sum] : frozen_) {
    if (now.at(name) != sum) {
      throw std::logic_error("train_lcgan: frozen parameters " + name + " changed during training (" + hex(sum) +
                             " -> " + hex(now.at(name)) + ")");
    }
  }
}

nn::Checkpoint LcganTrainer::checkpoint() const {
  nn::Checkpoint ck;
  ck.architecture = {{"G", g_->architecture()},
                     {"F", f_->architecture()},
                     {"D_X", d_x_.architecture()},
                     {"D_Y", d_y_.architecture()}};
  nlohmann::json frozen = nlohmann::json::object();
  for (const auto& [name, sum] : frozen_) frozen[name] = hex(sum);
  ck.metadata = {{"kind", "lcgan"},
                 {"iteration", iteration_},
                 {"seed", config_.run.seed},
                 {"flags",
                  {{"ssim", config_.flags.ssim},
                   {"seg", config_.flags.seg},
                   {"trained_backbone", config_.flags.trained_backbone}}},
                 {"frozen_checksums", frozen}};
  nn::append_parameters(ck, g_->parameters(), "G.");
  nn::append_parameters(ck, f_->parameters(), "F.");
  nn::append_parameters(ck, d_x_.parameters(), "D_X.");
  nn::append_parameters(ck, d_y_.parameters(), "D_Y.");
  opt_gf_.append_state(ck, "adam.GF.");
  opt_dx_.append_state(ck, "adam.D_X.");
  opt_dy_.append_state(ck, "adam.D_Y.");
  return ck;
}

LcganResult train_lcgan(const synth::Dataset& x, const synth::Dataset& y, const nn::Checkpoint* segmentor,
                        const RunConfig& config, const fs::path& out_dir) {
  LcganTrainer trainer(x, y, segmentor, config);
  LcganResult result;
  result.frozen_start = trainer.frozen_checksums();

  std::ofstream log;
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    log.open(out_dir / "log.csv", std::ios::trunc);
    if (!log) throw std::runtime_error("train_lcgan: cannot write " + (out_dir / "log.csv").string());
    log << loss::LossBreakdown::csv_header() << '\n';
  }
  const auto total = config.run.iterations;
  while (trainer.iteration() < total) {
    const double lr = trainer.current_lr();
    const auto terms = trainer.step();
    const auto step = trainer.iteration();
    if (step % config.run.log_every == 0 || step == total) {
      result.log.push_back({step, lr, terms});
      if (log) log << terms.csv_row(step, lr) << '\n' << std::flush;
    }
    if (!out_dir.empty() && config.run.checkpoint_every > 0 && step % config.run.checkpoint_every == 0 &&
        step != total) {
      trainer.verify_frozen();
      nn::save_checkpoint(out_dir / "checkpoint", trainer.checkpoint());
    }
  }
  trainer.verify_frozen();
  result.frozen_end = trainer.frozen_checksums();
  result.final = trainer.checkpoint();
  if (!out_dir.empty()) nn::save_checkpoint(out_dir / "checkpoint", result.final);
  return result;
}

}  // namespace lcgan::train
