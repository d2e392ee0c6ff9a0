#include "lcgan/training/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace lcgan::train {

LrSchedule::LrSchedule(double lr0, std::int64_t total) : lr0_(lr0), total_(total) {
  if (!(lr0 >= 0)) throw std::invalid_argument("LrSchedule: negative initial rate");
  if (total < 1) throw std::invalid_argument("LrSchedule: need at least one step");
}

double LrSchedule::at(std::int64_t step) const {
  const double half = 0.5 * static_cast<double>(total_);
  const double t = static_cast<double>(step);
  if (t <= half) return lr0_;
  if (t >= static_cast<double>(total_)) return 0.0;
  return lr0_ * (static_cast<double>(total_) - t) / (static_cast<double>(total_) - half);
}

template <typename T>
void Adam<T>::add(const nn::ParameterStore<T>& store, const std::string& prefix) {
  const auto names = store.trainable_names();
  const auto tensors = store.trainable();
  for (std::size_t i = 0; i < names.size(); ++i) add(prefix + names[i], tensors[i]);
}

template <typename T>
void Adam<T>::add(const std::string& name, const Tensor<T>& param) {
  for (const auto& s : slots_)
    if (s.name == name) throw std::invalid_argument("Adam: parameter '" + name + "' added twice");
  const auto n = static_cast<std::size_t>(param.numel());
  slots_.push_back({name, param, std::vector<T>(n, T(0)), std::vector<T>(n, T(0)), 0});
}

template <typename T>
void Adam<T>::step(double lr) {
  const double b1 = config_.beta1, b2 = config_.beta2;
  for (auto& s : slots_) {
    if (!s.param.has_grad()) continue;
    ++s.steps;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(s.steps));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(s.steps));
    const auto g = s.param.grad();
    auto p = s.param.mutable_data();
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double gi = g[i];
      const double m = b1 * s.m[i] + (1.0 - b1) * gi;
      const double v = b2 * s.v[i] + (1.0 - b2) * gi * gi;
      s.m[i] = static_cast<T>(m);
      s.v[i] = static_cast<T>(v);
      p[i] = static_cast<T>(p[i] - lr * (m / c1) / (std::sqrt(v / c2) + config_.eps));
    }
  }
}

template <typename T>
void Adam<T>::zero_grad() {
  for (auto& s : slots_) s.param.zero_grad();
}

template <typename T>
void Adam<T>::append_state(nn::Checkpoint& checkpoint, const std::string& prefix) const {
  nlohmann::json steps = nlohmann::json::object();
  for (const auto& s : slots_) {
    checkpoint.add({prefix + "m." + s.name, s.param.shape(), std::vector<float>(s.m.begin(), s.m.end())});
    checkpoint.add({prefix + "v." + s.name, s.param.shape(), std::vector<float>(s.v.begin(), s.v.end())});
    steps[s.name] = s.steps;
  }
  checkpoint.metadata["optimizer"][prefix] = {{"beta1", config_.beta1},
                                              {"beta2", config_.beta2},
                                              {"eps", config_.eps},
                                              {"steps", steps}};
}

template <typename T>
void Adam<T>::restore_state(const nn::Checkpoint& checkpoint, const std::string& prefix) {
  const auto& meta = checkpoint.metadata;
  if (!meta.contains("optimizer") || !meta["optimizer"].contains(prefix))
    throw nn::CheckpointError("checkpoint: no optimizer state '" + prefix + "'");
  const auto& steps = meta["optimizer"][prefix]["steps"];
  for (auto& s : slots_) {
    const auto* m = checkpoint.find(prefix + "m." + s.name);
    const auto* v = checkpoint.find(prefix + "v." + s.name);
    if (!m || !v || !steps.contains(s.name))
      throw nn::CheckpointError("checkpoint: optimizer state for '" + s.name + "' missing");
    if (m->shape != s.param.shape() || v->shape != s.param.shape())
      throw nn::CheckpointError("checkpoint: optimizer state for '" + s.name + "' has the wrong shape");
    s.m.assign(m->values.begin(), m->values.end());
    s.v.assign(v->values.begin(), v->values.end());
    s.steps = steps[s.name].template get<std::int64_t>();
  }
}

template class Adam<float>;
template class Adam<double>;

}  // namespace lcgan::train
