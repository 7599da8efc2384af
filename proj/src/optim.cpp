#include "ctxemo/optim.hpp"

#include <algorithm>
#include <stdexcept>

namespace ctxemo::optim {

Sgd::Sgd(std::vector<nn::Parameter*> params, SgdConfig config)
    : params_(std::move(params)), config_(config) {
  if (config_.learning_rate < 0.0) throw std::invalid_argument("learning rate must be >= 0");
  velocity_.reserve(params_.size());
  for (const auto* p : params_) velocity_.emplace_back(p->tensor.numel(), 0.0);
}

void Sgd::set_learning_rate(double lr) {
  if (lr < 0.0) throw std::invalid_argument("learning rate must be >= 0");
  config_.learning_rate = lr;
}

void Sgd::step() {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto* p = params_[i];
    if (!p->frozen && !p->tensor.grad().empty()) {
      auto w = p->tensor.mutable_values();
      auto g = p->tensor.grad();
      auto& v = velocity_[i];
      for (std::size_t j = 0; j < w.size(); ++j) {
        v[j] = config_.momentum * v[j] + g[j] + config_.weight_decay * w[j];
        w[j] -= config_.learning_rate * v[j];
      }
    }
  }
  zero_grad();
}

void Sgd::zero_grad() {
  for (auto* p : params_) p->tensor.zero_grad();
}

double ReduceLrOnPlateau::step(double monitored_loss, double current_lr) {
  last_reduced_ = false;
  if (!has_best_ || monitored_loss < best_ - config_.min_delta) {
    best_ = monitored_loss;
    has_best_ = true;
    bad_epochs_ = 0;
    return current_lr;
  }
  if (++bad_epochs_ < config_.patience) return current_lr;
  bad_epochs_ = 0;
  // Already at the floor (up to rounding of repeated multiplication).
  if (current_lr <= config_.min_lr * (1.0 + 1e-9)) return current_lr;
  const double reduced = std::max(current_lr * config_.factor, config_.min_lr);
  if (reduced < current_lr) {
    last_reduced_ = true;
    return reduced;
  }
  return current_lr;
}

double reduce_lr_on_plateau(const std::vector<double>& history, double initial_lr,
                            PlateauConfig config) {
  if (history.empty()) throw std::invalid_argument("plateau schedule needs at least one epoch");
  ReduceLrOnPlateau sched(config);
  double lr = initial_lr;
  for (double loss : history) lr = sched.step(loss, lr);
  return lr;
}

}  // namespace ctxemo::optim
