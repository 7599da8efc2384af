#pragma once

#include <vector>

#include "ctxemo/nn.hpp"

namespace ctxemo::optim {

struct SgdConfig {
  double learning_rate = 1e-3;
  double momentum = 0.9;
  double weight_decay = 1e-5;
};

/// SGD with heavy-ball momentum and L2 weight decay:
///   v <- momentum * v + grad + weight_decay * w
///   w <- w - lr * v
/// Gradients are zeroed after every step; frozen parameters are skipped.
class Sgd {
 public:
  Sgd(std::vector<nn::Parameter*> params, SgdConfig config);

  void step();
  void zero_grad();

  double learning_rate() const { return config_.learning_rate; }
  void set_learning_rate(double lr);
  const SgdConfig& config() const { return config_; }
  const std::vector<std::vector<double>>& velocity() const { return velocity_; }

 private:
  std::vector<nn::Parameter*> params_;
  SgdConfig config_;
  std::vector<std::vector<double>> velocity_;
};

struct PlateauConfig {
  double factor = 0.1;
  std::size_t patience = 2;
  double min_delta = 1e-4;
  double min_lr = 1e-8;
};

/// Multiplies the learning rate by `factor` once the monitored loss has
/// failed to improve on its best value by more than `min_delta` for
/// `patience` consecutive epochs. Never goes below `min_lr`.
class ReduceLrOnPlateau {
 public:
  explicit ReduceLrOnPlateau(PlateauConfig config = {}) : config_(config) {}

  /// Records one epoch; returns the (possibly reduced) learning rate.
  double step(double monitored_loss, double current_lr);
  bool last_reduced() const { return last_reduced_; }
  const PlateauConfig& config() const { return config_; }

 private:
  PlateauConfig config_;
  double best_ = 0.0;
  bool has_best_ = false;
  std::size_t bad_epochs_ = 0;
  bool last_reduced_ = false;
};

/// Replays a whole validation-loss history and returns the final rate.
double reduce_lr_on_plateau(const std::vector<double>& history, double initial_lr,
                            PlateauConfig config = {});

}  // namespace ctxemo::optim
