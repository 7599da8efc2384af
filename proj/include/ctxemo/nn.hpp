#pragma once

#include <map>
#include <string>
#include <vector>

#include "ctxemo/ops.hpp"
#include "ctxemo/rng.hpp"
#include "ctxemo/tensor.hpp"

namespace ctxemo::nn {

/// Trainable leaf. Frozen parameters still receive gradients but the
/// optimizer leaves their values alone.
struct Parameter {
  std::string name;
  nd::Tensor tensor;
  bool frozen = false;

  Parameter() = default;
  Parameter(std::string n, nd::Shape shape);
};

/// U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
void init_uniform(Parameter& p, std::size_t fan_in, Rng& rng);
void fill(Parameter& p, double value);

class Linear {
 public:
  Linear() = default;
  Linear(std::string name, std::size_t in, std::size_t out, bool with_bias = true);

  nd::Tensor forward(const nd::Tensor& x) const;
  void reset(Rng& rng);
  void collect(std::vector<Parameter*>& out);

  std::size_t in_features() const { return weight.tensor.dim(1); }
  std::size_t out_features() const { return weight.tensor.dim(0); }

  Parameter weight;
  Parameter bias;
};

class Conv1x1 {
 public:
  Conv1x1() = default;
  Conv1x1(std::string name, std::size_t in, std::size_t out);

  nd::Tensor forward(const nd::Tensor& x) const;
  void reset(Rng& rng);
  void collect(std::vector<Parameter*>& out);

  Parameter weight;
  Parameter bias;
};

class TemporalConv {
 public:
  TemporalConv() = default;
  TemporalConv(std::string name, std::size_t in, std::size_t out, std::size_t kernel,
               std::size_t stride);

  nd::Tensor forward(const nd::Tensor& x) const;
  void reset(Rng& rng);
  void collect(std::vector<Parameter*>& out);

  Parameter weight;
  Parameter bias;
  std::size_t stride = 1;
};

/// Batch normalization over axis 1 with running statistics
/// (momentum 0.1, eps 1e-5). With `stats_frozen`, training-mode passes
/// normalize with the stored statistics and never update them.
class BatchNorm {
 public:
  BatchNorm() = default;
  BatchNorm(std::string name, std::size_t channels, double momentum = 0.1, double eps = 1e-5);

  nd::Tensor forward(const nd::Tensor& x, bool training);
  void collect(std::vector<Parameter*>& out);

  const std::string& name() const { return name_; }
  std::size_t channels() const { return running_mean.size(); }

  Parameter gamma;
  Parameter beta;
  std::vector<double> running_mean;
  std::vector<double> running_var;
  bool stats_frozen = false;
  double momentum = 0.1;
  double eps = 1e-5;

 private:
  std::string name_;
};

/// Freezes running statistics of every batch-norm layer except the first
/// (or of all of them when `first_bn_trainable` is false). Affine weights
/// stay trainable. Returns the number of layers frozen; warns on an empty list.
std::size_t set_partial_bn(const std::vector<BatchNorm*>& layers, bool first_bn_trainable = true);

/// Named arrays used for checkpoints: parameters plus batch-norm buffers.
struct NamedArray {
  nd::Shape shape;
  std::vector<double> values;
  bool operator==(const NamedArray&) const = default;
};
using StateDict = std::map<std::string, NamedArray>;

StateDict collect_state(const std::vector<Parameter*>& params,
                        const std::vector<BatchNorm*>& norms);

struct LoadFilter {
  std::vector<std::string> include_prefixes;  // empty = everything
  std::vector<std::string> exclude_prefixes;
};

/// Copies matching entries into the model. Every selected name must exist
/// in `state` with the same shape; returns the number of arrays loaded.
std::size_t apply_state(const StateDict& state, const std::vector<Parameter*>& params,
                        const std::vector<BatchNorm*>& norms, const LoadFilter& filter = {});

}  // namespace ctxemo::nn
