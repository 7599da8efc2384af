#include "ctxemo/nn.hpp"

#include <cmath>
#include <stdexcept>

#include <spdlog/spdlog.h>

namespace ctxemo::nn {

namespace {

bool has_prefix(const std::string& name, const std::vector<std::string>& prefixes) {
  for (const auto& p : prefixes)
    if (name.rfind(p, 0) == 0) return true;
  return false;
}

bool selected(const std::string& name, const LoadFilter& f) {
  if (!f.include_prefixes.empty() && !has_prefix(name, f.include_prefixes)) return false;
  return !has_prefix(name, f.exclude_prefixes);
}

}  // namespace

Parameter::Parameter(std::string n, nd::Shape shape)
    : name(std::move(n)), tensor(nd::Tensor::zeros(std::move(shape), true)) {}

void init_uniform(Parameter& p, std::size_t fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (auto& v : p.tensor.mutable_values()) v = rng.uniform(-bound, bound);
}

void fill(Parameter& p, double value) {
  for (auto& v : p.tensor.mutable_values()) v = value;
}

Linear::Linear(std::string name, std::size_t in, std::size_t out, bool with_bias)
    : weight(name + ".weight", {out, in}) {
  if (with_bias) bias = Parameter(name + ".bias", {out});
}

nd::Tensor Linear::forward(const nd::Tensor& x) const {
  return nd::linear(x, weight.tensor, bias.tensor);
}

void Linear::reset(Rng& rng) {
  init_uniform(weight, in_features(), rng);
  if (bias.tensor.defined()) init_uniform(bias, in_features(), rng);
}

void Linear::collect(std::vector<Parameter*>& out) {
  out.push_back(&weight);
  if (bias.tensor.defined()) out.push_back(&bias);
}

Conv1x1::Conv1x1(std::string name, std::size_t in, std::size_t out)
    : weight(name + ".weight", {out, in}), bias(name + ".bias", {out}) {}

nd::Tensor Conv1x1::forward(const nd::Tensor& x) const {
  return nd::conv1x1(x, weight.tensor, bias.tensor);
}

void Conv1x1::reset(Rng& rng) {
  const std::size_t fan_in = weight.tensor.dim(1);
  init_uniform(weight, fan_in, rng);
  init_uniform(bias, fan_in, rng);
}

void Conv1x1::collect(std::vector<Parameter*>& out) {
  out.push_back(&weight);
  out.push_back(&bias);
}

TemporalConv::TemporalConv(std::string name, std::size_t in, std::size_t out,
                           std::size_t kernel, std::size_t stride_)
    : weight(name + ".weight", {out, in, kernel}), bias(name + ".bias", {out}), stride(stride_) {
  if (kernel % 2 == 0) throw std::invalid_argument("temporal kernel size must be odd");
  if (stride_ == 0) throw std::invalid_argument("temporal stride must be positive");
}

nd::Tensor TemporalConv::forward(const nd::Tensor& x) const {
  return nd::temporal_conv(x, weight.tensor, bias.tensor, stride);
}

void TemporalConv::reset(Rng& rng) {
  const std::size_t fan_in = weight.tensor.dim(1) * weight.tensor.dim(2);
  init_uniform(weight, fan_in, rng);
  init_uniform(bias, fan_in, rng);
}

void TemporalConv::collect(std::vector<Parameter*>& out) {
  out.push_back(&weight);
  out.push_back(&bias);
}

BatchNorm::BatchNorm(std::string name, std::size_t channels, double momentum_, double eps_)
    : gamma(name + ".weight", {channels}),
      beta(name + ".bias", {channels}),
      running_mean(channels, 0.0),
      running_var(channels, 1.0),
      momentum(momentum_),
      eps(eps_),
      name_(std::move(name)) {
  fill(gamma, 1.0);
}

nd::Tensor BatchNorm::forward(const nd::Tensor& x, bool training) {
  if (!training || stats_frozen) {
    return nd::batch_norm_fixed(x, gamma.tensor, beta.tensor, running_mean, running_var, eps);
  }
  nd::BatchStats stats;
  auto y = nd::batch_norm_train(x, gamma.tensor, beta.tensor, eps, &stats);
  const double count = static_cast<double>(x.numel() / channels());
  const double unbias = count > 1.0 ? count / (count - 1.0) : 1.0;
  for (std::size_t c = 0; c < channels(); ++c) {
    running_mean[c] = (1.0 - momentum) * running_mean[c] + momentum * stats.mean[c];
    running_var[c] = (1.0 - momentum) * running_var[c] + momentum * stats.var[c] * unbias;
  }
  return y;
}

void BatchNorm::collect(std::vector<Parameter*>& out) {
  out.push_back(&gamma);
  out.push_back(&beta);
}

std::size_t set_partial_bn(const std::vector<BatchNorm*>& layers, bool first_bn_trainable) {
  if (layers.empty()) {
    spdlog::warn("partial BN requested on a model without batch-norm layers; nothing frozen");
    return 0;
  }
  std::size_t frozen = 0;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const bool freeze = i > 0 || !first_bn_trainable;
    layers[i]->stats_frozen = freeze;
    if (freeze) ++frozen;
  }
  return frozen;
}

StateDict collect_state(const std::vector<Parameter*>& params,
                        const std::vector<BatchNorm*>& norms) {
  StateDict state;
  for (const auto* p : params) {
    auto v = p->tensor.values();
    state[p->name] = NamedArray{p->tensor.shape(), {v.begin(), v.end()}};
  }
  for (const auto* bn : norms) {
    state[bn->name() + ".running_mean"] = NamedArray{{bn->channels()}, bn->running_mean};
    state[bn->name() + ".running_var"] = NamedArray{{bn->channels()}, bn->running_var};
  }
  return state;
}

std::size_t apply_state(const StateDict& state, const std::vector<Parameter*>& params,
                        const std::vector<BatchNorm*>& norms, const LoadFilter& filter) {
  auto lookup = [&](const std::string& name, const nd::Shape& shape) -> const NamedArray& {
    auto it = state.find(name);
    if (it == state.end()) throw std::runtime_error("checkpoint is missing '" + name + "'");
    if (it->second.shape != shape) {
      throw std::runtime_error("checkpoint entry '" + name + "' has shape " +
                               nd::shape_str(it->second.shape) + ", model expects " +
                               nd::shape_str(shape));
    }
    return it->second;
  };
  std::size_t loaded = 0;
  for (auto* p : params) {
    if (!selected(p->name, filter)) continue;
    const auto& arr = lookup(p->name, p->tensor.shape());
    std::copy(arr.values.begin(), arr.values.end(), p->tensor.mutable_values().begin());
    ++loaded;
  }
  for (auto* bn : norms) {
    for (auto [suffix, buf] : {std::pair{".running_mean", &bn->running_mean},
                               std::pair{".running_var", &bn->running_var}}) {
      const std::string name = bn->name() + suffix;
      if (!selected(name, filter)) continue;
      *buf = lookup(name, {bn->channels()}).values;
      ++loaded;
    }
  }
  return loaded;
}

}  // namespace ctxemo::nn
