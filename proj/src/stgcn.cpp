#include "ctxemo/stgcn.hpp"

#include <stdexcept>

#include "ctxemo/ops.hpp"

namespace ctxemo::stgcn {

void UnitConfig::validate() const {
  if (in_channels == 0 || out_channels == 0) {
    throw std::invalid_argument("ST-GCN unit channels must be positive");
  }
  if (temporal_kernel % 2 == 0) throw std::invalid_argument("temporal kernel must be odd");
  if (stride != 1 && stride != 2) throw std::invalid_argument("unit stride must be 1 or 2");
  if (dropout < 0.0 || dropout >= 1.0) throw std::invalid_argument("dropout must be in [0,1)");
}

ModelConfig ModelConfig::canonical() {
  ModelConfig cfg;
  const std::size_t widths[] = {64, 64, 64, 128, 128, 128, 256, 256, 256};
  std::size_t in = cfg.in_channels;
  for (std::size_t i = 0; i < 9; ++i) {
    UnitConfig u;
    u.in_channels = in;
    u.out_channels = widths[i];
    u.stride = (i == 3 || i == 6) ? 2 : 1;
    u.residual = i != 0;
    cfg.units.push_back(u);
    in = widths[i];
  }
  return cfg;
}

ModelConfig ModelConfig::reduced(const std::vector<std::size_t>& widths, std::size_t kernel,
                                 double dropout) {
  ModelConfig cfg;
  std::size_t in = cfg.in_channels;
  for (std::size_t i = 0; i < widths.size(); ++i) {
    UnitConfig u;
    u.in_channels = in;
    u.out_channels = widths[i];
    u.temporal_kernel = kernel;
    u.dropout = dropout;
    u.residual = i != 0;
    cfg.units.push_back(u);
    in = widths[i];
  }
  return cfg;
}

void ModelConfig::validate() const {
  if (units.empty()) throw std::invalid_argument("ST-GCN needs at least one unit");
  std::size_t in = in_channels;
  for (std::size_t i = 0; i < units.size(); ++i) {
    units[i].validate();
    if (units[i].in_channels != in) {
      throw std::invalid_argument("ST-GCN unit " + std::to_string(i) + " expects " +
                                  std::to_string(units[i].in_channels) +
                                  " input channels but receives " + std::to_string(in));
    }
    in = units[i].out_channels;
  }
}

nd::Tensor spatial_graph_conv(const nd::Tensor& x, const nd::Tensor& weight,
                              const nd::Tensor& bias, const nd::Tensor& adjacency,
                              const nd::Tensor& mask) {
  const nd::Tensor mixed = nd::conv1x1(x, weight, bias);
  const nd::Tensor effective = mask.defined() ? nd::mul(adjacency, mask) : adjacency;
  return nd::graph_aggregate(mixed, effective);
}

nd::Tensor adjacency_tensor(const graph::PartitionedAdjacency& adj) {
  const std::size_t k = adj.num_subsets(), v = adj.num_joints();
  std::vector<double> values;
  values.reserve(k * v * v);
  for (const auto& m : adj.matrices) values.insert(values.end(), m.data().begin(), m.data().end());
  return nd::Tensor({k, v, v}, std::move(values));
}

Unit::Unit(std::string name, const UnitConfig& config, std::size_t num_subsets,
           std::size_t num_joints, bool edge_importance)
    : gcn(name + ".gcn", config.in_channels, num_subsets * config.out_channels),
      gcn_bn(name + ".gcn_bn", config.out_channels),
      tcn(name + ".tcn", config.out_channels, config.out_channels, config.temporal_kernel,
          config.stride),
      tcn_bn(name + ".tcn_bn", config.out_channels),
      importance(name + ".edge_importance", {num_subsets, num_joints, num_joints}),
      config_(config),
      edge_importance_(edge_importance) {
  config.validate();
  nn::fill(importance, 1.0);
  if (config.residual && (config.in_channels != config.out_channels || config.stride != 1)) {
    projection_ = true;
    residual_conv =
        nn::TemporalConv(name + ".residual", config.in_channels, config.out_channels, 1,
                         config.stride);
    residual_bn = nn::BatchNorm(name + ".residual_bn", config.out_channels);
  }
}

nd::Tensor Unit::forward(const nd::Tensor& x, const nd::Tensor& adjacency, bool training,
                         Rng& rng) {
  nd::Tensor y = spatial_graph_conv(x, gcn.weight.tensor, gcn.bias.tensor, adjacency,
                                    edge_importance_ ? importance.tensor : nd::Tensor{});
  y = nd::relu(gcn_bn.forward(y, training));
  y = tcn_bn.forward(tcn.forward(y), training);
  if (training) y = nd::dropout(y, config_.dropout, rng);
  if (config_.residual) {
    y = nd::add(y, projection_ ? residual_bn.forward(residual_conv.forward(x), training) : x);
  }
  return nd::relu(y);
}

void Unit::reset(Rng& rng) {
  gcn.reset(rng);
  tcn.reset(rng);
  nn::fill(gcn.bias, 0.0);
  nn::fill(tcn.bias, 0.0);
  if (projection_) {
    residual_conv.reset(rng);
    nn::fill(residual_conv.bias, 0.0);
  }
  nn::fill(importance, 1.0);
}

void Unit::collect(std::vector<nn::Parameter*>& params, std::vector<nn::BatchNorm*>& norms) {
  gcn.collect(params);
  gcn_bn.collect(params);
  tcn.collect(params);
  tcn_bn.collect(params);
  norms.push_back(&gcn_bn);
  norms.push_back(&tcn_bn);
  if (projection_) {
    residual_conv.collect(params);
    residual_bn.collect(params);
    norms.push_back(&residual_bn);
  }
  // The mask is only a trainable parameter when edge importance is enabled.
  if (edge_importance_) params.push_back(&importance);
}

Model::Model(ModelConfig config, std::uint64_t seed)
    : Model(config, graph::build_skeleton_graph(config.layout), seed) {}

Model::Model(ModelConfig config, graph::SkeletonGraph graph, std::uint64_t seed)
    : config_(std::move(config)), graph_(std::move(graph)) {
  config_.validate();
  build();
  reset(seed);
}

void Model::build() {
  adjacency_ = graph::build_adjacency(graph_, config_.strategy, config_.alpha);
  adjacency_tensor_ = adjacency_tensor(adjacency_);
  if (config_.input_bn) input_bn_.emplace("input_bn", config_.in_channels);
  units_.reserve(config_.units.size());
  for (std::size_t i = 0; i < config_.units.size(); ++i) {
    units_.emplace_back("units." + std::to_string(i), config_.units[i],
                        adjacency_.num_subsets(), graph_.num_joints, config_.edge_importance);
  }
  head_ = nn::Linear("head", config_.units.back().out_channels, kNumOutputs);
}

void Model::reset(std::uint64_t seed) {
  Rng rng(seed);
  for (auto& u : units_) u.reset(rng);
  head_.reset(rng);
  nn::fill(head_.bias, 0.0);
  dropout_rng_ = rng.derive(0xD0);
}

nd::Tensor Model::forward(const nd::Tensor& x, bool training) {
  if (x.rank() != 4 || x.dim(1) != config_.in_channels || x.dim(3) != graph_.num_joints) {
    throw std::invalid_argument("ST-GCN input must be (N," + std::to_string(config_.in_channels) +
                                ",T," + std::to_string(graph_.num_joints) + "), got " +
                                nd::shape_str(x.shape()));
  }
  nd::Tensor y = input_bn_ ? input_bn_->forward(x, training) : x;
  for (auto& u : units_) y = u.forward(y, adjacency_tensor_, training, dropout_rng_);
  return head_.forward(nd::global_avg_pool(y));
}

std::vector<nn::Parameter*> Model::parameters() {
  std::vector<nn::Parameter*> params;
  std::vector<nn::BatchNorm*> norms;
  if (input_bn_) input_bn_->collect(params);
  for (auto& u : units_) u.collect(params, norms);
  head_.collect(params);
  return params;
}

std::vector<nn::BatchNorm*> Model::batch_norms() {
  std::vector<nn::Parameter*> params;
  std::vector<nn::BatchNorm*> norms;
  if (input_bn_) norms.push_back(&*input_bn_);
  for (auto& u : units_) u.collect(params, norms);
  return norms;
}

nn::StateDict Model::state() { return nn::collect_state(parameters(), batch_norms()); }

void Model::load_state(const nn::StateDict& state, const nn::LoadFilter& filter) {
  nn::apply_state(state, parameters(), batch_norms(), filter);
}

std::vector<Prediction> to_predictions(const nd::Tensor& outputs,
                                       const std::vector<std::string>& clip_ids) {
  if (outputs.rank() != 2 || outputs.dim(1) != kNumOutputs || outputs.dim(0) != clip_ids.size()) {
    throw std::invalid_argument("prediction outputs " + nd::shape_str(outputs.shape()) +
                                " do not match " + std::to_string(clip_ids.size()) + " clips");
  }
  std::vector<Prediction> preds;
  auto v = outputs.values();
  for (std::size_t i = 0; i < clip_ids.size(); ++i) {
    Prediction p;
    p.clip_id = clip_ids[i];
    const double* row = &v[i * kNumOutputs];
    p.categorical.assign(row, row + kNumCategories);
    p.vad.assign(row + kNumCategories, row + kNumOutputs);
    preds.push_back(std::move(p));
  }
  return preds;
}

}  // namespace ctxemo::stgcn
