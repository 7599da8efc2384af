#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ctxemo/graph.hpp"
#include "ctxemo/nn.hpp"
#include "ctxemo/types.hpp"

namespace ctxemo::stgcn {

struct UnitConfig {
  std::size_t in_channels = 64;
  std::size_t out_channels = 64;
  std::size_t temporal_kernel = 9;
  std::size_t stride = 1;
  bool residual = true;
  double dropout = 0.5;

  void validate() const;
};

struct ModelConfig {
  std::vector<UnitConfig> units;
  graph::Strategy strategy = graph::Strategy::kSpatial;
  std::string layout = "bold18";
  double alpha = graph::kDefaultAlpha;
  bool edge_importance = true;
  bool input_bn = true;
  std::size_t in_channels = 3;

  /// Nine units, 64x3 -> 128x3 -> 256x3, stride 2 entering the 128 and 256
  /// blocks, kernel 9, dropout 0.5, residual everywhere but the first unit.
  static ModelConfig canonical();
  /// Small stack for desk-scale experiments: `widths.size()` units.
  static ModelConfig reduced(const std::vector<std::size_t>& widths, std::size_t kernel = 9,
                             double dropout = 0.0);
  void validate() const;
};

/// H_out = sum_k W_k H_in (A_k (.) M_k).
/// `weight` is (K*Cout, Cin) and is applied as one 1x1 convolution whose
/// output is split into K groups of Cout channels. `adjacency` is (K,V,V);
/// `mask` (same shape) is optional.
nd::Tensor spatial_graph_conv(const nd::Tensor& x, const nd::Tensor& weight,
                              const nd::Tensor& bias, const nd::Tensor& adjacency,
                              const nd::Tensor& mask = {});

nd::Tensor adjacency_tensor(const graph::PartitionedAdjacency& adj);

/// One spatial-temporal block:
/// gcn -> BN -> ReLU -> temporal conv -> BN -> dropout -> (+ residual) -> ReLU.
class Unit {
 public:
  Unit(std::string name, const UnitConfig& config, std::size_t num_subsets,
       std::size_t num_joints, bool edge_importance);

  nd::Tensor forward(const nd::Tensor& x, const nd::Tensor& adjacency, bool training, Rng& rng);
  void reset(Rng& rng);
  void collect(std::vector<nn::Parameter*>& params, std::vector<nn::BatchNorm*>& norms);

  const UnitConfig& config() const { return config_; }
  bool has_projection() const { return projection_; }

  nn::Conv1x1 gcn;
  nn::BatchNorm gcn_bn;
  nn::TemporalConv tcn;
  nn::BatchNorm tcn_bn;
  nn::TemporalConv residual_conv;
  nn::BatchNorm residual_bn;
  nn::Parameter importance;  // (K,V,V), ones at init

 private:
  UnitConfig config_;
  bool edge_importance_;
  bool projection_ = false;
};

class Model {
 public:
  explicit Model(ModelConfig config, std::uint64_t seed = 0);
  Model(ModelConfig config, graph::SkeletonGraph graph, std::uint64_t seed = 0);
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;
  Model(Model&&) = default;
  Model& operator=(Model&&) = default;

  /// (N, C, T, V) -> (N, 29) raw outputs: 26 categorical logits then 3 VAD values.
  nd::Tensor forward(const nd::Tensor& x, bool training);

  std::vector<nn::Parameter*> parameters();
  std::vector<nn::BatchNorm*> batch_norms();
  nn::StateDict state();
  void load_state(const nn::StateDict& state, const nn::LoadFilter& filter = {});
  void reset(std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  const graph::PartitionedAdjacency& adjacency() const { return adjacency_; }
  std::vector<Unit>& units() { return units_; }
  nn::Linear& head() { return head_; }
  Rng& dropout_rng() { return dropout_rng_; }

 private:
  void build();

  ModelConfig config_;
  graph::SkeletonGraph graph_;
  graph::PartitionedAdjacency adjacency_;
  nd::Tensor adjacency_tensor_;
  std::optional<nn::BatchNorm> input_bn_;
  std::vector<Unit> units_;
  nn::Linear head_;
  Rng dropout_rng_;
};

/// Splits (N,29) outputs into per-clip predictions.
std::vector<Prediction> to_predictions(const nd::Tensor& outputs,
                                       const std::vector<std::string>& clip_ids);

}  // namespace ctxemo::stgcn
