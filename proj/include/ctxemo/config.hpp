#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "ctxemo/graph.hpp"
#include "ctxemo/optim.hpp"
#include "ctxemo/skeleton.hpp"
#include "ctxemo/tsn.hpp"

namespace ctxemo::config {

enum class ModelType { kStgcn, kTsnRgb, kTsnFlow };
std::string_view to_string(ModelType t);
ModelType parse_model_type(std::string_view s);

struct ModelSection {
  ModelType type = ModelType::kStgcn;
  // ST-GCN
  graph::Strategy strategy = graph::Strategy::kSpatial;
  bool edge_importance = true;
  bool partial_bn = false;
  std::string layout = "bold18";
  /// Empty = the nine-unit canonical stack; otherwise one unit per width.
  std::vector<std::size_t> widths;
  std::size_t temporal_kernel = 9;
  double dropout = 0.5;
  // TSN
  bool body = true;
  bool context = true;
  bool face = true;
  bool scene_attr = true;
  bool embedding_loss = false;

  tsn::StreamConfig streams() const;
};

struct OptimizerSection {
  double lr = 0.0;  // 0 = model default (5e-3 ST-GCN, 1e-3 TSN)
  double momentum = 0.9;
  double weight_decay = 1e-5;
  std::size_t epochs = 25;
  std::size_t batch_size = 16;
  bool plateau = true;
  optim::PlateauConfig scheduler;

  double effective_lr(ModelType type) const;
};

struct DataSection {
  std::string manifest;
  std::string train_split = "train";
  std::string val_split = "val";
  bool augment = true;
  data::AffineLimits augmentation;
  double flow_bound = 20.0;
  std::size_t k_train = 3;
  std::size_t k_eval = 25;
};

struct RunConfig {
  ModelSection model;
  OptimizerSection optimizer;
  DataSection data;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Parses JSON; unknown keys and type errors are reported with the line of
/// the offending key. Missing keys take their defaults.
RunConfig parse_config(std::string_view text);
RunConfig load_config(const std::filesystem::path& path);
std::string dump_config(const RunConfig& cfg);

/// Fully populated defaults for a model type (lr resolved).
RunConfig default_config(ModelType type);

}  // namespace ctxemo::config
