#pragma once

#include <string_view>
#include <vector>

#include "ctxemo/types.hpp"

namespace ctxemo::fusion {

enum class Scheme { kMaximum, kAverage, kWeightedAverage };
std::string_view to_string(Scheme s);
Scheme parse_scheme(std::string_view s);

struct FusionSpec {
  Scheme scheme = Scheme::kWeightedAverage;
  std::vector<double> weights;  // one per model; used by kWeightedAverage only

  /// TSN-RGB : TSN-Flow : ST-GCN.
  static FusionSpec default_weighted() { return {Scheme::kWeightedAverage, {2.0, 2.0, 1.0}}; }
};

/// Late fusion of per-model video predictions. Categorical scores in logit
/// space go through a sigmoid first; VAD is fused on raw values. The output
/// is in probability space and follows the clip order of the first set.
PredictionSet fuse(const std::vector<PredictionSet>& models, const FusionSpec& spec);

}  // namespace ctxemo::fusion
