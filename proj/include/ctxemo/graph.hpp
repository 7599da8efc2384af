#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace ctxemo::graph {

/// Dense row-major square matrix used for adjacency subsets.
class Matrix {
 public:
  Matrix() = default;
  explicit Matrix(std::size_t n, double fill = 0.0) : n_(n), data_(n * n, fill) {}

  static Matrix identity(std::size_t n);

  std::size_t size() const { return n_; }
  double& operator()(std::size_t i, std::size_t j) { return data_[i * n_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * n_ + j]; }
  const std::vector<double>& data() const { return data_; }

  Matrix transposed() const;
  bool operator==(const Matrix&) const = default;

 private:
  std::size_t n_ = 0;
  std::vector<double> data_;
};

struct SkeletonGraph {
  std::size_t num_joints = 0;
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  std::size_t root = 0;
  std::string layout_id;
  std::vector<std::string> joint_names;

  /// Plain adjacency A (no self loops), symmetric 0/1.
  Matrix adjacency() const;
};

enum class Strategy { kUniform, kDistance, kSpatial };

std::string_view to_string(Strategy s);
Strategy parse_strategy(std::string_view name);

/// Number of adjacency subsets produced by `s` (uniform 1, distance 2, spatial 3).
std::size_t subset_count(Strategy s);

struct PartitionedAdjacency {
  Strategy strategy = Strategy::kUniform;
  std::vector<Matrix> matrices;
  double alpha = 0.001;

  std::size_t num_subsets() const { return matrices.size(); }
  std::size_t num_joints() const { return matrices.empty() ? 0 : matrices.front().size(); }
};

inline constexpr double kDefaultAlpha = 0.001;
inline constexpr std::size_t kBoldJoints = 18;

/// Validates and assembles a graph; throws std::invalid_argument on bad
/// indices, self edges or a disconnected edge list.
SkeletonGraph make_graph(std::size_t num_joints,
                         std::vector<std::pair<std::size_t, std::size_t>> edges,
                         std::size_t root, std::string layout_id = "custom",
                         std::vector<std::string> joint_names = {});

/// Resolves `layout_id` to a built-in layout ("bold18") or a layout file path.
SkeletonGraph build_skeleton_graph(std::string_view layout_id);

/// Parses the JSON layout format (joints, edges by name or index, root).
SkeletonGraph parse_layout(std::string_view text, std::string_view fallback_id = "custom");
std::string serialize_layout(const SkeletonGraph& g);

std::vector<std::size_t> hop_distances(const SkeletonGraph& g, std::size_t root);

/// Un-normalized binary subsets; they always sum to I + A.
std::vector<Matrix> partition(const SkeletonGraph& g, Strategy strategy,
                              std::size_t max_distance = 1);

/// Replaces every subset by D_k^{-1/2} A_k D_k^{-1/2} with D_k^{ii} = sum_j A_k^{ij} + alpha.
PartitionedAdjacency normalize_partition(const std::vector<Matrix>& matrices,
                                         Strategy strategy,
                                         double alpha = kDefaultAlpha);

PartitionedAdjacency build_adjacency(const SkeletonGraph& g, Strategy strategy,
                                     double alpha = kDefaultAlpha);

}  // namespace ctxemo::graph
