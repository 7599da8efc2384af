#include "ctxemo/graph.hpp"

#include <cmath>
#include <fstream>
#include <queue>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace ctxemo::graph {

namespace {

using nlohmann::json;

// 18-joint body layout (nose, neck, arms, legs, eyes, ears); root is the neck.
constexpr std::string_view kBold18Layout = R"({
  "layout": "bold18",
  "joints": ["nose", "neck", "r_shoulder", "r_elbow", "r_wrist", "l_shoulder",
             "l_elbow", "l_wrist", "r_hip", "r_knee", "r_ankle", "l_hip",
             "l_knee", "l_ankle", "r_eye", "l_eye", "r_ear", "l_ear"],
  "edges": [["r_wrist", "r_elbow"], ["r_elbow", "r_shoulder"],
            ["l_wrist", "l_elbow"], ["l_elbow", "l_shoulder"],
            ["l_ankle", "l_knee"], ["l_knee", "l_hip"],
            ["r_ankle", "r_knee"], ["r_knee", "r_hip"],
            ["l_hip", "l_shoulder"], ["r_hip", "r_shoulder"],
            ["l_shoulder", "neck"], ["r_shoulder", "neck"], ["nose", "neck"],
            ["l_eye", "nose"], ["r_eye", "nose"],
            ["l_ear", "l_eye"], ["r_ear", "r_eye"]],
  "root": "neck"
})";

std::size_t resolve_joint(const json& ref, const std::vector<std::string>& names,
                          std::size_t num_joints) {
  if (ref.is_number_integer()) {
    const auto idx = ref.get<long long>();
    if (idx < 0 || static_cast<std::size_t>(idx) >= num_joints) {
      throw std::invalid_argument("joint index " + std::to_string(idx) +
                                  " out of range for " + std::to_string(num_joints) +
                                  " joints");
    }
    return static_cast<std::size_t>(idx);
  }
  if (ref.is_string()) {
    const auto name = ref.get<std::string>();
    for (std::size_t i = 0; i < names.size(); ++i) {
      if (names[i] == name) return i;
    }
    throw std::invalid_argument("unknown joint name '" + name + "'");
  }
  throw std::invalid_argument("joint reference must be a name or an index");
}

bool is_connected(std::size_t n, const std::vector<std::pair<std::size_t, std::size_t>>& edges) {
  if (n == 0) return false;
  std::vector<std::vector<std::size_t>> nbrs(n);
  for (auto [a, b] : edges) {
    nbrs[a].push_back(b);
    nbrs[b].push_back(a);
  }
  std::vector<bool> seen(n, false);
  std::queue<std::size_t> q;
  q.push(0);
  seen[0] = true;
  std::size_t count = 1;
  while (!q.empty()) {
    auto u = q.front();
    q.pop();
    for (auto w : nbrs[u]) {
      if (!seen[w]) {
        seen[w] = true;
        ++count;
        q.push(w);
      }
    }
  }
  return count == n;
}

}  // namespace

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::transposed() const {
  Matrix t(n_);
  for (std::size_t i = 0; i < n_; ++i)
    for (std::size_t j = 0; j < n_; ++j) t(j, i) = (*this)(i, j);
  return t;
}

Matrix SkeletonGraph::adjacency() const {
  Matrix a(num_joints);
  for (auto [i, j] : edges) {
    a(i, j) = 1.0;
    a(j, i) = 1.0;
  }
  return a;
}

std::string_view to_string(Strategy s) {
  switch (s) {
    case Strategy::kUniform: return "uniform";
    case Strategy::kDistance: return "distance";
    case Strategy::kSpatial: return "spatial";
  }
  return "unknown";
}

Strategy parse_strategy(std::string_view name) {
  if (name == "uniform") return Strategy::kUniform;
  if (name == "distance") return Strategy::kDistance;
  if (name == "spatial") return Strategy::kSpatial;
  throw std::invalid_argument("unknown labeling strategy '" + std::string(name) + "'");
}

std::size_t subset_count(Strategy s) {
  switch (s) {
    case Strategy::kUniform: return 1;
    case Strategy::kDistance: return 2;
    case Strategy::kSpatial: return 3;
  }
  return 0;
}

SkeletonGraph make_graph(std::size_t num_joints,
                         std::vector<std::pair<std::size_t, std::size_t>> edges,
                         std::size_t root, std::string layout_id,
                         std::vector<std::string> joint_names) {
  if (num_joints == 0) throw std::invalid_argument("graph needs at least one joint");
  if (root >= num_joints) {
    throw std::invalid_argument("root index " + std::to_string(root) + " out of range");
  }
  for (auto [a, b] : edges) {
    if (a >= num_joints || b >= num_joints) {
      throw std::invalid_argument("edge (" + std::to_string(a) + "," + std::to_string(b) +
                                  ") out of range for " + std::to_string(num_joints) +
                                  " joints");
    }
    if (a == b) throw std::invalid_argument("self edge on joint " + std::to_string(a));
  }
  if (!is_connected(num_joints, edges)) {
    throw std::invalid_argument("layout '" + layout_id + "' is not connected");
  }
  if (!joint_names.empty() && joint_names.size() != num_joints) {
    throw std::invalid_argument("joint name count does not match joint count");
  }
  SkeletonGraph g;
  g.num_joints = num_joints;
  g.edges = std::move(edges);
  g.root = root;
  g.layout_id = std::move(layout_id);
  g.joint_names = std::move(joint_names);
  return g;
}

SkeletonGraph parse_layout(std::string_view text, std::string_view fallback_id) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("malformed layout: ") + e.what());
  }
  std::vector<std::string> names;
  std::size_t n = 0;
  if (doc.contains("joints")) {
    const auto& joints = doc.at("joints");
    if (joints.is_array()) {
      for (const auto& j : joints) names.push_back(j.get<std::string>());
      n = names.size();
    } else {
      n = joints.get<std::size_t>();
    }
  } else {
    throw std::invalid_argument("layout is missing 'joints'");
  }
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  for (const auto& e : doc.at("edges")) {
    if (!e.is_array() || e.size() != 2) {
      throw std::invalid_argument("layout edge must be a pair");
    }
    edges.emplace_back(resolve_joint(e[0], names, n), resolve_joint(e[1], names, n));
  }
  const std::size_t root = resolve_joint(doc.at("root"), names, n);
  std::string id = doc.value("layout", std::string(fallback_id));
  return make_graph(n, std::move(edges), root, std::move(id), std::move(names));
}

std::string serialize_layout(const SkeletonGraph& g) {
  json doc;
  doc["layout"] = g.layout_id;
  if (g.joint_names.empty()) {
    doc["joints"] = g.num_joints;
  } else {
    doc["joints"] = g.joint_names;
  }
  json edges = json::array();
  for (auto [a, b] : g.edges) edges.push_back({a, b});
  doc["edges"] = edges;
  doc["root"] = g.root;
  return doc.dump(2);
}

SkeletonGraph build_skeleton_graph(std::string_view layout_id) {
  if (layout_id == "bold18") return parse_layout(kBold18Layout, "bold18");
  std::ifstream in{std::string(layout_id)};
  if (!in) throw std::invalid_argument("unknown layout '" + std::string(layout_id) + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_layout(ss.str(), layout_id);
}

std::vector<std::size_t> hop_distances(const SkeletonGraph& g, std::size_t root) {
  if (root >= g.num_joints) throw std::invalid_argument("root out of range");
  std::vector<std::vector<std::size_t>> nbrs(g.num_joints);
  for (auto [a, b] : g.edges) {
    nbrs[a].push_back(b);
    nbrs[b].push_back(a);
  }
  constexpr auto kUnreached = static_cast<std::size_t>(-1);
  std::vector<std::size_t> dist(g.num_joints, kUnreached);
  std::queue<std::size_t> q;
  dist[root] = 0;
  q.push(root);
  while (!q.empty()) {
    auto u = q.front();
    q.pop();
    for (auto w : nbrs[u]) {
      if (dist[w] == kUnreached) {
        dist[w] = dist[u] + 1;
        q.push(w);
      }
    }
  }
  return dist;
}

std::vector<Matrix> partition(const SkeletonGraph& g, Strategy strategy,
                              std::size_t max_distance) {
  const std::size_t n = g.num_joints;
  const Matrix a = g.adjacency();
  switch (strategy) {
    case Strategy::kUniform: {
      Matrix m = Matrix::identity(n);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) m(i, j) += a(i, j);
      return {m};
    }
    case Strategy::kDistance: {
      if (max_distance != 1) {
        throw std::invalid_argument("distance partitioning supports only D = 1");
      }
      return {Matrix::identity(n), a};
    }
    case Strategy::kSpatial: {
      const auto hop = hop_distances(g, g.root);
      Matrix same = Matrix::identity(n);
      Matrix centripetal(n);
      Matrix centrifugal(n);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
          if (a(i, j) == 0.0) continue;
          if (hop[j] == hop[i]) {
            same(i, j) = 1.0;
          } else if (hop[j] < hop[i]) {
            centripetal(i, j) = 1.0;
          } else {
            centrifugal(i, j) = 1.0;
          }
        }
      }
      return {same, centripetal, centrifugal};
    }
  }
  throw std::invalid_argument("unsupported strategy");
}

PartitionedAdjacency normalize_partition(const std::vector<Matrix>& matrices,
                                         Strategy strategy, double alpha) {
  if (matrices.empty()) throw std::invalid_argument("no adjacency subsets to normalize");
  const std::size_t n = matrices.front().size();
  PartitionedAdjacency out;
  out.strategy = strategy;
  out.alpha = alpha;
  for (const auto& m : matrices) {
    if (m.size() != n) throw std::invalid_argument("adjacency subsets differ in size");
    std::vector<double> inv_sqrt_deg(n);
    for (std::size_t i = 0; i < n; ++i) {
      double deg = alpha;
      for (std::size_t j = 0; j < n; ++j) {
        if (m(i, j) < 0.0) throw std::invalid_argument("adjacency has negative entries");
        deg += m(i, j);
      }
      inv_sqrt_deg[i] = deg > 0.0 ? 1.0 / std::sqrt(deg) : 0.0;
    }
    Matrix norm(n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        norm(i, j) = inv_sqrt_deg[i] * m(i, j) * inv_sqrt_deg[j];
    out.matrices.push_back(std::move(norm));
  }
  return out;
}

PartitionedAdjacency build_adjacency(const SkeletonGraph& g, Strategy strategy, double alpha) {
  return normalize_partition(partition(g, strategy), strategy, alpha);
}

}  // namespace ctxemo::graph
