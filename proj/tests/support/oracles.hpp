#pragma once

// Brute-force reference implementations shared by the unit tests and the
// acceptance suite.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <set>
#include <utility>
#include <vector>

#include "ctxemo/graph.hpp"
#include "ctxemo/rng.hpp"
#include "ctxemo/tensor.hpp"

namespace oracle {

/// Random spanning tree plus a few extra edges; root drawn uniformly.
inline ctxemo::graph::SkeletonGraph random_connected_graph(ctxemo::Rng& rng, std::size_t nodes) {
  std::set<std::pair<std::size_t, std::size_t>> edges;
  for (std::size_t v = 1; v < nodes; ++v) {
    const std::size_t parent = rng.uniform_int(v);
    edges.emplace(parent, v);
  }
  const std::size_t extra = nodes > 2 ? rng.uniform_int(nodes) : 0;
  for (std::size_t e = 0; e < extra; ++e) {
    std::size_t a = rng.uniform_int(nodes), b = rng.uniform_int(nodes);
    if (a == b) continue;
    if (a > b) std::swap(a, b);
    edges.emplace(a, b);
  }
  return ctxemo::graph::make_graph(nodes, {edges.begin(), edges.end()}, rng.uniform_int(nodes));
}

/// out[n,c,t,w] = sum over subsets k, over nodes v with a nonzero entry
/// A_k[v,w], of (A_k ⊙ M_k)[v,w] * (b[k,c] + sum_ci W[k,c,ci] x[n,ci,t,v]).
inline std::vector<double> message_passing(const ctxemo::nd::Tensor& x,
                                           const ctxemo::nd::Tensor& weight,
                                           const ctxemo::nd::Tensor& bias,
                                           const ctxemo::nd::Tensor& adjacency,
                                           const ctxemo::nd::Tensor& mask) {
  const std::size_t n = x.dim(0), cin = x.dim(1), t = x.dim(2), v = x.dim(3);
  const std::size_t k_sub = adjacency.dim(0);
  const std::size_t cout = weight.dim(0) / k_sub;
  auto X = [&](std::size_t b, std::size_t c, std::size_t tt, std::size_t j) {
    return x.at(((b * cin + c) * t + tt) * v + j);
  };
  std::vector<double> out(n * cout * t * v, 0.0);
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t tt = 0; tt < t; ++tt)
      for (std::size_t w = 0; w < v; ++w)
        for (std::size_t k = 0; k < k_sub; ++k)
          for (std::size_t src = 0; src < v; ++src) {
            const std::size_t ai = (k * v + src) * v + w;
            const double a = adjacency.at(ai);
            if (a == 0.0) continue;  // not a neighbor in this subset
            const double edge = a * (mask.defined() ? mask.at(ai) : 1.0);
            for (std::size_t c = 0; c < cout; ++c) {
              const std::size_t row = k * cout + c;
              double msg = bias.at(row);
              for (std::size_t ci = 0; ci < cin; ++ci) msg += weight.at(row * cin + ci) * X(b, ci, tt, src);
              out[((b * cout + c) * t + tt) * v + w] += edge * msg;
            }
          }
  return out;
}

/// Threshold sweep straight from the definition: for every distinct score
/// (descending), count positives and items scoring at least that much.
inline double average_precision(const std::vector<double>& scores, const std::vector<int>& labels) {
  std::vector<double> thresholds = scores;
  std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
  std::size_t positives = 0;
  for (int l : labels) positives += l == 1;
  double ap = 0.0;
  std::size_t tp_prev = 0;
  for (double tau : thresholds) {
    std::size_t tp = 0, seen = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      if (scores[i] >= tau) {
        ++seen;
        tp += labels[i] == 1;
      }
    }
    if (tp != tp_prev) {
      ap += static_cast<double>(tp - tp_prev) / static_cast<double>(positives) *
            (static_cast<double>(tp) / static_cast<double>(seen));
      tp_prev = tp;
    }
  }
  return ap;
}

/// Every (positive, negative) pair: 2 when ordered correctly, 1 on a tie.
inline double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  std::uint64_t twice = 0, pos = 0, neg = 0;
  for (int l : labels) (l == 1 ? pos : neg) += 1;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 1) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j] == 1) continue;
      if (scores[i] > scores[j]) twice += 2;
      else if (scores[i] == scores[j]) twice += 1;
    }
  }
  return static_cast<double>(twice) / (2.0 * static_cast<double>(pos) * static_cast<double>(neg));
}

}  // namespace oracle
