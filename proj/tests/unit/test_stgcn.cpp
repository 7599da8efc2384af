#include <cmath>

#include "doctest.h"
#include "support/oracles.hpp"

#include "ctxemo/stgcn.hpp"

using namespace ctxemo;
using namespace ctxemo::nd;

namespace {

Tensor random_tensor(Shape shape, Rng& rng) {
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = rng.normal();
  return Tensor(std::move(shape), std::move(v));
}

void zero(nn::Parameter& p) {
  for (auto& v : p.tensor.mutable_values()) v = 0.0;
}

}  // namespace

TEST_CASE("single node graph conv divides by one plus alpha") {
  const auto adj = graph::normalize_partition({graph::Matrix(1, 1.0)}, graph::Strategy::kUniform);
  Rng rng(1);
  const auto x = random_tensor({2, 3, 4, 1}, rng);
  std::vector<double> w(9, 0.0);
  for (std::size_t c = 0; c < 3; ++c) w[c * 3 + c] = 1.0;
  const auto y = stgcn::spatial_graph_conv(x, Tensor({3, 3}, w), Tensor::zeros({3}),
                                           stgcn::adjacency_tensor(adj),
                                           Tensor::full({1, 1, 1}, 1.0));
  for (std::size_t i = 0; i < x.numel(); ++i) {
    CHECK(y.at(i) == doctest::Approx(x.at(i) / 1.001).epsilon(1e-14));
  }
}

TEST_CASE("zero mask annihilates the output") {
  Rng rng(2);
  const auto g = oracle::random_connected_graph(rng, 5);
  const auto adj = stgcn::adjacency_tensor(graph::build_adjacency(g, graph::Strategy::kSpatial));
  const auto y = stgcn::spatial_graph_conv(random_tensor({1, 2, 3, 5}, rng),
                                           random_tensor({3 * 4, 2}, rng),
                                           random_tensor({3 * 4}, rng), adj,
                                           Tensor::zeros({3, 5, 5}));
  for (double v : y.values()) CHECK(v == 0.0);
}

TEST_CASE("graph conv equals message passing") {
  Rng rng(3);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t v = 1 + rng.uniform_int(6);
    const auto g = oracle::random_connected_graph(rng, v);
    for (auto s : {graph::Strategy::kUniform, graph::Strategy::kDistance, graph::Strategy::kSpatial}) {
      const auto adj = stgcn::adjacency_tensor(graph::build_adjacency(g, s));
      const std::size_t k = adj.dim(0);
      const auto x = random_tensor({2, 3, 4, v}, rng);
      const auto w = random_tensor({k * 2, 3}, rng);
      const auto b = random_tensor({k * 2}, rng);
      const auto m = random_tensor({k, v, v}, rng);
      const auto y = stgcn::spatial_graph_conv(x, w, b, adj, m);
      const auto ref = oracle::message_passing(x, w, b, adj, m);
      REQUIRE(y.numel() == ref.size());
      for (std::size_t i = 0; i < ref.size(); ++i) CHECK(std::abs(y.at(i) - ref[i]) <= 1e-10);
    }
  }
}

TEST_CASE("graph conv is equivariant under joint relabeling") {
  Rng rng(4);
  const std::size_t v = 6, k = 3, n = 1, c = 2, t = 3;
  const auto g = oracle::random_connected_graph(rng, v);
  const auto adj = stgcn::adjacency_tensor(graph::build_adjacency(g, graph::Strategy::kSpatial));
  const auto x = random_tensor({n, c, t, v}, rng);
  const auto w = random_tensor({k * 2, c}, rng);
  const auto b = random_tensor({k * 2}, rng);
  const auto m = random_tensor({k, v, v}, rng);
  const std::vector<std::size_t> perm{3, 0, 5, 1, 4, 2};  // old joint i -> new joint perm[i]

  std::vector<double> xp(x.numel()), ap(adj.numel()), mp(m.numel());
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t tt = 0; tt < t; ++tt)
      for (std::size_t i = 0; i < v; ++i) xp[(ch * t + tt) * v + perm[i]] = x.at((ch * t + tt) * v + i);
  for (std::size_t kk = 0; kk < k; ++kk)
    for (std::size_t i = 0; i < v; ++i)
      for (std::size_t j = 0; j < v; ++j) {
        ap[(kk * v + perm[i]) * v + perm[j]] = adj.at((kk * v + i) * v + j);
        mp[(kk * v + perm[i]) * v + perm[j]] = m.at((kk * v + i) * v + j);
      }
  const auto y = stgcn::spatial_graph_conv(x, w, b, adj, m);
  const auto yp = stgcn::spatial_graph_conv(Tensor(x.shape(), xp), w, b, Tensor(adj.shape(), ap),
                                            Tensor(m.shape(), mp));
  for (std::size_t ch = 0; ch < 2; ++ch)
    for (std::size_t tt = 0; tt < t; ++tt)
      for (std::size_t i = 0; i < v; ++i)
        CHECK(yp.at((ch * t + tt) * v + perm[i]) ==
              doctest::Approx(y.at((ch * t + tt) * v + i)).epsilon(1e-13));
}

TEST_CASE("unit with only the residual path is ReLU of the input") {
  Rng rng(5);
  const auto adj = stgcn::adjacency_tensor(
      graph::build_adjacency(graph::build_skeleton_graph("bold18"), graph::Strategy::kSpatial));
  stgcn::UnitConfig cfg;
  cfg.in_channels = cfg.out_channels = 4;
  cfg.temporal_kernel = 3;
  stgcn::Unit unit("u", cfg, 3, 18, true);
  unit.reset(rng);
  zero(unit.gcn.weight);
  zero(unit.tcn.weight);
  CHECK_FALSE(unit.has_projection());
  const auto x = random_tensor({2, 4, 5, 18}, rng);
  const auto y = unit.forward(x, adj, false, rng);
  for (std::size_t i = 0; i < x.numel(); ++i) CHECK(y.at(i) == std::max(0.0, x.at(i)));
}

TEST_CASE("strided unit halves time and projects the residual") {
  Rng rng(6);
  const auto adj = stgcn::adjacency_tensor(
      graph::build_adjacency(graph::build_skeleton_graph("bold18"), graph::Strategy::kSpatial));
  stgcn::UnitConfig cfg;
  cfg.in_channels = 3;
  cfg.out_channels = 4;
  cfg.temporal_kernel = 9;
  cfg.stride = 2;
  stgcn::Unit unit("u", cfg, 3, 18, true);
  unit.reset(rng);
  CHECK(unit.has_projection());
  const auto y = unit.forward(random_tensor({1, 3, 150, 18}, rng), adj, false, rng);
  CHECK(y.shape() == Shape{1, 4, 75, 18});
}

TEST_CASE("model outputs and determinism") {
  stgcn::Model model(stgcn::ModelConfig::reduced({4, 4, 4}, 3, 0.5), 1);
  for (auto& v : model.head().bias.tensor.mutable_values()) v = 0.0;
  const auto zeros = model.forward(Tensor::zeros({2, 3, 6, 18}), false);
  CHECK(zeros.shape() == Shape{2, 29});
  for (double v : zeros.values()) CHECK(v == 0.0);

  Rng rng(7);
  const auto clip = random_tensor({1, 3, 6, 18}, rng);
  std::vector<double> batch(clip.values().begin(), clip.values().end());
  batch.insert(batch.end(), clip.values().begin(), clip.values().end());
  const auto out = model.forward(Tensor({2, 3, 6, 18}, batch), false);
  for (std::size_t j = 0; j < 29; ++j) CHECK(out.at(j) == out.at(29 + j));
  const auto again = model.forward(Tensor({2, 3, 6, 18}, batch), false);
  for (std::size_t i = 0; i < out.numel(); ++i) CHECK(again.at(i) == out.at(i));

  const auto preds = stgcn::to_predictions(out, {"a", "b"});
  REQUIRE(preds.size() == 2);
  CHECK(preds[1].clip_id == "b");
  CHECK(preds[0].categorical.size() == 26);
  CHECK(preds[0].vad[2] == out.at(28));
}

TEST_CASE("canonical stack") {
  const auto cfg = stgcn::ModelConfig::canonical();
  REQUIRE(cfg.units.size() == 9);
  CHECK(cfg.units[0].out_channels == 64);
  CHECK(cfg.units[3].stride == 2);
  CHECK(cfg.units[6].stride == 2);
  CHECK(cfg.units[8].out_channels == 256);
  CHECK_FALSE(cfg.units[0].residual);
  CHECK(cfg.units[1].residual);
  CHECK(cfg.units[0].temporal_kernel == 9);
  CHECK(cfg.units[0].dropout == 0.5);
  stgcn::Model model(cfg, 0);
  CHECK(model.batch_norms().size() == 1 + 9 * 2 + 2);
  CHECK(nn::set_partial_bn(model.batch_norms()) == model.batch_norms().size() - 1);
}

TEST_CASE("edge importance masks are parameters only when enabled") {
  auto cfg = stgcn::ModelConfig::reduced({4}, 3);
  stgcn::Model with(cfg, 0);
  cfg.edge_importance = false;
  stgcn::Model without(cfg, 0);
  CHECK(with.parameters().size() == without.parameters().size() + 1);
  CHECK(with.state().count("units.0.edge_importance") == 1);
}

TEST_CASE("config validation") {
  stgcn::UnitConfig even;
  even.temporal_kernel = 4;
  CHECK_THROWS(even.validate());
  stgcn::UnitConfig stride3;
  stride3.stride = 3;
  CHECK_THROWS(stride3.validate());
  auto broken = stgcn::ModelConfig::reduced({4, 4});
  broken.units[1].in_channels = 5;
  CHECK_THROWS(broken.validate());
}
