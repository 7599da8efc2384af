#include "ctxemo/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "json.hpp"

#include "ctxemo/graph.hpp"
#include "ctxemo/objectives.hpp"
#include "ctxemo/ops.hpp"
#include "ctxemo/rng.hpp"
#include "ctxemo/stgcn.hpp"

namespace ctxemo::gradcheck {

Result check(const std::string& name, const std::vector<nd::Tensor>& leaves,
             const std::function<nd::Tensor()>& f, const Options& options) {
  Result r;
  r.name = name;
  r.trials = 1;
  for (auto leaf : leaves) leaf.zero_grad();
  f().backward();

  const double h = options.step;
  auto eval = [&] {
    nd::NoGradGuard guard;
    return f().item();
  };
  double max_diff = 0.0, max_analytic = 0.0, max_numeric = 0.0;
  for (auto leaf : leaves) {
    std::vector<double> analytic(leaf.numel(), 0.0);
    if (!leaf.grad().empty()) std::copy(leaf.grad().begin(), leaf.grad().end(), analytic.begin());
    auto values = leaf.mutable_values();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      auto at = [&](double delta) {
        values[i] = saved + delta;
        const double y = eval();
        values[i] = saved;
        return y;
      };
      const double numeric = (at(h) - at(-h)) / (2.0 * h);
      const double half = (at(h / 2) - at(-h / 2)) / h;
      ++r.coordinates;
      if (std::abs(numeric - half) >
          options.kink_tolerance * std::max({1.0, std::abs(numeric), std::abs(half)})) {
        ++r.skipped;
        continue;
      }
      max_diff = std::max(max_diff, std::abs(analytic[i] - numeric));
      max_analytic = std::max(max_analytic, std::abs(analytic[i]));
      max_numeric = std::max(max_numeric, std::abs(numeric));
    }
  }
  r.max_rel_error = max_diff / std::max({max_analytic, max_numeric, 1e-8});
  const bool too_many_skipped =
      static_cast<double>(r.skipped) > options.max_skip_fraction * static_cast<double>(r.coordinates);
  r.passed = std::isfinite(r.max_rel_error) && r.max_rel_error <= options.tolerance &&
             !too_many_skipped;
  return r;
}

void merge(Result& total, const Result& trial) {
  total.trials += trial.trials;
  total.coordinates += trial.coordinates;
  total.skipped += trial.skipped;
  total.max_rel_error = std::max(total.max_rel_error, trial.max_rel_error);
  total.passed = total.passed && trial.passed;
}

namespace {

nd::Tensor random_tensor(nd::Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(nd::shape_numel(shape));
  for (auto& x : v) x = rng.uniform(lo, hi);
  return nd::Tensor(std::move(shape), std::move(v), true);
}

nd::Tensor constant_tensor(nd::Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  return random_tensor(std::move(shape), rng, lo, hi).detach();
}

// Reduces an arbitrary output to a scalar with a fixed random projection so
// every output element contributes a distinct weight.
nd::Tensor project(const nd::Tensor& y, const nd::Tensor& weights) {
  return nd::sum(nd::mul(y, weights));
}

// Small random connected graph: a random spanning tree plus extra edges.
graph::SkeletonGraph random_graph(std::size_t v, Rng& rng) {
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  for (std::size_t i = 1; i < v; ++i) edges.emplace_back(rng.uniform_int(i), i);
  if (v > 2 && rng.uniform() < 0.5) {
    const std::size_t a = rng.uniform_int(v), b = rng.uniform_int(v);
    const bool dup = std::any_of(edges.begin(), edges.end(), [&](const auto& e) {
      return (e.first == a && e.second == b) || (e.first == b && e.second == a);
    });
    if (a != b && !dup) edges.emplace_back(a, b);
  }
  return graph::make_graph(v, std::move(edges), rng.uniform_int(v));
}

void randomize(std::vector<nn::Parameter*> params, Rng& rng) {
  for (auto* p : params)
    for (auto& x : p->tensor.mutable_values()) x = rng.uniform(-1.0, 1.0);
}

using Builder = std::function<Result(Rng&, const Options&)>;

struct Case {
  std::string name;
  Builder build;
};

std::vector<Case> cases() {
  std::vector<Case> out;
  auto unary = [&](std::string name, std::function<nd::Tensor(const nd::Tensor&)> op,
                   nd::Shape shape) {
    out.push_back({name, [=](Rng& rng, const Options& o) {
                     auto x = random_tensor(shape, rng);
                     auto y0 = op(x.detach());
                     auto w = constant_tensor(y0.shape(), rng);
                     return check(name, {x}, [&] { return project(op(x), w); }, o);
                   }});
  };
  auto binary = [&](std::string name,
                    std::function<nd::Tensor(const nd::Tensor&, const nd::Tensor&)> op,
                    nd::Shape sa, nd::Shape sb) {
    out.push_back({name, [=](Rng& rng, const Options& o) {
                     auto a = random_tensor(sa, rng);
                     auto b = random_tensor(sb, rng);
                     auto w = constant_tensor(op(a.detach(), b.detach()).shape(), rng);
                     return check(name, {a, b}, [&] { return project(op(a, b), w); }, o);
                   }});
  };

  binary("add", nd::add, {3, 4}, {3, 4});
  binary("sub", nd::sub, {3, 4}, {3, 4});
  binary("mul", nd::mul, {3, 4}, {3, 4});
  unary("scale", [](const nd::Tensor& x) { return nd::scale(x, -1.7); }, {2, 5});
  unary("reshape", [](const nd::Tensor& x) { return nd::reshape(x, {5, 2}); }, {2, 5});
  binary("matmul", nd::matmul, {3, 4}, {4, 2});
  out.push_back({"linear", [](Rng& rng, const Options& o) {
                   auto x = random_tensor({3, 4}, rng);
                   auto w = random_tensor({2, 4}, rng);
                   auto b = random_tensor({2}, rng);
                   auto proj = constant_tensor({3, 2}, rng);
                   return check("linear", {x, w, b},
                                [&] { return project(nd::linear(x, w, b), proj); }, o);
                 }});
  out.push_back({"conv1x1", [](Rng& rng, const Options& o) {
                   auto x = random_tensor({2, 3, 3, 2}, rng);
                   auto w = random_tensor({4, 3}, rng);
                   auto b = random_tensor({4}, rng);
                   auto proj = constant_tensor({2, 4, 3, 2}, rng);
                   return check("conv1x1", {x, w, b},
                                [&] { return project(nd::conv1x1(x, w, b), proj); }, o);
                 }});
  for (std::size_t stride : {1, 2}) {
    const std::string name = "temporal_conv_s" + std::to_string(stride);
    out.push_back({name, [=](Rng& rng, const Options& o) {
                     auto x = random_tensor({2, 2, 5, 2}, rng);
                     auto w = random_tensor({3, 2, 3}, rng);
                     auto b = random_tensor({3}, rng);
                     auto y0 = nd::temporal_conv(x.detach(), w.detach(), b.detach(), stride);
                     auto proj = constant_tensor(y0.shape(), rng);
                     return check(name, {x, w, b}, [&] {
                       return project(nd::temporal_conv(x, w, b, stride), proj);
                     }, o);
                   }});
  }
  binary("graph_aggregate", nd::graph_aggregate, {2, 6, 2, 3}, {2, 3, 3});
  out.push_back({"batch_norm_train", [](Rng& rng, const Options& o) {
                   auto x = random_tensor({3, 2, 2, 2}, rng);
                   auto g = random_tensor({2}, rng, 0.5, 1.5);
                   auto b = random_tensor({2}, rng);
                   auto proj = constant_tensor({3, 2, 2, 2}, rng);
                   return check("batch_norm_train", {x, g, b}, [&] {
                     return project(nd::batch_norm_train(x, g, b, 1e-5), proj);
                   }, o);
                 }});
  out.push_back({"batch_norm_fixed", [](Rng& rng, const Options& o) {
                   auto x = random_tensor({3, 2}, rng);
                   auto g = random_tensor({2}, rng, 0.5, 1.5);
                   auto b = random_tensor({2}, rng);
                   const std::vector<double> mean{rng.uniform(-1, 1), rng.uniform(-1, 1)};
                   const std::vector<double> var{rng.uniform(0.5, 2), rng.uniform(0.5, 2)};
                   auto proj = constant_tensor({3, 2}, rng);
                   return check("batch_norm_fixed", {x, g, b}, [&] {
                     return project(nd::batch_norm_fixed(x, g, b, mean, var, 1e-5), proj);
                   }, o);
                 }});
  unary("relu", nd::relu, {3, 4});
  unary("sigmoid", nd::sigmoid, {3, 4});
  unary("softmax_rows", nd::softmax_rows, {3, 4});
  unary("global_avg_pool", nd::global_avg_pool, {2, 3, 2, 2});
  unary("group_mean", [](const nd::Tensor& x) { return nd::group_mean(x, 3); }, {6, 2});
  binary("concat_cols",
         [](const nd::Tensor& a, const nd::Tensor& b) { return nd::concat_cols({a, b}); },
         {3, 2}, {3, 3});
  unary("slice_cols", [](const nd::Tensor& x) { return nd::slice_cols(x, 1, 2); }, {3, 4});
  out.push_back({"dropout", [](Rng& rng, const Options& o) {
                   auto x = random_tensor({4, 5}, rng);
                   auto proj = constant_tensor({4, 5}, rng);
                   const std::uint64_t mask_seed = rng.next_u64();
                   return check("dropout", {x}, [&] {
                     Rng r(mask_seed);
                     return project(nd::dropout(x, 0.5, r), proj);
                   }, o);
                 }});
  out.push_back({"sum", [](Rng& rng, const Options& o) {
                   auto x = random_tensor({3, 4}, rng);
                   return check("sum", {x}, [&] { return nd::scale(nd::sum(x), 0.7); }, o);
                 }});
  out.push_back({"mean", [](Rng& rng, const Options& o) {
                   auto x = random_tensor({3, 4}, rng);
                   return check("mean", {x}, [&] { return nd::mean(nd::mul(x, x)); }, o);
                 }});
  binary("mse", nd::mse, {3, 4}, {3, 4});
  out.push_back({"bce_with_logits", [](Rng& rng, const Options& o) {
                   auto x = random_tensor({3, 4}, rng, -4.0, 4.0);
                   auto t = random_tensor({3, 4}, rng, 0.0, 1.0);
                   return check("bce_with_logits", {x, t},
                                [&] { return nd::bce_with_logits(x, t); }, o);
                 }});

  // ST-GCN building blocks.
  for (auto strategy : {graph::Strategy::kUniform, graph::Strategy::kDistance,
                        graph::Strategy::kSpatial}) {
    const std::string name = "spatial_graph_conv_" + std::string(graph::to_string(strategy));
    out.push_back({name, [=](Rng& rng, const Options& o) {
                     const std::size_t v = 2 + rng.uniform_int(4);
                     const auto g = random_graph(v, rng);
                     const auto adj = stgcn::adjacency_tensor(graph::build_adjacency(g, strategy));
                     const std::size_t k = adj.dim(0);
                     auto x = random_tensor({2, 2, 3, v}, rng);
                     auto w = random_tensor({k * 3, 2}, rng);
                     auto b = random_tensor({k * 3}, rng);
                     auto m = random_tensor({k, v, v}, rng, 0.5, 1.5);
                     auto proj = constant_tensor({2, 3, 3, v}, rng);
                     return check(name, {x, w, b, m}, [&] {
                       return project(stgcn::spatial_graph_conv(x, w, b, adj, m), proj);
                     }, o);
                   }});
  }
  for (std::size_t stride : {1, 2}) {
    const std::string name = stride == 1 ? "stgcn_unit" : "stgcn_unit_projection";
    out.push_back({name, [=](Rng& rng, const Options& o) {
                     const std::size_t v = 3 + rng.uniform_int(3);
                     const auto g = random_graph(v, rng);
                     const auto pa = graph::build_adjacency(g, graph::Strategy::kSpatial);
                     const auto adj = stgcn::adjacency_tensor(pa);
                     stgcn::UnitConfig cfg;
                     cfg.in_channels = 2;
                     cfg.out_channels = stride == 1 ? 2 : 3;
                     cfg.temporal_kernel = 3;
                     cfg.stride = stride;
                     cfg.residual = true;
                     cfg.dropout = 0.3;
                     stgcn::Unit unit("unit", cfg, pa.num_subsets(), v, true);
                     std::vector<nn::Parameter*> params;
                     std::vector<nn::BatchNorm*> norms;
                     unit.collect(params, norms);
                     randomize(params, rng);
                     for (auto* bn : norms)
                       for (auto& x : bn->gamma.tensor.mutable_values()) x = rng.uniform(0.5, 1.5);
                     auto x = random_tensor({3, 2, 4, v}, rng);
                     std::vector<nd::Tensor> leaves{x};
                     for (auto* p : params) leaves.push_back(p->tensor);
                     const std::uint64_t drop_seed = rng.next_u64();
                     Rng probe(drop_seed);
                     auto y0 = unit.forward(x.detach(), adj, true, probe);
                     auto proj = constant_tensor(y0.shape(), rng);
                     return check(name, leaves, [&] {
                       Rng r(drop_seed);
                       return project(unit.forward(x, adj, true, r), proj);
                     }, o);
                   }});
  }
  out.push_back({"stgcn_model", [](Rng& rng, const Options& o) {
                   const auto g = random_graph(4, rng);
                   auto cfg = stgcn::ModelConfig::reduced({2, 3}, 3, 0.0);
                   cfg.layout = "custom";
                   stgcn::Model model(cfg, g, rng.next_u64());
                   auto params = model.parameters();
                   randomize(params, rng);
                   auto x = random_tensor({2, 3, 4, 4}, rng);
                   std::vector<nd::Tensor> leaves{x};
                   for (auto* p : params) leaves.push_back(p->tensor);
                   auto proj = constant_tensor({2, kNumOutputs}, rng);
                   return check("stgcn_model", leaves,
                                [&] { return project(model.forward(x, true), proj); }, o);
                 }});

  // Losses.
  out.push_back({"loss_cat1", [](Rng& rng, const Options& o) {
                   auto s = random_tensor({3, kNumCategories}, rng, -3.0, 3.0);
                   auto c = constant_tensor({3, kNumCategories}, rng, 0.0, 1.0);
                   return check("loss_cat1", {s}, [&] { return objectives::loss_cat1(s, c); }, o);
                 }});
  out.push_back({"loss_cat2", [](Rng& rng, const Options& o) {
                   auto s = random_tensor({3, kNumCategories}, rng, -3.0, 3.0);
                   auto c = constant_tensor({3, kNumCategories}, rng, 0.0, 1.0);
                   return check("loss_cat2", {s}, [&] { return objectives::loss_cat2(s, c); }, o);
                 }});
  out.push_back({"loss_cont", [](Rng& rng, const Options& o) {
                   auto p = random_tensor({3, kNumVad}, rng);
                   auto t = constant_tensor({3, kNumVad}, rng, 0.0, 1.0);
                   return check("loss_cont", {p}, [&] { return objectives::loss_cont(p, t); }, o);
                 }});
  out.push_back({"loss_emb", [](Rng& rng, const Options& o) {
                   // Gradient reaches the projection weights through the linear map.
                   auto x = constant_tensor({4, 6}, rng);
                   auto w = random_tensor({5, 6}, rng);
                   auto t = constant_tensor({4, 5}, rng);
                   std::vector<double> mask{1.0, 0.0, 1.0, 1.0};
                   return check("loss_emb", {w}, [&] {
                     return objectives::loss_emb(nd::linear(x, w), t, mask);
                   }, o);
                 }});
  return out;
}

}  // namespace

std::vector<Result> run_suite(std::size_t seeds, std::uint64_t base_seed, const Options& options) {
  std::vector<Result> results;
  for (const auto& c : cases()) {
    Result total;
    total.name = c.name;
    total.trials = 0;
    for (std::size_t s = 0; s < seeds; ++s) {
      Rng rng(base_seed * 1000003ull + s);
      merge(total, c.build(rng, options));
    }
    results.push_back(total);
  }
  return results;
}

std::string format_table(const std::vector<Result>& results) {
  std::ostringstream os;
  char line[160];
  std::snprintf(line, sizeof line, "%-30s %6s %8s %7s %12s  %s\n", "check", "trials", "coords",
                "skipped", "max_rel_err", "status");
  os << line;
  for (const auto& r : results) {
    std::snprintf(line, sizeof line, "%-30s %6zu %8zu %7zu %12.3e  %s\n", r.name.c_str(), r.trials,
                  r.coordinates, r.skipped, r.max_rel_error, r.passed ? "PASS" : "FAIL");
    os << line;
  }
  return os.str();
}

std::string format_json(const std::vector<Result>& results) {
  auto arr = nlohmann::json::array();
  bool all = true;
  for (const auto& r : results) {
    arr.push_back({{"name", r.name},
                   {"trials", r.trials},
                   {"coordinates", r.coordinates},
                   {"skipped", r.skipped},
                   {"max_rel_error", r.max_rel_error},
                   {"passed", r.passed}});
    all = all && r.passed;
  }
  return nlohmann::json{{"checks", arr}, {"passed", all}}.dump(2);
}

}  // namespace ctxemo::gradcheck
