// Acceptance suite: one PASS/FAIL line per criterion. Exit status is
// nonzero when any selected criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "support/oracles.hpp"

#include "ctxemo/config.hpp"
#include "ctxemo/formats.hpp"
#include "ctxemo/fusion.hpp"
#include "ctxemo/gradcheck.hpp"
#include "ctxemo/graph.hpp"
#include "ctxemo/metrics.hpp"
#include "ctxemo/stgcn.hpp"
#include "ctxemo/synthetic.hpp"
#include "ctxemo/training.hpp"
#include "ctxemo/tsn.hpp"

using namespace ctxemo;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

nd::Tensor random_tensor(nd::Shape shape, Rng& rng) {
  std::vector<double> v(nd::shape_numel(shape));
  for (auto& x : v) x = rng.normal();
  return nd::Tensor(std::move(shape), std::move(v));
}

/// Wide-range finite double: mantissa from a normal draw, exponent up to +-300.
double wild(Rng& rng) {
  const double base = rng.normal();
  switch (rng.uniform_int(4)) {
    case 0: return base;
    case 1: return base * std::pow(10.0, static_cast<double>(rng.uniform_int(601)) - 300.0);
    case 2: return rng.uniform_int(2) ? -0.0 : 0.0;
    default: return std::nextafter(base, 1e9);
  }
}

std::string random_id(Rng& rng) {
  static const char* alphabet = "abcdefghijklmnopqrstuvwxyz0123456789_-.";
  std::string s = "c";
  const std::size_t n = 1 + rng.uniform_int(12);
  for (std::size_t i = 0; i < n; ++i) s += alphabet[rng.uniform_int(39)];
  return s;
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("ctxemo_acceptance_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string file_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// ---- 1: ERS arithmetic ----

Outcome criterion_ers() {
  const auto start = Clock::now();
  struct Row {
    const char* name;
    double r2, ap, ra, reported;
  };
  const Row rows[] = {{"ours", 0.1597, 0.2185, 0.6826, 0.3051},
                      {"filntisis", 0.1141, 0.1796, 0.6416, 0.2624},
                      {"luo", 0.1030, 0.1714, 0.6352, 0.2530}};
  // The second row sits exactly on the tolerance boundary in decimal; the
  // relative slack absorbs the binary rounding of that boundary.
  const double tol = 5e-5 * (1.0 + 1e-9);
  Outcome out;
  for (const auto& r : rows) {
    const double got = metrics::ers(r.r2, r.ap, r.ra);
    const bool ok = std::abs(got - r.reported) <= tol;
    out.pass &= ok;
    out.detail += std::string(r.name) + " " + fmt("%.6f", got) + " vs " + fmt("%.4f", r.reported) +
                  (ok ? "" : " MISMATCH") + "; ";
  }
  const double t = seconds_since(start);
  out.pass &= t < 1.0;
  out.detail += fmt("%.3fs", t);
  return out;
}

// ---- 2: gradient suite ----

Outcome criterion_gradcheck() {
  const auto start = Clock::now();
  const auto results = gradcheck::run_suite(50);
  Outcome out;
  double worst = 0.0;
  std::size_t failed = 0;
  std::set<std::string> names;
  for (const auto& r : results) {
    names.insert(r.name);
    worst = std::max(worst, r.max_rel_error);
    if (!r.passed || r.trials < 50 || r.max_rel_error > 1e-4) {
      ++failed;
      out.detail += r.name + " failed; ";
    }
  }
  for (const char* required :
       {"loss_cat1", "loss_cat2", "loss_cont", "loss_emb", "stgcn_unit", "stgcn_unit_projection",
        "stgcn_model", "spatial_graph_conv_spatial"}) {
    if (!names.count(required)) {
      ++failed;
      out.detail += std::string("missing ") + required + "; ";
    }
  }
  const double t = seconds_since(start);
  out.pass = failed == 0 && t < 120.0;
  out.detail += std::to_string(results.size()) + " checks x 50 seeds, max rel err " +
                fmt("%.2e", worst) + ", " + fmt("%.1fs", t);
  return out;
}

// ---- 3: graph-conv oracle ----

Outcome criterion_graph_conv() {
  const auto start = Clock::now();
  Rng rng(303);
  double worst = 0.0;
  std::size_t cases = 0;
  for (int g_i = 0; g_i < 100; ++g_i) {
    const std::size_t v = 1 + rng.uniform_int(6);
    const auto g = oracle::random_connected_graph(rng, v);
    for (auto s : {graph::Strategy::kUniform, graph::Strategy::kDistance, graph::Strategy::kSpatial}) {
      const auto adj = stgcn::adjacency_tensor(graph::build_adjacency(g, s));
      const std::size_t k = adj.dim(0);
      const std::size_t n = 1 + rng.uniform_int(2), cin = 1 + rng.uniform_int(4),
                        cout = 1 + rng.uniform_int(4), t = 1 + rng.uniform_int(4);
      const auto x = random_tensor({n, cin, t, v}, rng);
      const auto w = random_tensor({k * cout, cin}, rng);
      const auto b = random_tensor({k * cout}, rng);
      const auto m = random_tensor({k, v, v}, rng);
      const auto y = stgcn::spatial_graph_conv(x, w, b, adj, m);
      const auto ref = oracle::message_passing(x, w, b, adj, m);
      if (y.numel() != ref.size()) return {false, "shape mismatch"};
      for (std::size_t i = 0; i < ref.size(); ++i) worst = std::max(worst, std::abs(y.at(i) - ref[i]));
      ++cases;
    }
  }
  const double t = seconds_since(start);
  return {worst <= 1e-10 && t < 30.0, std::to_string(cases) + " cases, max abs diff " +
                                          fmt("%.2e", worst) + ", " + fmt("%.2fs", t)};
}

// ---- 4: partition laws ----

Outcome criterion_partition() {
  Rng rng(404);
  std::size_t violations = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const auto g = oracle::random_connected_graph(rng, 1 + rng.uniform_int(24));
    graph::Matrix hat = g.adjacency();
    for (std::size_t i = 0; i < g.num_joints; ++i) hat(i, i) += 1.0;
    const std::pair<graph::Strategy, std::size_t> expected[] = {
        {graph::Strategy::kUniform, 1}, {graph::Strategy::kDistance, 2}, {graph::Strategy::kSpatial, 3}};
    for (auto [s, kv] : expected) {
      const auto parts = graph::partition(g, s, 1);
      if (parts.size() != kv || graph::subset_count(s) != kv) ++violations;
      graph::Matrix total(g.num_joints);
      for (std::size_t i = 0; i < g.num_joints; ++i)
        for (std::size_t j = 0; j < g.num_joints; ++j) {
          int nonzero = 0;
          for (const auto& p : parts) {
            total(i, j) += p(i, j);
            nonzero += p(i, j) != 0.0;
            if (p(i, j) < 0.0) ++violations;
          }
          if (nonzero > 1) ++violations;
        }
      if (!(total == hat)) ++violations;
    }
  }
  return {violations == 0, "1000 graphs x 3 strategies, " + std::to_string(violations) + " violations"};
}

// ---- 5: metric oracles ----

Outcome criterion_metric_oracles() {
  Rng rng(505);
  std::size_t mismatches = 0, compared = 0, invariance_failures = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng.uniform_int(50);
    const bool grid = rng.uniform_int(2) == 0;  // coarse grid forces ties
    std::vector<double> s(n);
    std::vector<int> l(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = grid ? static_cast<double>(rng.uniform_int(10)) / 10.0 : rng.uniform();
      l[i] = rng.uniform() < 0.5 ? 1 : 0;
    }
    const auto ap = metrics::average_precision(s, l);
    const auto ra = metrics::roc_auc(s, l);
    if (ap) {
      ++compared;
      if (*ap != oracle::average_precision(s, l)) ++mismatches;
    }
    if (ra) {
      ++compared;
      if (*ra != oracle::roc_auc(s, l)) ++mismatches;
    }
    // Strictly increasing transforms keep every ordering and tie.
    for (auto f : {+[](double x) { return x * x * x + x; }, +[](double x) { return sigmoid(8.0 * x - 4.0); },
                   +[](double x) { return std::log(x + 1e-3); }}) {
      std::vector<double> t(n);
      for (std::size_t i = 0; i < n; ++i) t[i] = f(s[i]);
      if (metrics::average_precision(t, l) != ap || metrics::roc_auc(t, l) != ra) ++invariance_failures;
    }
  }
  return {mismatches == 0 && invariance_failures == 0,
          std::to_string(compared) + " values compared exactly, " + std::to_string(mismatches) +
              " mismatches, " + std::to_string(invariance_failures) + " invariance failures"};
}

// ---- 6: overfit smoke test ----

config::RunConfig smoke_config() {
  auto cfg = config::default_config(config::ModelType::kStgcn);
  cfg.model.widths = {8, 8, 8};
  cfg.model.temporal_kernel = 3;
  cfg.model.dropout = 0.0;
  cfg.optimizer.lr = 0.05;
  cfg.optimizer.batch_size = 4;
  cfg.optimizer.epochs = 200;
  cfg.optimizer.plateau = false;
  cfg.data.augment = false;
  cfg.seed = 1;
  return cfg;
}

Outcome criterion_smoke() {
  const auto start = Clock::now();
  train::SkeletonData data;
  for (auto& s : synthetic::skeleton_clips(20, 12, 20, 7)) data.clips.push_back(data::normalize_joints(s));
  for (const auto& c : data.clips) data.t_max = std::max(data.t_max, c.frames);
  const auto cfg = smoke_config();
  stgcn::Model model(train::stgcn_config(cfg), 0);
  // The monitored split is the training set itself: this is an overfit test.
  const auto result = train::train_stgcn(model, data, data, cfg);
  stgcn::Model best(train::stgcn_config(cfg), 0);
  best.load_state(result.best.state);
  const auto preds = train::predict_stgcn(best, data);
  const double acc = train::binarized_accuracy(preds, train::annotations_of(data));
  const double loss = train::stgcn_loss(best, data);
  const double t = seconds_since(start);
  return {acc == 1.0 && loss < 0.02 && result.history.size() <= 200 && t < 300.0,
          "accuracy " + fmt("%.4f", acc) + ", combined loss " + fmt("%.5f", loss) + " after " +
              std::to_string(result.history.size()) + " epochs, " + fmt("%.1fs", t)};
}

// ---- 7: TSN pipeline ----

Outcome criterion_tsn() {
  Outcome out;
  const std::size_t rgb = tsn::StreamConfig::full_rgb().concat_width();
  const std::size_t flow = tsn::StreamConfig::full_flow().concat_width();
  out.pass = rgb == 2003 && flow == 1536;
  out.detail = "widths " + std::to_string(rgb) + "/" + std::to_string(flow);

  Rng rng(707);
  std::size_t sampling_failures = 0;
  for (std::size_t frames = 1; frames <= 400; ++frames) {
    const auto a = tsn::segment_sample(frames, 25, tsn::SampleMode::kEval);
    const auto b = tsn::segment_sample(frames, 25, tsn::SampleMode::kEval);
    if (a != b || a.size() != 25) ++sampling_failures;
    if (frames >= 25) {
      const auto bounds = tsn::segment_bounds(frames, 25);
      for (std::size_t i = 0; i < 25; ++i)
        if (a[i] != bounds[i].first + (bounds[i].second - bounds[i].first - 1) / 2) ++sampling_failures;
    }
  }
  out.pass &= sampling_failures == 0;
  out.detail += ", K=25 eval sampling failures " + std::to_string(sampling_failures);

  std::size_t consensus_failures = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    Prediction p;
    for (auto& v : p.categorical) v = wild(rng);
    for (auto& v : p.vad) v = rng.normal();
    const std::size_t k = trial % 2 ? 25 : 1 + rng.uniform_int(40);
    const auto c = tsn::consensus(std::vector<Prediction>(k, p));
    if (c.categorical != p.categorical || c.vad != p.vad) ++consensus_failures;
  }

  // Whole path: a clip whose frames are all equal yields the snippet prediction.
  tsn::Model model(tsn::StreamConfig::full_flow(), 5);
  train::TsnData data;
  train::TsnClip clip;
  clip.clip_id = "same";
  std::vector<double> frame(1536);
  for (auto& v : frame) v = rng.normal();
  clip.frames.assign(40, frame);
  data.clips.push_back(clip);
  const auto video = train::predict_tsn(model, data, 25);
  const auto again = train::predict_tsn(model, data, 25);
  const auto snippet = tsn::snippet_predict(model, frame);
  if (video.items[0].categorical != snippet.categorical || video.items[0].vad != snippet.vad) ++consensus_failures;
  if (!(video == again)) ++consensus_failures;
  out.pass &= consensus_failures == 0;
  out.detail += ", consensus failures " + std::to_string(consensus_failures);
  return out;
}

// ---- 8: fusion laws ----

PredictionSet random_set(const std::string& name, const std::vector<std::string>& ids, Rng& rng) {
  PredictionSet s{name, ScoreSpace::kProbability, {}};
  for (const auto& id : ids) {
    Prediction p;
    p.clip_id = id;
    for (auto& v : p.categorical) v = rng.uniform();
    for (auto& v : p.vad) v = rng.uniform();
    s.items.push_back(p);
  }
  return s;
}

Outcome criterion_fusion() {
  auto one = [](double v) {
    PredictionSet s{"m", ScoreSpace::kProbability, {Prediction{}}};
    s.items[0].clip_id = "x";
    s.items[0].categorical.assign(kNumCategories, v);
    return s;
  };
  const auto hand = fusion::fuse({one(0.5), one(0.3), one(0.2)}, {fusion::Scheme::kWeightedAverage, {2, 2, 1}});
  std::size_t failures = 0;
  for (double v : hand.items[0].categorical) failures += v != 0.36;
  const bool hand_ok = failures == 0;

  Rng rng(808);
  std::size_t law_failures = 0;
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::string> ids;
    const std::size_t n = 1 + rng.uniform_int(20);
    for (std::size_t i = 0; i < n; ++i) ids.push_back("c" + std::to_string(i));
    const std::size_t m = 1 + rng.uniform_int(5);
    std::vector<PredictionSet> sets;
    for (std::size_t j = 0; j < m; ++j) sets.push_back(random_set("m" + std::to_string(j), ids, rng));
    const double w = 0.25 + rng.uniform() * 10.0;
    const auto avg = fusion::fuse(sets, {fusion::Scheme::kAverage, {}});
    const auto eq = fusion::fuse(sets, {fusion::Scheme::kWeightedAverage, std::vector<double>(m, w)});
    if (avg.items != eq.items) ++law_failures;
    const auto mx = fusion::fuse(sets, {fusion::Scheme::kMaximum, {}});
    if (fusion::fuse({mx, mx}, {fusion::Scheme::kMaximum, {}}).items != mx.items) ++law_failures;
    if (fusion::fuse({sets.front()}, {fusion::Scheme::kMaximum, {}}).items != sets.front().items) ++law_failures;
    auto reversed = sets;
    std::reverse(reversed.begin(), reversed.end());
    if (fusion::fuse(reversed, {fusion::Scheme::kMaximum, {}}).items != mx.items) ++law_failures;
  }
  return {hand_ok && law_failures == 0,
          std::string("(2,2,1) on (0.5,0.3,0.2) ") + fmt("%.17g", hand.items[0].categorical[0]) +
              (hand_ok ? " == 0.36" : " != 0.36") + ", " + std::to_string(law_failures) +
              " law failures over 200 trials"};
}

// ---- 9: reproducibility ----

Outcome criterion_reproducibility() {
  const auto dir = scratch("repro");
  synthetic::Options opts;
  opts.train = 12;
  opts.val = 4;
  opts.test = 2;
  const auto manifest = synthetic::write_dataset(dir / "data", opts);

  auto stgcn_cfg = smoke_config();
  stgcn_cfg.data.manifest = manifest.string();
  stgcn_cfg.optimizer.epochs = 6;
  stgcn_cfg.optimizer.plateau = true;
  stgcn_cfg.optimizer.lr = 0.01;
  stgcn_cfg.model.dropout = 0.3;
  stgcn_cfg.data.augment = true;
  stgcn_cfg.seed = 11;

  auto rgb_cfg = config::default_config(config::ModelType::kTsnRgb);
  rgb_cfg.data.manifest = manifest.string();
  rgb_cfg.optimizer.epochs = 3;
  rgb_cfg.optimizer.batch_size = 4;
  rgb_cfg.model.embedding_loss = true;
  rgb_cfg.seed = 11;

  Outcome out;
  for (const auto& [name, cfg] : {std::pair{"stgcn", stgcn_cfg}, std::pair{"tsn-rgb", rgb_cfg}}) {
    train::run_training(cfg, dir / (std::string(name) + "_a"));
    train::run_training(cfg, dir / (std::string(name) + "_b"));
    for (const char* file : {"best.ckpt", "last.ckpt", "train.log", "config.json"}) {
      const auto a = file_bytes(dir / (std::string(name) + "_a") / file);
      const auto b = file_bytes(dir / (std::string(name) + "_b") / file);
      if (a.empty() || a != b) {
        out.pass = false;
        out.detail += std::string(name) + "/" + file + " differs; ";
      }
    }
  }
  fs::remove_all(dir);
  out.detail += "ST-GCN (augmentation, dropout, plateau) and TSN-RGB (embedding loss): ";
  out.detail += out.pass ? "checkpoints, logs and configs bit-identical" : "MISMATCH";
  return out;
}

// ---- 10: round trips ----

data::SkeletonSequence random_skeleton(Rng& rng) {
  data::SkeletonSequence s(random_id(rng), 1 + rng.uniform_int(6));
  for (std::size_t t = 0; t < s.frames; ++t)
    for (std::size_t v = 0; v < data::kNumJoints; ++v) {
      s.at(0, t, v) = wild(rng);
      s.at(1, t, v) = wild(rng);
      s.at(2, t, v) = rng.uniform_int(5) == 0 ? 0.0 : rng.uniform();
    }
  for (auto& c : s.annotation.categorical) c = rng.uniform_int(4) == 0 ? 1.0 : rng.uniform();
  for (auto& v : s.annotation.vad) v = rng.uniform();
  return s;
}

io::FeatureFile random_features(Rng& rng) {
  io::FeatureFile f;
  f.clip_id = random_id(rng);
  f.modality = rng.uniform_int(2) ? tsn::Modality::kRgb : tsn::Modality::kFlow;
  f.frames = 1 + rng.uniform_int(3);
  std::vector<std::string> names{"body", "context", "face"};
  if (f.modality == tsn::Modality::kRgb) names.emplace_back("scene");
  for (const auto& n : names) {
    if (rng.uniform_int(4) == 0 && n != "body") continue;
    std::vector<double> v(f.frames * tsn::kStreamWidth);
    for (auto& x : v) x = wild(rng);
    f.streams[n] = v;
  }
  if (rng.uniform_int(2)) {
    std::vector<double> flags(f.frames);
    for (auto& x : flags) x = static_cast<double>(rng.uniform_int(2));
    f.face_present = flags;
  }
  return f;
}

config::RunConfig random_config(Rng& rng) {
  const config::ModelType types[] = {config::ModelType::kStgcn, config::ModelType::kTsnRgb,
                                     config::ModelType::kTsnFlow};
  auto cfg = config::default_config(types[rng.uniform_int(3)]);
  const graph::Strategy strategies[] = {graph::Strategy::kUniform, graph::Strategy::kDistance,
                                        graph::Strategy::kSpatial};
  cfg.model.strategy = strategies[rng.uniform_int(3)];
  cfg.model.edge_importance = rng.uniform_int(2);
  cfg.model.partial_bn = rng.uniform_int(2);
  const std::size_t units = rng.uniform_int(4);
  cfg.model.widths.clear();
  for (std::size_t i = 0; i < units; ++i) cfg.model.widths.push_back(1 + rng.uniform_int(64));
  cfg.model.temporal_kernel = 1 + 2 * rng.uniform_int(5);
  cfg.model.dropout = rng.uniform() * 0.9;
  cfg.model.embedding_loss = cfg.model.type == config::ModelType::kTsnRgb && rng.uniform_int(2);
  cfg.optimizer.lr = rng.uniform() * 0.1 + 1e-6;
  cfg.optimizer.momentum = rng.uniform();
  cfg.optimizer.weight_decay = rng.uniform() * 1e-3;
  cfg.optimizer.epochs = 1 + rng.uniform_int(100);
  cfg.optimizer.batch_size = 1 + rng.uniform_int(64);
  cfg.optimizer.plateau = rng.uniform_int(2);
  cfg.optimizer.scheduler.patience = rng.uniform_int(5);
  cfg.data.manifest = random_id(rng) + "/manifest.json";
  cfg.data.augment = rng.uniform_int(2);
  cfg.data.augmentation.max_rotation_deg = rng.uniform() * 20.0;
  cfg.data.k_eval = 1 + rng.uniform_int(30);
  cfg.seed = rng.next_u64();
  return cfg;
}

Outcome criterion_round_trip() {
  const auto start = Clock::now();
  const auto dir = scratch("roundtrip");
  Rng rng(1010);
  std::map<std::string, std::size_t> failures;
  auto expect = [&](const char* format, bool ok) {
    failures[format] += ok ? 0 : 1;
  };
  const int trials = 1000;
  for (int trial = 0; trial < trials; ++trial) {
    // Skeletons and annotations.
    std::vector<data::SkeletonSequence> clips;
    std::vector<AnnotatedClip> ann;
    const std::size_t n = rng.uniform_int(4);
    for (std::size_t i = 0; i < n; ++i) {
      clips.push_back(random_skeleton(rng));
      ann.push_back({clips.back().clip_id, clips.back().frames, clips.back().annotation});
    }
    io::save_skeletons(dir / "s.jsonl", clips);
    expect("skeletons", io::load_skeletons(dir / "s.jsonl") == clips);
    io::save_annotations(dir / "a.jsonl", ann);
    expect("annotations", io::load_annotations(dir / "a.jsonl") == ann);

    // Predictions in both spaces.
    PredictionSet preds{random_id(rng), rng.uniform_int(2) ? ScoreSpace::kLogit : ScoreSpace::kProbability, {}};
    for (std::size_t i = 0; i < 1 + rng.uniform_int(4); ++i) {
      Prediction p;
      p.clip_id = random_id(rng);
      for (auto& v : p.categorical) v = preds.space == ScoreSpace::kLogit ? wild(rng) : rng.uniform();
      for (auto& v : p.vad) v = wild(rng);
      preds.items.push_back(p);
    }
    io::save_predictions(dir / "p.jsonl", preds);
    expect("predictions", io::load_predictions(dir / "p.jsonl") == preds);

    // Manifest.
    io::DatasetManifest m;
    m.categories = synthetic::default_categories();
    m.t_max = 1 + rng.uniform_int(1000);
    for (const char* split : {"train", "val", "test"}) {
      if (rng.uniform_int(3) == 0) continue;
      auto& ids = m.splits[split];
      for (std::size_t i = 0; i < rng.uniform_int(5); ++i) ids.push_back(random_id(rng));
    }
    m.paths["skeletons"] = random_id(rng) + ".jsonl";
    if (rng.uniform_int(2)) m.paths["features"] = random_id(rng);
    io::save_manifest(dir / "m.json", m);
    expect("manifest", io::load_manifest(dir / "m.json") == m);

    // Embeddings (fewer labels keep the text file small).
    std::vector<std::string> labels;
    std::vector<std::vector<double>> vecs;
    for (std::size_t i = 0; i < 1 + rng.uniform_int(3); ++i) {
      labels.push_back("label" + std::to_string(i) + random_id(rng));
      std::vector<double> v(objectives::EmbeddingTable::kDim);
      for (auto& x : v) x = wild(rng);
      vecs.push_back(v);
    }
    const objectives::EmbeddingTable table(labels, vecs);
    io::save_embeddings(dir / "e.txt", table);
    expect("embeddings", io::load_embeddings(dir / "e.txt") == table);

    // Feature files.
    const auto f = random_features(rng);
    io::save_features(dir / "f.bin", f);
    expect("features", io::load_features(dir / "f.bin") == f);

    // Scene/attribute weights.
    tsn::SceneAttrWeights w{random_tensor({tsn::kStreamWidth, tsn::kNumScenes}, rng),
                            random_tensor({tsn::kStreamWidth, tsn::kNumAttributes}, rng)};
    io::save_scene_attr_weights(dir / "w.bin", w);
    const auto w2 = io::load_scene_attr_weights(dir / "w.bin");
    expect("scene-attr weights",
           w2.scenes.shape() == w.scenes.shape() && w2.attributes.shape() == w.attributes.shape() &&
               std::equal(w.scenes.values().begin(), w.scenes.values().end(), w2.scenes.values().begin()) &&
               std::equal(w.attributes.values().begin(), w.attributes.values().end(),
                          w2.attributes.values().begin()));

    // Checkpoints.
    io::Checkpoint ck;
    ck.attributes["model_type"] = random_id(rng);
    ck.attributes["note"] = "line\nbreak \"quoted\"";
    for (std::size_t i = 0; i < 1 + rng.uniform_int(4); ++i) {
      nd::Shape shape;
      for (std::size_t r = 0; r < rng.uniform_int(4); ++r) shape.push_back(1 + rng.uniform_int(5));
      std::vector<double> values(nd::shape_numel(shape));
      for (auto& x : values) x = wild(rng);
      ck.state[random_id(rng)] = {shape, values};
    }
    io::save_checkpoint(dir / "c.ckpt", ck);
    expect("checkpoint", io::load_checkpoint(dir / "c.ckpt") == ck);

    // Layout files.
    auto g = oracle::random_connected_graph(rng, 1 + rng.uniform_int(20));
    if (rng.uniform_int(2))
      for (std::size_t i = 0; i < g.num_joints; ++i) g.joint_names.push_back("j" + std::to_string(i));
    g.layout_id = "layout" + std::to_string(trial);
    const auto g2 = graph::parse_layout(graph::serialize_layout(g));
    expect("layout", g2.num_joints == g.num_joints && g2.root == g.root &&
                         g2.adjacency() == g.adjacency() && g2.layout_id == g.layout_id &&
                         g2.joint_names == g.joint_names);

    // Run configs.
    const auto cfg = random_config(rng);
    io::write_text_file(dir / "cfg.json", config::dump_config(cfg));
    expect("config", config::dump_config(config::load_config(dir / "cfg.json")) == config::dump_config(cfg));
  }
  fs::remove_all(dir);
  Outcome out;
  std::size_t total = 0;
  for (const auto& [name, count] : failures) {
    total += count;
    if (count) out.detail += name + " " + std::to_string(count) + " failures; ";
  }
  out.pass = total == 0;
  out.detail += std::to_string(failures.size()) + " formats x " + std::to_string(trials) +
                " trials, " + std::to_string(total) + " failures, " + fmt("%.1fs", seconds_since(start));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  std::vector<int> only;
  app.add_option("--only", only, "Run only these criteria (1-10)");
  CLI11_PARSE(app, argc, argv);
  spdlog::set_level(spdlog::level::err);

  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"ERS arithmetic reproduces the published rows", criterion_ers},
      {"gradient suite", criterion_gradcheck},
      {"graph convolution matches message passing", criterion_graph_conv},
      {"partition laws", criterion_partition},
      {"AP and ROC-AUC oracles", criterion_metric_oracles},
      {"overfit smoke test", criterion_smoke},
      {"TSN pipeline", criterion_tsn},
      {"fusion laws", criterion_fusion},
      {"reproducibility", criterion_reproducibility},
      {"round trips", criterion_round_trip},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("%s criterion %d: %s (%s)\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first,
                o.detail.c_str());
    std::fflush(stdout);
    failed += o.pass ? 0 : 1;
  }
  return failed == 0 ? 0 : 1;
}
