#include <filesystem>

#include "doctest.h"

#include "ctxemo/config.hpp"
#include "ctxemo/synthetic.hpp"
#include "ctxemo/training.hpp"
#include "json.hpp"

using namespace ctxemo;

namespace fs = std::filesystem;

namespace {

std::string error_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const std::exception& e) {
    return e.what();
  }
  return {};
}

train::SkeletonData skeleton_data(std::size_t n, std::uint64_t seed) {
  train::SkeletonData d;
  for (auto& s : synthetic::skeleton_clips(n, 12, 16, seed)) d.clips.push_back(data::normalize_joints(s));
  d.t_max = 16;
  return d;
}

config::RunConfig smoke_config() {
  auto cfg = config::default_config(config::ModelType::kStgcn);
  cfg.model.widths = {8, 8, 8};
  cfg.model.temporal_kernel = 3;
  cfg.model.dropout = 0.0;
  cfg.optimizer.lr = 0.05;
  cfg.optimizer.batch_size = 4;
  cfg.optimizer.epochs = 4;
  cfg.optimizer.plateau = false;
  cfg.data.augment = false;
  cfg.seed = 3;
  return cfg;
}

}  // namespace

TEST_CASE("documented defaults") {
  const auto st = config::default_config(config::ModelType::kStgcn);
  CHECK(st.optimizer.lr == 5e-3);
  CHECK(st.optimizer.momentum == 0.9);
  CHECK(st.optimizer.weight_decay == 1e-5);
  CHECK(st.model.strategy == graph::Strategy::kSpatial);
  CHECK(st.data.k_train == 3);
  CHECK(st.data.k_eval == 25);
  CHECK(config::default_config(config::ModelType::kTsnRgb).optimizer.lr == 1e-3);

  const auto doc = nlohmann::json::parse(config::dump_config(st));
  CHECK(doc["optimizer"]["lr"] == 0.005);
  CHECK(doc["optimizer"]["momentum"] == 0.9);
  CHECK(doc["optimizer"]["weight_decay"] == 1e-5);
  CHECK(doc["model"]["strategy"] == "spatial");
  const auto text = config::dump_config(st);
  CHECK(text.find("\"lr\": 0.005") != std::string::npos);
  CHECK(text.find("\"weight_decay\": 1e-05") != std::string::npos);
}

TEST_CASE("config round trip and errors") {
  const auto cfg = smoke_config();
  const auto back = config::parse_config(config::dump_config(cfg));
  CHECK(config::dump_config(back) == config::dump_config(cfg));

  const auto unknown = error_of([] {
    config::parse_config("{\n  \"model\": {\n    \"type\": \"stgcn\",\n    \"widht\": [8]\n  }\n}");
  });
  CHECK(unknown.find("line 4") != std::string::npos);
  CHECK(unknown.find("widht") != std::string::npos);

  const auto type = error_of([] { config::parse_config("{\"seed\": \"seven\"}"); });
  CHECK(type.find("seed") != std::string::npos);
  CHECK_THROWS(config::parse_config("{\"model\": {\"type\": \"resnet\"}}"));
  CHECK_THROWS(config::parse_config("{\"model\": {\"temporal_kernel\": 4}}"));
  CHECK_THROWS(config::parse_config("not json"));
}

TEST_CASE("same seed gives identical training logs and weights") {
  const auto train_set = skeleton_data(8, 1), val_set = skeleton_data(4, 2);
  const auto cfg = smoke_config();
  auto run = [&] {
    stgcn::Model model(train::stgcn_config(cfg), 0);
    return train::train_stgcn(model, train_set, val_set, cfg);
  };
  const auto a = run(), b = run();
  CHECK(a.log == b.log);
  CHECK(a.best == b.best);
  CHECK(a.last == b.last);
  REQUIRE(a.history.size() == 4);
  for (std::size_t i = 1; i < a.history.size(); ++i) {
    CHECK(a.history[i].best_val_loss <= a.history[i - 1].best_val_loss);
  }

  auto other = cfg;
  other.seed = 4;
  stgcn::Model model(train::stgcn_config(other), 0);
  CHECK(train::train_stgcn(model, train_set, val_set, other).log != a.log);
}

TEST_CASE("plateau reductions are logged") {
  const auto train_set = skeleton_data(6, 1), val_set = skeleton_data(4, 2);
  auto cfg = smoke_config();
  cfg.optimizer.plateau = true;
  // No epoch can beat the best by this much, so only epoch 1 improves.
  cfg.optimizer.scheduler.min_delta = 100.0;
  cfg.optimizer.epochs = 4;
  stgcn::Model model(train::stgcn_config(cfg), 0);
  const auto r = train::train_stgcn(model, train_set, val_set, cfg);
  bool found = false;
  for (const auto& line : r.log) found |= line == "epoch 3 lr_reduced 0.05 -> 0.005";
  INFO(nlohmann::json(r.log).dump(1));
  CHECK(found);
  CHECK(r.history[2].lr_reduced);
  CHECK(r.history[3].lr == doctest::Approx(0.005));
}

TEST_CASE("binarized accuracy") {
  std::vector<AnnotatedClip> ann(2);
  ann[0].clip_id = "a";
  ann[1].clip_id = "b";
  ann[0].annotation.categorical[0] = 1.0;
  PredictionSet p{"m", ScoreSpace::kLogit, {}};
  for (const auto& a : ann) {
    Prediction q;
    q.clip_id = a.clip_id;
    for (auto& v : q.categorical) v = -1.0;
    p.items.push_back(q);
  }
  p.items[0].categorical[0] = 2.0;
  CHECK(train::binarized_accuracy(p, ann) == 1.0);
  p.items[1].categorical[5] = 0.5;
  CHECK(train::binarized_accuracy(p, ann) == doctest::Approx(51.0 / 52.0));
}

TEST_CASE("end to end on disk") {
  const auto dir = fs::temp_directory_path() / "ctxemo_test_e2e";
  fs::remove_all(dir);
  synthetic::Options opts;
  opts.train = 6;
  opts.val = 2;
  opts.test = 2;
  const auto manifest = synthetic::write_dataset(dir / "data", opts);

  auto cfg = smoke_config();
  cfg.data.manifest = manifest.string();
  cfg.optimizer.epochs = 2;
  const auto r = train::run_training(cfg, dir / "stgcn");
  CHECK(fs::exists(dir / "stgcn" / "best.ckpt"));
  CHECK(fs::exists(dir / "stgcn" / "train.log"));
  const auto preds = train::run_eval(dir / "stgcn" / "best.ckpt", manifest, "test");
  CHECK(preds.items.size() == 2);
  CHECK(preds.space == ScoreSpace::kLogit);

  auto tsn = config::default_config(config::ModelType::kTsnFlow);
  tsn.data.manifest = manifest.string();
  tsn.optimizer.epochs = 2;
  tsn.optimizer.batch_size = 4;
  train::run_training(tsn, dir / "flow");
  const auto fp = train::run_eval(dir / "flow" / "best.ckpt", manifest, "test");
  CHECK(fp.items.size() == 2);
  CHECK(fp.items[0].clip_id == preds.items[0].clip_id);
  fs::remove_all(dir);
}
