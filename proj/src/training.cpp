#include "ctxemo/training.hpp"

#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <unordered_map>

#include <spdlog/spdlog.h>

#include "ctxemo/ops.hpp"
#include "ctxemo/optim.hpp"

namespace ctxemo::train {

namespace {

std::string fmt_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string exact_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Fisher-Yates with our own generator so orderings are portable.
void shuffle(std::vector<std::size_t>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.uniform_int(i)]);
}

nd::Tensor categorical_targets(const std::vector<const EmotionAnnotation*>& batch) {
  std::vector<double> v;
  v.reserve(batch.size() * kNumCategories);
  for (const auto* a : batch) v.insert(v.end(), a->categorical.begin(), a->categorical.end());
  return nd::Tensor({batch.size(), kNumCategories}, std::move(v));
}

nd::Tensor vad_targets(const std::vector<const EmotionAnnotation*>& batch) {
  std::vector<double> v;
  v.reserve(batch.size() * kNumVad);
  for (const auto* a : batch) v.insert(v.end(), a->vad.begin(), a->vad.end());
  return nd::Tensor({batch.size(), kNumVad}, std::move(v));
}

objectives::LossParts video_losses(const nd::Tensor& scores, const nd::Tensor& vad,
                                   const std::vector<const EmotionAnnotation*>& batch) {
  const auto cat = categorical_targets(batch);
  return {objectives::loss_cat1(scores, cat), objectives::loss_cat2(scores, cat),
          objectives::loss_cont(vad, vad_targets(batch)), {}};
}

nd::Tensor skeleton_batch(const std::vector<std::vector<double>>& padded, std::size_t t_max) {
  const std::size_t per = data::kJointChannels * t_max * data::kNumJoints;
  std::vector<double> v;
  v.reserve(padded.size() * per);
  for (const auto& p : padded) v.insert(v.end(), p.begin(), p.end());
  return nd::Tensor({padded.size(), data::kJointChannels, t_max, data::kNumJoints}, std::move(v));
}

std::vector<std::vector<std::size_t>> batches(const std::vector<std::size_t>& order,
                                              std::size_t batch_size) {
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < order.size(); i += batch_size) {
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                     order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), i + batch_size)));
  }
  return out;
}

std::string epoch_line(const EpochRecord& r) {
  return "epoch " + std::to_string(r.epoch) + " train_loss " + fmt_real(r.train_loss) +
         " val_loss " + fmt_real(r.val_loss) + " best_val_loss " + fmt_real(r.best_val_loss) +
         " lr " + fmt_real(r.lr) + (r.improved ? " checkpoint" : "");
}

std::string reduce_line(const EpochRecord& r) {
  return "epoch " + std::to_string(r.epoch) + " lr_reduced " + fmt_real(r.lr) + " -> " +
         fmt_real(r.next_lr);
}

// Shared epoch bookkeeping: scheduler, best tracking and log lines.
class Tracker {
 public:
  Tracker(const config::RunConfig& cfg, TrainResult& result)
      : cfg_(cfg), result_(result), scheduler_(cfg.optimizer.scheduler) {}

  /// Returns the learning rate for the next epoch.
  double finish_epoch(std::size_t epoch, double train_loss, double val_loss, double lr,
                      const std::function<io::Checkpoint()>& snapshot) {
    EpochRecord r;
    r.epoch = epoch;
    r.train_loss = train_loss;
    r.val_loss = val_loss;
    r.lr = lr;
    r.improved = result_.history.empty() || val_loss < best_;
    if (r.improved) {
      best_ = val_loss;
      result_.best = snapshot();
      result_.best.attributes["epoch"] = std::to_string(epoch);
      result_.best.attributes["val_loss"] = exact_real(val_loss);
    }
    r.best_val_loss = best_;
    r.next_lr = cfg_.optimizer.plateau ? scheduler_.step(val_loss, lr) : lr;
    r.lr_reduced = cfg_.optimizer.plateau && scheduler_.last_reduced();
    result_.log.push_back(epoch_line(r));
    spdlog::info("{}", result_.log.back());
    if (r.lr_reduced) {
      result_.log.push_back(reduce_line(r));
      spdlog::info("{}", result_.log.back());
    }
    result_.history.push_back(r);
    if (epoch == cfg_.optimizer.epochs) {
      result_.last = snapshot();
      result_.last.attributes["epoch"] = std::to_string(epoch);
      result_.last.attributes["val_loss"] = exact_real(val_loss);
    }
    return r.next_lr;
  }

 private:
  const config::RunConfig& cfg_;
  TrainResult& result_;
  optim::ReduceLrOnPlateau scheduler_;
  double best_ = 0.0;
};

io::Checkpoint make_checkpoint(nn::StateDict state, const config::RunConfig& cfg) {
  io::Checkpoint c;
  c.state = std::move(state);
  c.attributes["model_type"] = std::string(config::to_string(cfg.model.type));
  c.attributes["config"] = config::dump_config(cfg);
  return c;
}

std::vector<const EmotionAnnotation*> annotation_ptrs(const SkeletonData& data,
                                                      const std::vector<std::size_t>& idx) {
  std::vector<const EmotionAnnotation*> out;
  for (auto i : idx) out.push_back(&data.clips[i].annotation);
  return out;
}

}  // namespace

stgcn::ModelConfig stgcn_config(const config::RunConfig& cfg) {
  const auto& m = cfg.model;
  stgcn::ModelConfig mc =
      m.widths.empty() ? stgcn::ModelConfig::canonical()
                       : stgcn::ModelConfig::reduced(m.widths, m.temporal_kernel, m.dropout);
  for (auto& u : mc.units) {
    u.temporal_kernel = m.temporal_kernel;
    u.dropout = m.dropout;
  }
  mc.strategy = m.strategy;
  mc.edge_importance = m.edge_importance;
  mc.layout = m.layout;
  return mc;
}

nd::Tensor stgcn_forward_eval(stgcn::Model& model,
                              const std::vector<const data::SkeletonSequence*>& clips,
                              std::size_t t_max) {
  nd::NoGradGuard no_grad;
  std::vector<std::vector<double>> padded;
  for (const auto* c : clips) padded.push_back(data::pad_sequence(*c, t_max, data::PadMode::kEval));
  return model.forward(skeleton_batch(padded, t_max), false);
}

double stgcn_loss(stgcn::Model& model, const SkeletonData& data) {
  if (data.clips.empty()) throw std::invalid_argument("loss over an empty clip set");
  nd::NoGradGuard no_grad;
  constexpr std::size_t kChunk = 64;
  double total = 0.0;
  for (std::size_t i = 0; i < data.clips.size(); i += kChunk) {
    std::vector<const data::SkeletonSequence*> chunk;
    std::vector<const EmotionAnnotation*> anns;
    for (std::size_t j = i; j < std::min(data.clips.size(), i + kChunk); ++j) {
      chunk.push_back(&data.clips[j]);
      anns.push_back(&data.clips[j].annotation);
    }
    const auto out = stgcn_forward_eval(model, chunk, data.t_max);
    const auto parts = video_losses(nd::slice_cols(out, 0, kNumCategories),
                                    nd::slice_cols(out, kNumCategories, kNumVad), anns);
    total += objectives::combined_loss(parts, false).item() * static_cast<double>(chunk.size());
  }
  return total / static_cast<double>(data.clips.size());
}

TrainResult train_stgcn(stgcn::Model& model, const SkeletonData& train_set,
                        const SkeletonData& val_set, const config::RunConfig& cfg) {
  if (train_set.clips.empty()) throw std::invalid_argument("training split is empty");
  if (cfg.model.partial_bn) nn::set_partial_bn(model.batch_norms());
  if (cfg.model.embedding_loss) {
    spdlog::warn("the embedding loss applies to TSN models only; ignored for ST-GCN");
  }
  Rng master(cfg.seed);
  Rng order_rng = master.derive(1);
  Rng aug_rng = master.derive(2);
  optim::Sgd opt(model.parameters(), {cfg.optimizer.effective_lr(cfg.model.type),
                                      cfg.optimizer.momentum, cfg.optimizer.weight_decay});
  TrainResult result;
  Tracker tracker(cfg, result);
  const SkeletonData& monitor = val_set.clips.empty() ? train_set : val_set;
  std::vector<std::size_t> order(train_set.clips.size());
  for (std::size_t epoch = 1; epoch <= cfg.optimizer.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    shuffle(order, order_rng);
    double loss_sum = 0.0;
    for (const auto& batch : batches(order, cfg.optimizer.batch_size)) {
      std::vector<std::vector<double>> padded;
      for (auto i : batch) {
        const auto& clip = train_set.clips[i];
        padded.push_back(data::pad_sequence(
            cfg.data.augment ? data::random_affine(clip, cfg.data.augmentation, aug_rng) : clip,
            train_set.t_max, data::PadMode::kTrain, &aug_rng));
      }
      const auto out = model.forward(skeleton_batch(padded, train_set.t_max), true);
      const auto parts = video_losses(nd::slice_cols(out, 0, kNumCategories),
                                      nd::slice_cols(out, kNumCategories, kNumVad),
                                      annotation_ptrs(train_set, batch));
      const auto loss = objectives::combined_loss(parts, false);
      loss.backward();
      opt.step();
      loss_sum += loss.item() * static_cast<double>(batch.size());
    }
    const double train_loss = loss_sum / static_cast<double>(order.size());
    const double val_loss = stgcn_loss(model, monitor);
    const double lr = tracker.finish_epoch(epoch, train_loss, val_loss, opt.learning_rate(), [&] {
      auto c = make_checkpoint(model.state(), cfg);
      c.attributes["t_max"] = std::to_string(train_set.t_max);
      return c;
    });
    opt.set_learning_rate(lr);
  }
  return result;
}

namespace {

struct TsnBatch {
  nd::Tensor rows;  // (N*K, width)
  std::vector<const EmotionAnnotation*> annotations;
};

TsnBatch tsn_batch(const TsnData& data, const std::vector<std::size_t>& clips, std::size_t k,
                   tsn::SampleMode mode, Rng* rng, std::size_t width) {
  TsnBatch b;
  std::vector<double> v;
  v.reserve(clips.size() * k * width);
  for (auto i : clips) {
    const auto& clip = data.clips[i];
    for (auto t : tsn::segment_sample(clip.frames.size(), k, mode, rng)) {
      v.insert(v.end(), clip.frames[t].begin(), clip.frames[t].end());
    }
    b.annotations.push_back(&clip.annotation);
  }
  b.rows = nd::Tensor({clips.size() * k, width}, std::move(v));
  return b;
}

nd::Tensor tsn_loss(const tsn::Model& model, const TsnBatch& b, std::size_t k,
                    const config::RunConfig& cfg, const TsnExtras& extras) {
  const auto out = model.forward(b.rows);
  auto parts =
      video_losses(nd::group_mean(out.scores, k), nd::group_mean(out.vad, k), b.annotations);
  const bool use_emb = cfg.model.embedding_loss;
  if (use_emb) {
    const auto targets =
        objectives::embedding_targets(b.annotations, *extras.embeddings, extras.vocabulary, k);
    parts.emb = objectives::loss_emb(out.embedding, targets.targets, targets.mask);
  }
  return objectives::combined_loss(parts, use_emb);
}

double tsn_eval_loss(const tsn::Model& model, const TsnData& data, const config::RunConfig& cfg,
                     const TsnExtras& extras) {
  nd::NoGradGuard no_grad;
  std::vector<std::size_t> all(data.clips.size());
  std::iota(all.begin(), all.end(), 0);
  double total = 0.0;
  for (const auto& batch : batches(all, 32)) {
    const auto b = tsn_batch(data, batch, cfg.data.k_eval, tsn::SampleMode::kEval, nullptr,
                             model.concat_width());
    total += tsn_loss(model, b, cfg.data.k_eval, cfg, extras).item() *
             static_cast<double>(batch.size());
  }
  return total / static_cast<double>(data.clips.size());
}

}  // namespace

TrainResult train_tsn(tsn::Model& model, const TsnData& train_set, const TsnData& val_set,
                      const config::RunConfig& cfg, const TsnExtras& extras) {
  if (train_set.clips.empty()) throw std::invalid_argument("training split is empty");
  if (cfg.model.embedding_loss && extras.embeddings == nullptr) {
    throw std::invalid_argument("the embedding loss needs an embedding table");
  }
  if (cfg.model.partial_bn) nn::set_partial_bn(model.batch_norms());
  Rng master(cfg.seed);
  Rng order_rng = master.derive(1);
  Rng sample_rng = master.derive(3);
  optim::Sgd opt(model.parameters(), {cfg.optimizer.effective_lr(cfg.model.type),
                                      cfg.optimizer.momentum, cfg.optimizer.weight_decay});
  TrainResult result;
  Tracker tracker(cfg, result);
  const TsnData& monitor = val_set.clips.empty() ? train_set : val_set;
  std::vector<std::size_t> order(train_set.clips.size());
  for (std::size_t epoch = 1; epoch <= cfg.optimizer.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    shuffle(order, order_rng);
    double loss_sum = 0.0;
    for (const auto& batch : batches(order, cfg.optimizer.batch_size)) {
      const auto b = tsn_batch(train_set, batch, cfg.data.k_train, tsn::SampleMode::kTrain,
                               &sample_rng, model.concat_width());
      const auto loss = tsn_loss(model, b, cfg.data.k_train, cfg, extras);
      loss.backward();
      opt.step();
      loss_sum += loss.item() * static_cast<double>(batch.size());
    }
    const double train_loss = loss_sum / static_cast<double>(order.size());
    const double val_loss = tsn_eval_loss(model, monitor, cfg, extras);
    const double lr = tracker.finish_epoch(epoch, train_loss, val_loss, opt.learning_rate(),
                                           [&] { return make_checkpoint(model.state(), cfg); });
    opt.set_learning_rate(lr);
  }
  return result;
}

PredictionSet predict_stgcn(stgcn::Model& model, const SkeletonData& data) {
  PredictionSet set;
  set.model = "stgcn";
  set.space = ScoreSpace::kLogit;
  constexpr std::size_t kChunk = 64;
  for (std::size_t i = 0; i < data.clips.size(); i += kChunk) {
    std::vector<const data::SkeletonSequence*> chunk;
    std::vector<std::string> ids;
    for (std::size_t j = i; j < std::min(data.clips.size(), i + kChunk); ++j) {
      chunk.push_back(&data.clips[j]);
      ids.push_back(data.clips[j].clip_id);
    }
    auto preds = stgcn::to_predictions(stgcn_forward_eval(model, chunk, data.t_max), ids);
    set.items.insert(set.items.end(), preds.begin(), preds.end());
  }
  return set;
}

PredictionSet predict_tsn(const tsn::Model& model, const TsnData& data, std::size_t k_eval) {
  PredictionSet set;
  set.model = model.streams().modality == tsn::Modality::kRgb ? "tsn-rgb" : "tsn-flow";
  set.space = ScoreSpace::kLogit;
  for (const auto& clip : data.clips) {
    std::vector<Prediction> snippets;
    for (auto t : tsn::segment_sample(clip.frames.size(), k_eval, tsn::SampleMode::kEval)) {
      snippets.push_back(tsn::snippet_predict(model, clip.frames[t]));
    }
    auto p = tsn::consensus(snippets);
    p.clip_id = clip.clip_id;
    set.items.push_back(std::move(p));
  }
  return set;
}

double binarized_accuracy(const PredictionSet& predictions,
                          const std::vector<AnnotatedClip>& annotations) {
  std::unordered_map<std::string, const Prediction*> by_id;
  for (const auto& p : predictions.items) by_id.emplace(p.clip_id, &p);
  const double threshold = predictions.space == ScoreSpace::kLogit ? 0.0 : kBinarizeThreshold;
  std::size_t correct = 0, total = 0;
  for (const auto& a : annotations) {
    auto it = by_id.find(a.clip_id);
    if (it == by_id.end()) throw std::invalid_argument("no prediction for clip '" + a.clip_id + "'");
    for (std::size_t c = 0; c < kNumCategories; ++c) {
      const bool pred = it->second->categorical[c] >= threshold;
      const bool truth = a.annotation.categorical[c] >= kBinarizeThreshold;
      correct += pred == truth ? 1 : 0;
      ++total;
    }
  }
  return total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0;
}

std::vector<AnnotatedClip> annotations_of(const SkeletonData& data) {
  std::vector<AnnotatedClip> out;
  for (const auto& c : data.clips) out.push_back({c.clip_id, c.frames, c.annotation});
  return out;
}

std::vector<AnnotatedClip> annotations_of(const TsnData& data) {
  std::vector<AnnotatedClip> out;
  for (const auto& c : data.clips) out.push_back({c.clip_id, c.frames.size(), c.annotation});
  return out;
}

// ---- manifest-driven plumbing ----

std::filesystem::path LoadedDataset::resolve(const std::string& key) const {
  auto it = manifest.paths.find(key);
  if (it == manifest.paths.end()) {
    throw std::invalid_argument("dataset manifest has no path '" + key + "'");
  }
  const std::filesystem::path p(it->second);
  return p.is_absolute() ? p : root / p;
}

LoadedDataset open_dataset(const std::filesystem::path& manifest_path) {
  LoadedDataset ds;
  ds.manifest = io::load_manifest(manifest_path);
  ds.root = manifest_path.parent_path();
  return ds;
}

SkeletonData load_skeleton_split(const LoadedDataset& ds, const std::string& split) {
  const auto& ids = ds.manifest.split(split);
  auto all = io::load_skeletons(ds.resolve("skeletons"));
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < all.size(); ++i) index.emplace(all[i].clip_id, i);
  SkeletonData out;
  out.t_max = ds.manifest.t_max;
  for (const auto& id : ids) {
    auto it = index.find(id);
    if (it == index.end()) throw std::invalid_argument("split '" + split + "' lists unknown clip '" + id + "'");
    const auto& clip = all[it->second];
    if (clip.frames > out.t_max) {
      throw std::invalid_argument("clip '" + id + "' is longer than the manifest t_max");
    }
    out.clips.push_back(data::normalize_joints(clip));
  }
  return out;
}

TsnData load_tsn_split(const LoadedDataset& ds, const std::string& split,
                       const tsn::StreamConfig& streams) {
  streams.validate();
  const auto& ids = ds.manifest.split(split);
  const auto anns = io::load_annotations(ds.resolve("annotations"));
  std::unordered_map<std::string, const AnnotatedClip*> by_id;
  for (const auto& a : anns) by_id.emplace(a.clip_id, &a);
  std::optional<tsn::SceneAttrWeights> weights;
  if (streams.scene_attr) weights = io::load_scene_attr_weights(ds.resolve("scene_attr_weights"));
  const auto dir = ds.resolve("features");
  TsnData out;
  for (const auto& id : ids) {
    auto it = by_id.find(id);
    if (it == by_id.end()) throw std::invalid_argument("no annotation for clip '" + id + "'");
    const auto file = io::load_features(io::feature_path(dir, id, streams.modality));
    if (file.clip_id != id) {
      throw std::invalid_argument("feature file for '" + id + "' declares clip '" + file.clip_id + "'");
    }
    if (it->second->frames != 0 && it->second->frames != file.frames) {
      throw std::invalid_argument("clip '" + id + "' has " + std::to_string(it->second->frames) +
                                  " frames but its features cover " + std::to_string(file.frames));
    }
    TsnClip clip;
    clip.clip_id = id;
    clip.annotation = it->second->annotation;
    for (std::size_t t = 0; t < file.frames; ++t) {
      clip.frames.push_back(
          tsn::snippet_vector(file.snippet(t), streams, weights ? &*weights : nullptr));
    }
    out.clips.push_back(std::move(clip));
  }
  return out;
}

namespace {

void write_log(const std::filesystem::path& path, const std::vector<std::string>& lines) {
  std::string text;
  for (const auto& l : lines) text += l + "\n";
  io::write_text_file(path, text);
}

std::uint64_t model_seed(std::uint64_t seed) { return Rng(seed).derive(0).next_u64(); }

}  // namespace

TrainResult run_training(const config::RunConfig& cfg, const std::filesystem::path& out_dir) {
  if (cfg.data.manifest.empty()) throw std::invalid_argument("config has no data.manifest");
  const auto ds = open_dataset(cfg.data.manifest);
  std::filesystem::create_directories(out_dir);
  io::write_text_file(out_dir / "config.json", config::dump_config(cfg));
  auto has_split = [&](const std::string& s) { return ds.manifest.splits.count(s) > 0; };
  TrainResult result;
  if (cfg.model.type == config::ModelType::kStgcn) {
    const auto train_set = load_skeleton_split(ds, cfg.data.train_split);
    const auto val_set =
        has_split(cfg.data.val_split) ? load_skeleton_split(ds, cfg.data.val_split) : SkeletonData{};
    stgcn::Model model(stgcn_config(cfg), model_seed(cfg.seed));
    result = train_stgcn(model, train_set, val_set, cfg);
  } else {
    const auto streams = cfg.model.streams();
    const auto train_set = load_tsn_split(ds, cfg.data.train_split, streams);
    const auto val_set = has_split(cfg.data.val_split)
                             ? load_tsn_split(ds, cfg.data.val_split, streams)
                             : TsnData{};
    std::optional<objectives::EmbeddingTable> table;
    TsnExtras extras;
    if (cfg.model.embedding_loss) {
      table = io::load_embeddings(ds.resolve("embeddings"));
      table->require(ds.manifest.categories);
      extras.embeddings = &*table;
      extras.vocabulary = ds.manifest.categories;
    }
    tsn::Model model(streams, model_seed(cfg.seed));
    result = train_tsn(model, train_set, val_set, cfg, extras);
  }
  io::save_checkpoint(out_dir / "best.ckpt", result.best);
  io::save_checkpoint(out_dir / "last.ckpt", result.last);
  write_log(out_dir / "train.log", result.log);
  return result;
}

PredictionSet run_eval(const std::filesystem::path& checkpoint,
                       const std::filesystem::path& manifest_path, const std::string& split) {
  const auto ckpt = io::load_checkpoint(checkpoint);
  auto cfg_it = ckpt.attributes.find("config");
  if (cfg_it == ckpt.attributes.end()) {
    throw std::invalid_argument(checkpoint.string() + ": checkpoint carries no config");
  }
  const auto cfg = config::parse_config(cfg_it->second);
  const auto ds = open_dataset(manifest_path);
  if (cfg.model.type == config::ModelType::kStgcn) {
    auto data = load_skeleton_split(ds, split);
    stgcn::Model model(stgcn_config(cfg));
    model.load_state(ckpt.state);
    return predict_stgcn(model, data);
  }
  const auto data = load_tsn_split(ds, split, cfg.model.streams());
  tsn::Model model(cfg.model.streams());
  model.load_state(ckpt.state);
  return predict_tsn(model, data, cfg.data.k_eval);
}

}  // namespace ctxemo::train
