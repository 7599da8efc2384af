#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ctxemo/config.hpp"
#include "ctxemo/formats.hpp"
#include "ctxemo/objectives.hpp"
#include "ctxemo/skeleton.hpp"
#include "ctxemo/stgcn.hpp"
#include "ctxemo/tsn.hpp"

namespace ctxemo::train {

/// Normalized skeleton clips ready for padding to `t_max`.
struct SkeletonData {
  std::vector<data::SkeletonSequence> clips;
  std::size_t t_max = 0;
};

/// Per-frame concatenated TSN input vectors of one clip.
struct TsnClip {
  std::string clip_id;
  EmotionAnnotation annotation;
  std::vector<std::vector<double>> frames;
};

struct TsnData {
  std::vector<TsnClip> clips;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double best_val_loss = 0.0;
  double lr = 0.0;         // rate used during this epoch
  double next_lr = 0.0;    // rate after the scheduler step
  bool improved = false;
  bool lr_reduced = false;
};

struct TrainResult {
  std::vector<EpochRecord> history;
  io::Checkpoint best;    // state at the lowest validation loss
  io::Checkpoint last;
  std::vector<std::string> log;  // deterministic epoch lines
};

/// Optional extras for TSN training.
struct TsnExtras {
  const objectives::EmbeddingTable* embeddings = nullptr;
  std::vector<std::string> vocabulary;
};

stgcn::ModelConfig stgcn_config(const config::RunConfig& cfg);

/// Batched forward of whole clips in eval mode: (N, 29) outputs.
nd::Tensor stgcn_forward_eval(stgcn::Model& model, const std::vector<const data::SkeletonSequence*>& clips,
                              std::size_t t_max);

TrainResult train_stgcn(stgcn::Model& model, const SkeletonData& train_set,
                        const SkeletonData& val_set, const config::RunConfig& cfg);
TrainResult train_tsn(tsn::Model& model, const TsnData& train_set, const TsnData& val_set,
                      const config::RunConfig& cfg, const TsnExtras& extras = {});

/// Combined loss (without the embedding term) of model outputs against
/// annotations, evaluated without history.
double stgcn_loss(stgcn::Model& model, const SkeletonData& data);

PredictionSet predict_stgcn(stgcn::Model& model, const SkeletonData& data);
PredictionSet predict_tsn(const tsn::Model& model, const TsnData& data, std::size_t k_eval);

/// Fraction of (clip, category) pairs whose thresholded score matches the
/// binarized ground truth. Scores in logit space are thresholded at 0.
double binarized_accuracy(const PredictionSet& predictions,
                          const std::vector<AnnotatedClip>& annotations);

std::vector<AnnotatedClip> annotations_of(const SkeletonData& data);
std::vector<AnnotatedClip> annotations_of(const TsnData& data);

// ---- dataset plumbing driven by a manifest ----

struct LoadedDataset {
  io::DatasetManifest manifest;
  std::filesystem::path root;
  std::filesystem::path resolve(const std::string& key) const;
};
LoadedDataset open_dataset(const std::filesystem::path& manifest_path);

SkeletonData load_skeleton_split(const LoadedDataset& ds, const std::string& split);
TsnData load_tsn_split(const LoadedDataset& ds, const std::string& split,
                       const tsn::StreamConfig& streams);

/// End-to-end training from a config; writes `best.ckpt`, `last.ckpt`,
/// `train.log` and `config.json` into `out_dir`.
TrainResult run_training(const config::RunConfig& cfg, const std::filesystem::path& out_dir);

/// Predictions for a split using a checkpoint written by run_training.
PredictionSet run_eval(const std::filesystem::path& checkpoint,
                       const std::filesystem::path& manifest_path, const std::string& split);

}  // namespace ctxemo::train
