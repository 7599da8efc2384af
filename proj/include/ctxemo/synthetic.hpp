#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ctxemo/formats.hpp"
#include "ctxemo/skeleton.hpp"

namespace ctxemo::synthetic {

/// The 26 categorical labels, in manifest order.
const std::vector<std::string>& default_categories();

/// Ground truth for synthetic class `label` (0 or 1): category `label` is
/// fully positive, everything else zero; VAD differs by class.
EmotionAnnotation class_annotation(std::size_t label);

struct Options {
  std::size_t train = 20;
  std::size_t val = 6;
  std::size_t test = 6;
  std::size_t min_frames = 12;
  std::size_t max_frames = 20;
  double feature_noise = 0.3;
  bool with_features = true;
  std::uint64_t seed = 7;
};

/// Raw pixel-space skeleton clip of class `label`: raised, waving arms for
/// class 0, lowered arms and a slumped head for class 1, with per-clip
/// offset, scale and jitter.
data::SkeletonSequence skeleton_clip(const std::string& id, std::size_t label,
                                     std::size_t frames, Rng& rng);

/// Balanced clip list; clip i has class i % 2.
std::vector<data::SkeletonSequence> skeleton_clips(std::size_t count, std::size_t min_frames,
                                                   std::size_t max_frames, std::uint64_t seed,
                                                   const std::string& prefix = "clip");

/// Class-dependent per-frame stream features.
io::FeatureFile feature_file(const std::string& clip_id, std::size_t label, std::size_t frames,
                             tsn::Modality modality, double noise, Rng& rng,
                             std::uint64_t class_seed);

tsn::SceneAttrWeights scene_attr_weights(std::uint64_t seed);
objectives::EmbeddingTable embedding_table(const std::vector<std::string>& labels,
                                           std::uint64_t seed);

/// Writes manifest.json, skeletons.jsonl, annotations.jsonl, features/,
/// scene_attr_weights.bin and embeddings.txt under `dir`. Returns the
/// manifest path.
std::filesystem::path write_dataset(const std::filesystem::path& dir, const Options& options);

}  // namespace ctxemo::synthetic
