#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ctxemo/container.hpp"
#include "ctxemo/nn.hpp"
#include "ctxemo/objectives.hpp"
#include "ctxemo/skeleton.hpp"
#include "ctxemo/tsn.hpp"
#include "ctxemo/types.hpp"

namespace ctxemo::io {

inline constexpr int kTextFormatVersion = 1;

// Dataset manifest (JSON):
//   {"format": "ctxemo-manifest", "version": 1,
//    "categories": [26 labels], "vad_scaling": "unit",
//    "t_max": T, "splits": {"train": [ids], "val": [ids], ...},
//    "paths": {"skeletons": "...", "features": "...", ...}}
// Relative paths are resolved against the manifest's directory.
struct DatasetManifest {
  std::vector<std::string> categories;
  std::string vad_scaling = "unit";
  std::size_t t_max = 0;
  std::map<std::string, std::vector<std::string>> splits;
  std::map<std::string, std::string> paths;

  const std::vector<std::string>& split(const std::string& name) const;
  bool operator==(const DatasetManifest&) const = default;
};

std::string manifest_to_json(const DatasetManifest& m);
DatasetManifest manifest_from_json(std::string_view text);
void save_manifest(const std::filesystem::path& path, const DatasetManifest& m);
DatasetManifest load_manifest(const std::filesystem::path& path);

// Line-oriented JSON files: the first line is a header object, every
// further non-empty line one record.
//
// Skeletons:   header {"format":"ctxemo-skeletons","version":1,"joints":18}
//              record {"clip_id","frames","joints":[3*T*18, channel-major],
//                      "categorical":[26],"vad":[3]}
// Annotations: header {"format":"ctxemo-annotations","version":1}
//              record {"clip_id","frames","categorical":[26],"vad":[3]}
// Predictions: header {"format":"ctxemo-predictions","version":1,
//                      "model":name,"categorical_space":"logit"|"probability"}
//              record {"clip_id","categorical":[26],"vad":[3]}
void write_skeletons(std::ostream& out, const std::vector<data::SkeletonSequence>& clips);
std::vector<data::SkeletonSequence> read_skeletons(std::istream& in);
void save_skeletons(const std::filesystem::path& path,
                    const std::vector<data::SkeletonSequence>& clips);
std::vector<data::SkeletonSequence> load_skeletons(const std::filesystem::path& path);

void write_annotations(std::ostream& out, const std::vector<AnnotatedClip>& clips);
std::vector<AnnotatedClip> read_annotations(std::istream& in);
void save_annotations(const std::filesystem::path& path, const std::vector<AnnotatedClip>& clips);
std::vector<AnnotatedClip> load_annotations(const std::filesystem::path& path);

void write_predictions(std::ostream& out, const PredictionSet& set);
PredictionSet read_predictions(std::istream& in);
void save_predictions(const std::filesystem::path& path, const PredictionSet& set);
PredictionSet load_predictions(const std::filesystem::path& path);

// Embedding table (text): one line per label, "label v1 ... v300",
// space separated; blank lines and lines starting with '#' are ignored.
void write_embeddings(std::ostream& out, const objectives::EmbeddingTable& table);
objectives::EmbeddingTable read_embeddings(std::istream& in);
void save_embeddings(const std::filesystem::path& path, const objectives::EmbeddingTable& table);
objectives::EmbeddingTable load_embeddings(const std::filesystem::path& path);

// Feature file (container kind "features", schema 1): one per clip and
// modality. Attributes clip_id, modality, frames; one (T, 512) record per
// stream; optional (T) record "face_present" with 0/1 flags.
struct FeatureFile {
  std::string clip_id;
  tsn::Modality modality = tsn::Modality::kRgb;
  std::size_t frames = 0;
  std::map<std::string, std::vector<double>> streams;  // name -> T*512
  std::optional<std::vector<double>> face_present;

  void validate() const;
  tsn::SnippetFeatureSet snippet(std::size_t frame) const;
  bool operator==(const FeatureFile&) const = default;
};
Container features_to_container(const FeatureFile& f);
FeatureFile features_from_container(const Container& c);
void save_features(const std::filesystem::path& path, const FeatureFile& f);
FeatureFile load_features(const std::filesystem::path& path);
std::filesystem::path feature_path(const std::filesystem::path& dir, const std::string& clip_id,
                                   tsn::Modality modality);

// Scene/attribute weights (kind "scene-attr-weights", schema 1): records
// "W_scenes" (512, 365) and "W_attr" (512, 102).
void save_scene_attr_weights(const std::filesystem::path& path, const tsn::SceneAttrWeights& w);
tsn::SceneAttrWeights load_scene_attr_weights(const std::filesystem::path& path);

// Checkpoint (kind "checkpoint", schema 1): free-form string attributes
// (model type, epoch, ...) and one record per state entry.
struct Checkpoint {
  std::map<std::string, std::string> attributes;
  nn::StateDict state;
  bool operator==(const Checkpoint&) const = default;
};
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace ctxemo::io
