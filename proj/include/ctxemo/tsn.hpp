#pragma once

#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ctxemo/nn.hpp"
#include "ctxemo/types.hpp"

namespace ctxemo::tsn {

inline constexpr std::size_t kStreamWidth = 512;
inline constexpr std::size_t kNumScenes = 365;
inline constexpr std::size_t kNumAttributes = 102;
inline constexpr std::size_t kEmbeddingDim = 300;

enum class Modality { kRgb, kFlow };
std::string_view to_string(Modality m);
Modality parse_modality(std::string_view s);

enum class SampleMode { kTrain, kEval };

/// Which feature streams feed the concatenated snippet vector.
/// Order is always body | context | face | scenes | attributes.
struct StreamConfig {
  Modality modality = Modality::kRgb;
  bool body = true;
  bool context = true;
  bool face = true;
  bool scene_attr = true;  // RGB only

  static StreamConfig full_rgb();
  static StreamConfig full_flow();

  void validate() const;
  std::size_t concat_width() const;
  /// Feature streams that must be present in every snippet ("scene" feeds
  /// the scene/attribute head and is not concatenated itself).
  std::vector<std::string> required_streams() const;
};

/// Half-open frame ranges of the K contiguous near-equal segments.
/// Requires num_frames >= K.
std::vector<std::pair<std::size_t, std::size_t>> segment_bounds(std::size_t num_frames,
                                                                std::size_t k);

/// One frame per segment: a uniform draw in training, the (lower) center in
/// evaluation. With fewer frames than segments, segment i maps to frame
/// min(i, num_frames - 1) in both modes. `rng` is required in train mode.
std::vector<std::size_t> segment_sample(std::size_t num_frames, std::size_t k, SampleMode mode,
                                        Rng* rng = nullptr);

/// Frozen linear scene (512x365) and attribute (512x102) classifiers.
struct SceneAttrWeights {
  nd::Tensor scenes;
  nd::Tensor attributes;
  void validate() const;
};

struct SceneAttrScores {
  std::vector<double> scenes;
  std::vector<double> attributes;
};

/// softmax(feature . W_scenes), softmax(feature . W_attr).
SceneAttrScores scene_attr_scores(std::span<const double> feature, const SceneAttrWeights& w);

struct SnippetFeatureSet {
  Modality modality = Modality::kRgb;
  std::map<std::string, std::vector<double>> streams;
};

/// Concatenates active streams (and the scene/attribute probabilities when
/// enabled; `scores` must then be non-null).
std::vector<double> concat_streams(const SnippetFeatureSet& features, const StreamConfig& cfg,
                                   const SceneAttrScores* scores = nullptr);

/// concat_streams with the scene/attribute scores computed from the
/// snippet's "scene" stream.
std::vector<double> snippet_vector(const SnippetFeatureSet& features, const StreamConfig& cfg,
                                   const SceneAttrWeights* weights);

/// Trainable part above the frozen extractors: categorical head (26),
/// VAD head (3) and the embedding projection W_emb (300, no bias).
class Model {
 public:
  explicit Model(StreamConfig streams, std::uint64_t seed = 0);
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;
  Model(Model&&) = default;
  Model& operator=(Model&&) = default;

  struct Outputs {
    nd::Tensor scores;     // (R, 26) raw
    nd::Tensor vad;        // (R, 3)
    nd::Tensor embedding;  // (R, 300)
  };

  /// Snippet-level forward over rows of a (R, concat_width) tensor.
  Outputs forward(const nd::Tensor& concat) const;
  nd::Tensor embed_project(const nd::Tensor& concat) const;

  std::vector<nn::Parameter*> parameters();
  std::vector<nn::BatchNorm*> batch_norms() { return {}; }
  nn::StateDict state();
  void load_state(const nn::StateDict& state, const nn::LoadFilter& filter = {});
  void reset(std::uint64_t seed);

  const StreamConfig& streams() const { return streams_; }
  std::size_t concat_width() const { return streams_.concat_width(); }

  nn::Linear categorical_head;
  nn::Linear vad_head;
  nn::Linear embedding;

 private:
  StreamConfig streams_;
};

/// Snippet-level prediction for one concatenated vector.
Prediction snippet_predict(const Model& model, std::span<const double> concat);

/// Elementwise average of raw snippet outputs.
Prediction consensus(const std::vector<Prediction>& snippets);

}  // namespace ctxemo::tsn
