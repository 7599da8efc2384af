#include "ctxemo/tsn.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "ctxemo/exact_mean.hpp"
#include "ctxemo/ops.hpp"

namespace ctxemo::tsn {

std::string_view to_string(Modality m) { return m == Modality::kRgb ? "rgb" : "flow"; }

Modality parse_modality(std::string_view s) {
  if (s == "rgb") return Modality::kRgb;
  if (s == "flow") return Modality::kFlow;
  throw std::invalid_argument("unknown modality '" + std::string(s) + "'");
}

StreamConfig StreamConfig::full_rgb() { return StreamConfig{}; }

StreamConfig StreamConfig::full_flow() {
  StreamConfig cfg;
  cfg.modality = Modality::kFlow;
  cfg.scene_attr = false;
  return cfg;
}

void StreamConfig::validate() const {
  if (modality == Modality::kFlow && scene_attr) {
    throw std::invalid_argument("scene/attribute scores are only available for the rgb modality");
  }
  if (!body && !context && !face && !scene_attr) {
    throw std::invalid_argument("stream configuration selects no inputs");
  }
}

std::size_t StreamConfig::concat_width() const {
  std::size_t w = 0;
  if (body) w += kStreamWidth;
  if (context) w += kStreamWidth;
  if (face) w += kStreamWidth;
  if (scene_attr) w += kNumScenes + kNumAttributes;
  return w;
}

std::vector<std::string> StreamConfig::required_streams() const {
  std::vector<std::string> out;
  if (body) out.emplace_back("body");
  if (context) out.emplace_back("context");
  if (face) out.emplace_back("face");
  if (scene_attr) out.emplace_back("scene");
  return out;
}

std::vector<std::pair<std::size_t, std::size_t>> segment_bounds(std::size_t num_frames,
                                                                std::size_t k) {
  if (k == 0) throw std::invalid_argument("segment count must be positive");
  if (num_frames < k) {
    throw std::invalid_argument("segment_bounds needs at least as many frames as segments");
  }
  std::vector<std::pair<std::size_t, std::size_t>> bounds;
  bounds.reserve(k);
  for (std::size_t i = 0; i < k; ++i) {
    bounds.emplace_back(i * num_frames / k, (i + 1) * num_frames / k);
  }
  return bounds;
}

std::vector<std::size_t> segment_sample(std::size_t num_frames, std::size_t k, SampleMode mode,
                                        Rng* rng) {
  if (k == 0) throw std::invalid_argument("segment count must be positive");
  if (num_frames == 0) throw std::invalid_argument("cannot sample segments from an empty clip");
  std::vector<std::size_t> idx(k);
  if (num_frames < k) {
    for (std::size_t i = 0; i < k; ++i) idx[i] = std::min(i, num_frames - 1);
    return idx;
  }
  if (mode == SampleMode::kTrain && rng == nullptr) {
    throw std::invalid_argument("training-mode segment sampling needs a random generator");
  }
  const auto bounds = segment_bounds(num_frames, k);
  for (std::size_t i = 0; i < k; ++i) {
    const auto [lo, hi] = bounds[i];
    const std::size_t len = hi - lo;
    idx[i] = mode == SampleMode::kEval ? lo + (len - 1) / 2 : lo + rng->uniform_int(len);
  }
  return idx;
}

void SceneAttrWeights::validate() const {
  if (!scenes.defined() || scenes.shape() != nd::Shape{kStreamWidth, kNumScenes}) {
    throw std::invalid_argument("scene weights must be 512x365");
  }
  if (!attributes.defined() || attributes.shape() != nd::Shape{kStreamWidth, kNumAttributes}) {
    throw std::invalid_argument("attribute weights must be 512x102");
  }
  for (const auto* t : {&scenes, &attributes})
    for (double v : t->values())
      if (!std::isfinite(v)) throw std::invalid_argument("scene/attribute weights are not finite");
}

SceneAttrScores scene_attr_scores(std::span<const double> feature, const SceneAttrWeights& w) {
  if (feature.size() != kStreamWidth) {
    throw std::invalid_argument("scene feature must have 512 values, got " +
                                std::to_string(feature.size()));
  }
  nd::NoGradGuard no_grad;
  const nd::Tensor row({1, kStreamWidth}, {feature.begin(), feature.end()});
  const auto scenes = nd::softmax_rows(nd::matmul(row, w.scenes));
  const auto attrs = nd::softmax_rows(nd::matmul(row, w.attributes));
  return {{scenes.values().begin(), scenes.values().end()},
          {attrs.values().begin(), attrs.values().end()}};
}

std::vector<double> concat_streams(const SnippetFeatureSet& features, const StreamConfig& cfg,
                                   const SceneAttrScores* scores) {
  cfg.validate();
  if (features.modality != cfg.modality) {
    throw std::invalid_argument("snippet modality " + std::string(to_string(features.modality)) +
                                " does not match configuration " +
                                std::string(to_string(cfg.modality)));
  }
  std::vector<double> out;
  out.reserve(cfg.concat_width());
  auto append = [&](const char* name) {
    auto it = features.streams.find(name);
    if (it == features.streams.end()) {
      throw std::invalid_argument(std::string("snippet is missing stream '") + name + "'");
    }
    if (it->second.size() != kStreamWidth) {
      throw std::invalid_argument(std::string("stream '") + name + "' has width " +
                                  std::to_string(it->second.size()) + ", expected 512");
    }
    out.insert(out.end(), it->second.begin(), it->second.end());
  };
  if (cfg.body) append("body");
  if (cfg.context) append("context");
  if (cfg.face) append("face");
  if (cfg.scene_attr) {
    if (scores == nullptr) throw std::invalid_argument("scene/attribute scores are required");
    if (scores->scenes.size() != kNumScenes || scores->attributes.size() != kNumAttributes) {
      throw std::invalid_argument("scene/attribute scores have the wrong width");
    }
    out.insert(out.end(), scores->scenes.begin(), scores->scenes.end());
    out.insert(out.end(), scores->attributes.begin(), scores->attributes.end());
  }
  return out;
}

std::vector<double> snippet_vector(const SnippetFeatureSet& features, const StreamConfig& cfg,
                                   const SceneAttrWeights* weights) {
  if (!cfg.scene_attr) return concat_streams(features, cfg);
  if (weights == nullptr) throw std::invalid_argument("scene/attribute weights are required");
  auto it = features.streams.find("scene");
  if (it == features.streams.end()) {
    throw std::invalid_argument("snippet is missing stream 'scene'");
  }
  const auto scores = scene_attr_scores(it->second, *weights);
  return concat_streams(features, cfg, &scores);
}

Model::Model(StreamConfig streams, std::uint64_t seed)
    : categorical_head("categorical_head", streams.concat_width(), kNumCategories),
      vad_head("vad_head", streams.concat_width(), kNumVad),
      embedding("embedding", streams.concat_width(), kEmbeddingDim, false),
      streams_(streams) {
  streams_.validate();
  reset(seed);
}

void Model::reset(std::uint64_t seed) {
  Rng rng(seed);
  categorical_head.reset(rng);
  vad_head.reset(rng);
  embedding.reset(rng);
}

Model::Outputs Model::forward(const nd::Tensor& concat) const {
  if (concat.rank() != 2 || concat.dim(1) != concat_width()) {
    throw std::invalid_argument("TSN input must be (R," + std::to_string(concat_width()) +
                                "), got " + nd::shape_str(concat.shape()));
  }
  return {categorical_head.forward(concat), vad_head.forward(concat), embedding.forward(concat)};
}

nd::Tensor Model::embed_project(const nd::Tensor& concat) const {
  if (concat.rank() != 2 || concat.dim(1) != concat_width()) {
    throw std::invalid_argument("embedding input must be (R," + std::to_string(concat_width()) +
                                "), got " + nd::shape_str(concat.shape()));
  }
  return embedding.forward(concat);
}

std::vector<nn::Parameter*> Model::parameters() {
  std::vector<nn::Parameter*> params;
  categorical_head.collect(params);
  vad_head.collect(params);
  embedding.collect(params);
  return params;
}

nn::StateDict Model::state() { return nn::collect_state(parameters(), {}); }

void Model::load_state(const nn::StateDict& state, const nn::LoadFilter& filter) {
  nn::apply_state(state, parameters(), {}, filter);
}

Prediction snippet_predict(const Model& model, std::span<const double> concat) {
  nd::NoGradGuard no_grad;
  const nd::Tensor row({1, concat.size()}, {concat.begin(), concat.end()});
  const auto out = model.forward(row);
  Prediction p;
  p.categorical.assign(out.scores.values().begin(), out.scores.values().end());
  p.vad.assign(out.vad.values().begin(), out.vad.values().end());
  return p;
}

Prediction consensus(const std::vector<Prediction>& snippets) {
  if (snippets.empty()) throw std::invalid_argument("consensus over zero snippets");
  const auto& first = snippets.front();
  for (const auto& s : snippets) {
    if (s.categorical.size() != first.categorical.size() || s.vad.size() != first.vad.size()) {
      throw std::invalid_argument("snippet predictions differ in shape");
    }
  }
  Prediction out;
  out.clip_id = first.clip_id;
  auto reduce = [&](auto member, std::vector<double>& dst) {
    const std::size_t n = (first.*member).size();
    dst.assign(n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      MeanAccumulator acc;
      for (const auto& s : snippets) acc.add((s.*member)[j]);
      dst[j] = acc.mean();
    }
  };
  reduce(&Prediction::categorical, out.categorical);
  reduce(&Prediction::vad, out.vad);
  return out;
}

}  // namespace ctxemo::tsn
