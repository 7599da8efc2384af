#include "ctxemo/synthetic.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace ctxemo::synthetic {

const std::vector<std::string>& default_categories() {
  static const std::vector<std::string> labels{
      "Peace",       "Affection",    "Esteem",      "Anticipation",  "Engagement",
      "Confidence",  "Happiness",    "Pleasure",    "Excitement",    "Surprise",
      "Sympathy",    "Doubt/Confusion", "Disconnection", "Fatigue",  "Embarrassment",
      "Yearning",    "Disapproval",  "Aversion",    "Annoyance",     "Anger",
      "Sensitivity", "Sadness",      "Disquietment", "Fear",         "Pain",
      "Suffering"};
  return labels;
}

EmotionAnnotation class_annotation(std::size_t label) {
  if (label > 1) throw std::invalid_argument("synthetic data has two classes");
  EmotionAnnotation a;
  a.categorical[label] = 1.0;
  a.vad = label == 0 ? std::vector<double>{0.8, 0.7, 0.6} : std::vector<double>{0.2, 0.3, 0.4};
  return a;
}

namespace {

// Upright base pose in OpenPose order, unit height scale.
constexpr double kBase[18][2] = {
    {0.00, -0.90}, {0.00, -0.70}, {-0.20, -0.70}, {-0.30, -0.45}, {-0.35, -0.20},
    {0.20, -0.70}, {0.30, -0.45}, {0.35, -0.20}, {-0.12, 0.00},  {-0.14, 0.45},
    {-0.15, 0.90}, {0.12, 0.00},  {0.14, 0.45},  {0.15, 0.90},   {-0.05, -0.95},
    {0.05, -0.95}, {-0.10, -0.92}, {0.10, -0.92}};

// Keeps concatenated inputs near the magnitude of pooled backbone features.
constexpr double kFeatureScale = 0.1;

}  // namespace

data::SkeletonSequence skeleton_clip(const std::string& id, std::size_t label, std::size_t frames,
                                     Rng& rng) {
  data::SkeletonSequence s(id, frames);
  s.annotation = class_annotation(label);
  const double scale = rng.uniform(80.0, 160.0);
  const double cx = rng.uniform(200.0, 400.0), cy = rng.uniform(200.0, 300.0);
  const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double speed = label == 0 ? rng.uniform(0.6, 0.9) : rng.uniform(0.1, 0.2);
  for (std::size_t t = 0; t < frames; ++t) {
    const double wave = std::sin(phase + speed * static_cast<double>(t));
    for (std::size_t v = 0; v < data::kNumJoints; ++v) {
      double x = kBase[v][0], y = kBase[v][1];
      const bool elbow = v == 3 || v == 6, wrist = v == 4 || v == 7;
      const double side = v < 5 ? -1.0 : 1.0;
      if (label == 0) {
        // Arms raised above the shoulders, wrists swinging.
        if (elbow) { x += side * 0.05; y -= 0.45; }
        if (wrist) { x += side * (0.05 + 0.15 * wave); y -= 0.85 + 0.1 * wave; }
      } else {
        // Arms hanging close to the body, head dropped forward.
        if (elbow) { x -= side * 0.08; y += 0.10; }
        if (wrist) { x -= side * 0.15; y += 0.25 + 0.02 * wave; }
        if (v == 0 || v >= 14) y += 0.15;
      }
      s.at(0, t, v) = cx + scale * (x + rng.uniform(-0.01, 0.01));
      s.at(1, t, v) = cy + scale * (y + rng.uniform(-0.01, 0.01));
      s.at(2, t, v) = rng.uniform(0.7, 1.0);
    }
  }
  return s;
}

std::vector<data::SkeletonSequence> skeleton_clips(std::size_t count, std::size_t min_frames,
                                                   std::size_t max_frames, std::uint64_t seed,
                                                   const std::string& prefix) {
  if (min_frames == 0 || min_frames > max_frames) {
    throw std::invalid_argument("synthetic frame range is empty");
  }
  Rng rng(seed);
  std::vector<data::SkeletonSequence> clips;
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t frames = min_frames + rng.uniform_int(max_frames - min_frames + 1);
    char id[64];
    std::snprintf(id, sizeof id, "%s_%04zu", prefix.c_str(), i);
    clips.push_back(skeleton_clip(id, i % 2, frames, rng));
  }
  return clips;
}

io::FeatureFile feature_file(const std::string& clip_id, std::size_t label, std::size_t frames,
                             tsn::Modality modality, double noise, Rng& rng,
                             std::uint64_t class_seed) {
  io::FeatureFile f;
  f.clip_id = clip_id;
  f.modality = modality;
  f.frames = frames;
  std::vector<std::string> names{"body", "context", "face"};
  if (modality == tsn::Modality::kRgb) names.emplace_back("scene");
  for (std::size_t s = 0; s < names.size(); ++s) {
    // Class centroids are shared by all clips generated with `class_seed`.
    Rng centroid(class_seed * 131 + label * 17 + s * 3 +
                 (modality == tsn::Modality::kFlow ? 1000 : 0));
    std::vector<double> mean(tsn::kStreamWidth);
    for (auto& m : mean) m = centroid.normal();
    std::vector<double> values(frames * tsn::kStreamWidth);
    for (std::size_t t = 0; t < frames; ++t)
      for (std::size_t j = 0; j < tsn::kStreamWidth; ++j)
        values[t * tsn::kStreamWidth + j] = kFeatureScale * (mean[j] + noise * rng.normal());
    f.streams.emplace(names[s], std::move(values));
  }
  f.face_present = std::vector<double>(frames, 1.0);
  return f;
}

tsn::SceneAttrWeights scene_attr_weights(std::uint64_t seed) {
  Rng rng(seed);
  auto mat = [&](std::size_t cols) {
    std::vector<double> v(tsn::kStreamWidth * cols);
    for (auto& x : v) x = 0.05 * rng.normal();
    return nd::Tensor({tsn::kStreamWidth, cols}, std::move(v));
  };
  tsn::SceneAttrWeights w;
  w.scenes = mat(tsn::kNumScenes);
  w.attributes = mat(tsn::kNumAttributes);
  return w;
}

objectives::EmbeddingTable embedding_table(const std::vector<std::string>& labels,
                                           std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::vector<double>> vectors;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    std::vector<double> v(objectives::EmbeddingTable::kDim);
    for (auto& x : v) x = 0.1 * rng.normal();
    vectors.push_back(std::move(v));
  }
  return objectives::EmbeddingTable(labels, std::move(vectors));
}

std::filesystem::path write_dataset(const std::filesystem::path& dir, const Options& options) {
  std::filesystem::create_directories(dir);
  const std::size_t total = options.train + options.val + options.test;
  auto clips = skeleton_clips(total, options.min_frames, options.max_frames, options.seed);

  io::DatasetManifest m;
  m.categories = default_categories();
  m.t_max = 0;
  std::vector<AnnotatedClip> anns;
  for (std::size_t i = 0; i < clips.size(); ++i) {
    const std::string split =
        i < options.train ? "train" : (i < options.train + options.val ? "val" : "test");
    m.splits[split].push_back(clips[i].clip_id);
    if (split == "train") m.t_max = std::max(m.t_max, clips[i].frames);
    anns.push_back({clips[i].clip_id, clips[i].frames, clips[i].annotation});
  }
  // t_max comes from the training split, raised if a held-out clip is longer.
  for (const auto& c : clips) m.t_max = std::max(m.t_max, c.frames);
  m.paths = {{"skeletons", "skeletons.jsonl"},
             {"annotations", "annotations.jsonl"},
             {"features", "features"},
             {"scene_attr_weights", "scene_attr_weights.bin"},
             {"embeddings", "embeddings.txt"}};
  io::save_skeletons(dir / "skeletons.jsonl", clips);
  io::save_annotations(dir / "annotations.jsonl", anns);
  io::save_scene_attr_weights(dir / "scene_attr_weights.bin", scene_attr_weights(options.seed + 1));
  io::save_embeddings(dir / "embeddings.txt", embedding_table(m.categories, options.seed + 2));
  if (options.with_features) {
    Rng rng(options.seed + 3);
    for (std::size_t i = 0; i < clips.size(); ++i) {
      for (auto mod : {tsn::Modality::kRgb, tsn::Modality::kFlow}) {
        const auto f = feature_file(clips[i].clip_id, i % 2, clips[i].frames, mod,
                                    options.feature_noise, rng, options.seed);
        io::save_features(io::feature_path(dir / "features", clips[i].clip_id, mod), f);
      }
    }
  }
  const auto manifest_path = dir / "manifest.json";
  io::save_manifest(manifest_path, m);
  return manifest_path;
}

}  // namespace ctxemo::synthetic
