#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace ctxemo {

inline constexpr std::size_t kNumCategories = 26;
inline constexpr std::size_t kNumVad = 3;
inline constexpr std::size_t kNumOutputs = kNumCategories + kNumVad;
inline constexpr double kBinarizeThreshold = 0.5;

/// Ground truth: 26 categorical confidences and valence/arousal/dominance,
/// all in [0, 1].
struct EmotionAnnotation {
  std::vector<double> categorical = std::vector<double>(kNumCategories, 0.0);
  std::vector<double> vad = std::vector<double>(kNumVad, 0.0);

  /// Throws std::invalid_argument naming `clip_id` on a size or range violation.
  void validate(std::string_view clip_id) const;
  bool operator==(const EmotionAnnotation&) const = default;
};

/// 1 where the confidence reaches the threshold (ties count as positive).
std::vector<double> binarize(const std::vector<double>& confidences,
                             double threshold = kBinarizeThreshold);

enum class ScoreSpace { kLogit, kProbability };
std::string_view to_string(ScoreSpace s);
ScoreSpace parse_score_space(std::string_view s);

struct Prediction {
  std::string clip_id;
  std::vector<double> categorical = std::vector<double>(kNumCategories, 0.0);
  std::vector<double> vad = std::vector<double>(kNumVad, 0.0);
  bool operator==(const Prediction&) const = default;
};

/// Video-level predictions of one model. Categorical scores are raw logits
/// straight from a model, or probabilities after fusion.
struct PredictionSet {
  std::string model;
  ScoreSpace space = ScoreSpace::kLogit;
  std::vector<Prediction> items;
  bool operator==(const PredictionSet&) const = default;
};

struct AnnotatedClip {
  std::string clip_id;
  std::size_t frames = 0;
  EmotionAnnotation annotation;
  bool operator==(const AnnotatedClip&) const = default;
};

double sigmoid(double x);

}  // namespace ctxemo
