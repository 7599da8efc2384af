#include "ctxemo/types.hpp"

#include <cmath>
#include <stdexcept>

namespace ctxemo {

void EmotionAnnotation::validate(std::string_view clip_id) const {
  const std::string id(clip_id);
  if (categorical.size() != kNumCategories) {
    throw std::invalid_argument("clip '" + id + "': expected " + std::to_string(kNumCategories) +
                                " categorical scores, got " + std::to_string(categorical.size()));
  }
  if (vad.size() != kNumVad) {
    throw std::invalid_argument("clip '" + id + "': expected " + std::to_string(kNumVad) +
                                " VAD values, got " + std::to_string(vad.size()));
  }
  for (double c : categorical) {
    if (!(c >= 0.0 && c <= 1.0)) {
      throw std::invalid_argument("clip '" + id + "': categorical confidence " +
                                  std::to_string(c) + " outside [0,1]");
    }
  }
  for (double v : vad) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw std::invalid_argument("clip '" + id + "': VAD value " + std::to_string(v) +
                                  " outside [0,1]");
    }
  }
}

std::vector<double> binarize(const std::vector<double>& confidences, double threshold) {
  std::vector<double> out(confidences.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = confidences[i] >= threshold ? 1.0 : 0.0;
  return out;
}

std::string_view to_string(ScoreSpace s) {
  return s == ScoreSpace::kLogit ? "logit" : "probability";
}

ScoreSpace parse_score_space(std::string_view s) {
  if (s == "logit") return ScoreSpace::kLogit;
  if (s == "probability") return ScoreSpace::kProbability;
  throw std::invalid_argument("unknown score space '" + std::string(s) + "'");
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace ctxemo
