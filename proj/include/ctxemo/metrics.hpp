#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ctxemo/types.hpp"

namespace ctxemo::metrics {

/// Non-interpolated area under the precision-recall curve:
/// sum over distinct score thresholds (descending) of (R_n - R_{n-1}) * P_n.
/// Tied scores form one threshold, so the value does not depend on input
/// order. nullopt when there are no positive labels.
std::optional<double> average_precision(std::span<const double> scores,
                                        std::span<const int> labels);

/// Mann-Whitney estimate: fraction of (positive, negative) pairs ranked
/// correctly, ties counted 1/2. nullopt unless both classes occur.
std::optional<double> roc_auc(std::span<const double> scores, std::span<const int> labels);

/// 1 - SS_res / SS_tot; nullopt for fewer than 2 samples or constant targets.
std::optional<double> r_squared(std::span<const double> preds, std::span<const double> targets);

/// Emotion recognition score: (mR2 + (mAP + mRA) / 2) / 2.
double ers(double mean_r2, double mean_ap, double mean_roc_auc);

struct EvaluationReport {
  std::size_t clips = 0;
  std::vector<std::optional<double>> ap;       // per category
  std::vector<std::optional<double>> roc_auc;  // per category
  std::vector<std::optional<double>> r2;       // valence, arousal, dominance
  double mean_ap = 0.0;
  double mean_roc_auc = 0.0;
  double mean_r2 = 0.0;
  double ers = 0.0;
  std::size_t skipped_ap = 0;
  std::size_t skipped_roc_auc = 0;
  std::size_t skipped_r2 = 0;
  bool sigmoid_applied = false;
  std::vector<std::string> categories;
};

/// Aligns predictions and annotations by clip id. Categorical ground
/// truth is binarized at 0.5; logit-space scores are passed through a
/// sigmoid before ranking; VAD predictions are clamped to [0,1].
/// Undefined per-class values are excluded from the means and counted.
EvaluationReport evaluate(const PredictionSet& predictions,
                          const std::vector<AnnotatedClip>& annotations,
                          std::vector<std::string> categories = {});

std::string report_to_json(const EvaluationReport& r);
std::string report_to_text(const EvaluationReport& r);

}  // namespace ctxemo::metrics
