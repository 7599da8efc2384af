#include "ctxemo/metrics.hpp"

#include <algorithm>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include <spdlog/spdlog.h>

#include "json.hpp"

namespace ctxemo::metrics {

namespace {

void check_lengths(std::size_t a, std::size_t b) {
  if (a != b) {
    throw std::invalid_argument("metric inputs differ in length (" + std::to_string(a) + " vs " +
                                std::to_string(b) + ")");
  }
}

double mean_defined(const std::vector<std::optional<double>>& values, std::size_t& skipped) {
  double total = 0.0;
  std::size_t n = 0;
  skipped = 0;
  for (const auto& v : values) {
    if (v) {
      total += *v;
      ++n;
    } else {
      ++skipped;
    }
  }
  return n ? total / static_cast<double>(n) : 0.0;
}

nlohmann::json optional_list(const std::vector<std::optional<double>>& v) {
  auto out = nlohmann::json::array();
  for (const auto& x : v) out.push_back(x ? nlohmann::json(*x) : nlohmann::json(nullptr));
  return out;
}

}  // namespace

std::optional<double> average_precision(std::span<const double> scores,
                                        std::span<const int> labels) {
  check_lengths(scores.size(), labels.size());
  const auto positives = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
  if (positives == 0) return std::nullopt;
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  double ap = 0.0;
  std::size_t tp = 0, seen = 0, tp_prev = 0;
  for (std::size_t i = 0; i < order.size();) {
    // Consume one threshold (a run of equal scores).
    const double s = scores[order[i]];
    while (i < order.size() && scores[order[i]] == s) {
      tp += labels[order[i]] == 1 ? 1 : 0;
      ++seen;
      ++i;
    }
    if (tp != tp_prev) {
      const double recall_step =
          static_cast<double>(tp - tp_prev) / static_cast<double>(positives);
      const double precision = static_cast<double>(tp) / static_cast<double>(seen);
      ap += recall_step * precision;
      tp_prev = tp;
    }
  }
  return ap;
}

std::optional<double> roc_auc(std::span<const double> scores, std::span<const int> labels) {
  check_lengths(scores.size(), labels.size());
  const auto positives = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
  const std::size_t negatives = labels.size() - positives;
  if (positives == 0 || negatives == 0) return std::nullopt;
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Twice the Mann-Whitney U, kept integral: 2 per correctly ordered pair, 1 per tie.
  std::uint64_t twice_u = 0;
  std::uint64_t negatives_below = 0;
  for (std::size_t i = 0; i < order.size();) {
    const double s = scores[order[i]];
    std::uint64_t pos_here = 0, neg_here = 0;
    while (i < order.size() && scores[order[i]] == s) {
      (labels[order[i]] == 1 ? pos_here : neg_here) += 1;
      ++i;
    }
    twice_u += pos_here * (2 * negatives_below + neg_here);
    negatives_below += neg_here;
  }
  return static_cast<double>(twice_u) /
         (2.0 * static_cast<double>(positives) * static_cast<double>(negatives));
}

std::optional<double> r_squared(std::span<const double> preds, std::span<const double> targets) {
  check_lengths(preds.size(), targets.size());
  if (targets.size() < 2) return std::nullopt;
  const double mean = std::accumulate(targets.begin(), targets.end(), 0.0) /
                      static_cast<double>(targets.size());
  double ss_res = 0.0, ss_tot = 0.0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    ss_res += (targets[i] - preds[i]) * (targets[i] - preds[i]);
    ss_tot += (targets[i] - mean) * (targets[i] - mean);
  }
  if (ss_tot == 0.0) return std::nullopt;
  return 1.0 - ss_res / ss_tot;
}

double ers(double mean_r2, double mean_ap, double mean_roc_auc) {
  return 0.5 * (mean_r2 + 0.5 * (mean_ap + mean_roc_auc));
}

EvaluationReport evaluate(const PredictionSet& predictions,
                          const std::vector<AnnotatedClip>& annotations,
                          std::vector<std::string> categories) {
  if (annotations.empty()) throw std::invalid_argument("evaluation needs at least one clip");
  if (predictions.items.size() != annotations.size()) {
    throw std::invalid_argument("prediction count (" + std::to_string(predictions.items.size()) +
                                ") differs from annotation count (" +
                                std::to_string(annotations.size()) + ")");
  }
  std::unordered_map<std::string, const Prediction*> by_id;
  for (const auto& p : predictions.items) {
    if (!by_id.emplace(p.clip_id, &p).second) {
      throw std::invalid_argument("duplicate prediction for clip '" + p.clip_id + "'");
    }
  }

  const std::size_t n = annotations.size();
  const bool apply_sigmoid = predictions.space == ScoreSpace::kLogit;
  std::vector<std::vector<double>> cat_scores(kNumCategories, std::vector<double>(n));
  std::vector<std::vector<int>> cat_labels(kNumCategories, std::vector<int>(n));
  std::vector<std::vector<double>> vad_pred(kNumVad, std::vector<double>(n));
  std::vector<std::vector<double>> vad_true(kNumVad, std::vector<double>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const auto& clip = annotations[i];
    auto it = by_id.find(clip.clip_id);
    if (it == by_id.end()) {
      throw std::invalid_argument("no prediction for clip '" + clip.clip_id + "'");
    }
    const Prediction& p = *it->second;
    if (p.categorical.size() != kNumCategories || p.vad.size() != kNumVad) {
      throw std::invalid_argument("prediction for clip '" + clip.clip_id + "' is malformed");
    }
    for (std::size_t c = 0; c < kNumCategories; ++c) {
      cat_scores[c][i] = apply_sigmoid ? sigmoid(p.categorical[c]) : p.categorical[c];
      cat_labels[c][i] = clip.annotation.categorical[c] >= kBinarizeThreshold ? 1 : 0;
    }
    for (std::size_t d = 0; d < kNumVad; ++d) {
      vad_pred[d][i] = std::clamp(p.vad[d], 0.0, 1.0);
      vad_true[d][i] = clip.annotation.vad[d];
    }
  }

  EvaluationReport r;
  r.clips = n;
  r.sigmoid_applied = apply_sigmoid;
  r.categories = std::move(categories);
  for (std::size_t c = 0; c < kNumCategories; ++c) {
    r.ap.push_back(average_precision(cat_scores[c], cat_labels[c]));
    r.roc_auc.push_back(roc_auc(cat_scores[c], cat_labels[c]));
  }
  for (std::size_t d = 0; d < kNumVad; ++d) r.r2.push_back(r_squared(vad_pred[d], vad_true[d]));
  r.mean_ap = mean_defined(r.ap, r.skipped_ap);
  r.mean_roc_auc = mean_defined(r.roc_auc, r.skipped_roc_auc);
  r.mean_r2 = mean_defined(r.r2, r.skipped_r2);
  r.ers = ers(r.mean_r2, r.mean_ap, r.mean_roc_auc);
  if (r.skipped_ap || r.skipped_roc_auc || r.skipped_r2) {
    spdlog::warn("undefined metrics excluded from means: {} AP, {} ROC-AUC, {} R2", r.skipped_ap,
                 r.skipped_roc_auc, r.skipped_r2);
  }
  return r;
}

std::string report_to_json(const EvaluationReport& r) {
  nlohmann::json doc;
  doc["format"] = "ctxemo-report";
  doc["version"] = 1;
  doc["clips"] = r.clips;
  doc["categories"] = r.categories;
  doc["ap"] = optional_list(r.ap);
  doc["roc_auc"] = optional_list(r.roc_auc);
  doc["r2"] = optional_list(r.r2);
  doc["mAP"] = r.mean_ap;
  doc["mRA"] = r.mean_roc_auc;
  doc["mR2"] = r.mean_r2;
  doc["ERS"] = r.ers;
  doc["skipped"] = {{"ap", r.skipped_ap}, {"roc_auc", r.skipped_roc_auc}, {"r2", r.skipped_r2}};
  doc["sigmoid_applied"] = r.sigmoid_applied;
  return doc.dump(2);
}

std::string report_to_text(const EvaluationReport& r) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(4);
  os << "clips " << r.clips << '\n';
  for (std::size_t c = 0; c < r.ap.size(); ++c) {
    os << "category " << (c < r.categories.size() ? r.categories[c] : std::to_string(c));
    os << " ap ";
    if (r.ap[c]) os << *r.ap[c]; else os << "undefined";
    os << " roc_auc ";
    if (r.roc_auc[c]) os << *r.roc_auc[c]; else os << "undefined";
    os << '\n';
  }
  const char* dims[] = {"valence", "arousal", "dominance"};
  for (std::size_t d = 0; d < r.r2.size(); ++d) {
    os << "dimension " << dims[d] << " r2 ";
    if (r.r2[d]) os << *r.r2[d]; else os << "undefined";
    os << '\n';
  }
  os << "mAP " << r.mean_ap << '\n'
     << "mRA " << r.mean_roc_auc << '\n'
     << "mR2 " << r.mean_r2 << '\n'
     << "ERS " << r.ers << '\n'
     << "skipped ap=" << r.skipped_ap << " roc_auc=" << r.skipped_roc_auc
     << " r2=" << r.skipped_r2 << '\n';
  return os.str();
}

}  // namespace ctxemo::metrics
