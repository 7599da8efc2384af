#include "ctxemo/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <unordered_map>

#include "ctxemo/exact_mean.hpp"

namespace ctxemo::fusion {

std::string_view to_string(Scheme s) {
  switch (s) {
    case Scheme::kMaximum: return "maximum";
    case Scheme::kAverage: return "average";
    case Scheme::kWeightedAverage: return "weighted_average";
  }
  return "?";
}

Scheme parse_scheme(std::string_view s) {
  if (s == "maximum" || s == "max") return Scheme::kMaximum;
  if (s == "average" || s == "mean") return Scheme::kAverage;
  if (s == "weighted_average" || s == "weighted") return Scheme::kWeightedAverage;
  throw std::invalid_argument("unknown fusion scheme '" + std::string(s) + "'");
}

namespace {

// Weights scaled so the smallest is 1: equal weights become exactly 1 and the
// weighted path reduces to the plain average.
std::vector<double> effective_weights(const FusionSpec& spec, std::size_t models) {
  if (spec.scheme != Scheme::kWeightedAverage) return std::vector<double>(models, 1.0);
  if (spec.weights.size() != models) {
    throw std::invalid_argument("fusion has " + std::to_string(models) + " models but " +
                                std::to_string(spec.weights.size()) + " weights");
  }
  for (double w : spec.weights) {
    if (!(w > 0.0) || !std::isfinite(w)) {
      throw std::invalid_argument("fusion weights must be positive and finite");
    }
  }
  const double lo = *std::min_element(spec.weights.begin(), spec.weights.end());
  std::vector<double> out;
  for (double w : spec.weights) out.push_back(w / lo);
  return out;
}

}  // namespace

PredictionSet fuse(const std::vector<PredictionSet>& models, const FusionSpec& spec) {
  if (models.empty()) throw std::invalid_argument("fusion needs at least one prediction set");
  const auto weights = effective_weights(spec, models.size());
  const auto& ref = models.front();

  // Index every set by clip id and check that the id sets coincide.
  std::vector<std::unordered_map<std::string, const Prediction*>> index(models.size());
  for (std::size_t m = 0; m < models.size(); ++m) {
    for (const auto& p : models[m].items) {
      if (p.categorical.size() != kNumCategories || p.vad.size() != kNumVad) {
        throw std::invalid_argument("prediction for clip '" + p.clip_id + "' is malformed");
      }
      if (!index[m].emplace(p.clip_id, &p).second) {
        throw std::invalid_argument("prediction set " + std::to_string(m) +
                                    " repeats clip '" + p.clip_id + "'");
      }
    }
    if (models[m].items.size() != ref.items.size()) {
      throw std::invalid_argument("prediction sets cover different clips (" +
                                  std::to_string(ref.items.size()) + " vs " +
                                  std::to_string(models[m].items.size()) + ")");
    }
  }

  PredictionSet out;
  out.model = "fused-" + std::string(to_string(spec.scheme));
  out.space = ScoreSpace::kProbability;
  out.items.reserve(ref.items.size());
  std::vector<const Prediction*> row(models.size());
  for (const auto& first : ref.items) {
    for (std::size_t m = 0; m < models.size(); ++m) {
      auto it = index[m].find(first.clip_id);
      if (it == index[m].end()) {
        throw std::invalid_argument("clip '" + first.clip_id + "' is missing from prediction set " +
                                    std::to_string(m));
      }
      row[m] = it->second;
    }
    Prediction fused;
    fused.clip_id = first.clip_id;
    auto combine = [&](auto value_of, std::size_t n, std::vector<double>& dst) {
      for (std::size_t j = 0; j < n; ++j) {
        if (spec.scheme == Scheme::kMaximum) {
          double best = value_of(0, j);
          for (std::size_t m = 1; m < models.size(); ++m) best = std::max(best, value_of(m, j));
          dst[j] = best;
        } else {
          MeanAccumulator acc;
          for (std::size_t m = 0; m < models.size(); ++m) acc.add(value_of(m, j), weights[m]);
          dst[j] = acc.mean();
        }
      }
    };
    combine(
        [&](std::size_t m, std::size_t j) {
          const double v = row[m]->categorical[j];
          return models[m].space == ScoreSpace::kLogit ? sigmoid(v) : v;
        },
        kNumCategories, fused.categorical);
    combine([&](std::size_t m, std::size_t j) { return row[m]->vad[j]; }, kNumVad, fused.vad);
    out.items.push_back(std::move(fused));
  }
  return out;
}

}  // namespace ctxemo::fusion
