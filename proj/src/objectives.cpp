#include "ctxemo/objectives.hpp"

#include <stdexcept>

#include "ctxemo/ops.hpp"

namespace ctxemo::objectives {

namespace {

void same_shape(const char* what, const nd::Tensor& a, const nd::Tensor& b) {
  if (a.shape() != b.shape()) {
    throw std::invalid_argument(std::string(what) + ": shape mismatch " + nd::shape_str(a.shape()) +
                                " vs " + nd::shape_str(b.shape()));
  }
}

}  // namespace

nd::Tensor loss_cat1(const nd::Tensor& scores, const nd::Tensor& confidences) {
  same_shape("loss_cat1", scores, confidences);
  return nd::mse(nd::sigmoid(scores), confidences);
}

nd::Tensor loss_cat2(const nd::Tensor& scores, const nd::Tensor& confidences, double threshold) {
  same_shape("loss_cat2", scores, confidences);
  std::vector<double> targets(confidences.values().begin(), confidences.values().end());
  targets = binarize(targets, threshold);
  return nd::bce_with_logits(scores, nd::Tensor(confidences.shape(), std::move(targets)));
}

nd::Tensor loss_cont(const nd::Tensor& vad_pred, const nd::Tensor& vad_true) {
  same_shape("loss_cont", vad_pred, vad_true);
  return nd::mse(vad_pred, vad_true);
}

nd::Tensor loss_emb(const nd::Tensor& projected, const nd::Tensor& targets,
                    const std::vector<double>& mask) {
  same_shape("loss_emb", projected, targets);
  if (projected.rank() != 2 || mask.size() != projected.dim(0)) {
    throw std::invalid_argument("loss_emb: mask length does not match " +
                                nd::shape_str(projected.shape()));
  }
  const std::size_t rows = projected.dim(0), d = projected.dim(1);
  std::vector<double> wide(rows * d);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < d; ++j) wide[r * d + j] = mask[r];
  const auto diff = nd::sub(projected, targets);
  const auto sq = nd::mul(nd::mul(diff, diff), nd::Tensor(projected.shape(), std::move(wide)));
  return nd::scale(nd::sum(sq), 1.0 / static_cast<double>(rows));
}

EmbeddingTable::EmbeddingTable(std::vector<std::string> labels,
                               std::vector<std::vector<double>> vectors)
    : labels_(std::move(labels)) {
  if (labels_.size() != vectors.size()) {
    throw std::invalid_argument("embedding table: label and vector counts differ");
  }
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    if (vectors[i].size() != kDim) {
      throw std::invalid_argument("embedding for '" + labels_[i] + "' has " +
                                  std::to_string(vectors[i].size()) + " values, expected 300");
    }
    if (!vectors_.emplace(labels_[i], std::move(vectors[i])).second) {
      throw std::invalid_argument("embedding table lists '" + labels_[i] + "' twice");
    }
  }
}

void EmbeddingTable::require(const std::vector<std::string>& vocabulary) const {
  for (const auto& label : vocabulary) {
    if (!vectors_.count(label)) {
      throw std::invalid_argument("embedding table has no vector for category '" + label + "'");
    }
  }
}

const std::vector<double>& EmbeddingTable::at(const std::string& label) const {
  auto it = vectors_.find(label);
  if (it == vectors_.end()) throw std::out_of_range("no embedding for '" + label + "'");
  return it->second;
}

std::optional<std::vector<double>> EmbeddingTable::positive_mean(
    const std::vector<double>& confidences, const std::vector<std::string>& vocabulary,
    double threshold) const {
  if (confidences.size() != vocabulary.size()) {
    throw std::invalid_argument("confidences do not match the vocabulary size");
  }
  std::vector<double> acc(kDim, 0.0);
  std::size_t positives = 0;
  for (std::size_t i = 0; i < confidences.size(); ++i) {
    if (confidences[i] < threshold) continue;
    const auto& e = at(vocabulary[i]);
    for (std::size_t j = 0; j < kDim; ++j) acc[j] += e[j];
    ++positives;
  }
  if (positives == 0) return std::nullopt;
  for (auto& v : acc) v /= static_cast<double>(positives);
  return acc;
}

nd::Tensor combined_loss(const LossParts& parts, bool include_embedding,
                         const LossWeights& weights) {
  nd::Tensor total = nd::add(nd::add(nd::scale(parts.cat1, weights.cat1),
                                     nd::scale(parts.cat2, weights.cat2)),
                             nd::scale(parts.cont, weights.cont));
  if (include_embedding) {
    if (!parts.emb.defined()) throw std::invalid_argument("embedding loss term is missing");
    total = nd::add(total, nd::scale(parts.emb, weights.emb));
  }
  return total;
}

EmbeddingTargets embedding_targets(const std::vector<const EmotionAnnotation*>& batch,
                                   const EmbeddingTable& table,
                                   const std::vector<std::string>& vocabulary,
                                   std::size_t repeat) {
  constexpr std::size_t d = EmbeddingTable::kDim;
  EmbeddingTargets out;
  std::vector<double> values;
  values.reserve(batch.size() * repeat * d);
  for (const auto* ann : batch) {
    const auto mean = table.positive_mean(ann->categorical, vocabulary);
    if (!mean) ++out.skipped;
    for (std::size_t k = 0; k < repeat; ++k) {
      if (mean) {
        values.insert(values.end(), mean->begin(), mean->end());
      } else {
        values.insert(values.end(), d, 0.0);
      }
      out.mask.push_back(mean ? 1.0 : 0.0);
    }
  }
  out.targets = nd::Tensor({batch.size() * repeat, d}, std::move(values));
  return out;
}

}  // namespace ctxemo::objectives
