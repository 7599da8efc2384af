#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ctxemo/tensor.hpp"
#include "ctxemo/types.hpp"

namespace ctxemo::objectives {

/// MSE between sigmoid(scores) and the raw confidences. (N,26) each.
nd::Tensor loss_cat1(const nd::Tensor& scores, const nd::Tensor& confidences);
/// BCE between sigmoid(scores) and confidences binarized at `threshold`
/// (ties positive), in logit form.
nd::Tensor loss_cat2(const nd::Tensor& scores, const nd::Tensor& confidences,
                     double threshold = kBinarizeThreshold);
/// MSE over the three VAD dimensions.
nd::Tensor loss_cont(const nd::Tensor& vad_pred, const nd::Tensor& vad_true);
/// Mean over rows of ||projected_r - target_r||^2 where mask_r = 1; rows with
/// mask 0 contribute zero but still count in the mean. projected/target are
/// (R,D), mask is (R).
nd::Tensor loss_emb(const nd::Tensor& projected, const nd::Tensor& targets,
                    const std::vector<double>& mask);

/// Word embeddings for the categorical vocabulary.
class EmbeddingTable {
 public:
  static constexpr std::size_t kDim = 300;

  EmbeddingTable() = default;
  EmbeddingTable(std::vector<std::string> labels, std::vector<std::vector<double>> vectors);

  /// Checks that every label of `vocabulary` has a vector.
  void require(const std::vector<std::string>& vocabulary) const;

  const std::vector<double>& at(const std::string& label) const;
  const std::vector<std::string>& labels() const { return labels_; }
  std::size_t size() const { return labels_.size(); }
  bool operator==(const EmbeddingTable&) const = default;

  /// Mean embedding of the positive labels; nullopt when there are none.
  std::optional<std::vector<double>> positive_mean(const std::vector<double>& confidences,
                                                   const std::vector<std::string>& vocabulary,
                                                   double threshold = kBinarizeThreshold) const;

 private:
  std::vector<std::string> labels_;
  std::map<std::string, std::vector<double>> vectors_;
};

struct LossWeights {
  double cat1 = 1.0;
  double cat2 = 1.0;
  double cont = 1.0;
  double emb = 1.0;
};

struct LossParts {
  nd::Tensor cat1;
  nd::Tensor cat2;
  nd::Tensor cont;
  nd::Tensor emb;  // may be undefined when the embedding term is not used
};

/// L = L_cat1 + L_cat2 + L_cont (+ L_emb when `include_embedding`).
nd::Tensor combined_loss(const LossParts& parts, bool include_embedding,
                         const LossWeights& weights = {});

/// Embedding targets for a batch: row r is the positive-label mean of
/// annotation r (zeros and mask 0 when no label is positive).
struct EmbeddingTargets {
  nd::Tensor targets;
  std::vector<double> mask;
  std::size_t skipped = 0;
};
EmbeddingTargets embedding_targets(const std::vector<const EmotionAnnotation*>& batch,
                                   const EmbeddingTable& table,
                                   const std::vector<std::string>& vocabulary,
                                   std::size_t repeat = 1);

}  // namespace ctxemo::objectives
