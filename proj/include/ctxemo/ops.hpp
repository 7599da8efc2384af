#pragma once

#include <vector>

#include "ctxemo/rng.hpp"
#include "ctxemo/tensor.hpp"

// Differentiable operations. Every op validates shapes and reports both
// operand shapes on mismatch (std::invalid_argument).
namespace ctxemo::nd {

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor reshape(const Tensor& a, Shape shape);

/// (M,K) x (K,N) -> (M,N)
Tensor matmul(const Tensor& a, const Tensor& b);
/// x (N,in), weight (out,in), optional bias (out) -> (N,out)
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias = {});

/// Pointwise channel mixing: x (N,Cin,T,V), weight (Cout,Cin), bias (Cout).
Tensor conv1x1(const Tensor& x, const Tensor& weight, const Tensor& bias = {});

/// Convolution along T with zero padding (kernel-1)/2 on both sides.
/// x (N,Cin,T,V), weight (Cout,Cin,kernel), bias (Cout); kernel must be odd.
/// Output length is ceil(T / stride).
Tensor temporal_conv(const Tensor& x, const Tensor& weight, const Tensor& bias,
                     std::size_t stride);

/// x (N,K*C,T,V) viewed as (N,K,C,T,V), adjacency (K,V,W):
/// out[n,c,t,w] = sum_k sum_v x[n,k,c,t,v] * adjacency[k,v,w].
Tensor graph_aggregate(const Tensor& x, const Tensor& adjacency);

struct BatchStats {
  std::vector<double> mean;
  std::vector<double> var;  // biased
};

/// Normalizes over every axis except 1 using the statistics of `x` itself.
/// x is (N,C) or (N,C,T,V); gamma/beta are (C).
Tensor batch_norm_train(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps,
                        BatchStats* stats = nullptr);
/// Normalizes with fixed statistics (no gradient through mean/var).
Tensor batch_norm_fixed(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                        const std::vector<double>& mean, const std::vector<double>& var,
                        double eps);

Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
/// Softmax over the last axis of a (N,D) tensor.
Tensor softmax_rows(const Tensor& x);

/// (N,C,T,V) -> (N,C), mean over T and V.
Tensor global_avg_pool(const Tensor& x);
/// (N*K,D) -> (N,D); mean over consecutive groups of K rows.
Tensor group_mean(const Tensor& x, std::size_t group);
/// Column-wise concatenation of (N,D_i) tensors.
Tensor concat_cols(const std::vector<Tensor>& parts);
/// Columns [start, start+count) of a (N,D) tensor.
Tensor slice_cols(const Tensor& x, std::size_t start, std::size_t count);

/// Inverted dropout; identity when p == 0.
Tensor dropout(const Tensor& x, double p, Rng& rng);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

/// Mean of squared differences over all elements.
Tensor mse(const Tensor& a, const Tensor& b);
/// Mean binary cross-entropy of sigmoid(logits) against targets in [0,1],
/// evaluated as max(x,0) - x*y + log(1 + exp(-|x|)).
Tensor bce_with_logits(const Tensor& logits, const Tensor& targets);

}  // namespace ctxemo::nd
