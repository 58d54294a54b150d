#pragma once

#include <vector>

#include "temporal_heads/tensor.hpp"

namespace temporal_heads {

enum class PoolKind { kMax, kMean };

/// Running statistics for batch normalization. Variance stays non-negative;
/// epsilon guards constant features.
struct BatchNormStats {
  Tensor running_mean;  // [D]
  Tensor running_var;   // [D]
  double momentum = 0.1;
  double epsilon = 1e-5;

  static BatchNormStats fresh(int dim) {
    BatchNormStats s;
    s.running_mean = Tensor::zeros({dim});
    s.running_var = Tensor::full({dim}, 1.0);
    return s;
  }
};

NodeId fully_connected(Graph& g, NodeId x, NodeId weight, NodeId bias);

/// Per-feature normalization over the batch rows of x [B x D]. Train mode
/// uses batch statistics (B >= 2) and, when update_running is set, folds
/// them into the running stats; eval mode normalizes with the running stats.
NodeId batch_norm(Graph& g, NodeId x, NodeId gamma, NodeId beta, Tensor& running_mean,
                  Tensor& running_var, double momentum, double epsilon, bool train,
                  bool update_running = true);
NodeId batch_norm(Graph& g, NodeId x, NodeId gamma, NodeId beta, BatchNormStats& stats,
                  bool train, bool update_running = true);

/// Per-feature max or mean over the column window [t0, t1) of x [D x T].
/// Max routes the gradient to the first argmax; mean accumulates in
/// value-sorted order so the result depends only on the window's multiset
/// of values, never on column order.
NodeId temporal_pool(Graph& g, NodeId x, PoolKind kind, int t0, int t1);

/// Convolution along the temporal axis of x [C x D x T] with kernels
/// [Cout x C x k], k odd, zero padding k/2 each side; the same kernel tap is
/// applied at every feature row, so rows never mix. T' = ceil(T / stride).
NodeId temporal_conv1d(Graph& g, NodeId x, NodeId kernels, int stride);
NodeId conv_channel_bias(Graph& g, NodeId x, NodeId bias);  // [C x D x T] + [C]

/// Collapses the channel axis of x [C x D x T] to one channel by max or mean.
NodeId channel_pool(Graph& g, NodeId x, PoolKind kind);

struct LstmState {
  NodeId hidden;  // [1 x H]
  NodeId cell;    // [1 x H]
};

struct LstmGateParams {
  NodeId w_x;   // [Din x H]
  NodeId w_h;   // [H x H]
  NodeId bias;  // [H]
};

struct LstmCellParams {
  LstmGateParams input_gate, forget_gate, output_gate, candidate;
};

/// Standard LSTM cell: sigmoid input/forget/output gates, tanh candidate.
LstmState lstm_step(Graph& g, NodeId x_row, const LstmState& state, const LstmCellParams& p);

/// Runs a stack of LSTM layers over the input rows with zero-initialized
/// states and returns the last time step's top-layer hidden state [1 x H].
NodeId lstm_stack(Graph& g, const std::vector<NodeId>& inputs,
                  const std::vector<LstmCellParams>& layers);

/// Row-wise softmax with max subtraction; rows sum to 1.
NodeId softmax_rows(Graph& g, NodeId logits);

/// Inverted dropout: train mode zeroes entries with probability p and scales
/// survivors by 1/(1-p); eval mode is the identity.
NodeId dropout(Graph& g, NodeId x, double p, bool train, Rng* rng);

}  // namespace temporal_heads
