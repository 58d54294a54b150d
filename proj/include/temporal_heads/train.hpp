#pragma once

#include <string>
#include <vector>

#include "temporal_heads/data.hpp"
#include "temporal_heads/model.hpp"

namespace temporal_heads {

struct TrainConfig {
  double lr = 5e-5;  // paper defaults: 5e-5 for TS-LSTM, 1e-4 for Temporal-ConvNet
  double weight_decay = 0.0;
  int batch_size = 32;
  int max_epochs = 100;
  int plateau_patience = 5;
  double lr_decay_factor = 0.1;
  uint64_t seed = 1;

  void validate() const;
};

struct TrainReport {
  std::vector<double> train_loss;
  std::vector<double> train_accuracy;
  std::vector<double> eval_accuracy;
  uint64_t final_checksum = 0;
  double wall_time_sec = 0.0;
};

/// Mean of -log p[label] over the batch, probabilities clamped away from 0
/// and 1. Reporting form; training differentiates cross_entropy_logits.
double cross_entropy(const Tensor& probs, const std::vector<int>& labels);

/// Differentiable mean cross-entropy from logits via log-sum-exp.
NodeId cross_entropy_logits(Graph& g, NodeId logits, const std::vector<int>& labels);

struct AdamState {
  std::vector<Tensor> m, v;  // aligned with ParameterSet order
  long long step = 0;
};

/// One ADAM update with bias correction (beta1 0.9, beta2 0.999, eps 1e-8)
/// plus decoupled weight decay (-lr * wd * theta). Gradients align with the
/// full parameter order; non-trainable entries are skipped.
void adam_step(ParameterSet& params, const std::vector<Tensor>& grads, AdamState& state,
               const TrainConfig& cfg);

double evaluate_accuracy(Model& model, const std::vector<FeatureMatrix>& xs,
                         const std::vector<int>& ys, int batch_size = 64);

/// Deterministic training loop: data order, dropout masks, and the plateau
/// schedule (lr * decay when eval accuracy stalls for `plateau_patience`
/// epochs) all derive from cfg.seed. Aborts with TrainingError on non-finite
/// loss.
TrainReport fit(Model& model, const LoadedDataset& data, const TrainConfig& cfg);

struct GradCheckEntry {
  std::string param;
  double rel_error = 0.0;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::vector<GradCheckEntry> per_param;
};

/// Compares the analytic gradient of the cross-entropy loss against central
/// finite differences (step h) for every trainable parameter element.
/// Runs in eval mode: dropout off, batch norm frozen on (randomized) running
/// statistics. Relative error uses a 1e-3 magnitude floor.
GradCheckReport grad_check(Model& model, const FeatureMatrix& sample, int label,
                           double h = 1e-5);

}  // namespace temporal_heads
