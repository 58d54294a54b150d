#pragma once

#include <memory>
#include <string>
#include <vector>

#include "temporal_heads/data.hpp"
#include "temporal_heads/tensor.hpp"

namespace temporal_heads {

enum class Mode { kTrain, kEval };

/// Per-class probability vector for one sequence.
using PredictionDistribution = std::vector<double>;

struct Parameter {
  std::string name;
  Tensor value;
  bool trainable = true;
};

/// Named model state in a stable order. Trainable entries are the weights;
/// non-trainable entries carry batch-norm running statistics so a checkpoint
/// and its checksum cover the whole state.
class ParameterSet {
 public:
  int add(std::string name, Tensor init, bool trainable = true);
  int size() const { return static_cast<int>(params_.size()); }
  Parameter& at(int i) { return params_[static_cast<size_t>(i)]; }
  const Parameter& at(int i) const { return params_[static_cast<size_t>(i)]; }
  int find(const std::string& name) const;  // -1 when absent
  long long trainable_count() const;        // total trainable scalars
  uint64_t checksum() const;

 private:
  std::vector<Parameter> params_;
};

/// A classification head over feature matrices. Parameters live in the
/// ParameterSet; a forward pass binds them as graph leaves (ids aligned with
/// parameter order) so the caller can read per-parameter gradients after
/// backward. Train-mode forwards update batch-norm running statistics and
/// draw dropout masks from the supplied RNG.
class Model {
 public:
  virtual ~Model() = default;

  virtual int num_classes() const = 0;
  virtual int input_dim() const = 0;

  std::vector<NodeId> bind(Graph& g) const;

  virtual NodeId forward_logits(Graph& g, const std::vector<NodeId>& bound,
                                const std::vector<const FeatureMatrix*>& batch, Mode mode,
                                Rng* rng) = 0;

  ParameterSet& params() { return params_; }
  const ParameterSet& params() const { return params_; }

 protected:
  ParameterSet params_;
};

/// Eval-mode forward + softmax for a batch of sequences.
std::vector<PredictionDistribution> predict(Model& model,
                                            const std::vector<const FeatureMatrix*>& batch);

/// Argmax with first-index tie breaking.
int argmax_class(const PredictionDistribution& probs);

// Deterministic initializers.
Tensor init_uniform_fan_in(std::vector<int> shape, int fan_in, Rng& rng);

}  // namespace temporal_heads
