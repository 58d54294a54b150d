#include "temporal_heads/model.hpp"

#include <bit>
#include <cmath>

#include "temporal_heads/layers.hpp"

namespace temporal_heads {

int ParameterSet::add(std::string name, Tensor init, bool trainable) {
  if (find(name) >= 0) throw ContractError("duplicate parameter name: " + name);
  params_.push_back(Parameter{std::move(name), std::move(init), trainable});
  return static_cast<int>(params_.size() - 1);
}

int ParameterSet::find(const std::string& name) const {
  for (size_t i = 0; i < params_.size(); ++i) {
    if (params_[i].name == name) return static_cast<int>(i);
  }
  return -1;
}

long long ParameterSet::trainable_count() const {
  long long n = 0;
  for (const Parameter& p : params_) {
    if (p.trainable) n += p.value.numel();
  }
  return n;
}

uint64_t ParameterSet::checksum() const {
  uint64_t h = 0xCBF29CE484222325ull;
  for (const Parameter& p : params_) {
    h = fnv1a64(p.name.data(), p.name.size(), h);
    for (int e : p.value.shape()) {
      h = fnv1a64(&e, sizeof(e), h);
    }
    for (int i = 0; i < p.value.numel(); ++i) {
      const uint64_t bits = std::bit_cast<uint64_t>(p.value[i]);
      h = fnv1a64(&bits, sizeof(bits), h);
    }
  }
  return h;
}

std::vector<NodeId> Model::bind(Graph& g) const {
  std::vector<NodeId> ids;
  ids.reserve(static_cast<size_t>(params_.size()));
  for (int i = 0; i < params_.size(); ++i) {
    ids.push_back(g.leaf(params_.at(i).value));
  }
  return ids;
}

std::vector<PredictionDistribution> predict(Model& model,
                                            const std::vector<const FeatureMatrix*>& batch) {
  if (batch.empty()) throw ContractError("predict: empty batch");
  Graph g;
  const std::vector<NodeId> bound = model.bind(g);
  const NodeId logits = model.forward_logits(g, bound, batch, Mode::kEval, nullptr);
  const NodeId probs = softmax_rows(g, logits);
  const Tensor& pv = g.value(probs);
  std::vector<PredictionDistribution> out;
  out.reserve(batch.size());
  for (int i = 0; i < pv.dim(0); ++i) {
    PredictionDistribution row(static_cast<size_t>(pv.dim(1)));
    for (int j = 0; j < pv.dim(1); ++j) row[static_cast<size_t>(j)] = pv.at(i, j);
    out.push_back(std::move(row));
  }
  return out;
}

int argmax_class(const PredictionDistribution& probs) {
  if (probs.empty()) throw ContractError("argmax_class: empty distribution");
  int best = 0;
  for (size_t j = 1; j < probs.size(); ++j) {
    if (probs[j] > probs[static_cast<size_t>(best)]) best = static_cast<int>(j);
  }
  return best;
}

Tensor init_uniform_fan_in(std::vector<int> shape, int fan_in, Rng& rng) {
  Tensor t(std::move(shape));
  const double r = 1.0 / std::sqrt(static_cast<double>(fan_in > 0 ? fan_in : 1));
  for (int i = 0; i < t.numel(); ++i) t[i] = rng.uniform(-r, r);
  return t;
}

}  // namespace temporal_heads
