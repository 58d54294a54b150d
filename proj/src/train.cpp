#include "temporal_heads/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

namespace temporal_heads {

void TrainConfig::validate() const {
  // lr 0 is allowed as a diagnostic no-op configuration.
  if (lr < 0.0) throw ConfigError("train: lr must be non-negative");
  if (weight_decay < 0.0) throw ConfigError("train: weight_decay must be non-negative");
  if (batch_size < 1) throw ConfigError("train: batch_size must be positive");
  if (max_epochs < 0) throw ConfigError("train: max_epochs must be non-negative");
  if (plateau_patience < 1) throw ConfigError("train: plateau_patience must be positive");
  if (lr_decay_factor <= 0.0 || lr_decay_factor >= 1.0) {
    throw ConfigError("train: lr_decay_factor must be in (0, 1)");
  }
}

double cross_entropy(const Tensor& probs, const std::vector<int>& labels) {
  if (probs.rank() != 2) throw DimensionError("cross_entropy: probs must be [B x C]");
  const int b = probs.dim(0), c = probs.dim(1);
  if (static_cast<int>(labels.size()) != b) {
    throw DataError("cross_entropy: batch size mismatch");
  }
  constexpr double kEps = 1e-12;
  double total = 0.0;
  for (int i = 0; i < b; ++i) {
    const int y = labels[static_cast<size_t>(i)];
    if (y < 0 || y >= c) {
      throw DataError("cross_entropy: label " + std::to_string(y) + " out of range");
    }
    const double p = std::clamp(probs.at(i, y), kEps, 1.0 - kEps);
    total += -std::log(p);
  }
  return total / b;
}

NodeId cross_entropy_logits(Graph& g, NodeId logits, const std::vector<int>& labels) {
  const Tensor& zv = g.value(logits);
  if (zv.rank() != 2) throw DimensionError("cross_entropy_logits: logits must be [B x C]");
  const int b = zv.dim(0), c = zv.dim(1);
  if (static_cast<int>(labels.size()) != b) {
    throw DataError("cross_entropy_logits: batch size mismatch");
  }
  for (int y : labels) {
    if (y < 0 || y >= c) {
      throw DataError("cross_entropy_logits: label " + std::to_string(y) + " out of range");
    }
  }
  double total = 0.0;
  Tensor softmax({b, c});
  for (int i = 0; i < b; ++i) {
    double m = zv.at(i, 0);
    for (int j = 1; j < c; ++j) m = std::max(m, zv.at(i, j));
    double s = 0.0;
    for (int j = 0; j < c; ++j) s += std::exp(zv.at(i, j) - m);
    const double lse = m + std::log(s);
    total += lse - zv.at(i, labels[static_cast<size_t>(i)]);
    for (int j = 0; j < c; ++j) softmax.at(i, j) = std::exp(zv.at(i, j) - lse);
  }
  return g.make_node(
      Tensor::from({1}, {total / b}), {logits},
      [logits, labels, b, c, softmax = std::move(softmax)](Graph& gg, NodeId self) {
        const double d = gg.grad(self)[0];
        Tensor& dz = gg.grad_mut(logits);
        for (int i = 0; i < b; ++i) {
          for (int j = 0; j < c; ++j) {
            const double onehot = j == labels[static_cast<size_t>(i)] ? 1.0 : 0.0;
            dz.at(i, j) += d * (softmax.at(i, j) - onehot) / b;
          }
        }
      });
}

void adam_step(ParameterSet& params, const std::vector<Tensor>& grads, AdamState& state,
               const TrainConfig& cfg) {
  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
  if (static_cast<int>(grads.size()) != params.size()) {
    throw ContractError("adam_step: gradient list does not align with parameters");
  }
  if (state.m.empty()) {
    for (int i = 0; i < params.size(); ++i) {
      state.m.push_back(Tensor::zeros(params.at(i).value.shape()));
      state.v.push_back(Tensor::zeros(params.at(i).value.shape()));
    }
  }
  state.step += 1;
  const double bc1 = 1.0 - std::pow(kBeta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(kBeta2, static_cast<double>(state.step));
  for (int i = 0; i < params.size(); ++i) {
    Parameter& p = params.at(i);
    if (!p.trainable) continue;
    const Tensor& gr = grads[static_cast<size_t>(i)];
    if (!gr.same_shape(p.value)) {
      throw DimensionError("adam_step: gradient shape mismatch for " + p.name);
    }
    Tensor& m = state.m[static_cast<size_t>(i)];
    Tensor& v = state.v[static_cast<size_t>(i)];
    for (int e = 0; e < p.value.numel(); ++e) {
      m[e] = kBeta1 * m[e] + (1.0 - kBeta1) * gr[e];
      v[e] = kBeta2 * v[e] + (1.0 - kBeta2) * gr[e] * gr[e];
      const double mhat = m[e] / bc1;
      const double vhat = v[e] / bc2;
      p.value[e] -= cfg.lr * mhat / (std::sqrt(vhat) + kEps);
      if (cfg.weight_decay > 0.0) p.value[e] -= cfg.lr * cfg.weight_decay * p.value[e];
    }
  }
}

double evaluate_accuracy(Model& model, const std::vector<FeatureMatrix>& xs,
                         const std::vector<int>& ys, int batch_size) {
  if (xs.empty()) throw ContractError("evaluate_accuracy: empty split");
  if (xs.size() != ys.size()) throw ContractError("evaluate_accuracy: label count mismatch");
  int correct = 0;
  for (size_t start = 0; start < xs.size(); start += static_cast<size_t>(batch_size)) {
    const size_t end = std::min(xs.size(), start + static_cast<size_t>(batch_size));
    std::vector<const FeatureMatrix*> batch;
    for (size_t i = start; i < end; ++i) batch.push_back(&xs[i]);
    const auto probs = predict(model, batch);
    for (size_t i = start; i < end; ++i) {
      if (argmax_class(probs[i - start]) == ys[i]) ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(xs.size());
}

TrainReport fit(Model& model, const LoadedDataset& data, const TrainConfig& cfg) {
  cfg.validate();
  if (data.train_x.empty()) throw TrainingError("fit: train split is empty");
  const auto start_time = std::chrono::steady_clock::now();

  Rng shuffle_rng(derive_seed(cfg.seed, 1));
  Rng dropout_rng(derive_seed(cfg.seed, 2));
  TrainConfig current = cfg;
  AdamState adam;
  TrainReport report;

  std::vector<size_t> order(data.train_x.size());
  std::iota(order.begin(), order.end(), size_t{0});

  double best_eval = -1.0;
  int stale_epochs = 0;

  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double loss_sum = 0.0;
    size_t seen = 0;
    size_t start = 0;
    while (start < order.size()) {
      size_t end = std::min(order.size(), start + static_cast<size_t>(current.batch_size));
      // A lone trailing sequence cannot feed batch statistics; fold it in.
      if (order.size() - end == 1) end = order.size();
      std::vector<const FeatureMatrix*> batch;
      std::vector<int> labels;
      for (size_t i = start; i < end; ++i) {
        batch.push_back(&data.train_x[order[i]]);
        labels.push_back(data.train_y[order[i]]);
      }
      Graph g;
      const std::vector<NodeId> bound = model.bind(g);
      const NodeId logits = model.forward_logits(g, bound, batch, Mode::kTrain, &dropout_rng);
      const NodeId loss = cross_entropy_logits(g, logits, labels);
      const double loss_value = g.value(loss)[0];
      if (!std::isfinite(loss_value)) {
        throw TrainingError("fit: non-finite loss at epoch " + std::to_string(epoch));
      }
      g.backward(loss);
      std::vector<Tensor> grads;
      grads.reserve(bound.size());
      for (NodeId id : bound) grads.push_back(g.grad(id));
      adam_step(model.params(), grads, adam, current);
      loss_sum += loss_value * static_cast<double>(batch.size());
      seen += batch.size();
      start = end;
    }
    report.train_loss.push_back(loss_sum / static_cast<double>(seen));
    report.train_accuracy.push_back(evaluate_accuracy(model, data.train_x, data.train_y));
    const double eval_acc = data.test_x.empty()
                                ? report.train_accuracy.back()
                                : evaluate_accuracy(model, data.test_x, data.test_y);
    report.eval_accuracy.push_back(eval_acc);

    if (eval_acc > best_eval) {
      best_eval = eval_acc;
      stale_epochs = 0;
    } else {
      ++stale_epochs;
      if (stale_epochs >= cfg.plateau_patience) {
        current.lr *= cfg.lr_decay_factor;
        stale_epochs = 0;
      }
    }
  }

  report.final_checksum = model.params().checksum();
  report.wall_time_sec =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start_time).count();
  return report;
}

GradCheckReport grad_check(Model& model, const FeatureMatrix& sample, int label, double h) {
  ParameterSet& params = model.params();
  // Freeze batch norm on randomized running statistics so the eval path is
  // a non-trivial function of gamma and beta.
  Rng stats_rng(0x5EED);
  for (int i = 0; i < params.size(); ++i) {
    Parameter& p = params.at(i);
    if (p.trainable) continue;
    const bool is_var = p.name.ends_with("running_var");
    for (int e = 0; e < p.value.numel(); ++e) {
      p.value[e] = is_var ? stats_rng.uniform(0.5, 1.5) : stats_rng.uniform(-0.5, 0.5);
    }
  }

  const std::vector<const FeatureMatrix*> batch{&sample};
  const std::vector<int> labels{label};
  auto loss_value = [&]() {
    Graph g;
    const std::vector<NodeId> bound = model.bind(g);
    const NodeId logits = model.forward_logits(g, bound, batch, Mode::kEval, nullptr);
    return g.value(cross_entropy_logits(g, logits, labels))[0];
  };

  Graph g;
  const std::vector<NodeId> bound = model.bind(g);
  const NodeId logits = model.forward_logits(g, bound, batch, Mode::kEval, nullptr);
  const NodeId loss = cross_entropy_logits(g, logits, labels);
  g.backward(loss);

  GradCheckReport report;
  for (int i = 0; i < params.size(); ++i) {
    Parameter& p = params.at(i);
    if (!p.trainable) continue;
    const Tensor& analytic = g.grad(bound[static_cast<size_t>(i)]);
    double worst = 0.0;
    for (int e = 0; e < p.value.numel(); ++e) {
      const double saved = p.value[e];
      p.value[e] = saved + h;
      const double up = loss_value();
      p.value[e] = saved - h;
      const double down = loss_value();
      p.value[e] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double denom = std::max({std::fabs(analytic[e]), std::fabs(numeric), 1e-3});
      worst = std::max(worst, std::fabs(analytic[e] - numeric) / denom);
    }
    report.per_param.push_back({p.name, worst});
    if (worst > report.max_rel_error) {
      report.max_rel_error = worst;
      report.worst_param = p.name;
    }
  }
  return report;
}

}  // namespace temporal_heads
