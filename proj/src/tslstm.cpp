#include "temporal_heads/tslstm.hpp"

#include <algorithm>

#include "temporal_heads/layers.hpp"

namespace temporal_heads {

void TsLstmConfig::validate() const {
  if (num_segments < 1) throw ConfigError("tslstm: num_segments must be positive");
  if (num_classes < 1) throw ConfigError("tslstm: num_classes must be positive");
  if (pre_fc_width < 0) throw ConfigError("tslstm: pre_fc_width must be non-negative");
  for (int w : lstm_widths) {
    if (w < 1) throw ConfigError("tslstm: LSTM widths must be positive");
  }
  if (pre_fc_width > 0 && !lstm_widths.empty()) {
    throw ConfigError("tslstm: pre-pooling FC and LSTM consensus are mutually exclusive");
  }
  if (pool == TsPool::kNone) {
    if (lstm_widths.empty()) {
      throw ConfigError("tslstm: pool 'none' needs an LSTM to consume the frames");
    }
    if (num_segments != 1) {
      throw ConfigError("tslstm: pool 'none' requires a single segment");
    }
  }
}

SegmentPartition partition(int n, int s) {
  if (s < 1) throw ConfigError("partition: need at least one segment");
  if (s > n) {
    throw ConfigError("partition: " + std::to_string(s) + " segments exceed " +
                      std::to_string(n) + " frames");
  }
  SegmentPartition p;
  const int base = n / s;
  const int rem = n % s;
  int start = 0;
  for (int i = 0; i < s; ++i) {
    const int len = base + (i < rem ? 1 : 0);
    p.boundaries.emplace_back(start, start + len);
    start += len;
  }
  return p;
}

TsLstmModel::TsLstmModel(TsLstmConfig cfg, int input_dim, uint64_t seed)
    : cfg_(std::move(cfg)), input_dim_(input_dim) {
  cfg_.validate();
  if (input_dim_ < 1) throw ConfigError("tslstm: input_dim must be positive");
  Rng rng(derive_seed(seed, 0x75));

  if (cfg_.pre_bn) {
    pre_bn_gamma_ = params_.add("input_bn.gamma", Tensor::full({input_dim_}, 1.0));
    pre_bn_beta_ = params_.add("input_bn.beta", Tensor::zeros({input_dim_}));
    pre_bn_mean_ = params_.add("input_bn.running_mean", Tensor::zeros({input_dim_}), false);
    pre_bn_var_ = params_.add("input_bn.running_var", Tensor::full({input_dim_}, 1.0), false);
  }
  int frame_dim = input_dim_;
  if (cfg_.pre_fc_width > 0) {
    pre_fc_w_ = params_.add("pre_fc.weight",
                            init_uniform_fan_in({input_dim_, cfg_.pre_fc_width}, input_dim_, rng));
    pre_fc_b_ = params_.add("pre_fc.bias",
                            init_uniform_fan_in({cfg_.pre_fc_width}, input_dim_, rng));
    frame_dim = cfg_.pre_fc_width;
  }

  int din = frame_dim;
  for (size_t l = 0; l < cfg_.lstm_widths.size(); ++l) {
    const int h = cfg_.lstm_widths[l];
    const std::string prefix = "lstm" + std::to_string(l) + ".";
    auto make_gate = [&](const std::string& gate, double bias_init) {
      GateIdx idx;
      idx.w_x = params_.add(prefix + gate + ".w_x", init_uniform_fan_in({din, h}, din, rng));
      idx.w_h = params_.add(prefix + gate + ".w_h", init_uniform_fan_in({h, h}, h, rng));
      idx.bias = params_.add(prefix + gate + ".bias", Tensor::full({h}, bias_init));
      return idx;
    };
    LayerIdx layer;
    layer.input_gate = make_gate("input_gate", 0.0);
    layer.forget_gate = make_gate("forget_gate", 1.0);  // standard stabilizer
    layer.output_gate = make_gate("output_gate", 0.0);
    layer.candidate = make_gate("candidate", 0.0);
    lstm_.push_back(layer);
    din = h;
  }

  if (!cfg_.lstm_widths.empty()) {
    consensus_width_ = cfg_.lstm_widths.back();
  } else {
    consensus_width_ = frame_dim * cfg_.num_segments;
  }

  if (cfg_.post_bn) {
    post_bn_gamma_ = params_.add("post_bn.gamma", Tensor::full({consensus_width_}, 1.0));
    post_bn_beta_ = params_.add("post_bn.beta", Tensor::zeros({consensus_width_}));
    post_bn_mean_ = params_.add("post_bn.running_mean", Tensor::zeros({consensus_width_}), false);
    post_bn_var_ =
        params_.add("post_bn.running_var", Tensor::full({consensus_width_}, 1.0), false);
  }
  cls_w_ = params_.add("classifier.weight", init_uniform_fan_in({consensus_width_, cfg_.num_classes},
                                                                consensus_width_, rng));
  cls_b_ = params_.add("classifier.bias",
                       init_uniform_fan_in({cfg_.num_classes}, consensus_width_, rng));
}

NodeId TsLstmModel::forward_logits(Graph& g, const std::vector<NodeId>& bound,
                                   const std::vector<const FeatureMatrix*>& batch, Mode mode,
                                   Rng* rng) {
  (void)rng;  // no dropout in this family
  if (batch.empty()) throw ContractError("tslstm: empty batch");
  const bool train = mode == Mode::kTrain;
  const int b = static_cast<int>(batch.size());

  std::vector<int> lengths;
  std::vector<NodeId> frame_rows;  // per sequence, [N x D]
  frame_rows.reserve(batch.size());
  for (const FeatureMatrix* fm : batch) {
    if (fm->dim() != input_dim_) {
      throw DimensionError("tslstm: sequence " + fm->id + " has feature dim " +
                           std::to_string(fm->dim()) + ", model expects " +
                           std::to_string(input_dim_));
    }
    if (cfg_.num_segments > fm->length()) {
      throw ConfigError("tslstm: sequence " + fm->id + " shorter than num_segments");
    }
    lengths.push_back(fm->length());
    frame_rows.push_back(transpose(g, g.leaf(fm->values)));
  }

  // One (sequence, frame) row per frame across the batch; input BN and the
  // per-frame FC act on this stacked matrix.
  NodeId all = b == 1 ? frame_rows[0] : concat_rows(g, frame_rows);
  if (cfg_.pre_bn) {
    all = batch_norm(g, all, bound[static_cast<size_t>(pre_bn_gamma_)],
                     bound[static_cast<size_t>(pre_bn_beta_)],
                     params_.at(pre_bn_mean_).value, params_.at(pre_bn_var_).value, 0.1, 1e-5,
                     train, train);
  }
  if (pre_fc_w_ >= 0) {
    all = fully_connected(g, all, bound[static_cast<size_t>(pre_fc_w_)],
                          bound[static_cast<size_t>(pre_fc_b_)]);
  }

  std::vector<LstmCellParams> lstm_params;
  for (const LayerIdx& l : lstm_) {
    auto gate = [&](const GateIdx& idx) {
      return LstmGateParams{bound[static_cast<size_t>(idx.w_x)],
                            bound[static_cast<size_t>(idx.w_h)],
                            bound[static_cast<size_t>(idx.bias)]};
    };
    lstm_params.push_back(LstmCellParams{gate(l.input_gate), gate(l.forget_gate),
                                         gate(l.output_gate), gate(l.candidate)});
  }

  std::vector<NodeId> consensus_rows;
  consensus_rows.reserve(batch.size());
  int offset = 0;
  for (int s = 0; s < b; ++s) {
    const int n = lengths[static_cast<size_t>(s)];
    NodeId frames = b == 1 ? all : slice_rows(g, all, offset, offset + n);
    offset += n;

    std::vector<NodeId> steps;
    if (cfg_.pool == TsPool::kNone) {
      for (int t = 0; t < n; ++t) steps.push_back(slice_rows(g, frames, t, t + 1));
    } else {
      const NodeId by_time = transpose(g, frames);  // [D' x N]
      const int width = g.value(by_time).dim(0);
      const PoolKind kind = cfg_.pool == TsPool::kMax ? PoolKind::kMax : PoolKind::kMean;
      for (const auto& [t0, t1] : partition(n, cfg_.num_segments).boundaries) {
        steps.push_back(reshape(g, temporal_pool(g, by_time, kind, t0, t1), {1, width}));
      }
    }

    NodeId consensus;
    if (!lstm_params.empty()) {
      consensus = lstm_stack(g, steps, lstm_params);
    } else if (steps.size() == 1) {
      consensus = steps[0];
    } else {
      std::vector<NodeId> flat;
      flat.reserve(steps.size());
      for (NodeId step : steps) flat.push_back(reshape(g, step, {g.value(step).numel()}));
      consensus = reshape(g, concat_vec(g, flat), {1, consensus_width_});
    }
    consensus_rows.push_back(consensus);
  }

  NodeId pooled = b == 1 ? consensus_rows[0] : concat_rows(g, consensus_rows);
  if (cfg_.post_bn) {
    pooled = batch_norm(g, pooled, bound[static_cast<size_t>(post_bn_gamma_)],
                        bound[static_cast<size_t>(post_bn_beta_)],
                        params_.at(post_bn_mean_).value, params_.at(post_bn_var_).value, 0.1,
                        1e-5, train, train);
  }
  return fully_connected(g, pooled, bound[static_cast<size_t>(cls_w_)],
                         bound[static_cast<size_t>(cls_b_)]);
}

namespace {

std::string widths_str(const std::vector<int>& widths) {
  std::string s;
  for (size_t i = 0; i < widths.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(widths[i]);
  }
  return widths.size() > 1 ? "(" + s + ")" : s;
}

std::string widths_id(const std::vector<int>& widths) {
  std::string s;
  for (size_t i = 0; i < widths.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(widths[i]);
  }
  return s;
}

TsLstmVariant make_variant(std::string id, const TsLstmConfig& cfg) {
  std::string pooling;
  switch (cfg.pool) {
    case TsPool::kNone:
      pooling = "LSTM-" + widths_str(cfg.lstm_widths);
      break;
    case TsPool::kMax:
      pooling = "Max";
      break;
    case TsPool::kMean:
      pooling = "Mean";
      break;
  }
  if (cfg.pool != TsPool::kNone && !cfg.lstm_widths.empty()) {
    pooling += " + " + widths_str(cfg.lstm_widths);
  }
  std::string desc = std::to_string(cfg.num_segments) + " | " + (cfg.pre_bn ? "BN" : "-") +
                     " | " + (cfg.pre_fc_width > 0 ? std::to_string(cfg.pre_fc_width) : "-") +
                     " | " + pooling + " | " + (cfg.post_bn ? "BN" : "-") + " | FC-" +
                     std::to_string(cfg.num_classes);
  return TsLstmVariant{std::move(id), std::move(desc), cfg};
}

}  // namespace

std::vector<TsLstmVariant> variant_catalog() {
  // One entry per row of the complete TS-LSTM ablation table. The class
  // count mirrors the table's FC-101 column; the harness overrides it with
  // the dataset's class count.
  std::vector<TsLstmVariant> out;
  auto base = [](int segments, bool pre, int fc, TsPool pool, std::vector<int> widths,
                 bool post) {
    TsLstmConfig c;
    c.num_segments = segments;
    c.pre_bn = pre;
    c.pre_fc_width = fc;
    c.pool = pool;
    c.lstm_widths = std::move(widths);
    c.post_bn = post;
    c.num_classes = 101;
    return c;
  };

  // Plain LSTM over frames, no normalization.
  for (int w : {512, 1024, 2048}) {
    out.push_back(make_variant("ts1-lstm" + std::to_string(w),
                               base(1, false, 0, TsPool::kNone, {w}, false)));
  }
  // Normalized LSTM over frames, single and stacked.
  for (int w : {512, 1024, 2048}) {
    out.push_back(make_variant("ts1-bn-lstm" + std::to_string(w),
                               base(1, true, 0, TsPool::kNone, {w}, true)));
  }
  for (const auto& widths : std::vector<std::vector<int>>{{512, 512}, {1024, 512}, {512, 512, 512}}) {
    out.push_back(make_variant("ts1-bn-lstm" + widths_id(widths),
                               base(1, true, 0, TsPool::kNone, widths, true)));
  }
  // Pooling-only heads with varying normalization and segment counts.
  out.push_back(make_variant("ts1-max-nobn", base(1, false, 0, TsPool::kMax, {}, false)));
  out.push_back(make_variant("ts1-max-postbn", base(1, false, 0, TsPool::kMax, {}, true)));
  out.push_back(make_variant("ts1-max", base(1, true, 0, TsPool::kMax, {}, true)));
  out.push_back(make_variant("ts3-max", base(3, true, 0, TsPool::kMax, {}, true)));
  out.push_back(make_variant("ts5-max", base(5, true, 0, TsPool::kMax, {}, true)));
  // Per-frame FC before pooling.
  out.push_back(make_variant("ts3-fc512-max", base(3, true, 512, TsPool::kMax, {}, true)));
  out.push_back(make_variant("ts5-fc512-max", base(5, true, 512, TsPool::kMax, {}, true)));
  // Segmental LSTM consensus.
  for (int s : {3, 5}) {
    for (int w : {512, 1024, 2048}) {
      out.push_back(make_variant("ts" + std::to_string(s) + "-max-lstm" + std::to_string(w),
                                 base(s, true, 0, TsPool::kMax, {w}, true)));
    }
  }
  for (int s : {3, 5}) {
    for (const auto& widths :
         std::vector<std::vector<int>>{{512, 512}, {1024, 512}, {512, 512, 512}}) {
      out.push_back(make_variant("ts" + std::to_string(s) + "-max-lstm" + widths_id(widths),
                                 base(s, true, 0, TsPool::kMax, widths, true)));
    }
  }
  return out;
}

std::unique_ptr<Model> make_tslstm_model(const TsLstmConfig& cfg, int input_dim, uint64_t seed) {
  return std::make_unique<TsLstmModel>(cfg, input_dim, seed);
}

}  // namespace temporal_heads
