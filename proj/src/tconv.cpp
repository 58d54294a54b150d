#include "temporal_heads/tconv.hpp"

#include <algorithm>

namespace temporal_heads {

void TclConfig::validate() const {
  if (kernel_size < 1 || kernel_size % 2 == 0) {
    throw ConfigError("tcl: kernel size must be odd and positive, got " +
                      std::to_string(kernel_size));
  }
}

int TemporalConvConfig::effective_modules() const {
  switch (architecture) {
    case TconvArch::kSingle:
      return 1;
    case TconvArch::kDouble:
      return 2;
    default:
      return num_modules;
  }
}

void TemporalConvConfig::validate() const {
  if (num_classes < 1) throw ConfigError("tconv: num_classes must be positive");
  if (num_modules < 1) throw ConfigError("tconv: num_modules must be positive");
  if (fc_width < 0) throw ConfigError("tconv: fc_width must be non-negative");
  if (dropout_p < 0.0 || dropout_p >= 1.0) {
    throw ConfigError("tconv: dropout rate must be in [0, 1)");
  }
  if (flow_kernels.empty()) throw ConfigError("tconv: flow_kernels must not be empty");
  for (const auto& stack : flow_kernels) {
    if (stack.empty()) throw ConfigError("tconv: every flow needs at least one kernel");
    for (int k : stack) {
      if (k < 1 || k % 2 == 0) {
        throw ConfigError("tconv: kernel sizes must be odd and positive, got " +
                          std::to_string(k));
      }
    }
  }
  if (multi_flow_arch() && flows() < 2) {
    throw ConfigError("tconv: inception and multi-flow VGG need at least 2 flows");
  }
  if (!multi_flow_arch() && flows() != 1) {
    throw ConfigError("tconv: single-flow architectures take exactly one flow");
  }
  if (architecture == TconvArch::kSingle && num_modules != 1) {
    throw ConfigError("tconv: architecture 'single' is one module");
  }
  if (architecture == TconvArch::kDouble && num_modules != 2) {
    throw ConfigError("tconv: architecture 'double' is two modules");
  }
  if (multi_flow_arch() && reduce_method == ReduceMethod::kConv) {
    if (fusion_chain.empty() || fusion_chain.back() != 1) {
      throw ConfigError("tconv: fusion chain must end at 1 channel");
    }
    for (size_t i = 0; i < fusion_chain.size(); ++i) {
      if (fusion_chain[i] < 1) throw ConfigError("tconv: fusion chain entries must be positive");
      if (i > 0 && fusion_chain[i] >= fusion_chain[i - 1]) {
        throw ConfigError("tconv: fusion chain must strictly decrease");
      }
    }
  }
}

NodeId temporal_halve_max(Graph& g, NodeId x) {
  const Tensor& xv = g.value(x);
  if (xv.rank() != 3) {
    throw DimensionError("temporal_halve_max: expected rank 3, got " + xv.shape_str());
  }
  const int c = xv.dim(0), d = xv.dim(1), t = xv.dim(2);
  const int tout = (t + 1) / 2;
  Tensor out({c, d, tout});
  std::vector<int> argmax(static_cast<size_t>(c * d * tout));
  for (int ci = 0; ci < c; ++ci) {
    for (int di = 0; di < d; ++di) {
      for (int to = 0; to < tout; ++to) {
        const int t0 = 2 * to;
        int best = t0;
        if (t0 + 1 < t && xv.at(ci, di, t0 + 1) > xv.at(ci, di, t0)) best = t0 + 1;
        argmax[static_cast<size_t>((ci * d + di) * tout + to)] = best;
        out.at(ci, di, to) = xv.at(ci, di, best);
      }
    }
  }
  return g.make_node(std::move(out), {x},
                     [x, c, d, tout, argmax = std::move(argmax)](Graph& gg, NodeId self) {
                       const Tensor& dy = gg.grad(self);
                       Tensor& dx = gg.grad_mut(x);
                       for (int ci = 0; ci < c; ++ci) {
                         for (int di = 0; di < d; ++di) {
                           for (int to = 0; to < tout; ++to) {
                             dx.at(ci, di, argmax[static_cast<size_t>((ci * d + di) * tout + to)]) +=
                                 dy.at(ci, di, to);
                           }
                         }
                       }
                     });
}

namespace {

NodeId bn_over_channels(Graph& g, NodeId x, const BnHook& bn, bool train) {
  const Tensor& xv = g.value(x);
  const int d = xv.dim(1), t = xv.dim(2);
  NodeId rows = channels_to_rows(g, x);
  rows = batch_norm(g, rows, bn.gamma, bn.beta, *bn.running_mean, *bn.running_var, 0.1, 1e-5,
                    train, train);
  return rows_to_channels(g, rows, d, t);
}

}  // namespace

NodeId tcl(Graph& g, NodeId x, const TclConfig& cfg, const TclParams& p, bool train) {
  cfg.validate();
  const Tensor& xv = g.value(x);
  const Tensor& kv = g.value(p.kernels);
  if (kv.dim(0) != kv.dim(1) || kv.dim(1) != xv.dim(0)) {
    throw ConfigError("tcl: kernels must preserve the channel count, got " + kv.shape_str() +
                      " on input " + xv.shape_str());
  }
  const int stride = cfg.downsample == Downsample::kStride2 ? 2 : 1;
  NodeId y = temporal_conv1d(g, x, p.kernels, stride);
  y = conv_channel_bias(g, y, p.bias);
  if (cfg.use_bn) {
    if (p.bn.gamma < 0 || p.bn.running_mean == nullptr) {
      throw ContractError("tcl: use_bn set but no batch-norm parameters supplied");
    }
    y = bn_over_channels(g, y, p.bn, train);
  }
  if (cfg.use_relu) y = relu(g, y);
  if (cfg.downsample == Downsample::kPool) y = temporal_halve_max(g, y);
  return y;
}

NodeId multi_flow(Graph& g, NodeId x, const std::vector<TclConfig>& cfgs,
                  const std::vector<TclParams>& params, bool train) {
  if (cfgs.size() < 2) throw ContractError("multi_flow: need at least 2 flows");
  if (cfgs.size() != params.size()) {
    throw ContractError("multi_flow: config/parameter count mismatch");
  }
  std::vector<NodeId> outs;
  outs.reserve(cfgs.size());
  for (size_t f = 0; f < cfgs.size(); ++f) {
    outs.push_back(tcl(g, x, cfgs[f], params[f], train));
  }
  const int t0 = g.value(outs[0]).dim(2);
  for (NodeId o : outs) {
    if (g.value(o).dim(2) != t0) {
      throw Error("multi_flow: flows produced unequal temporal extents");
    }
  }
  return concat_channels(g, outs);
}

NodeId conv_fusion(Graph& g, NodeId x, const std::vector<FusionStageParams>& stages,
                   bool train) {
  if (stages.empty()) throw ContractError("conv_fusion: empty stage chain");
  int prev = -1;
  for (const FusionStageParams& s : stages) {
    const int cout = g.value(s.kernels).dim(0);
    if (prev >= 0 && cout >= prev) {
      throw ConfigError("conv_fusion: stage widths must strictly decrease");
    }
    prev = cout;
  }
  if (prev != 1) throw ConfigError("conv_fusion: chain must end at 1 channel");
  NodeId y = x;
  for (size_t i = 0; i < stages.size(); ++i) {
    y = temporal_conv1d(g, y, stages[i].kernels, 1);
    y = conv_channel_bias(g, y, stages[i].bias);
    if (i + 1 < stages.size()) {
      if (stages[i].bn.gamma >= 0) y = bn_over_channels(g, y, stages[i].bn, train);
      y = relu(g, y);
    }
  }
  return y;
}

TemporalConvModel::TemporalConvModel(TemporalConvConfig cfg, int input_dim, int input_frames,
                                     uint64_t seed)
    : cfg_(std::move(cfg)), input_dim_(input_dim), input_frames_(input_frames) {
  cfg_.validate();
  if (input_dim_ < 1) throw ConfigError("tconv: input_dim must be positive");
  if (input_frames_ < 1) throw ConfigError("tconv: input_frames must be positive");
  Rng rng(derive_seed(seed, 0x7C));

  const int modules = cfg_.effective_modules();
  const bool mf_modules = cfg_.architecture == TconvArch::kInception;
  const int num_chains = cfg_.architecture == TconvArch::kMultiflowVgg ? cfg_.flows() : 1;

  auto add_bn = [&](const std::string& prefix, int channels) {
    BnIdx bn;
    if (cfg_.use_bn) {
      bn.gamma = params_.add(prefix + ".bn.gamma", Tensor::full({channels}, 1.0));
      bn.beta = params_.add(prefix + ".bn.beta", Tensor::zeros({channels}));
      bn.mean = params_.add(prefix + ".bn.running_mean", Tensor::zeros({channels}), false);
      bn.var = params_.add(prefix + ".bn.running_var", Tensor::full({channels}, 1.0), false);
    }
    return bn;
  };
  auto add_conv = [&](const std::string& prefix, int in_ch, int out_ch, int k, int stride) {
    ConvIdx conv;
    conv.kernel_size = k;
    conv.stride = stride;
    conv.kernel = params_.add(prefix + ".kernel",
                              init_uniform_fan_in({out_ch, in_ch, k}, in_ch * k, rng));
    conv.bias = params_.add(prefix + ".bias", init_uniform_fan_in({out_ch}, in_ch * k, rng));
    conv.bn = add_bn(prefix, out_ch);
    return conv;
  };
  auto add_flow = [&](const std::string& prefix, const std::vector<int>& stack, int channels) {
    FlowIdx flow;
    for (size_t s = 0; s < stack.size(); ++s) {
      const bool last = s + 1 == stack.size();
      const int stride = (cfg_.downsample == Downsample::kStride2 && last) ? 2 : 1;
      flow.convs.push_back(
          add_conv(prefix + ".conv" + std::to_string(s), channels, channels, stack[s], stride));
    }
    flow.pool_after = cfg_.downsample == Downsample::kPool;
    return flow;
  };
  auto add_reduce_chain = [&](const std::string& prefix, int in_ch) {
    std::vector<ConvIdx> stages;
    int c = in_ch;
    for (size_t k = 0; k < cfg_.fusion_chain.size(); ++k) {
      const int out = cfg_.fusion_chain[k];
      ConvIdx stage;
      stage.kernel_size = 1;
      stage.stride = 1;
      const std::string name = prefix + std::to_string(k);
      stage.kernel = params_.add(name + ".kernel", init_uniform_fan_in({out, c, 1}, c, rng));
      stage.bias = params_.add(name + ".bias", init_uniform_fan_in({out}, c, rng));
      if (k + 1 < cfg_.fusion_chain.size()) stage.bn = add_bn(name, out);
      stages.push_back(stage);
      c = out;
    }
    return stages;
  };

  int t = input_frames_;
  int chain_channels = 1;
  for (int c = 0; c < num_chains; ++c) {
    ChainIdx chain;
    int ch = 1;
    const std::string chain_prefix = num_chains > 1 ? "chain" + std::to_string(c) + "." : "";
    for (int m = 0; m < modules; ++m) {
      ModuleIdx module;
      const std::string mod_prefix = chain_prefix + "module" + std::to_string(m);
      if (num_chains > 1) {
        module.flows.push_back(
            add_flow(mod_prefix, cfg_.flow_kernels[static_cast<size_t>(c)], ch));
      } else if (mf_modules) {
        for (int f = 0; f < cfg_.flows(); ++f) {
          module.flows.push_back(add_flow(mod_prefix + ".flow" + std::to_string(f),
                                          cfg_.flow_kernels[static_cast<size_t>(f)], ch));
        }
        ch *= cfg_.flows();
      } else {
        module.flows.push_back(add_flow(mod_prefix, cfg_.flow_kernels[0], ch));
      }
      if (mf_modules && cfg_.reduce_placement == ReducePlacement::kPerModule) {
        if (cfg_.reduce_method == ReduceMethod::kConv) {
          module.reduce = add_reduce_chain(mod_prefix + ".reduce", ch);
        } else {
          module.reduce_pool = true;
        }
        ch = 1;
      }
      chain.modules.push_back(std::move(module));
      if (c == 0) t = (t + 1) / 2;
    }
    chain_channels = ch;
    chains_.push_back(std::move(chain));
  }
  int c_fin = num_chains > 1 ? num_chains : chain_channels;
  if (cfg_.multi_flow_arch() && cfg_.reduce_placement == ReducePlacement::kAfterAll && c_fin > 1) {
    if (cfg_.reduce_method == ReduceMethod::kConv) {
      fusion_ = add_reduce_chain("fusion", c_fin);
    }
    c_fin = 1;
  }
  flatten_width_ = c_fin * input_dim_ * t;

  int cls_in = flatten_width_;
  if (cfg_.fc_width > 0) {
    fc_w_ = params_.add("fc.weight",
                        init_uniform_fan_in({flatten_width_, cfg_.fc_width}, flatten_width_, rng));
    fc_b_ = params_.add("fc.bias", init_uniform_fan_in({cfg_.fc_width}, flatten_width_, rng));
    cls_in = cfg_.fc_width;
  }
  cls_w_ = params_.add("classifier.weight",
                       init_uniform_fan_in({cls_in, cfg_.num_classes}, cls_in, rng));
  cls_b_ = params_.add("classifier.bias",
                       init_uniform_fan_in({cfg_.num_classes}, cls_in, rng));
}

std::vector<NodeId> TemporalConvModel::apply_bn(Graph& g, const std::vector<NodeId>& bound,
                                                std::vector<NodeId> states, const BnIdx& bn,
                                                bool train) {
  std::vector<NodeId> rows;
  std::vector<std::pair<int, int>> dims;
  rows.reserve(states.size());
  for (NodeId s : states) {
    const Tensor& v = g.value(s);
    dims.emplace_back(v.dim(1), v.dim(2));
    rows.push_back(channels_to_rows(g, s));
  }
  NodeId all = rows.size() == 1 ? rows[0] : concat_rows(g, rows);
  all = batch_norm(g, all, bound[static_cast<size_t>(bn.gamma)],
                   bound[static_cast<size_t>(bn.beta)], params_.at(bn.mean).value,
                   params_.at(bn.var).value, 0.1, 1e-5, train, train);
  std::vector<NodeId> out;
  out.reserve(states.size());
  int offset = 0;
  for (size_t i = 0; i < states.size(); ++i) {
    const int n = dims[i].first * dims[i].second;
    NodeId part = states.size() == 1 ? all : slice_rows(g, all, offset, offset + n);
    offset += n;
    out.push_back(rows_to_channels(g, part, dims[i].first, dims[i].second));
  }
  return out;
}

std::vector<NodeId> TemporalConvModel::run_conv(Graph& g, const std::vector<NodeId>& bound,
                                                std::vector<NodeId> states, const ConvIdx& conv,
                                                bool train) {
  for (NodeId& s : states) {
    s = temporal_conv1d(g, s, bound[static_cast<size_t>(conv.kernel)], conv.stride);
    s = conv_channel_bias(g, s, bound[static_cast<size_t>(conv.bias)]);
  }
  if (conv.bn.gamma >= 0) states = apply_bn(g, bound, std::move(states), conv.bn, train);
  for (NodeId& s : states) s = relu(g, s);
  return states;
}

std::vector<NodeId> TemporalConvModel::run_flow(Graph& g, const std::vector<NodeId>& bound,
                                                std::vector<NodeId> states, const FlowIdx& flow,
                                                bool train) {
  for (const ConvIdx& conv : flow.convs) {
    states = run_conv(g, bound, std::move(states), conv, train);
  }
  if (flow.pool_after) {
    for (NodeId& s : states) s = temporal_halve_max(g, s);
  }
  return states;
}

std::vector<NodeId> TemporalConvModel::run_conv_reduce(Graph& g,
                                                       const std::vector<NodeId>& bound,
                                                       std::vector<NodeId> states,
                                                       const std::vector<ConvIdx>& stages,
                                                       bool train) {
  for (size_t k = 0; k < stages.size(); ++k) {
    const ConvIdx& stage = stages[k];
    for (NodeId& s : states) {
      s = temporal_conv1d(g, s, bound[static_cast<size_t>(stage.kernel)], 1);
      s = conv_channel_bias(g, s, bound[static_cast<size_t>(stage.bias)]);
    }
    if (k + 1 < stages.size()) {
      if (stage.bn.gamma >= 0) states = apply_bn(g, bound, std::move(states), stage.bn, train);
      for (NodeId& s : states) s = relu(g, s);
    }
  }
  return states;
}

NodeId TemporalConvModel::forward_logits(Graph& g, const std::vector<NodeId>& bound,
                                         const std::vector<const FeatureMatrix*>& batch,
                                         Mode mode, Rng* rng) {
  if (batch.empty()) throw ContractError("tconv: empty batch");
  const bool train = mode == Mode::kTrain;

  std::vector<NodeId> inputs;
  inputs.reserve(batch.size());
  for (const FeatureMatrix* fm : batch) {
    if (fm->dim() != input_dim_) {
      throw DimensionError("tconv: sequence " + fm->id + " has feature dim " +
                           std::to_string(fm->dim()) + ", model expects " +
                           std::to_string(input_dim_));
    }
    if (fm->length() != input_frames_) {
      throw DimensionError("tconv: sequence " + fm->id + " has " +
                           std::to_string(fm->length()) + " frames, model expects " +
                           std::to_string(input_frames_));
    }
    inputs.push_back(reshape(g, g.leaf(fm->values), {1, input_dim_, fm->length()}));
  }

  std::vector<std::vector<NodeId>> chain_outputs;
  for (const ChainIdx& chain : chains_) {
    std::vector<NodeId> states = inputs;
    for (const ModuleIdx& module : chain.modules) {
      if (module.flows.size() == 1) {
        states = run_flow(g, bound, std::move(states), module.flows[0], train);
      } else {
        std::vector<std::vector<NodeId>> flow_outs;
        for (const FlowIdx& flow : module.flows) {
          flow_outs.push_back(run_flow(g, bound, states, flow, train));
        }
        for (size_t i = 0; i < states.size(); ++i) {
          std::vector<NodeId> parts;
          parts.reserve(flow_outs.size());
          for (const auto& fo : flow_outs) parts.push_back(fo[i]);
          states[i] = concat_channels(g, parts);
        }
      }
      if (!module.reduce.empty()) {
        states = run_conv_reduce(g, bound, std::move(states), module.reduce, train);
      } else if (module.reduce_pool) {
        for (NodeId& s : states) {
          s = channel_pool(g, s, cfg_.reduce_method == ReduceMethod::kMaxPool ? PoolKind::kMax
                                                                              : PoolKind::kMean);
        }
      }
    }
    chain_outputs.push_back(std::move(states));
  }

  std::vector<NodeId> states;
  if (chain_outputs.size() == 1) {
    states = std::move(chain_outputs[0]);
  } else {
    states.resize(batch.size());
    for (size_t i = 0; i < batch.size(); ++i) {
      std::vector<NodeId> parts;
      parts.reserve(chain_outputs.size());
      for (const auto& co : chain_outputs) parts.push_back(co[i]);
      states[i] = concat_channels(g, parts);
    }
  }

  if (cfg_.multi_flow_arch() && cfg_.reduce_placement == ReducePlacement::kAfterAll) {
    if (!fusion_.empty()) {
      states = run_conv_reduce(g, bound, std::move(states), fusion_, train);
    } else if (g.value(states[0]).dim(0) > 1) {
      for (NodeId& s : states) {
        s = channel_pool(g, s, cfg_.reduce_method == ReduceMethod::kMaxPool ? PoolKind::kMax
                                                                            : PoolKind::kMean);
      }
    }
  }

  std::vector<NodeId> flat;
  flat.reserve(states.size());
  for (NodeId s : states) {
    if (g.value(s).numel() != flatten_width_) {
      throw DimensionError("tconv: flattened width " + std::to_string(g.value(s).numel()) +
                           " does not match the model's " + std::to_string(flatten_width_));
    }
    flat.push_back(reshape(g, s, {1, flatten_width_}));
  }
  NodeId rows = flat.size() == 1 ? flat[0] : concat_rows(g, flat);

  if (cfg_.use_dropout) rows = dropout(g, rows, cfg_.dropout_p, train, rng);
  if (fc_w_ >= 0) {
    rows = fully_connected(g, rows, bound[static_cast<size_t>(fc_w_)],
                           bound[static_cast<size_t>(fc_b_)]);
    if (cfg_.use_dropout) rows = dropout(g, rows, cfg_.dropout_p, train, rng);
  }
  return fully_connected(g, rows, bound[static_cast<size_t>(cls_w_)],
                         bound[static_cast<size_t>(cls_b_)]);
}

namespace {

std::string arch_str(const TemporalConvConfig& cfg) {
  const int m = cfg.effective_modules();
  auto group = [&]() {
    if (!cfg.multi_flow_arch()) return std::string("T");
    std::string s = "(";
    for (int f = 0; f < cfg.flows(); ++f) {
      if (f) s += ",";
      s += "T";
    }
    return s + ")";
  };
  if (cfg.architecture == TconvArch::kMultiflowVgg) {
    std::string chain = "{";
    for (int i = 0; i < m; ++i) {
      if (i) chain += ",";
      chain += "T";
    }
    chain += "}";
    std::string s = "(";
    for (int f = 0; f < cfg.flows(); ++f) {
      if (f) s += ",";
      s += chain;
    }
    return s + ")";
  }
  if (m == 1) return group();
  std::string s = "{";
  for (int i = 0; i < m; ++i) {
    if (i) s += ",";
    s += group();
  }
  return s + "}";
}

std::string kernels_str(const TemporalConvConfig& cfg) {
  std::string s = cfg.downsample == Downsample::kStride2 ? "2-stride Conv"
                                                         : "1-stride Conv + Max pooling";
  for (const auto& stack : cfg.flow_kernels) {
    s += " | ";
    for (size_t i = 0; i < stack.size(); ++i) {
      if (i) s += " - ";
      s += "Conv" + std::to_string(stack[i]) + ", 1";
    }
  }
  return s;
}

std::string reduce_str(const TemporalConvConfig& cfg) {
  std::string s =
      cfg.reduce_placement == ReducePlacement::kPerModule ? "per-module " : "";
  switch (cfg.reduce_method) {
    case ReduceMethod::kAvgPool:
      return s + "Average pooling";
    case ReduceMethod::kMaxPool:
      return s + "Max pooling";
    case ReduceMethod::kConv: {
      s += "Conv fusion:";
      for (int c : cfg.fusion_chain) s += " Conv1, " + std::to_string(c);
      return s;
    }
  }
  return s;
}

TconvVariant make_variant(std::string id, const TemporalConvConfig& cfg) {
  std::string desc = arch_str(cfg);
  desc += cfg.use_bn ? " | BN" : " | -";
  desc += cfg.use_dropout ? " | Dropout" : " | -";
  desc += cfg.fc_width > 0 ? " | FC-" + std::to_string(cfg.fc_width) : " | -";
  if (cfg.multi_flow_arch()) {
    desc += " | " + kernels_str(cfg) + " | " + reduce_str(cfg);
  } else {
    desc += " | " + kernels_str(cfg);
  }
  return TconvVariant{std::move(id), std::move(desc), cfg};
}

}  // namespace

std::vector<TconvVariant> tconv_catalog() {
  std::vector<TconvVariant> out;
  auto base = [](TconvArch arch, int modules, int fc) {
    TemporalConvConfig c;
    c.architecture = arch;
    c.num_modules = modules;
    c.fc_width = fc;
    c.num_classes = 101;
    if (arch == TconvArch::kVgg || arch == TconvArch::kSingle || arch == TconvArch::kDouble) {
      c.flow_kernels = {{5}};
    }
    return c;
  };

  // Layer-count and architecture grid.
  out.push_back(make_variant("1l-fc1024", base(TconvArch::kSingle, 1, 1024)));
  out.push_back(make_variant("1l2f-fc1024", base(TconvArch::kInception, 1, 1024)));
  out.push_back(make_variant("2l-fc1024", base(TconvArch::kDouble, 2, 1024)));
  out.push_back(make_variant("2l2f-fc1024", base(TconvArch::kInception, 2, 1024)));
  for (int fc : {512, 1024, 2048, 4096}) {
    out.push_back(make_variant("vgg-fc" + std::to_string(fc), base(TconvArch::kVgg, 4, fc)));
  }
  for (int fc : {512, 1024, 2048, 4096}) {
    out.push_back(
        make_variant("mfvgg-fc" + std::to_string(fc), base(TconvArch::kMultiflowVgg, 4, fc)));
  }
  // Regularization toggles around the 4-module multi-flow network.
  {
    auto cfg = base(TconvArch::kInception, 4, 1024);
    cfg.use_bn = false;
    cfg.use_dropout = false;
    out.push_back(make_variant("inception-fc1024", cfg));
    cfg.use_dropout = true;
    out.push_back(make_variant("inception-drop-fc1024", cfg));
    cfg.use_bn = true;
    cfg.use_dropout = false;
    out.push_back(make_variant("inception-bn-fc1024", cfg));
    cfg.use_dropout = true;
    cfg.fc_width = 0;
    out.push_back(make_variant("inception-bn-drop-nofc", cfg));
    for (int fc : {512, 1024, 2048, 4096}) {
      cfg.fc_width = fc;
      out.push_back(make_variant("inception-bn-drop-fc" + std::to_string(fc), cfg));
    }
  }
  // Filter-dimension reduction variants.
  {
    auto cfg = base(TconvArch::kInception, 4, 1024);
    cfg.reduce_placement = ReducePlacement::kPerModule;
    cfg.reduce_method = ReduceMethod::kAvgPool;
    out.push_back(make_variant("inception-bn-drop-fc1024-permod-fuseavg", cfg));
    cfg.reduce_method = ReduceMethod::kMaxPool;
    out.push_back(make_variant("inception-bn-drop-fc1024-permod-fusemax", cfg));
    cfg.reduce_method = ReduceMethod::kConv;
    cfg.fusion_chain = {1};
    out.push_back(make_variant("inception-bn-drop-fc1024-permod-fuse1", cfg));

    cfg = base(TconvArch::kInception, 4, 1024);
    cfg.reduce_method = ReduceMethod::kAvgPool;
    out.push_back(make_variant("inception-bn-drop-fc1024-fuseavg", cfg));
    cfg.reduce_method = ReduceMethod::kMaxPool;
    out.push_back(make_variant("inception-bn-drop-fc1024-fusemax", cfg));
    cfg.reduce_method = ReduceMethod::kConv;
    for (const auto& chain : std::vector<std::vector<int>>{
             {1}, {2, 1}, {4, 1}, {8, 1}, {8, 4, 1}, {8, 2, 1}, {8, 4, 2, 1}}) {
      cfg.fusion_chain = chain;
      std::string id = "inception-bn-drop-fc1024-fuse";
      for (size_t i = 0; i < chain.size(); ++i) {
        if (i) id += "x";
        id += std::to_string(chain[i]);
      }
      out.push_back(make_variant(id, cfg));
    }
  }
  // Kernel-size variants; (5,7) is the default winner above.
  {
    auto cfg = base(TconvArch::kInception, 4, 1024);
    for (auto [a, b] : std::vector<std::pair<int, int>>{{3, 5}, {3, 7}, {3, 9}, {5, 9}, {7, 9}}) {
      cfg.flow_kernels = {{a}, {b}};
      out.push_back(make_variant(
          "inception-bn-drop-fc1024-k" + std::to_string(a) + "x" + std::to_string(b), cfg));
    }
    cfg.flow_kernels = {{3, 3}, {3, 3, 3}};
    out.push_back(make_variant("inception-bn-drop-fc1024-factorized3", cfg));
    cfg = base(TconvArch::kInception, 4, 1024);
    cfg.downsample = Downsample::kStride2;
    out.push_back(make_variant("inception-bn-drop-fc1024-stride2", cfg));
  }
  return out;
}

std::unique_ptr<Model> make_tconv_model(const TemporalConvConfig& cfg, int input_dim,
                                        int input_frames, uint64_t seed) {
  return std::make_unique<TemporalConvModel>(cfg, input_dim, input_frames, seed);
}

}  // namespace temporal_heads
