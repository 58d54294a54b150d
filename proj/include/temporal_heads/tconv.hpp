#pragma once

#include <memory>
#include <string>
#include <vector>

#include "temporal_heads/layers.hpp"
#include "temporal_heads/model.hpp"

namespace temporal_heads {

enum class TconvArch { kVgg, kMultiflowVgg, kInception, kSingle, kDouble };
enum class Downsample { kPool, kStride2 };
enum class ReduceMethod { kConv, kAvgPool, kMaxPool };
enum class ReducePlacement { kAfterAll, kPerModule };

struct TclConfig {
  int kernel_size = 5;
  Downsample downsample = Downsample::kPool;
  bool use_bn = true;
  bool use_relu = true;

  void validate() const;
};

struct TemporalConvConfig {
  TconvArch architecture = TconvArch::kInception;
  // Kernel stack per flow; a plain pair like {{5},{7}} is the paper default,
  // {{3,3},{3,3,3}} is the factorized ablation.
  std::vector<std::vector<int>> flow_kernels = {{5}, {7}};
  int num_modules = 4;
  std::vector<int> fusion_chain = {4, 2, 1};
  ReduceMethod reduce_method = ReduceMethod::kConv;
  ReducePlacement reduce_placement = ReducePlacement::kAfterAll;
  Downsample downsample = Downsample::kPool;
  int fc_width = 1024;  // 0 = classifier directly on the flattened features
  bool use_bn = true;
  bool use_dropout = true;
  double dropout_p = 0.5;
  int num_classes = 0;

  void validate() const;
  int flows() const { return static_cast<int>(flow_kernels.size()); }
  bool multi_flow_arch() const {
    return architecture == TconvArch::kInception || architecture == TconvArch::kMultiflowVgg;
  }
  int effective_modules() const;
};

/// Halves the temporal axis of x [C x D x T] with width-2 stride-2 max
/// pooling; a trailing single column passes through.
NodeId temporal_halve_max(Graph& g, NodeId x);

/// Optional batch-norm hookup for the standalone layer ops below.
struct BnHook {
  NodeId gamma = -1;
  NodeId beta = -1;
  Tensor* running_mean = nullptr;
  Tensor* running_var = nullptr;
};

struct TclParams {
  NodeId kernels;  // [C x C x k]
  NodeId bias;     // [C]
  BnHook bn;
};

/// One Temporal-ConvNet layer: conv (stride 1) -> BN -> ReLU -> halving max
/// pool, or conv (stride 2) -> BN -> ReLU when cfg.downsample is stride2.
/// Channel count is preserved.
NodeId tcl(Graph& g, NodeId x, const TclConfig& cfg, const TclParams& p, bool train);

/// Applies one TCL per flow to the same input and concatenates the outputs
/// along the filter axis, in flow order.
NodeId multi_flow(Graph& g, NodeId x, const std::vector<TclConfig>& cfgs,
                  const std::vector<TclParams>& params, bool train);

struct FusionStageParams {
  NodeId kernels;  // [Cout x Cin x 1]
  NodeId bias;     // [Cout]
  BnHook bn;
};

/// Chain of temporally-pointwise 1x1 convolutions reducing the filter
/// dimension; BN -> ReLU between stages (BN only when hooked up). Output
/// channel counts must strictly decrease and end at 1.
NodeId conv_fusion(Graph& g, NodeId x, const std::vector<FusionStageParams>& stages, bool train);

class TemporalConvModel : public Model {
 public:
  TemporalConvModel(TemporalConvConfig cfg, int input_dim, int input_frames, uint64_t seed);

  int num_classes() const override { return cfg_.num_classes; }
  int input_dim() const override { return input_dim_; }
  int input_frames() const { return input_frames_; }
  const TemporalConvConfig& config() const { return cfg_; }

  NodeId forward_logits(Graph& g, const std::vector<NodeId>& bound,
                        const std::vector<const FeatureMatrix*>& batch, Mode mode,
                        Rng* rng) override;

 private:
  struct BnIdx {
    int gamma = -1, beta = -1, mean = -1, var = -1;
  };
  struct ConvIdx {
    int kernel = -1, bias = -1, kernel_size = 0, stride = 1;
    BnIdx bn;
  };
  struct FlowIdx {
    std::vector<ConvIdx> convs;
    bool pool_after = false;
  };
  struct ModuleIdx {
    std::vector<FlowIdx> flows;
    std::vector<ConvIdx> reduce;      // per-module conv fusion stages
    bool reduce_pool = false;         // per-module pooling reduction instead
  };
  struct ChainIdx {
    std::vector<ModuleIdx> modules;
  };

  // Batch-lockstep helpers: `states` holds one [C x D x T] node per sequence,
  // and batch norm joins them so statistics cover the whole batch.
  std::vector<NodeId> apply_bn(Graph& g, const std::vector<NodeId>& bound,
                               std::vector<NodeId> states, const BnIdx& bn, bool train);
  std::vector<NodeId> run_conv(Graph& g, const std::vector<NodeId>& bound,
                               std::vector<NodeId> states, const ConvIdx& conv, bool train);
  std::vector<NodeId> run_flow(Graph& g, const std::vector<NodeId>& bound,
                               std::vector<NodeId> states, const FlowIdx& flow, bool train);
  std::vector<NodeId> run_conv_reduce(Graph& g, const std::vector<NodeId>& bound,
                                      std::vector<NodeId> states,
                                      const std::vector<ConvIdx>& stages, bool train);

  TemporalConvConfig cfg_;
  int input_dim_ = 0;
  int input_frames_ = 0;
  int flatten_width_ = 0;
  std::vector<ChainIdx> chains_;
  std::vector<ConvIdx> fusion_;  // after-all reduction stages
  int fc_w_ = -1, fc_b_ = -1;
  int cls_w_ = -1, cls_b_ = -1;
};

struct TconvVariant {
  std::string id;
  std::string descriptor;
  TemporalConvConfig config;
};

/// Full Temporal-ConvNet ablation grid: architectures and FC widths,
/// dimension-reduction variants, and kernel-size variants. Configurations
/// that appear in more than one table collapse to a single entry.
std::vector<TconvVariant> tconv_catalog();

std::unique_ptr<Model> make_tconv_model(const TemporalConvConfig& cfg, int input_dim,
                                        int input_frames, uint64_t seed);

}  // namespace temporal_heads
