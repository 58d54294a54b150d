#pragma once

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "temporal_heads/model.hpp"

namespace temporal_heads {

/// Per-segment aggregation. kNone bypasses pooling and feeds every frame to
/// the LSTM in order (the vanilla-LSTM ablation rows); it requires a single
/// segment and a non-empty LSTM stack.
enum class TsPool { kMax, kMean, kNone };

struct TsLstmConfig {
  int num_segments = 3;
  bool pre_bn = true;
  int pre_fc_width = 0;  // 0 = no per-frame FC before pooling
  TsPool pool = TsPool::kMax;
  std::vector<int> lstm_widths;  // empty = pooling-only head (segments concatenated)
  bool post_bn = true;
  int num_classes = 0;

  void validate() const;
};

/// Contiguous windows covering [0, N), lengths differing by at most one;
/// the remainder goes to the earliest windows.
struct SegmentPartition {
  std::vector<std::pair<int, int>> boundaries;
};

SegmentPartition partition(int n, int s);

class TsLstmModel : public Model {
 public:
  TsLstmModel(TsLstmConfig cfg, int input_dim, uint64_t seed);

  int num_classes() const override { return cfg_.num_classes; }
  int input_dim() const override { return input_dim_; }
  const TsLstmConfig& config() const { return cfg_; }

  NodeId forward_logits(Graph& g, const std::vector<NodeId>& bound,
                        const std::vector<const FeatureMatrix*>& batch, Mode mode,
                        Rng* rng) override;

 private:
  TsLstmConfig cfg_;
  int input_dim_ = 0;
  // Parameter indices into params_.
  int pre_bn_gamma_ = -1, pre_bn_beta_ = -1, pre_bn_mean_ = -1, pre_bn_var_ = -1;
  int pre_fc_w_ = -1, pre_fc_b_ = -1;
  struct GateIdx {
    int w_x, w_h, bias;
  };
  struct LayerIdx {
    GateIdx input_gate, forget_gate, output_gate, candidate;
  };
  std::vector<LayerIdx> lstm_;
  int post_bn_gamma_ = -1, post_bn_beta_ = -1, post_bn_mean_ = -1, post_bn_var_ = -1;
  int cls_w_ = -1, cls_b_ = -1;
  int consensus_width_ = 0;
};

struct TsLstmVariant {
  std::string id;
  std::string descriptor;  // paper-style row: TS | BN | FC | pooling | BN | FC
  TsLstmConfig config;
};

/// Every TS-LSTM ablation row, one entry per row, stable ids.
std::vector<TsLstmVariant> variant_catalog();

std::unique_ptr<Model> make_tslstm_model(const TsLstmConfig& cfg, int input_dim, uint64_t seed);

}  // namespace temporal_heads
