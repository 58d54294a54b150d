#pragma once

#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "temporal_heads/tconv.hpp"
#include "temporal_heads/train.hpp"
#include "temporal_heads/tslstm.hpp"

namespace temporal_heads {

/// Parsed model configuration with the family discriminator. Exactly one of
/// the embedded configs is active.
struct ModelSpec {
  std::string family;  // "tslstm" | "tconv"
  std::string variant_id;
  TsLstmConfig tslstm;
  TemporalConvConfig tconv;

  nlohmann::json to_json() const;
};

/// Parses {"family": ..., "variant": id | "model": {...}}. Unknown keys are
/// hard errors everywhere.
ModelSpec parse_model_spec(const nlohmann::json& j);
TrainConfig parse_train_config(const nlohmann::json& j);
SynthSpec parse_synth_spec(const nlohmann::json& j);
nlohmann::json train_config_to_json(const TrainConfig& cfg);
nlohmann::json synth_spec_to_json(const SynthSpec& spec);

std::unique_ptr<Model> build_model(const ModelSpec& spec, int input_dim, int input_frames,
                                   uint64_t seed);

// Checkpoint file: magic "THC1", u32 little-endian header length, JSON header
// (family, resolved model config, dims, parameter table), then f64
// little-endian parameter payload in table order.
void save_checkpoint(const std::string& path, const ModelSpec& spec, const Model& model,
                     int input_frames);
struct Checkpoint {
  ModelSpec spec;
  int input_dim = 0;
  int input_frames = 0;
  std::unique_ptr<Model> model;
};
Checkpoint load_checkpoint(const std::string& path);

/// Elementwise mean of prediction distributions; stays a distribution.
PredictionDistribution ensemble_mean(const std::vector<PredictionDistribution>& preds);

struct AblationResult {
  std::string variant_id;
  std::string descriptor;
  double eval_accuracy = 0.0;
  long long parameter_count = 0;
  double wall_time_sec = 0.0;
  uint64_t seed = 0;
};

/// Plain-text table sorted by accuracy descending, ties by id ascending.
std::string render_report(std::vector<AblationResult> results);
nlohmann::json ablation_to_json(const std::vector<AblationResult>& results);
std::vector<AblationResult> ablation_from_json(const nlohmann::json& j);

// Catalog shrinking for --small runs: paper widths map to single-digit ones
// (512->4, 1024->6, 2048->8, 4096->10), class count is replaced.
int shrink_width(int w);
TsLstmConfig shrink_tslstm(TsLstmConfig cfg, int num_classes);
TemporalConvConfig shrink_tconv(TemporalConvConfig cfg, int num_classes);

/// Per-frame linear softmax classifier whose per-frame predictions are
/// averaged over the sequence: the order-invariant control.
struct BaselineResult {
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
};
BaselineResult train_frame_baseline(const LoadedDataset& data, uint64_t seed, int epochs,
                                    double lr = 1e-2, int batch_rows = 256);

// CLI subcommand entry points. All of them print the resolved configuration
// before acting and return a process exit code.
struct SynthOptions {
  std::string config_path;
  std::string out_dir;
  bool has_seed = false;
  uint64_t seed = 0;
};
struct TrainOptions {
  std::string config_path;
  std::string dataset_path;
  std::string out_dir;
  bool has_seed = false;
  uint64_t seed = 0;
  int frames = 25;
};
struct EvalOptions {
  std::string checkpoint_path;
  std::string dataset_path;
  std::string out_dir;
};
struct GradcheckOptions {
  bool all = false;
  std::string family;  // "tslstm" | "tconv" | "" with all
  bool small = false;
  uint64_t seed = 42;
  double tolerance = 1e-4;
};
struct AblateOptions {
  std::string family = "tslstm";  // "tslstm" | "tconv" | "all"
  std::string dataset_path;
  std::string out_dir;
  int jobs = 1;
  bool small = false;
  uint64_t seed = 7;
  int epochs = 20;
  int frames = 25;
};
struct BaselineOptions {
  std::string dataset_path;
  std::string out_dir;
  uint64_t seed = 7;
  int epochs = 30;
  int frames = 25;
};

int run_synth(const SynthOptions& opts);
int run_train(const TrainOptions& opts);
int run_eval(const EvalOptions& opts);
int run_gradcheck(const GradcheckOptions& opts);
int run_ablate(const AblateOptions& opts);
int run_baseline(const BaselineOptions& opts);

/// Worker cap: min(requested, TEMPORAL_HEADS_THREADS when set).
int resolve_jobs(int requested);

nlohmann::json load_json_file(const std::string& path);

}  // namespace temporal_heads
