#include "temporal_heads/harness.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <mutex>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

namespace fs = std::filesystem;

namespace temporal_heads {

namespace {

void require_keys(const nlohmann::json& j, const std::set<std::string>& allowed,
                  const char* what) {
  if (!j.is_object()) throw ConfigError(std::string(what) + ": expected a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!allowed.count(it.key())) {
      throw ConfigError(std::string(what) + ": unknown key '" + it.key() + "'");
    }
  }
}

std::string pool_to_string(TsPool p) {
  switch (p) {
    case TsPool::kMax:
      return "max";
    case TsPool::kMean:
      return "mean";
    case TsPool::kNone:
      return "none";
  }
  return "max";
}

TsPool pool_from_string(const std::string& s) {
  if (s == "max") return TsPool::kMax;
  if (s == "mean") return TsPool::kMean;
  if (s == "none") return TsPool::kNone;
  throw ConfigError("unknown pool kind '" + s + "' (expected max|mean|none)");
}

std::string arch_to_string(TconvArch a) {
  switch (a) {
    case TconvArch::kVgg:
      return "vgg";
    case TconvArch::kMultiflowVgg:
      return "multiflow_vgg";
    case TconvArch::kInception:
      return "inception";
    case TconvArch::kSingle:
      return "single";
    case TconvArch::kDouble:
      return "double";
  }
  return "inception";
}

TconvArch arch_from_string(const std::string& s) {
  if (s == "vgg") return TconvArch::kVgg;
  if (s == "multiflow_vgg") return TconvArch::kMultiflowVgg;
  if (s == "inception") return TconvArch::kInception;
  if (s == "single") return TconvArch::kSingle;
  if (s == "double") return TconvArch::kDouble;
  throw ConfigError("unknown architecture '" + s + "'");
}

nlohmann::json tslstm_to_json(const TsLstmConfig& c) {
  return {{"num_segments", c.num_segments}, {"pre_bn", c.pre_bn},
          {"pre_fc_width", c.pre_fc_width}, {"pool", pool_to_string(c.pool)},
          {"lstm_widths", c.lstm_widths},   {"post_bn", c.post_bn},
          {"num_classes", c.num_classes}};
}

nlohmann::json tconv_to_json(const TemporalConvConfig& c) {
  return {{"architecture", arch_to_string(c.architecture)},
          {"flow_kernels", c.flow_kernels},
          {"num_modules", c.num_modules},
          {"fusion_chain", c.fusion_chain},
          {"reduce_method", c.reduce_method == ReduceMethod::kConv      ? "conv"
                            : c.reduce_method == ReduceMethod::kAvgPool ? "avgpool"
                                                                        : "maxpool"},
          {"reduce_placement",
           c.reduce_placement == ReducePlacement::kAfterAll ? "after_all" : "per_module"},
          {"downsample", c.downsample == Downsample::kPool ? "pool" : "stride2"},
          {"fc_width", c.fc_width},
          {"use_bn", c.use_bn},
          {"use_dropout", c.use_dropout},
          {"dropout_p", c.dropout_p},
          {"num_classes", c.num_classes}};
}

TsLstmConfig tslstm_from_json(const nlohmann::json& j) {
  require_keys(j,
               {"num_segments", "pre_bn", "pre_fc_width", "pool", "lstm_widths", "post_bn",
                "num_classes"},
               "tslstm model config");
  TsLstmConfig c;
  c.num_segments = j.value("num_segments", c.num_segments);
  c.pre_bn = j.value("pre_bn", c.pre_bn);
  c.pre_fc_width = j.value("pre_fc_width", c.pre_fc_width);
  if (j.contains("pool")) c.pool = pool_from_string(j.at("pool").get<std::string>());
  if (j.contains("lstm_widths")) c.lstm_widths = j.at("lstm_widths").get<std::vector<int>>();
  c.post_bn = j.value("post_bn", c.post_bn);
  c.num_classes = j.value("num_classes", 0);
  return c;
}

TemporalConvConfig tconv_from_json(const nlohmann::json& j) {
  require_keys(j,
               {"architecture", "flow_kernels", "num_modules", "fusion_chain", "reduce_method",
                "reduce_placement", "downsample", "fc_width", "use_bn", "use_dropout",
                "dropout_p", "num_classes"},
               "tconv model config");
  TemporalConvConfig c;
  if (j.contains("architecture")) {
    c.architecture = arch_from_string(j.at("architecture").get<std::string>());
  }
  if (c.architecture == TconvArch::kSingle) c.num_modules = 1;
  if (c.architecture == TconvArch::kDouble) c.num_modules = 2;
  if (!c.multi_flow_arch()) c.flow_kernels = {{5}};
  if (j.contains("flow_kernels")) {
    c.flow_kernels.clear();
    for (const auto& f : j.at("flow_kernels")) {
      if (f.is_number_integer()) {
        c.flow_kernels.push_back({f.get<int>()});
      } else {
        c.flow_kernels.push_back(f.get<std::vector<int>>());
      }
    }
  }
  c.num_modules = j.value("num_modules", c.num_modules);
  if (j.contains("fusion_chain")) c.fusion_chain = j.at("fusion_chain").get<std::vector<int>>();
  if (j.contains("reduce_method")) {
    const std::string m = j.at("reduce_method").get<std::string>();
    if (m == "conv") {
      c.reduce_method = ReduceMethod::kConv;
    } else if (m == "avgpool") {
      c.reduce_method = ReduceMethod::kAvgPool;
    } else if (m == "maxpool") {
      c.reduce_method = ReduceMethod::kMaxPool;
    } else {
      throw ConfigError("unknown reduce_method '" + m + "'");
    }
  }
  if (j.contains("reduce_placement")) {
    const std::string p = j.at("reduce_placement").get<std::string>();
    if (p == "after_all") {
      c.reduce_placement = ReducePlacement::kAfterAll;
    } else if (p == "per_module") {
      c.reduce_placement = ReducePlacement::kPerModule;
    } else {
      throw ConfigError("unknown reduce_placement '" + p + "'");
    }
  }
  if (j.contains("downsample")) {
    const std::string d = j.at("downsample").get<std::string>();
    if (d == "pool") {
      c.downsample = Downsample::kPool;
    } else if (d == "stride2") {
      c.downsample = Downsample::kStride2;
    } else {
      throw ConfigError("unknown downsample '" + d + "'");
    }
  }
  c.fc_width = j.value("fc_width", c.fc_width);
  c.use_bn = j.value("use_bn", c.use_bn);
  c.use_dropout = j.value("use_dropout", c.use_dropout);
  c.dropout_p = j.value("dropout_p", c.dropout_p);
  c.num_classes = j.value("num_classes", 0);
  return c;
}

}  // namespace

nlohmann::json ModelSpec::to_json() const {
  nlohmann::json j;
  j["family"] = family;
  if (!variant_id.empty()) j["variant"] = variant_id;
  j["model"] = family == "tslstm" ? tslstm_to_json(tslstm) : tconv_to_json(tconv);
  return j;
}

ModelSpec parse_model_spec(const nlohmann::json& j) {
  if (!j.contains("family")) throw ConfigError("config: missing 'family'");
  ModelSpec spec;
  spec.family = j.at("family").get<std::string>();
  if (spec.family != "tslstm" && spec.family != "tconv") {
    throw ConfigError("config: family must be tslstm or tconv, got '" + spec.family + "'");
  }
  const bool has_variant = j.contains("variant");
  const bool has_model = j.contains("model");
  if (has_variant == has_model) {
    throw ConfigError("config: exactly one of 'variant' or 'model' is required");
  }
  if (has_variant) {
    spec.variant_id = j.at("variant").get<std::string>();
    if (spec.family == "tslstm") {
      for (const TsLstmVariant& v : variant_catalog()) {
        if (v.id == spec.variant_id) {
          spec.tslstm = v.config;
          return spec;
        }
      }
    } else {
      for (const TconvVariant& v : tconv_catalog()) {
        if (v.id == spec.variant_id) {
          spec.tconv = v.config;
          return spec;
        }
      }
    }
    throw ConfigError("config: unknown " + spec.family + " variant '" + spec.variant_id + "'");
  }
  if (spec.family == "tslstm") {
    spec.tslstm = tslstm_from_json(j.at("model"));
  } else {
    spec.tconv = tconv_from_json(j.at("model"));
  }
  return spec;
}

TrainConfig parse_train_config(const nlohmann::json& j) {
  require_keys(j,
               {"lr", "weight_decay", "batch_size", "max_epochs", "plateau_patience",
                "lr_decay_factor", "seed"},
               "train config");
  TrainConfig c;
  c.lr = j.value("lr", c.lr);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.max_epochs = j.value("max_epochs", c.max_epochs);
  c.plateau_patience = j.value("plateau_patience", c.plateau_patience);
  c.lr_decay_factor = j.value("lr_decay_factor", c.lr_decay_factor);
  c.seed = j.value("seed", c.seed);
  c.validate();
  return c;
}

nlohmann::json train_config_to_json(const TrainConfig& c) {
  return {{"lr", c.lr},
          {"weight_decay", c.weight_decay},
          {"batch_size", c.batch_size},
          {"max_epochs", c.max_epochs},
          {"plateau_patience", c.plateau_patience},
          {"lr_decay_factor", c.lr_decay_factor},
          {"seed", c.seed}};
}

SynthSpec parse_synth_spec(const nlohmann::json& j) {
  require_keys(j,
               {"num_classes", "prototypes_per_class", "feature_dim", "frames", "noise_sigma",
                "seed", "train_per_class", "test_per_class"},
               "synth spec");
  SynthSpec s = default_synth_spec();
  s.num_classes = j.value("num_classes", s.num_classes);
  if (j.contains("prototypes_per_class")) {
    s.prototypes_per_class = j.at("prototypes_per_class").get<std::vector<std::vector<int>>>();
  }
  s.feature_dim = j.value("feature_dim", s.feature_dim);
  s.frames = j.value("frames", s.frames);
  s.noise_sigma = j.value("noise_sigma", s.noise_sigma);
  s.seed = j.value("seed", s.seed);
  s.train_per_class = j.value("train_per_class", s.train_per_class);
  s.test_per_class = j.value("test_per_class", s.test_per_class);
  s.validate();
  return s;
}

nlohmann::json synth_spec_to_json(const SynthSpec& s) {
  return {{"num_classes", s.num_classes},
          {"prototypes_per_class", s.prototypes_per_class},
          {"feature_dim", s.feature_dim},
          {"frames", s.frames},
          {"noise_sigma", s.noise_sigma},
          {"seed", s.seed},
          {"train_per_class", s.train_per_class},
          {"test_per_class", s.test_per_class}};
}

std::unique_ptr<Model> build_model(const ModelSpec& spec, int input_dim, int input_frames,
                                   uint64_t seed) {
  if (spec.family == "tslstm") {
    return make_tslstm_model(spec.tslstm, input_dim, seed);
  }
  return make_tconv_model(spec.tconv, input_dim, input_frames, seed);
}

namespace {

void put_u32(std::string& buf, uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_u64(std::string& buf, uint64_t v) {
  for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

uint32_t get_u32(const unsigned char* p) {
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(p[i]) << (8 * i);
  return v;
}

uint64_t get_u64(const unsigned char* p) {
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(p[i]) << (8 * i);
  return v;
}

constexpr char kCheckpointMagic[4] = {'T', 'H', 'C', '1'};

}  // namespace

void save_checkpoint(const std::string& path, const ModelSpec& spec, const Model& model,
                     int input_frames) {
  nlohmann::json header = spec.to_json();
  header["input_dim"] = model.input_dim();
  header["input_frames"] = input_frames;
  nlohmann::json table = nlohmann::json::array();
  const ParameterSet& params = model.params();
  for (int i = 0; i < params.size(); ++i) {
    const Parameter& p = params.at(i);
    table.push_back(
        {{"name", p.name}, {"shape", p.value.shape()}, {"trainable", p.trainable}});
  }
  header["params"] = std::move(table);
  const std::string header_str = header.dump();

  std::string buf;
  buf.append(kCheckpointMagic, 4);
  put_u32(buf, static_cast<uint32_t>(header_str.size()));
  buf += header_str;
  for (int i = 0; i < params.size(); ++i) {
    const Tensor& t = params.at(i).value;
    for (int e = 0; e < t.numel(); ++e) put_u64(buf, std::bit_cast<uint64_t>(t[e]));
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write checkpoint: " + path);
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw DataError("short write to checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("checkpoint not readable: " + path);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kCheckpointMagic, 4) != 0) {
    throw FormatError("checkpoint has bad magic: " + path);
  }
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  const uint32_t header_len = get_u32(p + 4);
  if (bytes.size() < 8 + static_cast<size_t>(header_len)) {
    throw FormatError("checkpoint header truncated: " + path);
  }
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(8, header_len));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("checkpoint header is not valid JSON: " + std::string(e.what()));
  }
  Checkpoint ck;
  // The header stores the resolved model plus the variant id as metadata.
  nlohmann::json spec_json{{"family", header.at("family")}, {"model", header.at("model")}};
  ck.spec = parse_model_spec(spec_json);
  if (header.contains("variant")) ck.spec.variant_id = header.at("variant").get<std::string>();
  ck.input_dim = header.at("input_dim").get<int>();
  ck.input_frames = header.at("input_frames").get<int>();
  ck.model = build_model(ck.spec, ck.input_dim, ck.input_frames, 0);

  ParameterSet& params = ck.model->params();
  const auto& table = header.at("params");
  if (static_cast<int>(table.size()) != params.size()) {
    throw FormatError("checkpoint parameter table does not match the model");
  }
  size_t offset = 8 + header_len;
  for (int i = 0; i < params.size(); ++i) {
    Parameter& param = params.at(i);
    const auto& entry = table[static_cast<size_t>(i)];
    if (entry.at("name").get<std::string>() != param.name ||
        entry.at("shape").get<std::vector<int>>() != param.value.shape()) {
      throw FormatError("checkpoint parameter " + param.name + " does not match the model");
    }
    const size_t need = offset + 8 * static_cast<size_t>(param.value.numel());
    if (bytes.size() < need) throw FormatError("checkpoint payload truncated: " + path);
    for (int e = 0; e < param.value.numel(); ++e) {
      param.value[e] = std::bit_cast<double>(get_u64(p + offset));
      offset += 8;
    }
  }
  if (offset != bytes.size()) throw FormatError("checkpoint has trailing bytes: " + path);
  return ck;
}

PredictionDistribution ensemble_mean(const std::vector<PredictionDistribution>& preds) {
  if (preds.empty()) throw ContractError("ensemble_mean: empty prediction list");
  const size_t c = preds[0].size();
  for (const auto& pd : preds) {
    if (pd.size() != c) throw ContractError("ensemble_mean: class count mismatch");
  }
  PredictionDistribution out(c, 0.0);
  for (const auto& pd : preds) {
    for (size_t j = 0; j < c; ++j) out[j] += pd[j];
  }
  for (size_t j = 0; j < c; ++j) out[j] /= static_cast<double>(preds.size());
  return out;
}

std::string render_report(std::vector<AblationResult> results) {
  if (results.empty()) throw ContractError("render_report: no results");
  std::sort(results.begin(), results.end(), [](const AblationResult& a, const AblationResult& b) {
    if (a.eval_accuracy != b.eval_accuracy) return a.eval_accuracy > b.eval_accuracy;
    return a.variant_id < b.variant_id;
  });
  size_t idw = 7, dw = 10;
  for (const auto& r : results) {
    idw = std::max(idw, r.variant_id.size());
    dw = std::max(dw, r.descriptor.size());
  }
  std::ostringstream os;
  os << std::left << std::setw(static_cast<int>(idw)) << "variant" << "  " << std::right
     << std::setw(8) << "acc" << "  " << std::setw(10) << "params" << "  " << std::setw(9)
     << "time_s" << "  " << std::setw(20) << "seed" << "  " << std::left << "config\n";
  for (const auto& r : results) {
    os << std::left << std::setw(static_cast<int>(idw)) << r.variant_id << "  " << std::right
       << std::setw(8) << std::fixed << std::setprecision(4) << r.eval_accuracy << "  "
       << std::setw(10) << r.parameter_count << "  " << std::setw(9) << std::setprecision(2)
       << r.wall_time_sec << "  " << std::setw(20) << r.seed << "  " << std::left << r.descriptor
       << "\n";
  }
  return os.str();
}

nlohmann::json ablation_to_json(const std::vector<AblationResult>& results) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : results) {
    arr.push_back({{"variant", r.variant_id},
                   {"descriptor", r.descriptor},
                   {"eval_accuracy", r.eval_accuracy},
                   {"parameter_count", r.parameter_count},
                   {"wall_time_sec", r.wall_time_sec},
                   {"seed", r.seed}});
  }
  return arr;
}

std::vector<AblationResult> ablation_from_json(const nlohmann::json& j) {
  std::vector<AblationResult> out;
  for (const auto& e : j) {
    AblationResult r;
    r.variant_id = e.at("variant").get<std::string>();
    r.descriptor = e.at("descriptor").get<std::string>();
    r.eval_accuracy = e.at("eval_accuracy").get<double>();
    r.parameter_count = e.at("parameter_count").get<long long>();
    r.wall_time_sec = e.at("wall_time_sec").get<double>();
    r.seed = e.at("seed").get<uint64_t>();
    out.push_back(std::move(r));
  }
  return out;
}

int shrink_width(int w) {
  switch (w) {
    case 512:
      return 4;
    case 1024:
      return 6;
    case 2048:
      return 8;
    case 4096:
      return 10;
    default:
      return std::max(2, std::min(w, 8));
  }
}

TsLstmConfig shrink_tslstm(TsLstmConfig cfg, int num_classes) {
  for (int& w : cfg.lstm_widths) w = shrink_width(w);
  if (cfg.pre_fc_width > 0) cfg.pre_fc_width = shrink_width(cfg.pre_fc_width);
  cfg.num_classes = num_classes;
  return cfg;
}

TemporalConvConfig shrink_tconv(TemporalConvConfig cfg, int num_classes) {
  if (cfg.fc_width > 0) cfg.fc_width = shrink_width(cfg.fc_width);
  cfg.num_classes = num_classes;
  return cfg;
}

BaselineResult train_frame_baseline(const LoadedDataset& data, uint64_t seed, int epochs,
                                    double lr, int batch_rows) {
  if (data.train_x.empty()) throw TrainingError("baseline: train split is empty");
  const int d = data.feature_dim;
  const int c = data.num_classes;

  // Frame-level design matrix: one labeled row per frame.
  std::vector<std::pair<const FeatureMatrix*, int>> frames;  // (sequence, column)
  std::vector<int> frame_labels;
  for (size_t s = 0; s < data.train_x.size(); ++s) {
    for (int t = 0; t < data.train_x[s].length(); ++t) {
      frames.emplace_back(&data.train_x[s], t);
      frame_labels.push_back(data.train_y[s]);
    }
  }

  Rng init_rng(derive_seed(seed, 0));
  ParameterSet params;
  const int w_idx = params.add("baseline.weight", init_uniform_fan_in({d, c}, d, init_rng));
  const int b_idx = params.add("baseline.bias", Tensor::zeros({c}));

  TrainConfig cfg;
  cfg.lr = lr;
  cfg.batch_size = batch_rows;
  cfg.seed = seed;
  AdamState adam;
  Rng shuffle_rng(derive_seed(seed, 1));
  std::vector<size_t> order(frames.size());
  std::iota(order.begin(), order.end(), size_t{0});

  for (int epoch = 0; epoch < epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    for (size_t start = 0; start < order.size(); start += static_cast<size_t>(batch_rows)) {
      const size_t end = std::min(order.size(), start + static_cast<size_t>(batch_rows));
      Tensor x({static_cast<int>(end - start), d});
      std::vector<int> labels;
      for (size_t i = start; i < end; ++i) {
        const auto& [fm, col] = frames[order[i]];
        for (int r = 0; r < d; ++r) x.at(static_cast<int>(i - start), r) = fm->values.at(r, col);
        labels.push_back(frame_labels[order[i]]);
      }
      Graph g;
      const NodeId xw = g.leaf(std::move(x));
      const NodeId w = g.leaf(params.at(w_idx).value);
      const NodeId b = g.leaf(params.at(b_idx).value);
      const NodeId loss = cross_entropy_logits(g, fully_connected(g, xw, w, b), labels);
      if (!std::isfinite(g.value(loss)[0])) {
        throw TrainingError("baseline: non-finite loss at epoch " + std::to_string(epoch));
      }
      g.backward(loss);
      std::vector<Tensor> grads{Tensor::zeros({d, c}), Tensor::zeros({c})};
      grads[0] = g.grad(w);
      grads[1] = g.grad(b);
      adam_step(params, grads, adam, cfg);
    }
  }

  // Sequence prediction: average the per-frame distributions.
  auto split_accuracy = [&](const std::vector<FeatureMatrix>& xs, const std::vector<int>& ys) {
    int correct = 0;
    for (size_t s = 0; s < xs.size(); ++s) {
      Tensor x({xs[s].length(), d});
      for (int t = 0; t < xs[s].length(); ++t) {
        for (int r = 0; r < d; ++r) x.at(t, r) = xs[s].values.at(r, t);
      }
      Graph g;
      const NodeId logits = fully_connected(g, g.leaf(std::move(x)),
                                            g.leaf(params.at(w_idx).value),
                                            g.leaf(params.at(b_idx).value));
      const Tensor& probs = g.value(softmax_rows(g, logits));
      std::vector<PredictionDistribution> per_frame;
      for (int t = 0; t < probs.dim(0); ++t) {
        PredictionDistribution pd(static_cast<size_t>(c));
        for (int j = 0; j < c; ++j) pd[static_cast<size_t>(j)] = probs.at(t, j);
        per_frame.push_back(std::move(pd));
      }
      if (argmax_class(ensemble_mean(per_frame)) == ys[s]) ++correct;
    }
    return xs.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(xs.size());
  };

  BaselineResult result;
  result.train_accuracy = split_accuracy(data.train_x, data.train_y);
  result.test_accuracy = split_accuracy(data.test_x, data.test_y);
  return result;
}

int resolve_jobs(int requested) {
  int jobs = std::max(1, requested);
  if (const char* cap = std::getenv("TEMPORAL_HEADS_THREADS")) {
    try {
      jobs = std::min(jobs, std::max(1, std::stoi(cap)));
    } catch (const std::exception&) {
      throw ConfigError("TEMPORAL_HEADS_THREADS is not a number: " + std::string(cap));
    }
  }
  return jobs;
}

nlohmann::json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config file not found: " + path);
  try {
    nlohmann::json j;
    in >> j;
    return j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config file is not valid JSON (" + path + "): " + e.what());
  }
}

namespace {

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path);
  out << text;
}

std::string checksum_hex(uint64_t checksum) {
  char buf[19];
  std::snprintf(buf, sizeof(buf), "0x%016llx", static_cast<unsigned long long>(checksum));
  return buf;
}

nlohmann::json report_to_json(const TrainReport& r) {
  return {{"train_loss", r.train_loss},
          {"train_accuracy", r.train_accuracy},
          {"eval_accuracy", r.eval_accuracy},
          {"final_checksum", checksum_hex(r.final_checksum)},
          {"wall_time_sec", r.wall_time_sec}};
}

std::string report_to_table(const TrainReport& r) {
  std::ostringstream os;
  os << std::left << std::setw(6) << "epoch" << std::right << std::setw(12) << "train_loss"
     << std::setw(12) << "train_acc" << std::setw(12) << "eval_acc" << "\n";
  for (size_t e = 0; e < r.train_loss.size(); ++e) {
    os << std::left << std::setw(6) << e << std::right << std::setw(12) << std::fixed
       << std::setprecision(6) << r.train_loss[e] << std::setw(12) << std::setprecision(4)
       << r.train_accuracy[e] << std::setw(12) << r.eval_accuracy[e] << "\n";
  }
  os << "final_checksum " << checksum_hex(r.final_checksum) << "\n";
  os << "wall_time_sec " << std::setprecision(2) << r.wall_time_sec << "\n";
  return os.str();
}

}  // namespace

int run_synth(const SynthOptions& opts) {
  SynthSpec spec = opts.config_path.empty() ? default_synth_spec()
                                            : parse_synth_spec(load_json_file(opts.config_path));
  if (opts.has_seed) spec.seed = opts.seed;
  spec.validate();
  if (opts.out_dir.empty()) throw ConfigError("synth: --out directory is required");
  std::cout << "resolved config:\n" << synth_spec_to_json(spec).dump(2) << "\n";
  const DatasetManifest manifest = generate_synthetic(spec, opts.out_dir);
  std::cout << "wrote " << manifest.entries.size() << " sequences to " << opts.out_dir
            << " (manifest.json)\n";
  return 0;
}

int run_train(const TrainOptions& opts) {
  if (opts.config_path.empty()) throw ConfigError("train: --config is required");
  if (opts.dataset_path.empty()) throw ConfigError("train: --dataset is required");
  const nlohmann::json file = load_json_file(opts.config_path);
  require_keys(file, {"family", "variant", "model", "train", "frames"}, "train config file");
  ModelSpec spec = parse_model_spec(file);
  TrainConfig tcfg = file.contains("train") ? parse_train_config(file.at("train")) : TrainConfig{};
  const int frames = file.value("frames", opts.frames);
  if (opts.has_seed) tcfg.seed = opts.seed;

  const DatasetManifest manifest = load_manifest(opts.dataset_path);
  const LoadedDataset data = load_dataset(manifest, frames);
  int& classes = spec.family == "tslstm" ? spec.tslstm.num_classes : spec.tconv.num_classes;
  // Catalog variants carry the table's class column; the dataset decides.
  if (classes == 0 || !spec.variant_id.empty()) classes = data.num_classes;
  if (classes != data.num_classes) {
    throw ConfigError("train: config expects " + std::to_string(classes) +
                      " classes but the dataset has " + std::to_string(data.num_classes));
  }

  nlohmann::json resolved = spec.to_json();
  resolved["train"] = train_config_to_json(tcfg);
  resolved["frames"] = frames;
  resolved["dataset"] = opts.dataset_path;
  std::cout << "resolved config:\n" << resolved.dump(2) << "\n";

  std::unique_ptr<Model> model =
      build_model(spec, data.feature_dim, frames, derive_seed(tcfg.seed, 0));
  const TrainReport report = fit(*model, data, tcfg);

  std::cout << report_to_table(report);
  if (!opts.out_dir.empty()) {
    fs::create_directories(opts.out_dir);
    write_text((fs::path(opts.out_dir) / "report.json").string(),
               report_to_json(report).dump(2) + "\n");
    write_text((fs::path(opts.out_dir) / "report.txt").string(), report_to_table(report));
    save_checkpoint((fs::path(opts.out_dir) / "checkpoint.thc").string(), spec, *model, frames);
    std::cout << "wrote report.json, report.txt, checkpoint.thc to " << opts.out_dir << "\n";
  }
  return 0;
}

int run_eval(const EvalOptions& opts) {
  if (opts.checkpoint_path.empty()) throw ConfigError("eval: --checkpoint is required");
  if (opts.dataset_path.empty()) throw ConfigError("eval: --dataset is required");
  Checkpoint ck = load_checkpoint(opts.checkpoint_path);
  nlohmann::json resolved = ck.spec.to_json();
  resolved["checkpoint"] = opts.checkpoint_path;
  resolved["frames"] = ck.input_frames;
  resolved["dataset"] = opts.dataset_path;
  std::cout << "resolved config:\n" << resolved.dump(2) << "\n";

  const DatasetManifest manifest = load_manifest(opts.dataset_path);
  const LoadedDataset data = load_dataset(manifest, ck.input_frames);
  nlohmann::json result;
  if (!data.test_x.empty()) {
    result["test_accuracy"] = evaluate_accuracy(*ck.model, data.test_x, data.test_y);
  }
  if (!data.train_x.empty()) {
    result["train_accuracy"] = evaluate_accuracy(*ck.model, data.train_x, data.train_y);
  }
  std::cout << result.dump(2) << "\n";
  if (!opts.out_dir.empty()) {
    fs::create_directories(opts.out_dir);
    write_text((fs::path(opts.out_dir) / "eval.json").string(), result.dump(2) + "\n");
  }
  return 0;
}

int run_gradcheck(const GradcheckOptions& opts) {
  std::vector<std::string> families;
  if (opts.all || opts.family.empty() || opts.family == "all") {
    families = {"tslstm", "tconv"};
  } else if (opts.family == "tslstm" || opts.family == "tconv") {
    families = {opts.family};
  } else {
    throw ConfigError("gradcheck: unknown family '" + opts.family + "'");
  }
  nlohmann::json resolved{{"families", families},
                          {"small", opts.small},
                          {"seed", opts.seed},
                          {"tolerance", opts.tolerance}};
  std::cout << "resolved config:\n" << resolved.dump(2) << "\n";

  const int num_classes = 3;
  bool all_pass = true;
  double global_worst = 0.0;
  std::string global_worst_id;
  int idx = 0;
  std::cout << std::left << std::setw(44) << "variant" << std::right << std::setw(12)
            << "max_rel_err" << "  worst parameter\n";
  auto check_one = [&](const std::string& family, const std::string& id, std::unique_ptr<Model> model,
                       int dims, int frames) {
    Rng sample_rng(derive_seed(opts.seed, 1000 + static_cast<uint64_t>(idx)));
    FeatureMatrix sample;
    sample.id = id;
    sample.values = Tensor::zeros({dims, frames});
    for (int i = 0; i < sample.values.numel(); ++i) {
      sample.values[i] = sample_rng.gaussian(0.0, 1.0);
    }
    const GradCheckReport report = grad_check(*model, sample, 1);
    const bool pass = report.max_rel_error < opts.tolerance;
    all_pass = all_pass && pass;
    if (report.max_rel_error > global_worst) {
      global_worst = report.max_rel_error;
      global_worst_id = family + "/" + id;
    }
    std::cout << std::left << std::setw(44) << (family + "/" + id) << std::right << std::setw(12)
              << std::scientific << std::setprecision(3) << report.max_rel_error << "  "
              << report.worst_param << (pass ? "" : "  FAIL") << "\n";
    ++idx;
  };

  for (const std::string& family : families) {
    if (family == "tslstm") {
      const int dims = opts.small ? 8 : 16;
      const int frames = opts.small ? 10 : 16;
      for (const TsLstmVariant& v : variant_catalog()) {
        TsLstmConfig cfg = opts.small ? shrink_tslstm(v.config, num_classes) : v.config;
        if (!opts.small) cfg.num_classes = num_classes;
        check_one(family, v.id, make_tslstm_model(cfg, dims, derive_seed(opts.seed, idx)), dims,
                  frames);
      }
    } else {
      const int dims = opts.small ? 8 : 16;
      const int frames = 16;
      for (const TconvVariant& v : tconv_catalog()) {
        TemporalConvConfig cfg = opts.small ? shrink_tconv(v.config, num_classes) : v.config;
        if (!opts.small) cfg.num_classes = num_classes;
        check_one(family, v.id, make_tconv_model(cfg, dims, frames, derive_seed(opts.seed, idx)),
                  dims, frames);
      }
    }
  }
  std::cout << "worst " << std::scientific << std::setprecision(3) << global_worst << " ("
            << global_worst_id << "), tolerance " << opts.tolerance << " -> "
            << (all_pass ? "PASS" : "FAIL") << "\n";
  return all_pass ? 0 : 1;
}

int run_ablate(const AblateOptions& opts) {
  if (opts.dataset_path.empty()) throw ConfigError("ablate: --dataset is required");
  std::vector<std::string> families;
  if (opts.family == "all") {
    families = {"tslstm", "tconv"};
  } else if (opts.family == "tslstm" || opts.family == "tconv") {
    families = {opts.family};
  } else {
    throw ConfigError("ablate: unknown family '" + opts.family + "'");
  }
  const int jobs = resolve_jobs(opts.jobs);
  nlohmann::json resolved{{"families", families}, {"dataset", opts.dataset_path},
                          {"jobs", jobs},         {"small", opts.small},
                          {"seed", opts.seed},    {"epochs", opts.epochs},
                          {"frames", opts.frames}};
  std::cout << "resolved config:\n" << resolved.dump(2) << "\n";

  const DatasetManifest manifest = load_manifest(opts.dataset_path);
  const LoadedDataset data = load_dataset(manifest, opts.frames);

  struct Job {
    std::string family;
    std::string id;
    std::string descriptor;
    ModelSpec spec;
  };
  std::vector<Job> work;
  for (const std::string& family : families) {
    if (family == "tslstm") {
      for (const TsLstmVariant& v : variant_catalog()) {
        Job job;
        job.family = family;
        job.id = v.id;
        job.descriptor = v.descriptor;
        job.spec.family = family;
        job.spec.variant_id = v.id;
        job.spec.tslstm =
            opts.small ? shrink_tslstm(v.config, data.num_classes) : v.config;
        job.spec.tslstm.num_classes = data.num_classes;
        work.push_back(std::move(job));
      }
    } else {
      for (const TconvVariant& v : tconv_catalog()) {
        Job job;
        job.family = family;
        job.id = v.id;
        job.descriptor = v.descriptor;
        job.spec.family = family;
        job.spec.variant_id = v.id;
        job.spec.tconv = opts.small ? shrink_tconv(v.config, data.num_classes) : v.config;
        job.spec.tconv.num_classes = data.num_classes;
        work.push_back(std::move(job));
      }
    }
  }

  std::vector<AblationResult> results(work.size());
  std::atomic<size_t> next{0};
  std::atomic<bool> failed{false};
  std::string first_error;
  std::mutex error_mutex;

  auto worker = [&]() {
    for (;;) {
      const size_t i = next.fetch_add(1);
      if (i >= work.size() || failed.load()) break;
      const Job& job = work[i];
      try {
        TrainConfig tcfg;
        tcfg.lr = job.family == "tslstm" ? 5e-5 : 1e-4;
        tcfg.weight_decay = job.family == "tslstm" ? 0.0 : 1e-1;
        tcfg.max_epochs = opts.epochs;
        tcfg.seed = derive_seed(opts.seed, i);
        std::unique_ptr<Model> model = build_model(job.spec, data.feature_dim, opts.frames,
                                                   derive_seed(tcfg.seed, 0));
        const TrainReport report = fit(*model, data, tcfg);
        AblationResult r;
        r.variant_id = job.id;
        r.descriptor = job.descriptor;
        r.eval_accuracy = report.eval_accuracy.empty() ? 0.0 : report.eval_accuracy.back();
        r.parameter_count = model->params().trainable_count();
        r.wall_time_sec = report.wall_time_sec;
        r.seed = tcfg.seed;
        results[i] = std::move(r);
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!failed.exchange(true)) first_error = job.id + ": " + e.what();
      }
    }
  };
  std::vector<std::thread> threads;
  for (int t = 0; t < std::min<int>(jobs, static_cast<int>(work.size())); ++t) {
    threads.emplace_back(worker);
  }
  for (std::thread& t : threads) t.join();
  if (failed.load()) throw TrainingError("ablate: variant failed: " + first_error);

  const std::string table = render_report(results);
  std::cout << table;
  if (!opts.out_dir.empty()) {
    fs::create_directories(opts.out_dir);
    write_text((fs::path(opts.out_dir) / "ablation.txt").string(), table);
    write_text((fs::path(opts.out_dir) / "ablation.json").string(),
               ablation_to_json(results).dump(2) + "\n");
    std::cout << "wrote ablation.txt, ablation.json to " << opts.out_dir << "\n";
  }
  return 0;
}

int run_baseline(const BaselineOptions& opts) {
  if (opts.dataset_path.empty()) throw ConfigError("baseline: --dataset is required");
  nlohmann::json resolved{{"dataset", opts.dataset_path},
                          {"seed", opts.seed},
                          {"epochs", opts.epochs},
                          {"frames", opts.frames}};
  std::cout << "resolved config:\n" << resolved.dump(2) << "\n";
  const DatasetManifest manifest = load_manifest(opts.dataset_path);
  const LoadedDataset data = load_dataset(manifest, opts.frames);
  const BaselineResult result = train_frame_baseline(data, opts.seed, opts.epochs);
  nlohmann::json out{{"train_accuracy", result.train_accuracy},
                     {"test_accuracy", result.test_accuracy}};
  std::cout << out.dump(2) << "\n";
  if (!opts.out_dir.empty()) {
    fs::create_directories(opts.out_dir);
    write_text((fs::path(opts.out_dir) / "baseline.json").string(), out.dump(2) + "\n");
  }
  return 0;
}

}  // namespace temporal_heads
