// Acceptance suite: one pass/fail line per criterion. Exit code is the
// number of failed criteria.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <vector>

#include "oracles.hpp"
#include "temporal_heads/harness.hpp"

using namespace temporal_heads;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

struct Criterion {
  std::string name;
  double budget_sec;
  std::function<bool(std::ostream&)> run;
};

fs::path work_dir() {
  const fs::path dir = fs::temp_directory_path() / "temporal-heads-acceptance";
  fs::create_directories(dir);
  return dir;
}

// ---------------------------------------------------------------------------
// 1. Gradient correctness over both catalogs at reduced size.
bool gradient_correctness(std::ostream& log) {
  GradcheckOptions opts;
  opts.all = true;
  opts.small = true;
  opts.seed = 42;
  const int rc = run_gradcheck(opts);
  log << "gradcheck --all --small exit code " << rc;
  return rc == 0;
}

// ---------------------------------------------------------------------------
// 2. Oracle equivalence for the core numeric operations.
bool oracle_equivalence(std::ostream& log) {
  Rng rng(2024);
  double worst = 0.0;
  auto track = [&](double err) { worst = std::max(worst, err); };

  for (int trial = 0; trial < 100; ++trial) {
    // temporal_conv1d
    {
      const int c = 1 + static_cast<int>(rng.below(2));
      const int cout = 1 + static_cast<int>(rng.below(3));
      const int d = 1 + static_cast<int>(rng.below(4));
      const int t = 1 + static_cast<int>(rng.below(9));
      const int k = 1 + 2 * static_cast<int>(rng.below(3));
      const int stride = 1 + static_cast<int>(rng.below(2));
      const Tensor x = oracle::random_tensor({c, d, t}, rng);
      const Tensor kernels = oracle::random_tensor({cout, c, k}, rng);
      Graph g;
      const Tensor& got = g.value(temporal_conv1d(g, g.leaf(x), g.leaf(kernels), stride));
      const Tensor want = oracle::conv1d(x, kernels, stride);
      for (int i = 0; i < got.numel(); ++i) track(std::fabs(got[i] - want[i]));
    }
    // temporal_pool
    {
      const int d = 1 + static_cast<int>(rng.below(5));
      const int t = 2 + static_cast<int>(rng.below(8));
      const int t0 = static_cast<int>(rng.below(static_cast<uint64_t>(t - 1)));
      const int t1 = t0 + 1 + static_cast<int>(rng.below(static_cast<uint64_t>(t - t0)));
      const Tensor x = oracle::random_tensor({d, t}, rng);
      Graph g;
      const NodeId id = g.leaf(x);
      const Tensor& got_max = g.value(temporal_pool(g, id, PoolKind::kMax, t0, t1));
      const Tensor& got_mean = g.value(temporal_pool(g, id, PoolKind::kMean, t0, t1));
      const auto want_max = oracle::pool(x, true, t0, t1);
      const auto want_mean = oracle::pool(x, false, t0, t1);
      for (int r = 0; r < d; ++r) {
        track(std::fabs(got_max[r] - want_max[static_cast<size_t>(r)]));
        track(std::fabs(got_mean[r] - want_mean[static_cast<size_t>(r)]));
      }
    }
    // lstm_step
    {
      const int din = 1 + static_cast<int>(rng.below(4));
      const int h = 1 + static_cast<int>(rng.below(4));
      auto gate_leaves = [&]() {
        return oracle::LstmGates{oracle::random_tensor({din, h}, rng),
                                 oracle::random_tensor({h, h}, rng),
                                 oracle::random_tensor({h}, rng).vec()};
      };
      const auto gi = gate_leaves(), gf = gate_leaves(), go = gate_leaves(), gc = gate_leaves();
      const Tensor x = oracle::random_tensor({1, din}, rng);
      const Tensor h0 = oracle::random_tensor({1, h}, rng);
      const Tensor c0 = oracle::random_tensor({1, h}, rng);
      Graph g;
      auto bind = [&](const oracle::LstmGates& gl) {
        return LstmGateParams{g.leaf(gl.wx), g.leaf(gl.wh),
                              g.leaf(Tensor::from({h}, gl.bias))};
      };
      const LstmCellParams cell{bind(gi), bind(gf), bind(go), bind(gc)};
      const LstmState next = lstm_step(g, g.leaf(x), {g.leaf(h0), g.leaf(c0)}, cell);
      const oracle::LstmOut want =
          oracle::lstm_step(x.vec(), h0.vec(), c0.vec(), gi, gf, go, gc);
      for (int j = 0; j < h; ++j) {
        track(std::fabs(g.value(next.hidden).at(0, j) - want.hidden[static_cast<size_t>(j)]));
        track(std::fabs(g.value(next.cell).at(0, j) - want.cell[static_cast<size_t>(j)]));
      }
    }
    // conv_fusion
    {
      const int c = 2 + static_cast<int>(rng.below(7));
      const int d = 1 + static_cast<int>(rng.below(3));
      const int t = 1 + static_cast<int>(rng.below(4));
      const Tensor x = oracle::random_tensor({c, d, t}, rng);
      const Tensor k0 = oracle::random_tensor({2, c, 1}, rng);
      const Tensor b0 = oracle::random_tensor({2}, rng);
      const Tensor k1 = oracle::random_tensor({1, 2, 1}, rng);
      const Tensor b1 = oracle::random_tensor({1}, rng);
      Graph g;
      const std::vector<FusionStageParams> stages{{g.leaf(k0), g.leaf(b0), {}},
                                                  {g.leaf(k1), g.leaf(b1), {}}};
      const Tensor& got = g.value(conv_fusion(g, g.leaf(x), stages, false));
      Tensor mid = oracle::conv1d(x, k0, 1);
      for (int ci = 0; ci < 2; ++ci) {
        for (int di = 0; di < d; ++di) {
          for (int ti = 0; ti < t; ++ti) {
            mid.at(ci, di, ti) = std::max(0.0, mid.at(ci, di, ti) + b0[ci]);
          }
        }
      }
      Tensor want = oracle::conv1d(mid, k1, 1);
      for (int i = 0; i < want.numel(); ++i) track(std::fabs(got[i] - (want[i] + b1[0])));
    }
    // cross_entropy
    {
      const int b = 1 + static_cast<int>(rng.below(4));
      const int c = 2 + static_cast<int>(rng.below(5));
      const Tensor logits = oracle::random_tensor({b, c}, rng, -4.0, 4.0);
      std::vector<int> labels;
      for (int i = 0; i < b; ++i) labels.push_back(static_cast<int>(rng.below(static_cast<uint64_t>(c))));
      Graph g;
      const double got = g.value(cross_entropy_logits(g, g.leaf(logits), labels))[0];
      track(std::fabs(got - oracle::cross_entropy_logits(logits, labels)));
    }
  }
  log << "max abs deviation " << std::scientific << worst;
  return worst < 1e-12;
}

// ---------------------------------------------------------------------------
// 3. Shape law: extents ceil(N/2^i), channels 2^i, for both downsample modes.
bool shape_law(std::ostream& log) {
  Rng rng(3);
  for (int n = 1; n <= 64; ++n) {
    for (Downsample mode : {Downsample::kPool, Downsample::kStride2}) {
      TclConfig cfg5, cfg7;
      cfg5.use_bn = cfg7.use_bn = false;
      cfg5.downsample = cfg7.downsample = mode;
      cfg5.kernel_size = 5;
      cfg7.kernel_size = 7;
      Graph g;
      NodeId x = g.leaf(oracle::random_tensor({1, 2, n}, rng));
      int expect_t = n;
      for (int module = 1; module <= 4; ++module) {
        const int c = g.value(x).dim(0);
        const std::vector<TclParams> params{
            {g.leaf(oracle::random_tensor({c, c, 5}, rng)), g.leaf(Tensor::zeros({c})), {}},
            {g.leaf(oracle::random_tensor({c, c, 7}, rng)), g.leaf(Tensor::zeros({c})), {}}};
        x = multi_flow(g, x, {cfg5, cfg7}, params, false);
        expect_t = (expect_t + 1) / 2;
        if (g.value(x).dim(0) != (1 << module) || g.value(x).dim(2) != expect_t) {
          log << "shape mismatch at N=" << n << " module " << module << ": got "
              << g.value(x).shape_str();
          return false;
        }
      }
    }
  }
  log << "N in 1..64, 4 modules, both downsample modes";
  return true;
}

// ---------------------------------------------------------------------------
// 4. Order-invariance separation on the default synthetic dataset.
bool order_invariance_separation(std::ostream& log) {
  const fs::path dir = work_dir() / "synth-default";
  SynthSpec spec = default_synth_spec();
  if (!fs::exists(dir / "manifest.json")) {
    generate_synthetic(spec, dir.string());
  }
  const DatasetManifest manifest = load_manifest((dir / "manifest.json").string());
  const LoadedDataset data = load_dataset(manifest, 25);

  // (a) Order-invariant heads cannot resolve the swapped pairs.
  const BaselineResult baseline = train_frame_baseline(data, 7, 30);
  log << "baseline " << baseline.test_accuracy;
  if (baseline.test_accuracy > 0.55) return false;

  {
    TsLstmConfig cfg;
    cfg.num_segments = 1;
    cfg.pool = TsPool::kMax;
    cfg.num_classes = data.num_classes;
    TrainConfig tcfg;
    tcfg.lr = 1e-3;
    tcfg.max_epochs = 30;
    tcfg.seed = 11;
    TsLstmModel model(cfg, data.feature_dim, derive_seed(tcfg.seed, 0));
    const TrainReport report = fit(model, data, tcfg);
    log << ", ts1-pool " << report.eval_accuracy.back();
    if (report.eval_accuracy.back() > 0.55) return false;
  }

  // (b) The temporal heads resolve them.
  {
    TsLstmConfig cfg;
    cfg.num_segments = 3;
    cfg.pool = TsPool::kMax;
    cfg.lstm_widths = {64};
    cfg.num_classes = data.num_classes;
    TrainConfig tcfg;
    tcfg.lr = 5e-5;
    tcfg.max_epochs = 100;
    tcfg.seed = 13;
    TsLstmModel model(cfg, data.feature_dim, derive_seed(tcfg.seed, 0));
    const TrainReport report = fit(model, data, tcfg);
    double best = 0.0;
    for (double acc : report.eval_accuracy) best = std::max(best, acc);
    log << ", ts-lstm " << best;
    if (best < 0.90) return false;
  }
  {
    TemporalConvConfig cfg;
    cfg.num_modules = 2;
    cfg.num_classes = data.num_classes;
    TrainConfig tcfg;
    tcfg.lr = 1e-4;
    tcfg.weight_decay = 1e-1;
    tcfg.max_epochs = 100;
    tcfg.seed = 17;
    TemporalConvModel model(cfg, data.feature_dim, 25, derive_seed(tcfg.seed, 0));
    const TrainReport report = fit(model, data, tcfg);
    double best = 0.0;
    for (double acc : report.eval_accuracy) best = std::max(best, acc);
    log << ", temporal-inception " << best;
    if (best < 0.90) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// 5. Within-segment permutation invariance, bit-identical.
bool permutation_invariance(std::ostream& log) {
  Rng rng(5);
  for (TsPool pool : {TsPool::kMax, TsPool::kMean}) {
    TsLstmConfig cfg;
    cfg.num_segments = 3;
    cfg.pool = pool;
    cfg.lstm_widths = {8};
    cfg.num_classes = 4;
    TsLstmModel model(cfg, 16, 21);
    for (int trial = 0; trial < 50; ++trial) {
      const int n = 25;
      const Tensor x = oracle::random_tensor({16, n}, rng);
      Tensor shuffled = x;
      for (const auto& [t0, t1] : partition(n, 3).boundaries) {
        std::vector<int> perm;
        for (int t = t0; t < t1; ++t) perm.push_back(t);
        rng.shuffle(perm);
        for (int t = t0; t < t1; ++t) {
          for (int r = 0; r < 16; ++r) {
            shuffled.at(r, t) = x.at(r, perm[static_cast<size_t>(t - t0)]);
          }
        }
      }
      FeatureMatrix fa{"a", x};
      FeatureMatrix fb{"b", shuffled};
      const auto pa = predict(model, {&fa})[0];
      const auto pb = predict(model, {&fb})[0];
      for (size_t j = 0; j < pa.size(); ++j) {
        if (pa[j] != pb[j]) {
          log << "outputs differ at trial " << trial;
          return false;
        }
      }
    }
  }
  log << "100 random permuted forwards bit-identical (max and mean)";
  return true;
}

// ---------------------------------------------------------------------------
// 6. Training determinism.
bool determinism(std::ostream& log) {
  const fs::path dir = work_dir() / "synth-small";
  if (!fs::exists(dir / "manifest.json")) {
    SynthSpec spec = default_synth_spec();
    spec.train_per_class = 8;
    spec.test_per_class = 2;
    spec.feature_dim = 16;
    generate_synthetic(spec, dir.string());
  }
  const LoadedDataset data = load_dataset(load_manifest((dir / "manifest.json").string()), 25);

  TrainConfig tcfg;
  tcfg.lr = 1e-3;
  tcfg.max_epochs = 5;
  tcfg.seed = 2718;

  TemporalConvConfig cfg;  // exercises dropout masks and BN statistics
  cfg.num_modules = 2;
  cfg.fc_width = 16;
  cfg.num_classes = data.num_classes;

  TemporalConvModel m1(cfg, data.feature_dim, 25, derive_seed(tcfg.seed, 0));
  TemporalConvModel m2(cfg, data.feature_dim, 25, derive_seed(tcfg.seed, 0));
  const TrainReport r1 = fit(m1, data, tcfg);
  const TrainReport r2 = fit(m2, data, tcfg);
  if (r1.train_loss.size() != r2.train_loss.size()) {
    log << "trace lengths differ";
    return false;
  }
  for (size_t e = 0; e < r1.train_loss.size(); ++e) {
    if (r1.train_loss[e] != r2.train_loss[e]) {
      log << "loss traces diverge at epoch " << e;
      return false;
    }
  }
  if (r1.final_checksum != r2.final_checksum) {
    log << "checksums differ";
    return false;
  }
  char buf[32];
  std::snprintf(buf, sizeof(buf), "0x%016llx",
                static_cast<unsigned long long>(r1.final_checksum));
  log << "identical traces, checksum " << buf;
  return true;
}

// ---------------------------------------------------------------------------
// 7. Distribution validity across every catalog variant.
bool distribution_validity(std::ostream& log) {
  Rng rng(7);
  std::vector<PredictionDistribution> all;
  const int classes = 3;
  auto check_probs = [&](const PredictionDistribution& probs) {
    double s = 0.0;
    for (double p : probs) {
      if (!(p > 0.0 && p < 1.0)) return false;
      s += p;
    }
    return std::fabs(s - 1.0) < 1e-9;
  };

  for (const TsLstmVariant& v : variant_catalog()) {
    TsLstmModel model(shrink_tslstm(v.config, classes), 8, derive_seed(1, all.size()));
    FeatureMatrix fm{"x", oracle::random_tensor({8, 12}, rng)};
    const auto probs = predict(model, {&fm})[0];
    if (!check_probs(probs)) {
      log << "invalid distribution from " << v.id;
      return false;
    }
    all.push_back(probs);
  }
  for (const TconvVariant& v : tconv_catalog()) {
    TemporalConvModel model(shrink_tconv(v.config, classes), 8, 16, derive_seed(2, all.size()));
    FeatureMatrix fm{"x", oracle::random_tensor({8, 16}, rng)};
    const auto probs = predict(model, {&fm})[0];
    if (!check_probs(probs)) {
      log << "invalid distribution from " << v.id;
      return false;
    }
    all.push_back(probs);
  }
  if (!check_probs(ensemble_mean(all))) {
    log << "ensemble mean is not a distribution";
    return false;
  }
  log << all.size() << " catalog variants + ensemble mean";
  return true;
}

// ---------------------------------------------------------------------------
// 8. Catalog fidelity: ablate emits one row per table variant.
bool catalog_fidelity(std::ostream& log) {
  const auto ts = variant_catalog();
  const auto tc = tconv_catalog();
  if (ts.size() != 28) {
    log << "TS-LSTM catalog has " << ts.size() << " rows, expected 28";
    return false;
  }
  if (tc.size() != 39) {
    log << "Temporal-ConvNet catalog has " << tc.size() << " rows, expected 39";
    return false;
  }
  auto find_descriptor = [&](const std::string& needle) {
    for (const auto& v : ts) {
      if (v.descriptor.find(needle) != std::string::npos) return true;
    }
    for (const auto& v : tc) {
      if (v.descriptor.find(needle) != std::string::npos) return true;
    }
    return false;
  };
  for (const char* needle :
       {"Max + 512", "{(T,T),(T,T),(T,T),(T,T)}", "Conv1, 4 Conv1, 2 Conv1, 1"}) {
    if (!find_descriptor(needle)) {
      log << "missing descriptor " << needle;
      return false;
    }
  }

  const fs::path dir = work_dir() / "synth-small";
  if (!fs::exists(dir / "manifest.json")) {
    SynthSpec spec = default_synth_spec();
    spec.train_per_class = 8;
    spec.test_per_class = 2;
    spec.feature_dim = 16;
    generate_synthetic(spec, dir.string());
  }
  AblateOptions opts;
  opts.family = "all";
  opts.dataset_path = (dir / "manifest.json").string();
  opts.out_dir = (work_dir() / "ablation").string();
  opts.jobs = 2;
  opts.small = true;
  opts.epochs = 1;
  std::cout.setstate(std::ios_base::failbit);  // silence the per-run tables
  int rc;
  try {
    rc = run_ablate(opts);
  } catch (...) {
    std::cout.clear();
    throw;
  }
  std::cout.clear();
  if (rc != 0) {
    log << "ablate exited with " << rc;
    return false;
  }
  std::ifstream in(fs::path(opts.out_dir) / "ablation.json");
  nlohmann::json rows;
  in >> rows;
  std::set<std::string> emitted;
  for (const auto& row : rows) emitted.insert(row.at("variant").get<std::string>());
  for (const auto& v : ts) {
    if (!emitted.count(v.id)) {
      log << "missing ablation row " << v.id;
      return false;
    }
  }
  for (const auto& v : tc) {
    if (!emitted.count(v.id)) {
      log << "missing ablation row " << v.id;
      return false;
    }
  }
  if (emitted.size() != ts.size() + tc.size()) {
    log << "ablation emitted " << emitted.size() << " rows, expected "
        << ts.size() + tc.size();
    return false;
  }
  log << "28 + 39 rows, descriptors match the table text";
  return true;
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {"gradient correctness (both catalogs, small dims, < 1e-4)", 300.0, gradient_correctness},
      {"oracle equivalence (conv/pool/lstm/fusion/cross-entropy, 1e-12)", 60.0,
       oracle_equivalence},
      {"shape law (ceil(N/2^i) extents, 2^i channels)", 1.0, shape_law},
      {"order-invariance separation on the synthetic dataset", 900.0,
       order_invariance_separation},
      {"within-segment permutation invariance (bit-identical)", 10.0, permutation_invariance},
      {"training determinism (traces and checksums)", 120.0, determinism},
      {"distribution validity across the catalogs", 60.0, distribution_validity},
      {"catalog fidelity (one ablation row per table variant)", 600.0, catalog_fidelity},
  };

  int failures = 0;
  for (size_t i = 0; i < criteria.size(); ++i) {
    const auto start = Clock::now();
    std::ostringstream detail;
    bool ok = false;
    try {
      ok = criteria[i].run(detail);
    } catch (const std::exception& e) {
      detail << "exception: " << e.what();
    }
    const double elapsed = std::chrono::duration<double>(Clock::now() - start).count();
    if (elapsed > criteria[i].budget_sec) {
      detail << " [over budget " << criteria[i].budget_sec << "s]";
      ok = false;
    }
    failures += ok ? 0 : 1;
    std::printf("[%s] %zu. %s (%.1fs) %s\n", ok ? "PASS" : "FAIL", i + 1,
                criteria[i].name.c_str(), elapsed, detail.str().c_str());
    std::fflush(stdout);
  }
  return failures;
}
