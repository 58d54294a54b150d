#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "oracles.hpp"
#include "temporal_heads/harness.hpp"

using namespace temporal_heads;
namespace fs = std::filesystem;

TEST_CASE("ensemble_mean") {
  const PredictionDistribution single{0.2, 0.8};
  CHECK(ensemble_mean({single}) == single);

  const PredictionDistribution mixed = ensemble_mean({{1.0, 0.0}, {0.0, 1.0}});
  CHECK(mixed[0] == doctest::Approx(0.5));
  CHECK(mixed[1] == doctest::Approx(0.5));

  Rng rng(3);
  for (int k = 1; k <= 8; ++k) {
    std::vector<PredictionDistribution> preds;
    for (int i = 0; i < k; ++i) {
      PredictionDistribution p(5);
      double total = 0.0;
      for (double& v : p) {
        v = rng.uniform(0.01, 1.0);
        total += v;
      }
      for (double& v : p) v /= total;
      preds.push_back(std::move(p));
    }
    const PredictionDistribution mean = ensemble_mean(preds);
    double s = 0.0;
    for (double v : mean) s += v;
    CHECK(std::fabs(s - 1.0) < 1e-9);
  }

  CHECK_THROWS_AS(ensemble_mean({}), ContractError);
  CHECK_THROWS_AS(ensemble_mean({{0.5, 0.5}, {1.0}}), ContractError);
}

TEST_CASE("report sorts by accuracy then id and round-trips through JSON") {
  std::vector<AblationResult> results;
  results.push_back({"bbb", "cfg-b", 0.75, 10, 1.0, 1});
  results.push_back({"aaa", "cfg-a", 0.96, 20, 2.0, 2});
  results.push_back({"abc", "cfg-c", 0.75, 30, 3.0, 3});

  const std::string table = render_report(results);
  const size_t first = table.find("aaa");
  const size_t second = table.find("abc");
  const size_t third = table.find("bbb");
  CHECK(first != std::string::npos);
  CHECK(first < second);
  CHECK(second < third);

  const auto round = ablation_from_json(ablation_to_json(results));
  REQUIRE(round.size() == results.size());
  for (size_t i = 0; i < results.size(); ++i) {
    CHECK(round[i].variant_id == results[i].variant_id);
    CHECK(round[i].descriptor == results[i].descriptor);
    CHECK(round[i].eval_accuracy == results[i].eval_accuracy);
    CHECK(round[i].parameter_count == results[i].parameter_count);
    CHECK(round[i].wall_time_sec == results[i].wall_time_sec);
    CHECK(round[i].seed == results[i].seed);
  }
  CHECK_THROWS_AS(render_report({}), ContractError);
}

TEST_CASE("model spec parsing") {
  const auto spec = parse_model_spec(nlohmann::json::parse(
      R"({"family":"tslstm","model":{"num_segments":3,"pool":"max","lstm_widths":[8],"num_classes":4}})"));
  CHECK(spec.family == "tslstm");
  CHECK(spec.tslstm.num_segments == 3);
  CHECK(spec.tslstm.lstm_widths == std::vector<int>{8});

  const auto variant =
      parse_model_spec(nlohmann::json::parse(R"({"family":"tconv","variant":"vgg-fc1024"})"));
  CHECK(variant.tconv.architecture == TconvArch::kVgg);
  CHECK(variant.tconv.fc_width == 1024);

  CHECK_THROWS_AS(parse_model_spec(nlohmann::json::parse(R"({"family":"nope","variant":"x"})")),
                  ConfigError);
  CHECK_THROWS_AS(parse_model_spec(nlohmann::json::parse(R"({"family":"tslstm"})")), ConfigError);
  CHECK_THROWS_AS(parse_model_spec(nlohmann::json::parse(
                      R"({"family":"tslstm","variant":"a","model":{}})")),
                  ConfigError);
  CHECK_THROWS_AS(parse_model_spec(nlohmann::json::parse(
                      R"({"family":"tslstm","model":{"typo_key":1}})")),
                  ConfigError);
  CHECK_THROWS_AS(parse_model_spec(nlohmann::json::parse(
                      R"({"family":"tslstm","variant":"no-such-variant"})")),
                  ConfigError);
}

TEST_CASE("train config parsing rejects unknown keys") {
  const TrainConfig cfg =
      parse_train_config(nlohmann::json::parse(R"({"lr":0.001,"batch_size":8})"));
  CHECK(cfg.lr == 0.001);
  CHECK(cfg.batch_size == 8);
  CHECK_THROWS_AS(parse_train_config(nlohmann::json::parse(R"({"learning_rate":0.1})")),
                  ConfigError);
}

TEST_CASE("flow_kernels accepts flat pairs and kernel stacks") {
  const auto flat = parse_model_spec(nlohmann::json::parse(
      R"({"family":"tconv","model":{"flow_kernels":[5,7],"num_classes":3}})"));
  CHECK(flat.tconv.flow_kernels == std::vector<std::vector<int>>{{5}, {7}});

  const auto stacked = parse_model_spec(nlohmann::json::parse(
      R"({"family":"tconv","model":{"flow_kernels":[[3,3],[3,3,3]],"num_classes":3}})"));
  CHECK(stacked.tconv.flow_kernels == std::vector<std::vector<int>>{{3, 3}, {3, 3, 3}});
}

TEST_CASE("checkpoints round-trip the full model state") {
  ModelSpec spec;
  spec.family = "tslstm";
  spec.tslstm.num_segments = 2;
  spec.tslstm.pool = TsPool::kMax;
  spec.tslstm.lstm_widths = {4};
  spec.tslstm.num_classes = 3;

  auto model = build_model(spec, 6, 10, 42);
  const uint64_t checksum = model->params().checksum();

  const fs::path dir = fs::temp_directory_path() / "th-test-checkpoint";
  fs::create_directories(dir);
  const std::string path = (dir / "model.thc").string();
  save_checkpoint(path, spec, *model, 10);

  Checkpoint ck = load_checkpoint(path);
  CHECK(ck.input_dim == 6);
  CHECK(ck.input_frames == 10);
  CHECK(ck.model->params().checksum() == checksum);

  Rng rng(9);
  FeatureMatrix fm;
  fm.id = "x";
  fm.values = oracle::random_tensor({6, 10}, rng);
  const auto a = predict(*model, {&fm})[0];
  const auto b = predict(*ck.model, {&fm})[0];
  for (size_t j = 0; j < a.size(); ++j) CHECK(a[j] == b[j]);

  CHECK_THROWS_AS(load_checkpoint((dir / "missing.thc").string()), FormatError);
}

TEST_CASE("shrink maps the paper widths onto desk-scale ones") {
  CHECK(shrink_width(512) == 4);
  CHECK(shrink_width(1024) == 6);
  CHECK(shrink_width(2048) == 8);
  CHECK(shrink_width(4096) == 10);

  TsLstmConfig wide;
  wide.lstm_widths = {1024, 512};
  wide.num_classes = 101;
  const TsLstmConfig small = shrink_tslstm(wide, 3);
  CHECK(small.lstm_widths == std::vector<int>{6, 4});
  CHECK(small.num_classes == 3);
}

TEST_CASE("resolve_jobs honors the environment cap") {
  unsetenv("TEMPORAL_HEADS_THREADS");
  CHECK(resolve_jobs(4) == 4);
  setenv("TEMPORAL_HEADS_THREADS", "2", 1);
  CHECK(resolve_jobs(4) == 2);
  CHECK(resolve_jobs(1) == 1);
  setenv("TEMPORAL_HEADS_THREADS", "junk", 1);
  CHECK_THROWS_AS(resolve_jobs(4), ConfigError);
  unsetenv("TEMPORAL_HEADS_THREADS");
}

TEST_CASE("missing config files name the file") {
  TrainOptions opts;
  opts.config_path = "missing.json";
  opts.dataset_path = "also-missing.json";
  try {
    run_train(opts);
    FAIL("expected a config error");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("missing.json") != std::string::npos);
  }
}

TEST_CASE("cli maps usage and config errors to exit code 2") {
  const std::string cli = TEMPORAL_HEADS_CLI;
  if (!fs::exists(cli)) return;  // binary not built yet
  const int unknown_flag =
      std::system((cli + " train --definitely-not-a-flag >/dev/null 2>&1").c_str());
  CHECK(WEXITSTATUS(unknown_flag) == 2);
  const int missing_config = std::system(
      (cli + " train --config missing.json --dataset missing.json >/dev/null 2>&1").c_str());
  CHECK(WEXITSTATUS(missing_config) == 2);
  const int no_subcommand = std::system((cli + " >/dev/null 2>&1").c_str());
  CHECK(WEXITSTATUS(no_subcommand) == 2);
}

TEST_CASE("identical configs and seeds produce identical artifacts") {
  const fs::path dir = fs::temp_directory_path() / "th-test-artifacts";
  fs::remove_all(dir);
  fs::create_directories(dir);

  SynthSpec spec = default_synth_spec();
  spec.train_per_class = 4;
  spec.test_per_class = 1;
  spec.feature_dim = 8;
  generate_synthetic(spec, (dir / "data").string());
  {
    std::ofstream cfg(dir / "cfg.json");
    cfg << R"({"family":"tslstm",)"
        << R"("model":{"num_segments":2,"pool":"max","lstm_widths":[4]},)"
        << R"("train":{"lr":0.001,"max_epochs":2,"seed":99}})";
  }

  auto run_once = [&](const std::string& out) {
    TrainOptions opts;
    opts.config_path = (dir / "cfg.json").string();
    opts.dataset_path = (dir / "data" / "manifest.json").string();
    opts.out_dir = (dir / out).string();
    std::cout.setstate(std::ios_base::failbit);
    try {
      run_train(opts);
    } catch (...) {
      std::cout.clear();
      throw;
    }
    std::cout.clear();
  };
  run_once("run1");
  run_once("run2");

  auto json_of = [&](const std::string& out) {
    std::ifstream in(dir / out / "report.json");
    nlohmann::json j;
    in >> j;
    j.erase("wall_time_sec");  // the only volatile field
    return j;
  };
  CHECK(json_of("run1") == json_of("run2"));

  auto bytes_of = [&](const std::string& out) {
    std::ifstream in(dir / out / "checkpoint.thc", std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)),
                       std::istreambuf_iterator<char>());
  };
  const std::string ck = bytes_of("run1");
  CHECK(!ck.empty());
  CHECK(ck == bytes_of("run2"));

  // The emitted checkpoint evaluates through the eval entry point.
  EvalOptions eval;
  eval.checkpoint_path = (dir / "run1" / "checkpoint.thc").string();
  eval.dataset_path = (dir / "data" / "manifest.json").string();
  eval.out_dir = (dir / "eval").string();
  std::cout.setstate(std::ios_base::failbit);
  int rc = -1;
  try {
    rc = run_eval(eval);
  } catch (...) {
    std::cout.clear();
    throw;
  }
  std::cout.clear();
  CHECK(rc == 0);
  std::ifstream in(dir / "eval" / "eval.json");
  nlohmann::json result;
  in >> result;
  CHECK(result.contains("test_accuracy"));
}

TEST_CASE("frame baseline trains on an in-memory dataset") {
  LoadedDataset data;
  data.num_classes = 2;
  data.feature_dim = 4;
  Rng rng(31);
  for (int cls = 0; cls < 2; ++cls) {
    for (int k = 0; k < 12; ++k) {
      Tensor x({4, 6});
      for (int i = 0; i < x.numel(); ++i) {
        x[i] = (cls == 0 ? 1.0 : -1.0) + 0.1 * rng.gaussian(0.0, 1.0);
      }
      FeatureMatrix fm;
      fm.id = "c" + std::to_string(cls) + "-" + std::to_string(k);
      fm.values = std::move(x);
      if (k < 9) {
        data.train_x.push_back(std::move(fm));
        data.train_y.push_back(cls);
      } else {
        data.test_x.push_back(std::move(fm));
        data.test_y.push_back(cls);
      }
    }
  }
  const BaselineResult result = train_frame_baseline(data, 7, 10);
  CHECK(result.train_accuracy == doctest::Approx(1.0));
  CHECK(result.test_accuracy == doctest::Approx(1.0));
}
