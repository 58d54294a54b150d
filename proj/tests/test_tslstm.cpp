#include <doctest.h>

#include <set>

#include "oracles.hpp"
#include "temporal_heads/layers.hpp"
#include "temporal_heads/train.hpp"
#include "temporal_heads/tslstm.hpp"

using namespace temporal_heads;

namespace {

FeatureMatrix make_features(const Tensor& values, std::string id = "seq") {
  FeatureMatrix fm;
  fm.id = std::move(id);
  fm.values = values;
  return fm;
}

PredictionDistribution forward_probs(Model& model, const FeatureMatrix& fm) {
  return predict(model, {&fm})[0];
}

}  // namespace

TEST_CASE("partition follows the remainder rule") {
  const SegmentPartition whole = partition(25, 1);
  REQUIRE(whole.boundaries.size() == 1);
  CHECK(whole.boundaries[0] == std::pair<int, int>{0, 25});

  const SegmentPartition five = partition(25, 5);
  REQUIRE(five.boundaries.size() == 5);
  for (int i = 0; i < 5; ++i) {
    CHECK(five.boundaries[static_cast<size_t>(i)] == std::pair<int, int>{5 * i, 5 * i + 5});
  }

  const SegmentPartition three = partition(25, 3);
  REQUIRE(three.boundaries.size() == 3);
  CHECK(three.boundaries[0] == std::pair<int, int>{0, 9});
  CHECK(three.boundaries[1] == std::pair<int, int>{9, 17});
  CHECK(three.boundaries[2] == std::pair<int, int>{17, 25});

  CHECK_THROWS_AS(partition(3, 4), ConfigError);
  CHECK_THROWS_AS(partition(3, 0), ConfigError);
}

TEST_CASE("config validation") {
  TsLstmConfig cfg;
  cfg.num_classes = 4;
  CHECK_NOTHROW(cfg.validate());

  TsLstmConfig exclusive = cfg;
  exclusive.pre_fc_width = 16;
  exclusive.lstm_widths = {8};
  CHECK_THROWS_AS(exclusive.validate(), ConfigError);

  TsLstmConfig vanilla = cfg;
  vanilla.pool = TsPool::kNone;
  CHECK_THROWS_AS(vanilla.validate(), ConfigError);  // needs an LSTM
  vanilla.lstm_widths = {8};
  vanilla.num_segments = 3;
  CHECK_THROWS_AS(vanilla.validate(), ConfigError);  // single segment only
  vanilla.num_segments = 1;
  CHECK_NOTHROW(vanilla.validate());
}

TEST_CASE("pooling-only head with identity classifier picks the pooled argmax") {
  TsLstmConfig cfg;
  cfg.num_segments = 1;
  cfg.pre_bn = false;
  cfg.post_bn = false;
  cfg.pool = TsPool::kMax;
  cfg.num_classes = 4;
  TsLstmModel model(cfg, 4, 1);
  // Identity classifier: logits equal the globally max-pooled vector.
  model.params().at(model.params().find("classifier.weight")).value =
      Tensor::from({4, 4}, {1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1});

  Rng rng(3);
  Tensor x = oracle::random_tensor({4, 10}, rng);
  x.at(2, 7) = 5.0;  // dominates every pooled feature
  const FeatureMatrix fm = make_features(x);
  CHECK(argmax_class(forward_probs(model, fm)) == 2);
}

TEST_CASE("zero classifier weights give the uniform distribution") {
  TsLstmConfig cfg;
  cfg.num_segments = 3;
  cfg.pool = TsPool::kMax;
  cfg.lstm_widths = {6};
  cfg.num_classes = 5;
  TsLstmModel model(cfg, 8, 7);
  model.params().at(model.params().find("classifier.weight")).value.fill(0.0);
  model.params().at(model.params().find("classifier.bias")).value.fill(0.0);

  Rng rng(5);
  const FeatureMatrix fm = make_features(oracle::random_tensor({8, 25}, rng));
  const PredictionDistribution probs = forward_probs(model, fm);
  for (double p : probs) CHECK(p == doctest::Approx(0.2).epsilon(1e-12));
}

TEST_CASE("forward equals the hand-composed pipeline") {
  TsLstmConfig cfg;
  cfg.num_segments = 3;
  cfg.pre_bn = false;
  cfg.post_bn = false;
  cfg.pool = TsPool::kMax;
  cfg.lstm_widths = {5};
  cfg.num_classes = 4;
  const int d = 8, n = 25;
  TsLstmModel model(cfg, d, 11);

  Rng rng(13);
  const Tensor x = oracle::random_tensor({d, n}, rng);
  const PredictionDistribution got = forward_probs(model, make_features(x));

  // partition -> pool -> lstm_stack -> FC -> softmax with the same weights.
  Graph g;
  ParameterSet& ps = model.params();
  auto leaf_of = [&](const std::string& name) { return g.leaf(ps.at(ps.find(name)).value); };
  std::vector<NodeId> steps;
  const NodeId xd = g.leaf(x);
  for (const auto& [t0, t1] : partition(n, 3).boundaries) {
    steps.push_back(reshape(g, temporal_pool(g, xd, PoolKind::kMax, t0, t1), {1, d}));
  }
  auto gate = [&](const std::string& gate_name) {
    return LstmGateParams{leaf_of("lstm0." + gate_name + ".w_x"),
                          leaf_of("lstm0." + gate_name + ".w_h"),
                          leaf_of("lstm0." + gate_name + ".bias")};
  };
  const LstmCellParams cell{gate("input_gate"), gate("forget_gate"), gate("output_gate"),
                            gate("candidate")};
  const NodeId consensus = lstm_stack(g, steps, {cell});
  const NodeId logits =
      fully_connected(g, consensus, leaf_of("classifier.weight"), leaf_of("classifier.bias"));
  const Tensor& want = g.value(softmax_rows(g, logits));
  for (int j = 0; j < 4; ++j) CHECK(got[static_cast<size_t>(j)] == want.at(0, j));
}

TEST_CASE("within-segment permutations leave the output bit-identical") {
  for (TsPool pool : {TsPool::kMax, TsPool::kMean}) {
    TsLstmConfig cfg;
    cfg.num_segments = 3;
    cfg.pool = pool;
    cfg.lstm_widths = {4};
    cfg.num_classes = 3;
    TsLstmModel model(cfg, 6, 17);

    Rng rng(19);
    const int n = 14;
    const Tensor x = oracle::random_tensor({6, n}, rng);
    Tensor shuffled = x;
    for (const auto& [t0, t1] : partition(n, 3).boundaries) {
      std::vector<int> perm;
      for (int t = t0; t < t1; ++t) perm.push_back(t);
      rng.shuffle(perm);
      for (int t = t0; t < t1; ++t) {
        for (int r = 0; r < 6; ++r) shuffled.at(r, t) = x.at(r, perm[static_cast<size_t>(t - t0)]);
      }
    }
    const PredictionDistribution a = forward_probs(model, make_features(x));
    const PredictionDistribution b = forward_probs(model, make_features(shuffled));
    for (size_t j = 0; j < a.size(); ++j) CHECK(a[j] == b[j]);
  }
}

TEST_CASE("segment-block permutation changes the LSTM consensus but not global pooling") {
  TsLstmConfig lstm_cfg;
  lstm_cfg.num_segments = 3;
  lstm_cfg.pool = TsPool::kMax;
  lstm_cfg.lstm_widths = {6};
  lstm_cfg.num_classes = 4;
  TsLstmModel lstm_model(lstm_cfg, 5, 23);

  TsLstmConfig pool_cfg;
  pool_cfg.num_segments = 1;
  pool_cfg.pool = TsPool::kMax;
  pool_cfg.num_classes = 4;
  TsLstmModel pool_model(pool_cfg, 5, 23);

  Rng rng(29);
  const int n = 12;  // three segments of four frames
  const Tensor x = oracle::random_tensor({5, n}, rng);
  Tensor rotated({5, n});
  for (int r = 0; r < 5; ++r) {
    for (int t = 0; t < n; ++t) rotated.at(r, t) = x.at(r, (t + 4) % n);
  }

  const PredictionDistribution a = forward_probs(lstm_model, make_features(x));
  const PredictionDistribution b = forward_probs(lstm_model, make_features(rotated));
  double diff = 0.0;
  for (size_t j = 0; j < a.size(); ++j) diff = std::max(diff, std::fabs(a[j] - b[j]));
  CHECK(diff > 1e-12);

  const PredictionDistribution c = forward_probs(pool_model, make_features(x));
  const PredictionDistribution d = forward_probs(pool_model, make_features(rotated));
  for (size_t j = 0; j < c.size(); ++j) CHECK(c[j] == d[j]);
}

TEST_CASE("single-segment mean pooling ignores any frame permutation") {
  TsLstmConfig cfg;
  cfg.num_segments = 1;
  cfg.pool = TsPool::kMean;
  cfg.num_classes = 3;
  TsLstmModel model(cfg, 4, 31);

  Rng rng(37);
  const Tensor x = oracle::random_tensor({4, 9}, rng);
  std::vector<int> perm{8, 2, 5, 0, 7, 1, 4, 6, 3};
  Tensor shuffled({4, 9});
  for (int r = 0; r < 4; ++r) {
    for (int t = 0; t < 9; ++t) shuffled.at(r, t) = x.at(r, perm[static_cast<size_t>(t)]);
  }
  const PredictionDistribution a = forward_probs(model, make_features(x));
  const PredictionDistribution b = forward_probs(model, make_features(shuffled));
  for (size_t j = 0; j < a.size(); ++j) CHECK(a[j] == b[j]);
}

TEST_CASE("variant catalog matches the ablation table") {
  const std::vector<TsLstmVariant> catalog = variant_catalog();
  CHECK(catalog.size() == 28);

  std::set<std::string> ids;
  for (const TsLstmVariant& v : catalog) {
    CHECK(ids.insert(v.id).second);
    CHECK_NOTHROW(v.config.validate());
  }

  bool found_winner = false, found_vanilla = false;
  for (const TsLstmVariant& v : catalog) {
    if (v.id == "ts3-max-lstm512") {
      found_winner = true;
      CHECK(v.config.num_segments == 3);
      CHECK(v.config.pool == TsPool::kMax);
      CHECK(v.config.lstm_widths == std::vector<int>{512});
      CHECK(v.descriptor.find("Max + 512") != std::string::npos);
    }
    if (v.id == "ts1-lstm512") {
      found_vanilla = true;
      CHECK(v.config.num_segments == 1);
      CHECK(v.config.pool == TsPool::kNone);
      CHECK_FALSE(v.config.pre_bn);
      CHECK(v.config.lstm_widths == std::vector<int>{512});
    }
  }
  CHECK(found_winner);
  CHECK(found_vanilla);
}

TEST_CASE("rejects sequences shorter than the segment count") {
  TsLstmConfig cfg;
  cfg.num_segments = 5;
  cfg.pool = TsPool::kMax;
  cfg.num_classes = 2;
  TsLstmModel model(cfg, 3, 1);
  Rng rng(41);
  const FeatureMatrix fm = make_features(oracle::random_tensor({3, 4}, rng));
  CHECK_THROWS_AS(forward_probs(model, fm), ConfigError);
}

TEST_CASE("end-to-end gradient check on a small segmental LSTM") {
  TsLstmConfig cfg;
  cfg.num_segments = 3;
  cfg.pool = TsPool::kMax;
  cfg.lstm_widths = {4};
  cfg.num_classes = 3;
  TsLstmModel model(cfg, 8, 43);
  Rng rng(47);
  FeatureMatrix fm = make_features(oracle::random_tensor({8, 10}, rng, -1.0, 1.0));
  const GradCheckReport report = grad_check(model, fm, 1);
  CHECK(report.max_rel_error < 1e-4);
}
