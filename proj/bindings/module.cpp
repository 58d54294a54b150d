#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "temporal_heads/harness.hpp"

namespace py = pybind11;
namespace th = temporal_heads;

namespace {

th::Tensor matrix_from(const std::vector<std::vector<double>>& rows) {
  if (rows.empty() || rows[0].empty()) throw th::DimensionError("matrix must be non-empty");
  const int m = static_cast<int>(rows.size());
  const int n = static_cast<int>(rows[0].size());
  th::Tensor t({m, n});
  for (int i = 0; i < m; ++i) {
    if (static_cast<int>(rows[static_cast<size_t>(i)].size()) != n) {
      throw th::DimensionError("matrix rows have unequal lengths");
    }
    for (int j = 0; j < n; ++j) t.at(i, j) = rows[static_cast<size_t>(i)][static_cast<size_t>(j)];
  }
  return t;
}

std::vector<std::vector<double>> matrix_to(const th::Tensor& t) {
  std::vector<std::vector<double>> rows(static_cast<size_t>(t.dim(0)));
  for (int i = 0; i < t.dim(0); ++i) {
    rows[static_cast<size_t>(i)].resize(static_cast<size_t>(t.dim(1)));
    for (int j = 0; j < t.dim(1); ++j) rows[static_cast<size_t>(i)][static_cast<size_t>(j)] = t.at(i, j);
  }
  return rows;
}

std::vector<std::vector<double>> py_matmul(const std::vector<std::vector<double>>& a,
                                           const std::vector<std::vector<double>>& b) {
  th::Graph g;
  return matrix_to(g.value(th::matmul(g, g.leaf(matrix_from(a)), g.leaf(matrix_from(b)))));
}

std::vector<std::vector<double>> py_softmax(const std::vector<std::vector<double>>& logits) {
  th::Graph g;
  return matrix_to(g.value(th::softmax_rows(g, g.leaf(matrix_from(logits)))));
}

std::vector<std::pair<std::string, std::string>> py_catalog(const std::string& family) {
  std::vector<std::pair<std::string, std::string>> out;
  if (family == "tslstm") {
    for (const th::TsLstmVariant& v : th::variant_catalog()) out.emplace_back(v.id, v.descriptor);
  } else if (family == "tconv") {
    for (const th::TconvVariant& v : th::tconv_catalog()) out.emplace_back(v.id, v.descriptor);
  } else {
    throw th::ConfigError("unknown family '" + family + "'");
  }
  return out;
}

std::string py_generate_synthetic(const std::string& spec_json, const std::string& out_dir) {
  const th::SynthSpec spec = th::parse_synth_spec(nlohmann::json::parse(spec_json));
  th::generate_synthetic(spec, out_dir);
  return out_dir + "/manifest.json";
}

std::string py_train(const std::string& config_json, const std::string& dataset_path,
                     int frames) {
  const nlohmann::json file = nlohmann::json::parse(config_json);
  th::ModelSpec spec = th::parse_model_spec(file);
  th::TrainConfig tcfg =
      file.contains("train") ? th::parse_train_config(file.at("train")) : th::TrainConfig{};
  const th::DatasetManifest manifest = th::load_manifest(dataset_path);
  const th::LoadedDataset data = th::load_dataset(manifest, frames);
  int& classes = spec.family == "tslstm" ? spec.tslstm.num_classes : spec.tconv.num_classes;
  if (classes == 0 || !spec.variant_id.empty()) classes = data.num_classes;
  auto model = th::build_model(spec, data.feature_dim, frames, th::derive_seed(tcfg.seed, 0));
  const th::TrainReport report = th::fit(*model, data, tcfg);
  nlohmann::json out{{"train_loss", report.train_loss},
                     {"train_accuracy", report.train_accuracy},
                     {"eval_accuracy", report.eval_accuracy},
                     {"wall_time_sec", report.wall_time_sec}};
  return out.dump();
}

py::dict py_grad_check(const std::string& family, const std::string& variant_id, uint64_t seed) {
  std::unique_ptr<th::Model> model;
  const int dims = 8;
  int frames = 10;
  if (family == "tslstm") {
    for (const th::TsLstmVariant& v : th::variant_catalog()) {
      if (v.id == variant_id) {
        model = th::make_tslstm_model(th::shrink_tslstm(v.config, 3), dims, seed);
      }
    }
  } else if (family == "tconv") {
    frames = 16;
    for (const th::TconvVariant& v : th::tconv_catalog()) {
      if (v.id == variant_id) {
        model = th::make_tconv_model(th::shrink_tconv(v.config, 3), dims, frames, seed);
      }
    }
  } else {
    throw th::ConfigError("unknown family '" + family + "'");
  }
  if (!model) throw th::ConfigError("unknown variant '" + variant_id + "'");
  th::Rng rng(th::derive_seed(seed, 1));
  th::FeatureMatrix sample;
  sample.id = variant_id;
  sample.values = th::Tensor::zeros({dims, frames});
  for (int i = 0; i < sample.values.numel(); ++i) sample.values[i] = rng.gaussian(0.0, 1.0);
  const th::GradCheckReport report = th::grad_check(*model, sample, 1);
  py::dict out;
  out["max_rel_error"] = report.max_rel_error;
  out["worst_param"] = report.worst_param;
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Temporal fusion heads over per-frame feature matrices";
  m.attr("__version__") = "0.1.0";

  m.def("sample_frames", &th::sample_frames, py::arg("available"), py::arg("target") = 25,
        "Equally spread frame indices over the available frames.");
  m.def(
      "partition",
      [](int n, int s) {
        return th::partition(n, s).boundaries;
      },
      py::arg("frames"), py::arg("segments"),
      "Balanced contiguous segment windows covering [0, frames).");
  m.def("matmul", &py_matmul, py::arg("a"), py::arg("b"));
  m.def("softmax", &py_softmax, py::arg("logits"), "Row-wise softmax.");
  m.def("ensemble_mean", &th::ensemble_mean, py::arg("predictions"),
        "Elementwise mean of prediction distributions.");
  m.def("catalog", &py_catalog, py::arg("family"),
        "(id, descriptor) pairs for 'tslstm' or 'tconv'.");
  m.def("default_synth_spec", [] { return th::synth_spec_to_json(th::default_synth_spec()).dump(); });
  m.def("generate_synthetic", &py_generate_synthetic, py::arg("spec_json"), py::arg("out_dir"),
        "Write the synthetic dataset; returns the manifest path.");
  m.def("train", &py_train, py::arg("config_json"), py::arg("dataset_path"),
        py::arg("frames") = 25, "Fit one configuration; returns the report as JSON.");
  m.def("grad_check", &py_grad_check, py::arg("family"), py::arg("variant"),
        py::arg("seed") = 42, "Finite-difference check one catalog variant at reduced size.");
}
