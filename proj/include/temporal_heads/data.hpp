#pragma once

#include <string>
#include <vector>

#include "temporal_heads/tensor.hpp"

namespace temporal_heads {

/// Per-frame feature matrix: D feature rows by N frame columns.
struct FeatureMatrix {
  std::string id;
  Tensor values;  // [D x N]

  int dim() const { return values.dim(0); }
  int length() const { return values.dim(1); }
};

struct ManifestEntry {
  std::string id;
  std::string spatial_file;
  std::string temporal_file;
  int label = 0;
  std::string split;  // "train" or "test"
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;
  int num_classes = 0;
  int spatial_dim = 0;
  int temporal_dim = 0;
  std::string base_dir;  // directory the manifest was loaded from; resolves relative paths

  void validate() const;
  const ManifestEntry& find(const std::string& id) const;
};

/// Picks `target` frame indices spread equally over `available` frames:
/// floor(j*(L-1)/(N-1)), hitting both endpoints; the middle frame when
/// target is 1. Indices are non-decreasing and may repeat when L < N.
std::vector<int> sample_frames(int available, int target);

/// Stacks spatial rows on top of temporal rows; frame counts must agree.
Tensor concat_streams(const Tensor& spatial, const Tensor& temporal);

// Feature file format: magic "TFV1", two u32 little-endian integers D and N,
// then D*N f32 little-endian values, feature-major.
Tensor read_feature_file(const std::string& path);
void write_feature_file(const std::string& path, const Tensor& values);

DatasetManifest load_manifest(const std::string& path);
void save_manifest(const DatasetManifest& manifest, const std::string& path);

/// Reads both stream files of `id`, samples a common frame index set, and
/// concatenates spatial over temporal rows.
FeatureMatrix load_features(const DatasetManifest& manifest, const std::string& id,
                            int target_frames = 25);

/// Spec for the synthetic order-sensitive dataset. Every sequence of class c
/// lays that class's prototype vectors over the frames in class order, one
/// contiguous span per prototype, plus iid Gaussian noise. At least one class
/// pair must be an order swap of the same prototype multiset.
struct SynthSpec {
  int num_classes = 8;
  std::vector<std::vector<int>> prototypes_per_class;
  int feature_dim = 64;
  int frames = 25;
  double noise_sigma = 0.1;
  uint64_t seed = 7;
  int train_per_class = 200;
  int test_per_class = 50;

  void validate() const;
};

/// 8 classes made of 4 order-swapped pairs, 5 prototypes each (so spans have
/// equal length and frame multisets match exactly within a pair).
SynthSpec default_synth_spec();

/// Materializes feature files under out_dir/features and returns the manifest
/// (also written to out_dir/manifest.json). Deterministic given the seed.
DatasetManifest generate_synthetic(const SynthSpec& spec, const std::string& out_dir);

/// Fully loaded split views used by training.
struct LoadedDataset {
  std::vector<FeatureMatrix> train_x, test_x;
  std::vector<int> train_y, test_y;
  int num_classes = 0;
  int feature_dim = 0;
};

LoadedDataset load_dataset(const DatasetManifest& manifest, int target_frames = 25);

}  // namespace temporal_heads
