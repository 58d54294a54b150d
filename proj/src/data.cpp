#include "temporal_heads/data.hpp"

#include <algorithm>
#include <bit>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <set>

#include <json.hpp>

#include "temporal_heads/tslstm.hpp"

namespace fs = std::filesystem;

namespace temporal_heads {

void DatasetManifest::validate() const {
  if (num_classes <= 0) throw DataError("manifest: num_classes must be positive");
  if (spatial_dim <= 0 || temporal_dim <= 0) {
    throw DataError("manifest: feature dims must be positive");
  }
  std::set<std::string> ids;
  for (const ManifestEntry& e : entries) {
    if (!ids.insert(e.id).second) throw DataError("manifest: duplicate id " + e.id);
    if (e.label < 0 || e.label >= num_classes) {
      throw DataError("manifest: label " + std::to_string(e.label) + " out of range for " + e.id);
    }
    if (e.split != "train" && e.split != "test") {
      throw DataError("manifest: split must be train or test, got '" + e.split + "' for " + e.id);
    }
  }
}

const ManifestEntry& DatasetManifest::find(const std::string& id) const {
  for (const ManifestEntry& e : entries) {
    if (e.id == id) return e;
  }
  throw DataError("manifest: unknown sequence id " + id);
}

std::vector<int> sample_frames(int available, int target) {
  if (available < 1) throw DataError("sample_frames: no frames available");
  if (target < 1) throw DataError("sample_frames: target count must be positive");
  std::vector<int> idx;
  idx.reserve(static_cast<size_t>(target));
  if (target == 1) {
    idx.push_back((available - 1) / 2);
    return idx;
  }
  for (int j = 0; j < target; ++j) {
    idx.push_back(static_cast<int>(static_cast<long long>(j) * (available - 1) / (target - 1)));
  }
  return idx;
}

Tensor concat_streams(const Tensor& spatial, const Tensor& temporal) {
  if (spatial.rank() != 2 || temporal.rank() != 2) {
    throw DataError("concat_streams: inputs must be rank-2 feature matrices");
  }
  if (spatial.dim(1) != temporal.dim(1)) {
    throw DataError("concat_streams: frame counts differ, " + spatial.shape_str() + " vs " +
                    temporal.shape_str());
  }
  const int ns = spatial.dim(0), nt = temporal.dim(0), n = spatial.dim(1);
  Tensor out({ns + nt, n});
  std::memcpy(out.data(), spatial.data(), sizeof(double) * static_cast<size_t>(ns * n));
  std::memcpy(out.data() + ns * n, temporal.data(), sizeof(double) * static_cast<size_t>(nt * n));
  return out;
}

namespace {

constexpr char kMagic[4] = {'T', 'F', 'V', '1'};

void put_u32(std::string& buf, uint32_t v) {
  buf.push_back(static_cast<char>(v & 0xFF));
  buf.push_back(static_cast<char>((v >> 8) & 0xFF));
  buf.push_back(static_cast<char>((v >> 16) & 0xFF));
  buf.push_back(static_cast<char>((v >> 24) & 0xFF));
}

uint32_t get_u32(const unsigned char* p) {
  return static_cast<uint32_t>(p[0]) | static_cast<uint32_t>(p[1]) << 8 |
         static_cast<uint32_t>(p[2]) << 16 | static_cast<uint32_t>(p[3]) << 24;
}

}  // namespace

Tensor read_feature_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("feature file not readable: " + path);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < 12 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw FormatError("feature file has bad magic or truncated header: " + path);
  }
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  const uint32_t d = get_u32(p + 4);
  const uint32_t n = get_u32(p + 8);
  if (d == 0 || n == 0) throw FormatError("feature file declares empty shape: " + path);
  const size_t expect = 12 + sizeof(float) * static_cast<size_t>(d) * n;
  if (bytes.size() != expect) {
    throw FormatError("feature file payload size mismatch (" + std::to_string(bytes.size()) +
                      " bytes, expected " + std::to_string(expect) + "): " + path);
  }
  Tensor out({static_cast<int>(d), static_cast<int>(n)});
  for (size_t i = 0; i < static_cast<size_t>(d) * n; ++i) {
    const uint32_t u = get_u32(p + 12 + 4 * i);
    const float f = std::bit_cast<float>(u);
    if (!std::isfinite(f)) throw DataError("feature file contains non-finite values: " + path);
    out[static_cast<int>(i)] = static_cast<double>(f);
  }
  return out;
}

void write_feature_file(const std::string& path, const Tensor& values) {
  if (values.rank() != 2) throw DataError("write_feature_file: values must be rank 2");
  std::string buf;
  buf.reserve(12 + 4 * static_cast<size_t>(values.numel()));
  buf.append(kMagic, 4);
  put_u32(buf, static_cast<uint32_t>(values.dim(0)));
  put_u32(buf, static_cast<uint32_t>(values.dim(1)));
  for (int i = 0; i < values.numel(); ++i) {
    put_u32(buf, std::bit_cast<uint32_t>(static_cast<float>(values[i])));
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open feature file for writing: " + path);
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw DataError("short write to feature file: " + path);
}

namespace {

constexpr const char* kManifestSchema = "temporal-heads-manifest-v1";

void require_keys(const nlohmann::json& j, const std::set<std::string>& allowed,
                  const char* what) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!allowed.count(it.key())) {
      throw FormatError(std::string(what) + ": unknown key '" + it.key() + "'");
    }
  }
}

}  // namespace

DatasetManifest load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("manifest not readable: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("manifest is not valid JSON (" + path + "): " + e.what());
  }
  require_keys(j, {"schema", "num_classes", "feature_dims", "entries"}, "manifest");
  if (j.value("schema", "") != kManifestSchema) {
    throw FormatError("manifest schema mismatch in " + path + ", expected " +
                      std::string(kManifestSchema));
  }
  DatasetManifest m;
  m.num_classes = j.at("num_classes").get<int>();
  require_keys(j.at("feature_dims"), {"spatial", "temporal"}, "manifest.feature_dims");
  m.spatial_dim = j.at("feature_dims").at("spatial").get<int>();
  m.temporal_dim = j.at("feature_dims").at("temporal").get<int>();
  for (const auto& je : j.at("entries")) {
    require_keys(je, {"id", "spatial_file", "temporal_file", "label", "split"}, "manifest entry");
    ManifestEntry e;
    e.id = je.at("id").get<std::string>();
    e.spatial_file = je.at("spatial_file").get<std::string>();
    e.temporal_file = je.at("temporal_file").get<std::string>();
    e.label = je.at("label").get<int>();
    e.split = je.at("split").get<std::string>();
    m.entries.push_back(std::move(e));
  }
  m.base_dir = fs::path(path).parent_path().string();
  m.validate();
  return m;
}

void save_manifest(const DatasetManifest& manifest, const std::string& path) {
  manifest.validate();
  nlohmann::json j;
  j["schema"] = kManifestSchema;
  j["num_classes"] = manifest.num_classes;
  j["feature_dims"] = {{"spatial", manifest.spatial_dim}, {"temporal", manifest.temporal_dim}};
  j["entries"] = nlohmann::json::array();
  for (const ManifestEntry& e : manifest.entries) {
    j["entries"].push_back({{"id", e.id},
                            {"spatial_file", e.spatial_file},
                            {"temporal_file", e.temporal_file},
                            {"label", e.label},
                            {"split", e.split}});
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write manifest: " + path);
  out << j.dump(2) << "\n";
}

namespace {

std::string resolve(const std::string& base, const std::string& rel) {
  fs::path p(rel);
  if (p.is_absolute() || base.empty()) return rel;
  return (fs::path(base) / p).string();
}

}  // namespace

FeatureMatrix load_features(const DatasetManifest& manifest, const std::string& id,
                            int target_frames) {
  const ManifestEntry& e = manifest.find(id);
  Tensor spatial = read_feature_file(resolve(manifest.base_dir, e.spatial_file));
  Tensor temporal = read_feature_file(resolve(manifest.base_dir, e.temporal_file));
  if (spatial.dim(0) != manifest.spatial_dim || temporal.dim(0) != manifest.temporal_dim) {
    throw DataError("stream dimensions do not match manifest feature_dims for " + id);
  }
  if (spatial.dim(1) != temporal.dim(1)) {
    throw DataError("spatial and temporal streams disagree on frame count for " + id);
  }
  const std::vector<int> idx = sample_frames(spatial.dim(1), target_frames);
  auto take = [&](const Tensor& src) {
    Tensor out({src.dim(0), static_cast<int>(idx.size())});
    for (int r = 0; r < src.dim(0); ++r) {
      for (size_t c = 0; c < idx.size(); ++c) {
        out.at(r, static_cast<int>(c)) = src.at(r, idx[c]);
      }
    }
    return out;
  };
  FeatureMatrix fm;
  fm.id = id;
  fm.values = concat_streams(take(spatial), take(temporal));
  return fm;
}

void SynthSpec::validate() const {
  if (num_classes <= 0) throw ConfigError("synth: num_classes must be positive");
  if (static_cast<int>(prototypes_per_class.size()) != num_classes) {
    throw ConfigError("synth: prototypes_per_class must list every class");
  }
  if (feature_dim < 2) throw ConfigError("synth: feature_dim must be at least 2");
  if (frames < 1) throw ConfigError("synth: frames must be positive");
  if (noise_sigma < 0.0) throw ConfigError("synth: noise_sigma must be non-negative");
  if (train_per_class < 1 || test_per_class < 0) {
    throw ConfigError("synth: sequence counts must be positive");
  }
  for (const auto& protos : prototypes_per_class) {
    if (protos.empty()) throw ConfigError("synth: every class needs at least one prototype");
    if (static_cast<int>(protos.size()) > frames) {
      throw ConfigError("synth: class has more prototypes than frames");
    }
    for (int p : protos) {
      if (p < 0) throw ConfigError("synth: prototype indices must be non-negative");
    }
  }
  // The dataset exists to probe order sensitivity: require one order-swapped
  // pair (same prototype multiset, different order).
  bool has_pair = false;
  for (size_t a = 0; a < prototypes_per_class.size() && !has_pair; ++a) {
    for (size_t b = a + 1; b < prototypes_per_class.size(); ++b) {
      auto ma = prototypes_per_class[a];
      auto mb = prototypes_per_class[b];
      if (ma == mb) continue;
      std::sort(ma.begin(), ma.end());
      std::sort(mb.begin(), mb.end());
      if (ma == mb) {
        has_pair = true;
        break;
      }
    }
  }
  if (!has_pair) {
    throw ConfigError("synth: spec has no order-swapped class pair");
  }
}

SynthSpec default_synth_spec() {
  SynthSpec s;
  s.prototypes_per_class.clear();
  for (int pair = 0; pair < 4; ++pair) {
    std::vector<int> forward, reversed;
    for (int k = 0; k < 5; ++k) forward.push_back(pair * 5 + k);
    reversed.assign(forward.rbegin(), forward.rend());
    s.prototypes_per_class.push_back(forward);
    s.prototypes_per_class.push_back(reversed);
  }
  return s;
}

DatasetManifest generate_synthetic(const SynthSpec& spec, const std::string& out_dir) {
  spec.validate();
  const fs::path root(out_dir);
  const fs::path feat_dir = root / "features";
  fs::create_directories(feat_dir);

  int pool_size = 0;
  for (const auto& protos : spec.prototypes_per_class) {
    for (int p : protos) pool_size = std::max(pool_size, p + 1);
  }

  Rng rng(spec.seed);
  std::vector<Tensor> pool;
  pool.reserve(static_cast<size_t>(pool_size));
  for (int p = 0; p < pool_size; ++p) {
    Tensor proto({spec.feature_dim});
    for (int i = 0; i < spec.feature_dim; ++i) proto[i] = rng.gaussian(0.0, 1.0);
    pool.push_back(std::move(proto));
  }

  DatasetManifest m;
  m.num_classes = spec.num_classes;
  m.spatial_dim = spec.feature_dim / 2;
  m.temporal_dim = spec.feature_dim - m.spatial_dim;
  m.base_dir = root.string();

  auto emit = [&](int cls, const char* split, int index) {
    const std::vector<int>& protos = spec.prototypes_per_class[static_cast<size_t>(cls)];
    const SegmentPartition spans = partition(spec.frames, static_cast<int>(protos.size()));
    Tensor x({spec.feature_dim, spec.frames});
    for (size_t s = 0; s < spans.boundaries.size(); ++s) {
      const Tensor& proto = pool[static_cast<size_t>(protos[s])];
      for (int t = spans.boundaries[s].first; t < spans.boundaries[s].second; ++t) {
        for (int i = 0; i < spec.feature_dim; ++i) {
          x.at(i, t) = proto[i] + (spec.noise_sigma > 0.0
                                       ? rng.gaussian(0.0, spec.noise_sigma)
                                       : 0.0);
        }
      }
    }
    char name[64];
    std::snprintf(name, sizeof(name), "c%d-%s-%03d", cls, split, index);
    Tensor spatial({m.spatial_dim, spec.frames});
    Tensor temporal({m.temporal_dim, spec.frames});
    std::memcpy(spatial.data(), x.data(),
                sizeof(double) * static_cast<size_t>(m.spatial_dim * spec.frames));
    std::memcpy(temporal.data(), x.data() + m.spatial_dim * spec.frames,
                sizeof(double) * static_cast<size_t>(m.temporal_dim * spec.frames));
    ManifestEntry e;
    e.id = name;
    e.spatial_file = (fs::path("features") / (std::string(name) + ".spatial.tfv")).string();
    e.temporal_file = (fs::path("features") / (std::string(name) + ".temporal.tfv")).string();
    e.label = cls;
    e.split = split;
    write_feature_file((root / e.spatial_file).string(), spatial);
    write_feature_file((root / e.temporal_file).string(), temporal);
    m.entries.push_back(std::move(e));
  };

  for (int cls = 0; cls < spec.num_classes; ++cls) {
    for (int k = 0; k < spec.train_per_class; ++k) emit(cls, "train", k);
    for (int k = 0; k < spec.test_per_class; ++k) emit(cls, "test", k);
  }

  save_manifest(m, (root / "manifest.json").string());
  return m;
}

LoadedDataset load_dataset(const DatasetManifest& manifest, int target_frames) {
  manifest.validate();
  LoadedDataset d;
  d.num_classes = manifest.num_classes;
  d.feature_dim = manifest.spatial_dim + manifest.temporal_dim;
  for (const ManifestEntry& e : manifest.entries) {
    FeatureMatrix fm = load_features(manifest, e.id, target_frames);
    if (e.split == "train") {
      d.train_x.push_back(std::move(fm));
      d.train_y.push_back(e.label);
    } else {
      d.test_x.push_back(std::move(fm));
      d.test_y.push_back(e.label);
    }
  }
  return d;
}

}  // namespace temporal_heads
