#include "toothseg/dataset.hpp"

#include <algorithm>
#include <bit>
#include <cstdio>
#include <set>

#include <nlohmann/json.hpp>

#include "toothseg/mesh_io.hpp"
#include "toothseg/preprocess.hpp"

namespace toothseg {

namespace fs = std::filesystem;

void DatasetSplit::validate() const {
  std::map<std::uint64_t, std::string> owner;
  auto claim = [&owner](const TriangleMesh& mesh, const std::string& where) {
    const auto h = content_hash(mesh);
    auto [it, inserted] = owner.emplace(h, where);
    if (!inserted) throw Error("mesh " + where + " duplicates " + it->second);
  };
  for (const auto& s : labeled) {
    if (s.labels.size() != s.mesh.face_count()) {
      throw Error("labeled arch '" + s.name + "' has " + std::to_string(s.labels.size()) +
                  " labels for " + std::to_string(s.mesh.face_count()) + " faces");
    }
    claim(s.mesh, "labeled/" + s.name);
  }
  for (const auto& s : unlabeled) {
    if (!s.components) throw Error("unlabeled arch '" + s.name + "' has no cluster assignment");
    if (s.components->size() != s.mesh.face_count()) {
      throw Error("unlabeled arch '" + s.name + "' has a stale cluster assignment");
    }
    claim(s.mesh, "unlabeled/" + s.name);
  }
  for (const auto& s : test) {
    if (s.labels.size() != s.mesh.face_count()) {
      throw Error("test arch '" + s.name + "' has " + std::to_string(s.labels.size()) +
                  " labels for " + std::to_string(s.mesh.face_count()) + " faces");
    }
    claim(s.mesh, "test/" + s.name);
  }
}

ClusterCache::ClusterCache(fs::path directory) : directory_(std::move(directory)) {}

std::uint64_t ClusterCache::key(const TriangleMesh& mesh, const SpectralConfig& cfg) {
  std::uint64_t h = content_hash(mesh);
  h = mix_seed(h, static_cast<std::uint64_t>(cfg.k));
  h = mix_seed(h, std::bit_cast<std::uint64_t>(cfg.delta));
  h = mix_seed(h, std::bit_cast<std::uint64_t>(cfg.eta));
  h = mix_seed(h, static_cast<std::uint64_t>(cfg.effective_embed_dims()));
  h = mix_seed(h, cfg.seed);
  return h;
}

ClusterAssignment ClusterCache::get_or_compute(const TriangleMesh& mesh, const SpectralConfig& cfg) {
  const std::uint64_t k = key(mesh, cfg);
  if (auto it = memory_.find(k); it != memory_.end()) {
    ++hits_;
    return it->second;
  }
  char name[32];
  std::snprintf(name, sizeof name, "%016llx.clusters", static_cast<unsigned long long>(k));
  if (directory_) {
    const fs::path file = *directory_ / name;
    if (fs::exists(file)) {
      ClusterAssignment a;
      a.component = read_labels(read_file(file));
      a.k = cfg.k;
      const bool valid = a.component.size() == mesh.face_count() &&
                         std::all_of(a.component.begin(), a.component.end(),
                                     [&](int c) { return c < cfg.k; });
      if (valid) {
        ++hits_;
        memory_.emplace(k, a);
        return a;
      }
    }
  }
  SpectralConfig per_mesh = cfg;
  per_mesh.seed = cfg.seed ^ content_hash(mesh);
  ClusterAssignment a = cluster_mesh(mesh, per_mesh);
  ++computations_;
  if (directory_) write_file(*directory_ / name, write_labels(a.component));
  memory_.emplace(k, a);
  return a;
}

std::vector<ClusterAssignment> prepare_unlabeled(std::span<const TriangleMesh> meshes,
                                                 const SpectralConfig& cfg, ClusterCache& cache) {
  std::vector<ClusterAssignment> out;
  out.reserve(meshes.size());
  for (const auto& mesh : meshes) out.push_back(cache.get_or_compute(mesh, cfg));
  return out;
}

TriangleMesh prepare_mesh(const TriangleMesh& mesh, std::size_t target_faces, bool allow_decimate) {
  if (mesh.face_count() > target_faces) {
    if (!allow_decimate) {
      throw Error("labeled mesh has " + std::to_string(mesh.face_count()) +
                  " faces, above the target of " + std::to_string(target_faces) +
                  "; decimate before labeling");
    }
    return normalize(decimate(mesh, target_faces).mesh).mesh;
  }
  return normalize(mesh).mesh;
}

std::vector<fs::path> list_meshes(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error("'" + dir.string() + "' is not a directory");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    std::string ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".obj" || ext == ".ply" || ext == ".stl") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

namespace {

std::map<std::string, bool> read_missing_flags(const fs::path& dir) {
  std::map<std::string, bool> flags;
  const fs::path file = dir / "manifest.json";
  if (!fs::exists(file)) return flags;
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(read_file(file));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(file.string() + ": " + e.what());
  }
  for (const auto& [name, entry] : doc.items()) {
    flags[name] = entry.contains("missing") && !entry["missing"].empty();
  }
  return flags;
}

}  // namespace

std::vector<LabeledSample> load_labeled_dir(const fs::path& dir, int num_classes,
                                            std::size_t target_faces) {
  const auto flags = read_missing_flags(dir);
  std::vector<LabeledSample> out;
  for (const auto& file : list_meshes(dir)) {
    LabeledSample s;
    s.name = file.stem().string();
    const fs::path label_file = fs::path(file).replace_extension(".labels");
    if (!fs::exists(label_file)) {
      throw Error("arch '" + s.name + "': missing label sidecar " + label_file.string());
    }
    const TriangleMesh raw = load_mesh(file);
    try {
      s.labels = attach_labels(read_labels(read_file(label_file)), raw.face_count(), num_classes);
    } catch (const Error& e) {
      throw Error("arch '" + s.name + "': " + e.what());
    }
    s.mesh = prepare_mesh(raw, target_faces, false);
    if (auto it = flags.find(s.name); it != flags.end()) s.missing_teeth = it->second;
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<UnlabeledSample> load_unlabeled_dir(const fs::path& dir, std::size_t target_faces) {
  const auto flags = read_missing_flags(dir);
  std::vector<UnlabeledSample> out;
  for (const auto& file : list_meshes(dir)) {
    UnlabeledSample s;
    s.name = file.stem().string();
    s.mesh = prepare_mesh(load_mesh(file), target_faces, true);
    if (auto it = flags.find(s.name); it != flags.end()) s.missing_teeth = it->second;
    out.push_back(std::move(s));
  }
  return out;
}

void write_manifest(const fs::path& dir, const std::map<std::string, std::vector<int>>& missing_by_arch) {
  nlohmann::json doc = nlohmann::json::object();
  for (const auto& [name, missing] : missing_by_arch) doc[name] = {{"missing", missing}};
  write_file(dir / "manifest.json", doc.dump(2) + "\n");
}

}  // namespace toothseg
