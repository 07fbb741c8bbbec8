#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "toothseg/mesh.hpp"
#include "toothseg/spectral.hpp"

namespace toothseg {

struct LabeledSample {
  std::string name;
  TriangleMesh mesh;
  FaceLabels labels;
  bool missing_teeth = false;
};

struct UnlabeledSample {
  std::string name;
  TriangleMesh mesh;
  std::optional<ClusterAssignment> components;
  bool missing_teeth = false;
};

/// X^L with y^L, X^U with cached spectral components, and held-out test arches.
struct DatasetSplit {
  std::vector<LabeledSample> labeled;
  std::vector<UnlabeledSample> unlabeled;
  std::vector<LabeledSample> test;

  /// Throws Error if a mesh appears in two lists or an unlabeled entry has
  /// no component assignment.
  void validate() const;
};

/// Spectral assignments keyed by mesh content and configuration. With a
/// directory, entries persist as `<key>.clusters` sidecars across runs.
class ClusterCache {
 public:
  ClusterCache() = default;
  explicit ClusterCache(std::filesystem::path directory);

  ClusterAssignment get_or_compute(const TriangleMesh& mesh, const SpectralConfig& cfg);

  std::size_t computations() const { return computations_; }
  std::size_t hits() const { return hits_; }

  static std::uint64_t key(const TriangleMesh& mesh, const SpectralConfig& cfg);

 private:
  std::optional<std::filesystem::path> directory_;
  std::map<std::uint64_t, ClusterAssignment> memory_;
  std::size_t computations_ = 0;
  std::size_t hits_ = 0;
};

/// Runs cluster_mesh on each mesh through the cache. The k-means seed for a
/// mesh is cfg.seed xor its content hash.
std::vector<ClusterAssignment> prepare_unlabeled(std::span<const TriangleMesh> meshes,
                                                 const SpectralConfig& cfg, ClusterCache& cache);

/// Normalizes (and, above `target_faces`, decimates) a mesh so it is ready
/// for clustering and feature extraction. Labeled meshes cannot be decimated
/// because their labels are per face; pass allow_decimate = false for them.
TriangleMesh prepare_mesh(const TriangleMesh& mesh, std::size_t target_faces, bool allow_decimate);

/// Mesh files (.obj/.ply/.stl) in `dir`, sorted by file name.
std::vector<std::filesystem::path> list_meshes(const std::filesystem::path& dir);

/// Loads every mesh in `dir` with its `<stem>.labels` sidecar. Missing-teeth
/// flags come from `dir/manifest.json` when present.
std::vector<LabeledSample> load_labeled_dir(const std::filesystem::path& dir, int num_classes,
                                            std::size_t target_faces);
std::vector<UnlabeledSample> load_unlabeled_dir(const std::filesystem::path& dir,
                                                std::size_t target_faces);

/// Writes `manifest.json` entries: {"<name>": {"missing": [...]}}.
void write_manifest(const std::filesystem::path& dir,
                    const std::map<std::string, std::vector<int>>& missing_by_arch);

}  // namespace toothseg
