#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "toothseg/kmeans.hpp"
#include "toothseg/mesh.hpp"

namespace toothseg {

/// Largest face count the dense spectral pipeline accepts; decimate first.
inline constexpr std::size_t kMaxSpectralFaces = 3000;

struct SpectralConfig {
  int k = 60;
  double delta = 0.03;  // geodesic share of the combined distance
  double eta = 0.15;    // weight on convex dihedral terms
  int embed_dims = 0;   // 0 means "use k"
  std::uint64_t seed = 0;

  int effective_embed_dims() const { return embed_dims > 0 ? embed_dims : k; }
  /// Throws ConfigError when a field is out of range for `face_count` faces.
  void validate(std::size_t face_count) const;
};

struct DualEdge {
  std::uint32_t a, b;  // faces
  double geo;          // centroid -> shared edge midpoint -> centroid
  double ang;          // see angle_distance()
};

/// One node per face, one edge per interior mesh edge.
struct DualGraph {
  std::size_t node_count = 0;
  std::vector<DualEdge> edges;
  // Edge indices incident to each node.
  std::vector<std::vector<std::uint32_t>> incident;
};

/// Throws MeshError listing the component sizes when the mesh is not
/// edge-connected or has fewer than 2 faces.
DualGraph build_dual_graph(const TriangleMesh& mesh, double eta = SpectralConfig{}.eta);

/// eta * (1 - cos a) across a convex edge, (1 - cos a) across a concave one,
/// where a is the angle between the face normals. The edge counts as concave
/// when the centroid of face_j lies strictly above the plane of face_i.
double angle_distance(const TriangleMesh& mesh, std::uint32_t face_i, std::uint32_t face_j,
                      double eta);

/// Per-edge weights delta * geo / mean_geo + (1 - delta) * ang / mean_ang.
std::vector<double> combined_edge_weights(const DualGraph& graph, double delta);

/// All-pairs shortest paths over the combined edge weights (one Dijkstra run
/// per source). Symmetric with zero diagonal.
Eigen::MatrixXd pairwise_distance(const DualGraph& graph, const SpectralConfig& cfg);

enum class SigmaMode { MeanOffDiagonal, Fixed };

struct AffinityOptions {
  SigmaMode mode = SigmaMode::MeanOffDiagonal;
  double fixed_sigma = 1.0;
};

/// Gaussian kernel exp(-d^2 / (2 sigma^2)); an all-zero distance matrix maps
/// to all ones.
Eigen::MatrixXd affinity(const Eigen::MatrixXd& distances, const AffinityOptions& options = {});

struct SpectralEmbedding {
  Eigen::MatrixXd rows;         // n x m, unit-length rows (zero rows stay zero)
  Eigen::VectorXd eigenvalues;  // descending
};

/// Top-m eigenvectors of D^-1/2 W D^-1/2, stacked as columns, rows normalized.
SpectralEmbedding eigen_embed(const Eigen::MatrixXd& w, Eigen::Index m);

/// build_dual_graph -> pairwise_distance -> affinity -> eigen_embed -> kmeans_pp.
ClusterAssignment cluster_mesh(const TriangleMesh& mesh, const SpectralConfig& cfg);

}  // namespace toothseg
