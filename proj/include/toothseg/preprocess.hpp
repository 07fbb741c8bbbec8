#pragma once

#include <cstdint>
#include <numbers>

#include <Eigen/Core>

#include "toothseg/mesh.hpp"

namespace toothseg {

inline constexpr int kFeatureDim = 15;
inline constexpr std::size_t kDefaultDecimateTarget = 3000;

struct NormalizeResult {
  TriangleMesh mesh;
  Vec3 mean;
  double std = 1.0;  // RMS deviation over all 3N coordinates
};

/// Centers the vertices on their per-axis mean and divides by one scalar
/// RMS deviation, which keeps the aspect ratio. Throws MeshError when every
/// vertex coincides.
NormalizeResult normalize(const TriangleMesh& mesh);

/// Similarity transform v -> scale * R(axis, angle) * v + translation.
struct AugmentParams {
  Vec3 axis = Vec3::UnitZ();
  double angle = 0.0;
  Vec3 translation = Vec3::Zero();
  double scale = 1.0;
};

struct AugmentRanges {
  double rotation_max_rad = std::numbers::pi / 9.0;
  double translation_max = 0.1;
  double scale_min = 0.9;
  double scale_max = 1.1;

  void validate() const;
};

/// Draws a uniformly random axis, an angle in [-max, max], per-axis
/// translations in [-max, max] and a scale in [min, max]. Same seed, same
/// parameters.
AugmentParams sample_augment(const AugmentRanges& ranges, std::uint64_t seed);

TriangleMesh augment(const TriangleMesh& mesh, const AugmentParams& params);

struct DecimateResult {
  TriangleMesh mesh;
  // False when no further collapse was legal before the target was reached.
  bool reached_target = true;
};

/// Shortest-edge-first collapse with link-condition, boundary and normal-flip
/// guards. Returns the input unchanged when it already has <= target faces.
DecimateResult decimate(const TriangleMesh& mesh, std::size_t target_faces);

/// Row-per-face classifier input: the three corner positions (starting at the
/// lexicographically smallest corner, winding preserved), the unit normal,
/// and the face centroid relative to the vertex mean. Shape n x kFeatureDim.
using FaceFeatures = Eigen::MatrixXd;

FaceFeatures extract_features(const TriangleMesh& mesh);

}  // namespace toothseg
