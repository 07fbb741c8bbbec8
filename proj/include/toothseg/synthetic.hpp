#pragma once

#include <cstdint>
#include <vector>

#include "toothseg/mesh.hpp"

namespace toothseg {

/// Description of one generated arch. Tooth positions are 1-based and double
/// as class labels; gingiva is class 0.
struct ArchSpec {
  int teeth = 14;
  std::vector<int> missing;
  std::size_t face_budget = 3000;
  std::uint64_t seed = 0;
};

struct LabeledArch {
  TriangleMesh mesh;
  FaceLabels labels;
};

/// A curved gum ridge over a grid band with one raised block per present
/// tooth. Each block is ringed by a one-cell wall whose base is a concave
/// crease lying exactly on the tooth/gingiva label boundary. Teeth are three
/// cells square and the rest of `face_budget` becomes gum rows; throws Error
/// when the teeth alone do not fit.
LabeledArch generate_synthetic_arch(const ArchSpec& spec);

/// Two rectangular plates meeting at a straight convex crease (dihedral
/// `crease_angle` radians away from flat). Returns the mesh and, per face,
/// which plate it belongs to.
LabeledArch generate_crease_plates(int cells_per_side, double crease_angle = 1.5707963267948966);

}  // namespace toothseg
