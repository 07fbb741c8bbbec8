#include "toothseg/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "toothseg/common.hpp"

namespace toothseg {

namespace {

struct ToothBlock {
  int label;
  int i0, j0;  // first cell
  int width, depth;
  double height;
  bool present;
};

// Emits the two triangles of grid cell (i, j), counterclockwise seen from +z
// in (i, j) parameter space. `anti` picks the (i+1, j)-(i, j+1) diagonal.
void emit_cell(std::vector<Face>& faces, int i, int j, int rows, bool anti) {
  auto id = [rows](int a, int b) { return static_cast<std::uint32_t>(a * (rows + 1) + b); };
  const auto v00 = id(i, j), v10 = id(i + 1, j), v11 = id(i + 1, j + 1), v01 = id(i, j + 1);
  if (!anti) {
    faces.push_back({v00, v10, v11});
    faces.push_back({v00, v11, v01});
  } else {
    faces.push_back({v00, v10, v01});
    faces.push_back({v10, v11, v01});
  }
}

}  // namespace

LabeledArch generate_synthetic_arch(const ArchSpec& spec) {
  if (spec.teeth < 1) throw Error("synthetic arch needs at least one tooth");
  if (spec.face_budget < 200) {
    throw Error("synthetic arch face budget must be >= 200, got " + std::to_string(spec.face_budget));
  }
  for (int p : spec.missing) {
    if (p < 1 || p > spec.teeth) {
      throw Error("missing tooth position " + std::to_string(p) + " outside [1, " +
                  std::to_string(spec.teeth) + "]");
    }
  }

  // Teeth are 3x3 cells with one-cell gaps and at least one gum row on each
  // side. Finer teeth split into several orthogonal embedding pieces each, so
  // leftover budget goes to the gum instead.
  const int t = spec.teeth;
  const int tooth_w = 3, gap = 1, tooth_d = 3;
  const int cols = t * (tooth_w + gap) + gap;
  const std::size_t min_faces = 2 * static_cast<std::size_t>(cols) * (tooth_d + 2);
  if (spec.face_budget < min_faces) {
    throw Error("face budget " + std::to_string(spec.face_budget) + " is too small for " +
                std::to_string(t) + " teeth (needs at least " + std::to_string(min_faces) + ")");
  }
  int margin_lo = 1, margin_hi = 1;
  // Spend leftover budget on extra gum rows, alternating sides.
  while (2 * static_cast<std::size_t>(cols) * static_cast<std::size_t>(margin_lo + margin_hi + tooth_d + 1) <=
         spec.face_budget) {
    if (margin_lo <= margin_hi) {
      ++margin_lo;
    } else {
      ++margin_hi;
    }
  }
  const int rows = margin_lo + tooth_d + margin_hi;

  Rng rng(mix_seed(spec.seed, 0x41524348));  // "ARCH"
  const double radius_x = uniform(rng, 2.3, 2.8);
  const double radius_y = uniform(rng, 2.1, 2.6);
  const double half_span = uniform(rng, 0.40, 0.46) * std::numbers::pi;
  const double arch_len_est = 2.0 * half_span * 0.5 * (radius_x + radius_y);
  const double cell = arch_len_est / cols;
  const double ridge = uniform(rng, 0.18, 0.28) * rows * cell;
  const double wobble = uniform(rng, 0.02, 0.05);
  const double wobble_phase = uniform(rng, 0.0, 2.0 * std::numbers::pi);

  std::vector<ToothBlock> blocks;
  for (int p = 1; p <= t; ++p) {
    const bool present = std::find(spec.missing.begin(), spec.missing.end(), p) == spec.missing.end();
    const double height = uniform(rng, 0.8, 1.1) * tooth_w * cell;
    blocks.push_back({p, gap + (p - 1) * (tooth_w + gap), margin_lo, tooth_w, tooth_d, height, present});
  }

  // Vertex heights on the (cols+1) x (rows+1) grid.
  std::vector<double> bump((cols + 1) * (rows + 1), 0.0);
  for (const auto& b : blocks) {
    if (!b.present) continue;
    for (int i = b.i0 + 1; i < b.i0 + b.width; ++i) {
      for (int j = b.j0 + 1; j < b.j0 + b.depth; ++j) {
        bump[i * (rows + 1) + j] = b.height;
      }
    }
  }

  const double center_row = margin_lo + 0.5 * tooth_d;
  std::vector<Vec3> vertices;
  vertices.reserve(bump.size());
  for (int i = 0; i <= cols; ++i) {
    const double phi = -half_span + 2.0 * half_span * i / cols;
    const Eigen::Vector2d curve(radius_x * std::sin(phi), radius_y * std::cos(phi));
    Eigen::Vector2d tangent(radius_x * std::cos(phi), -radius_y * std::sin(phi));
    tangent.normalize();
    const Eigen::Vector2d outward(-tangent.y(), tangent.x());
    for (int j = 0; j <= rows; ++j) {
      const double across = (j - center_row) * cell;
      const double rel = across / (0.5 * rows * cell);
      const double gum = ridge * (1.0 - rel * rel) + wobble * ridge * std::sin(3.0 * phi + wobble_phase);
      const double jitter = uniform(rng, -0.02, 0.02) * cell;
      const Eigen::Vector2d xy = curve + across * outward;
      vertices.emplace_back(xy.x(), xy.y(), gum + bump[i * (rows + 1) + j] + jitter);
    }
  }

  std::vector<Face> faces;
  std::vector<int> labels;
  faces.reserve(2 * static_cast<std::size_t>(cols) * rows);
  for (int i = 0; i < cols; ++i) {
    for (int j = 0; j < rows; ++j) {
      int label = 0;
      bool anti = false;
      for (const auto& b : blocks) {
        if (i < b.i0 || i >= b.i0 + b.width || j < b.j0 || j >= b.j0 + b.depth) continue;
        if (b.present) label = b.label;
        // Corner cells split through the raised corner so both halves slope.
        const bool right = i == b.i0 + b.width - 1, left = i == b.i0;
        const bool bottom = j == b.j0, top = j == b.j0 + b.depth - 1;
        anti = (right && bottom) || (left && top);
      }
      emit_cell(faces, i, j, rows, anti);
      labels.push_back(label);
      labels.push_back(label);
    }
  }

  LabeledArch arch;
  arch.mesh = make_mesh(std::move(vertices), std::move(faces));
  arch.labels = attach_labels(std::move(labels), arch.mesh.face_count(), t + 1);
  return arch;
}

LabeledArch generate_crease_plates(int cells_per_side, double crease_angle) {
  if (cells_per_side < 1) throw Error("crease plates need at least one cell per side");
  const int cols = 2 * cells_per_side, rows = cells_per_side;
  const double size = 1.0 / cells_per_side;
  std::vector<Vec3> vertices;
  for (int i = 0; i <= cols; ++i) {
    const double u = (i - cells_per_side) * size;
    for (int j = 0; j <= rows; ++j) {
      const double y = j * size;
      if (u <= 0.0) {
        vertices.emplace_back(u, y, 0.0);
      } else {
        vertices.emplace_back(u * std::cos(crease_angle), y, -u * std::sin(crease_angle));
      }
    }
  }
  std::vector<Face> faces;
  std::vector<int> labels;
  for (int i = 0; i < cols; ++i) {
    for (int j = 0; j < rows; ++j) {
      emit_cell(faces, i, j, rows, (i + j) % 2 == 1);
      const int side = i < cells_per_side ? 0 : 1;
      labels.push_back(side);
      labels.push_back(side);
    }
  }
  LabeledArch out;
  out.mesh = make_mesh(std::move(vertices), std::move(faces));
  out.labels = attach_labels(std::move(labels), out.mesh.face_count(), 2);
  return out;
}

}  // namespace toothseg
