#include "toothseg/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <tuple>
#include <unordered_map>

#include <Eigen/Geometry>

namespace toothseg {

NormalizeResult normalize(const TriangleMesh& mesh) {
  const auto n = static_cast<double>(mesh.vertex_count());
  Vec3 mean = Vec3::Zero();
  for (const auto& v : mesh.vertices) mean += v;
  mean /= n;
  double sq = 0.0;
  for (const auto& v : mesh.vertices) sq += (v - mean).squaredNorm();
  const double std = std::sqrt(sq / (3.0 * n));
  if (!(std > 0.0) || !std::isfinite(std)) {
    throw MeshError("cannot normalize: all vertices coincide (standard deviation is zero)");
  }
  std::vector<Vec3> out;
  out.reserve(mesh.vertex_count());
  for (const auto& v : mesh.vertices) out.push_back((v - mean) / std);
  return {with_vertices(mesh, std::move(out)), mean, std};
}

void AugmentRanges::validate() const {
  if (!(rotation_max_rad >= 0.0)) throw ConfigError("augment.rotation_max_rad must be >= 0");
  if (!(translation_max >= 0.0)) throw ConfigError("augment.translation_max must be >= 0");
  if (!(scale_min > 0.0) || !(scale_max >= scale_min)) {
    throw ConfigError("augment.scale_range must satisfy 0 < min <= max");
  }
}

AugmentParams sample_augment(const AugmentRanges& ranges, std::uint64_t seed) {
  ranges.validate();
  Rng rng(seed);
  AugmentParams p;
  const double z = uniform(rng, -1.0, 1.0);
  const double phi = uniform(rng, 0.0, 2.0 * std::numbers::pi);
  const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
  p.axis = Vec3(r * std::cos(phi), r * std::sin(phi), z);
  p.angle = uniform(rng, -ranges.rotation_max_rad, ranges.rotation_max_rad);
  for (int k = 0; k < 3; ++k) {
    p.translation[k] = uniform(rng, -ranges.translation_max, ranges.translation_max);
  }
  p.scale = uniform(rng, ranges.scale_min, ranges.scale_max);
  return p;
}

TriangleMesh augment(const TriangleMesh& mesh, const AugmentParams& params) {
  if (!(params.scale > 0.0)) throw Error("augment scale must be positive");
  const double axis_norm = params.axis.norm();
  if (params.angle != 0.0 && !(axis_norm > 0.0)) throw Error("augment axis must be non-zero");
  Eigen::Matrix3d rot = Eigen::Matrix3d::Identity();
  if (params.angle != 0.0) {
    rot = Eigen::AngleAxisd(params.angle, params.axis / axis_norm).toRotationMatrix();
  }
  const Eigen::Matrix3d linear = params.scale * rot;
  std::vector<Vec3> out;
  out.reserve(mesh.vertex_count());
  for (const auto& v : mesh.vertices) out.push_back(linear * v + params.translation);
  return with_vertices(mesh, std::move(out));
}

// ---------------------------------------------------------------- decimation

namespace {

constexpr std::uint32_t kDead = std::numeric_limits<std::uint32_t>::max();
// Minimum cosine between a face normal before and after a collapse.
constexpr double kMinNormalCosine = 0.1;

class EdgeCollapser {
 public:
  explicit EdgeCollapser(const TriangleMesh& mesh)
      : pos_(mesh.vertices),
        faces_(mesh.faces),
        face_alive_(mesh.face_count(), 1),
        vertex_alive_(mesh.vertex_count(), 1),
        stamp_(mesh.vertex_count(), 0),
        boundary_(mesh.vertex_count(), 0),
        vertex_faces_(mesh.vertex_count()),
        alive_faces_(mesh.face_count()) {
    for (std::uint32_t f = 0; f < faces_.size(); ++f) {
      for (auto v : faces_[f]) vertex_faces_[v].push_back(f);
    }
    std::unordered_map<std::uint64_t, int> edge_count;
    for (const auto& t : faces_) {
      for (int k = 0; k < 3; ++k) ++edge_count[key(t[k], t[(k + 1) % 3])];
    }
    for (const auto& [k, c] : edge_count) {
      if (c == 1) {
        boundary_[k >> 32] = 1;
        boundary_[k & 0xffffffffu] = 1;
      }
    }
    for (const auto& [k, c] : edge_count) {
      push(static_cast<std::uint32_t>(k >> 32), static_cast<std::uint32_t>(k & 0xffffffffu));
    }
  }

  bool run(std::size_t target) {
    while (alive_faces_ > target) {
      if (queue_.empty()) return false;
      const Candidate c = queue_.top();
      queue_.pop();
      if (!vertex_alive_[c.a] || !vertex_alive_[c.b]) continue;
      if (stamp_[c.a] != c.stamp_a || stamp_[c.b] != c.stamp_b) continue;
      try_collapse(c.a, c.b);
    }
    return true;
  }

  TriangleMesh result() const {
    std::vector<std::uint32_t> remap(pos_.size(), kDead);
    std::vector<Vec3> vertices;
    std::vector<Face> faces;
    for (std::size_t f = 0; f < faces_.size(); ++f) {
      if (!face_alive_[f]) continue;
      Face t = faces_[f];
      for (auto& v : t) {
        if (remap[v] == kDead) {
          remap[v] = static_cast<std::uint32_t>(vertices.size());
          vertices.push_back(pos_[v]);
        }
        v = remap[v];
      }
      faces.push_back(t);
    }
    return make_mesh(std::move(vertices), std::move(faces));
  }

 private:
  struct Candidate {
    double length;
    std::uint32_t a, b;
    std::uint32_t stamp_a, stamp_b;
    bool operator<(const Candidate& o) const {
      // Min-heap on length; ties broken by vertex ids for determinism.
      return std::tie(length, a, b) > std::tie(o.length, o.a, o.b);
    }
  };

  static std::uint64_t key(std::uint32_t a, std::uint32_t b) {
    if (a > b) std::swap(a, b);
    return (static_cast<std::uint64_t>(a) << 32) | b;
  }

  void push(std::uint32_t a, std::uint32_t b) {
    if (a > b) std::swap(a, b);
    queue_.push({(pos_[a] - pos_[b]).norm(), a, b, stamp_[a], stamp_[b]});
  }

  std::vector<std::uint32_t> neighbors(std::uint32_t v) const {
    std::vector<std::uint32_t> out;
    for (auto f : vertex_faces_[v]) {
      for (auto w : faces_[f]) {
        if (w != v) out.push_back(w);
      }
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

  static bool has(const Face& t, std::uint32_t v) { return t[0] == v || t[1] == v || t[2] == v; }

  void try_collapse(std::uint32_t a, std::uint32_t b) {
    std::vector<std::uint32_t> shared;
    for (auto f : vertex_faces_[a]) {
      if (has(faces_[f], b)) shared.push_back(f);
    }
    if (shared.empty() || shared.size() > 2) return;
    const bool boundary_edge = shared.size() == 1;
    if (boundary_[a] && boundary_[b] && !boundary_edge) return;
    if (alive_faces_ - shared.size() < 4) return;

    // Keep a boundary vertex in place so the outline does not shrink.
    if (boundary_[b] && !boundary_[a]) std::swap(a, b);
    const Vec3 target = boundary_[a] && !boundary_[b] ? pos_[a] : 0.5 * (pos_[a] + pos_[b]);

    // Link condition: common neighbours are exactly the opposite corners.
    std::vector<std::uint32_t> opposite;
    for (auto f : shared) {
      for (auto w : faces_[f]) {
        if (w != a && w != b) opposite.push_back(w);
      }
    }
    std::sort(opposite.begin(), opposite.end());
    const auto na = neighbors(a), nb = neighbors(b);
    std::vector<std::uint32_t> common;
    std::set_intersection(na.begin(), na.end(), nb.begin(), nb.end(), std::back_inserter(common));
    if (common != opposite) return;

    // Normal-flip and degeneracy guard on every surviving incident face.
    for (auto v : {a, b}) {
      for (auto f : vertex_faces_[v]) {
        if (std::find(shared.begin(), shared.end(), f) != shared.end()) continue;
        Face t = faces_[f];
        const Vec3 before = face_normal(pos_[t[0]], pos_[t[1]], pos_[t[2]]);
        Vec3 p[3];
        for (int k = 0; k < 3; ++k) p[k] = (t[k] == a || t[k] == b) ? target : pos_[t[k]];
        const Vec3 cross = (p[1] - p[0]).cross(p[2] - p[0]);
        if (0.5 * cross.norm() < kDegenerateAreaTolerance) return;
        if (before.dot(cross.normalized()) < kMinNormalCosine) return;
      }
    }

    for (auto f : shared) {
      face_alive_[f] = 0;
      --alive_faces_;
      for (auto w : faces_[f]) {
        auto& list = vertex_faces_[w];
        list.erase(std::remove(list.begin(), list.end(), f), list.end());
      }
    }
    for (auto f : vertex_faces_[b]) {
      for (auto& w : faces_[f]) {
        if (w == b) w = a;
      }
      vertex_faces_[a].push_back(f);
    }
    vertex_faces_[b].clear();
    vertex_alive_[b] = 0;
    boundary_[a] = boundary_[a] || boundary_[b];
    pos_[a] = target;
    ++stamp_[a];
    for (auto w : neighbors(a)) {
      ++stamp_[w];
    }
    // Re-queue every edge whose endpoint stamp changed.
    for (auto w : neighbors(a)) {
      for (auto x : neighbors(w)) push(w, x);
    }
  }

  std::vector<Vec3> pos_;
  std::vector<Face> faces_;
  std::vector<char> face_alive_;
  std::vector<char> vertex_alive_;
  std::vector<std::uint32_t> stamp_;
  std::vector<char> boundary_;
  std::vector<std::vector<std::uint32_t>> vertex_faces_;
  std::size_t alive_faces_;
  std::priority_queue<Candidate> queue_;
};

}  // namespace

DecimateResult decimate(const TriangleMesh& mesh, std::size_t target_faces) {
  if (target_faces < 4) {
    throw Error("decimation target must be at least 4 faces, got " + std::to_string(target_faces));
  }
  if (target_faces >= mesh.face_count()) return {mesh, true};
  EdgeCollapser collapser(mesh);
  const bool reached = collapser.run(target_faces);
  return {collapser.result(), reached};
}

// ---------------------------------------------------------------- features

FaceFeatures extract_features(const TriangleMesh& mesh) {
  Vec3 mean = Vec3::Zero();
  for (const auto& v : mesh.vertices) mean += v;
  mean /= static_cast<double>(mesh.vertex_count());

  auto lex_less = [](const Vec3& p, const Vec3& q) {
    return std::tie(p.x(), p.y(), p.z()) < std::tie(q.x(), q.y(), q.z());
  };

  FaceFeatures features(mesh.face_count(), kFeatureDim);
  for (std::size_t f = 0; f < mesh.face_count(); ++f) {
    const Face& t = mesh.faces[f];
    int start = 0;
    for (int k = 1; k < 3; ++k) {
      if (lex_less(mesh.vertices[t[k]], mesh.vertices[t[start]])) start = k;
    }
    for (int k = 0; k < 3; ++k) {
      features.block<1, 3>(f, 3 * k) = mesh.vertices[t[(start + k) % 3]].transpose();
    }
    features.block<1, 3>(f, 9) = mesh.face_normals[f].transpose();
    features.block<1, 3>(f, 12) = (mesh.centroid(f) - mean).transpose();
  }
  return features;
}

}  // namespace toothseg
