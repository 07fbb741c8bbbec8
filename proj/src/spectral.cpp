#include "toothseg/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <sstream>
#include <thread>

#include "toothseg/eigen_solver.hpp"

namespace toothseg {

void SpectralConfig::validate(std::size_t face_count) const {
  if (k < 2) throw ConfigError("spectral k must be >= 2, got " + std::to_string(k));
  if (static_cast<std::size_t>(k) > face_count) {
    throw ConfigError("spectral k = " + std::to_string(k) + " exceeds the face count " +
                      std::to_string(face_count));
  }
  if (!(delta >= 0.0 && delta <= 1.0)) throw ConfigError("spectral delta must lie in [0, 1]");
  if (!(eta > 0.0 && eta <= 1.0)) throw ConfigError("spectral eta must lie in (0, 1]");
  const int m = effective_embed_dims();
  if (m < 1 || static_cast<std::size_t>(m) > face_count) {
    throw ConfigError("spectral embed_dims = " + std::to_string(m) + " must lie in [1, " +
                      std::to_string(face_count) + "]");
  }
}

double angle_distance(const TriangleMesh& mesh, std::uint32_t face_i, std::uint32_t face_j,
                      double eta) {
  const Vec3& ni = mesh.face_normals[face_i];
  const Vec3& nj = mesh.face_normals[face_j];
  const double cos_a = std::clamp(ni.dot(nj), -1.0, 1.0);
  const double base = 1.0 - cos_a;
  const bool concave = (mesh.centroid(face_j) - mesh.centroid(face_i)).dot(ni) > 0.0;
  return concave ? base : eta * base;
}

DualGraph build_dual_graph(const TriangleMesh& mesh, double eta) {
  if (mesh.face_count() < 2) {
    throw MeshError("dual graph needs at least 2 faces, got " + std::to_string(mesh.face_count()));
  }
  const auto sizes = face_component_sizes(mesh);
  if (sizes.size() > 1) {
    std::ostringstream msg;
    msg << "mesh is disconnected: " << sizes.size() << " face components of sizes";
    for (std::size_t i = 0; i < sizes.size() && i < 10; ++i) msg << (i ? ", " : " ") << sizes[i];
    if (sizes.size() > 10) msg << ", ...";
    throw MeshError(msg.str());
  }

  DualGraph graph;
  graph.node_count = mesh.face_count();
  graph.incident.assign(graph.node_count, {});
  for (const InteriorEdge& e : interior_edges(mesh)) {
    const Vec3 mid = 0.5 * (mesh.vertices[e.v0] + mesh.vertices[e.v1]);
    const double geo = (mesh.centroid(e.f0) - mid).norm() + (mid - mesh.centroid(e.f1)).norm();
    const auto idx = static_cast<std::uint32_t>(graph.edges.size());
    graph.edges.push_back({e.f0, e.f1, geo, angle_distance(mesh, e.f0, e.f1, eta)});
    graph.incident[e.f0].push_back(idx);
    graph.incident[e.f1].push_back(idx);
  }
  return graph;
}

std::vector<double> combined_edge_weights(const DualGraph& graph, double delta) {
  double mean_geo = 0.0, mean_ang = 0.0;
  for (const auto& e : graph.edges) {
    mean_geo += e.geo;
    mean_ang += e.ang;
  }
  const auto count = static_cast<double>(graph.edges.size());
  mean_geo = count > 0 ? mean_geo / count : 1.0;
  mean_ang = count > 0 ? mean_ang / count : 1.0;
  if (!(mean_geo > 0.0)) mean_geo = 1.0;
  if (!(mean_ang > 0.0)) mean_ang = 1.0;
  std::vector<double> weights;
  weights.reserve(graph.edges.size());
  for (const auto& e : graph.edges) {
    weights.push_back(delta * (e.geo / mean_geo) + (1.0 - delta) * (e.ang / mean_ang));
  }
  return weights;
}

namespace {

void dijkstra_row(const DualGraph& graph, const std::vector<double>& weights, std::uint32_t source,
                  double* row) {
  using Item = std::pair<double, std::uint32_t>;
  const std::size_t n = graph.node_count;
  std::fill(row, row + n, std::numeric_limits<double>::infinity());
  std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
  row[source] = 0.0;
  heap.emplace(0.0, source);
  while (!heap.empty()) {
    const auto [d, u] = heap.top();
    heap.pop();
    if (d > row[u]) continue;
    for (auto ei : graph.incident[u]) {
      const DualEdge& e = graph.edges[ei];
      const std::uint32_t v = e.a == u ? e.b : e.a;
      const double nd = d + weights[ei];
      if (nd < row[v]) {
        row[v] = nd;
        heap.emplace(nd, v);
      }
    }
  }
}

}  // namespace

Eigen::MatrixXd pairwise_distance(const DualGraph& graph, const SpectralConfig& cfg) {
  const std::size_t n = graph.node_count;
  const auto weights = combined_edge_weights(graph, cfg.delta);
  // Row-major so each source writes one contiguous row.
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> dist(n, n);

  const unsigned workers =
      std::max(1u, std::min<unsigned>(std::thread::hardware_concurrency(), static_cast<unsigned>(n / 64 + 1)));
  auto run = [&](std::size_t begin, std::size_t end) {
    for (std::size_t s = begin; s < end; ++s) {
      dijkstra_row(graph, weights, static_cast<std::uint32_t>(s), dist.row(static_cast<Eigen::Index>(s)).data());
    }
  };
  if (workers == 1) {
    run(0, n);
  } else {
    std::vector<std::jthread> pool;
    const std::size_t chunk = (n + workers - 1) / workers;
    for (unsigned w = 0; w < workers; ++w) {
      const std::size_t begin = w * chunk, end = std::min(n, begin + chunk);
      if (begin < end) pool.emplace_back(run, begin, end);
    }
  }

  if (!dist.allFinite()) throw MeshError("dual graph is disconnected: some distances are infinite");
  Eigen::MatrixXd out = dist;
  // Dijkstra from either end can differ in the last bit; keep exact symmetry.
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double d = std::min(out(i, j), out(j, i));
      out(i, j) = d;
      out(j, i) = d;
    }
  }
  return out;
}

Eigen::MatrixXd affinity(const Eigen::MatrixXd& distances, const AffinityOptions& options) {
  const Eigen::Index n = distances.rows();
  if (n != distances.cols()) throw Error("distance matrix must be square");
  double sigma = options.fixed_sigma;
  if (options.mode == SigmaMode::MeanOffDiagonal) {
    double total = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      for (Eigen::Index i = 0; i < n; ++i) {
        if (i != j) total += distances(i, j);
      }
    }
    sigma = n > 1 ? total / static_cast<double>(n * (n - 1)) : 0.0;
  }
  if (!(sigma > 0.0)) return Eigen::MatrixXd::Ones(n, n);
  const double scale = -1.0 / (2.0 * sigma * sigma);
  Eigen::MatrixXd w = (distances.array().square() * scale).exp().matrix();
  w.diagonal().setOnes();
  return w;
}

SpectralEmbedding eigen_embed(const Eigen::MatrixXd& w, Eigen::Index m) {
  const Eigen::Index n = w.rows();
  if (n != w.cols()) throw Error("affinity matrix must be square");
  const Eigen::VectorXd degree = w.rowwise().sum();
  if ((degree.array() <= 0.0).any()) throw Error("affinity matrix has a row with non-positive degree");
  const Eigen::VectorXd inv_sqrt = degree.array().rsqrt();
  Eigen::MatrixXd normalized = inv_sqrt.asDiagonal() * w * inv_sqrt.asDiagonal();
  // Remove rounding asymmetry before the symmetric solver sees it.
  normalized = 0.5 * (normalized + normalized.transpose()).eval();

  const EigenDecomposition eig = symmetric_eigen_top(normalized, m);
  SpectralEmbedding out;
  out.eigenvalues = eig.values;
  out.rows = eig.vectors;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double len = out.rows.row(i).norm();
    if (len > 1e-12) {
      out.rows.row(i) /= len;
    } else {
      out.rows.row(i).setZero();
    }
  }
  return out;
}

ClusterAssignment cluster_mesh(const TriangleMesh& mesh, const SpectralConfig& cfg) {
  cfg.validate(mesh.face_count());
  if (mesh.face_count() > kMaxSpectralFaces) {
    throw Error("mesh has " + std::to_string(mesh.face_count()) +
                " faces; the dense spectral solver accepts at most " +
                std::to_string(kMaxSpectralFaces) + " (decimate first)");
  }
  const DualGraph graph = build_dual_graph(mesh, cfg.eta);
  const Eigen::MatrixXd dist = pairwise_distance(graph, cfg);
  const Eigen::MatrixXd w = affinity(dist);
  const SpectralEmbedding embedding = eigen_embed(w, cfg.effective_embed_dims());
  return kmeans_pp(embedding.rows, cfg.k, cfg.seed).assignment;
}

}  // namespace toothseg
