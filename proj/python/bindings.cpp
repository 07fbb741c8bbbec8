#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "toothseg/cli.hpp"
#include "toothseg/losses.hpp"
#include "toothseg/mesh_io.hpp"
#include "toothseg/preprocess.hpp"
#include "toothseg/spectral.hpp"
#include "toothseg/synthetic.hpp"
#include "toothseg/train.hpp"

namespace py = pybind11;
using namespace toothseg;

namespace {

using Vertices = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;
using Faces = Eigen::Matrix<std::int64_t, Eigen::Dynamic, 3, Eigen::RowMajor>;

TriangleMesh to_mesh(const Vertices& v, const Faces& f) {
  std::vector<Vec3> vertices(static_cast<std::size_t>(v.rows()));
  for (Eigen::Index i = 0; i < v.rows(); ++i) vertices[static_cast<std::size_t>(i)] = v.row(i).transpose();
  std::vector<Face> faces(static_cast<std::size_t>(f.rows()));
  for (Eigen::Index i = 0; i < f.rows(); ++i) {
    for (int k = 0; k < 3; ++k) {
      if (f(i, k) < 0) throw MeshError("face " + std::to_string(i) + " has a negative vertex index");
      faces[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)] = static_cast<std::uint32_t>(f(i, k));
    }
  }
  return make_mesh(std::move(vertices), std::move(faces));
}

Vertices vertices_of(const TriangleMesh& m) {
  Vertices v(static_cast<Eigen::Index>(m.vertex_count()), 3);
  for (std::size_t i = 0; i < m.vertex_count(); ++i) v.row(static_cast<Eigen::Index>(i)) = m.vertices[i].transpose();
  return v;
}

py::tuple from_mesh(const TriangleMesh& m) {
  Faces f(static_cast<Eigen::Index>(m.face_count()), 3);
  for (std::size_t i = 0; i < m.face_count(); ++i) {
    for (int k = 0; k < 3; ++k) f(static_cast<Eigen::Index>(i), k) = m.faces[i][static_cast<std::size_t>(k)];
  }
  return py::make_tuple(vertices_of(m), f);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Spectral self-supervision and semi-supervised per-face segmentation of tooth meshes";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ParseError>(m, "ParseError", base.ptr());
  py::register_exception<MeshError>(m, "MeshError", base.ptr());
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());

  m.def(
      "load_mesh", [](const std::string& path) { return from_mesh(load_mesh(path)); }, py::arg("path"),
      "Read an OBJ, PLY or STL file. Returns (vertices, faces).");

  m.def(
      "normalize",
      [](const Vertices& v, const Faces& f) { return vertices_of(normalize(to_mesh(v, f)).mesh); },
      py::arg("vertices"), py::arg("faces"), "Vertices centered on their mean and scaled to unit RMS.");

  m.def(
      "decimate",
      [](const Vertices& v, const Faces& f, std::size_t target) { return from_mesh(decimate(to_mesh(v, f), target).mesh); },
      py::arg("vertices"), py::arg("faces"), py::arg("target_faces"));

  m.def(
      "features", [](const Vertices& v, const Faces& f) { return extract_features(to_mesh(v, f)); },
      py::arg("vertices"), py::arg("faces"), "Per-face classifier input, one row per face.");

  m.def(
      "cluster",
      [](const Vertices& v, const Faces& f, int k, double delta, double eta, int embed_dims, std::uint64_t seed) {
        SpectralConfig cfg;
        cfg.k = k;
        cfg.delta = delta;
        cfg.eta = eta;
        cfg.embed_dims = embed_dims;
        cfg.seed = seed;
        const auto mesh = to_mesh(v, f);
        py::gil_scoped_release release;
        return cluster_mesh(mesh, cfg).component;
      },
      py::arg("vertices"), py::arg("faces"), py::arg("k") = 60, py::arg("delta") = 0.03, py::arg("eta") = 0.15,
      py::arg("embed_dims") = 0, py::arg("seed") = 0, "Spectral clustering of the faces into k components.");

  m.def(
      "synthetic_arch",
      [](int teeth, std::size_t face_budget, std::uint64_t seed, std::vector<int> missing) {
        ArchSpec spec;
        spec.teeth = teeth;
        spec.face_budget = face_budget;
        spec.seed = seed;
        spec.missing = std::move(missing);
        const auto arch = generate_synthetic_arch(spec);
        const auto vf = from_mesh(arch.mesh);
        return py::make_tuple(vf[0], vf[1], py::array(py::cast(arch.labels.labels)));
      },
      py::arg("teeth") = 14, py::arg("face_budget") = 3000, py::arg("seed") = 0,
      py::arg("missing") = std::vector<int>{}, "Returns (vertices, faces, labels).");

  m.def(
      "dice_loss",
      [](const Eigen::MatrixXd& probs, const std::vector<int>& labels, int num_classes, double epsilon) {
        const auto r = generalized_dice_loss(probs, labels, num_classes, epsilon);
        return py::make_tuple(r.loss, r.grad);
      },
      py::arg("probs"), py::arg("labels"), py::arg("num_classes"), py::arg("epsilon") = 1e-6,
      "Generalized dice loss and its gradient with respect to probs.");

  m.def(
      "contrastive_loss",
      [](const Eigen::MatrixXd& embed, const std::vector<int>& components, std::size_t pairs, double margin,
         std::uint64_t seed) {
        const auto sampled = sample_pairs(components, pairs, seed);
        const auto r = contrastive_pair_loss(embed, sampled, margin);
        return py::make_tuple(r.loss, r.grad);
      },
      py::arg("embed"), py::arg("components"), py::arg("pairs") = 4096, py::arg("margin") = 1.0,
      py::arg("seed") = 0, "Margin contrastive loss over sampled face pairs and its gradient.");

  m.def(
      "dsc",
      [](const std::vector<int>& predicted, const std::vector<int>& truth, int num_classes) {
        return dsc(predicted, truth, num_classes);
      },
      py::arg("predicted"), py::arg("truth"), py::arg("num_classes") = kDefaultClassCount);

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        int code;
        {
          py::gil_scoped_release release;
          code = run_cli(args, out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Run one toothseg command. Returns (exit code, stdout, stderr).");
}
