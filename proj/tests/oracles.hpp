#pragma once

// Reference computations written independently of the library code they
// check, shared by the unit tests and the acceptance binary.

#include <cstdint>
#include <functional>
#include <vector>

#include <Eigen/Core>

#include "toothseg/mesh.hpp"
#include "toothseg/model.hpp"
#include "toothseg/train.hpp"

namespace oracle {

using toothseg::Rng;
using toothseg::TriangleMesh;

/// Small connected manifold meshes: perturbed grid patches and vertex fans.
TriangleMesh random_small_mesh(Rng& rng, int max_faces);

/// Face-level all-pairs distances by Floyd-Warshall over the dual graph,
/// with edge weights derived from scratch (centroids, midpoints, normals).
Eigen::MatrixXd floyd_warshall(const TriangleMesh& mesh, double delta, double eta);

Eigen::MatrixXd random_symmetric(Rng& rng, int n);

/// |a - b| / max(|a|, |b|), with entries below `floor` in both treated as
/// agreeing to the floor. Returns the worst entry.
double max_relative_error(const Eigen::MatrixXd& analytic, const Eigen::MatrixXd& numeric,
                          double floor);

/// Central differences of f at x, one coordinate at a time.
Eigen::MatrixXd numeric_gradient(const std::function<double(const Eigen::MatrixXd&)>& f,
                                 Eigen::MatrixXd x, double h);

struct GradientCheck {
  int instances = 0;
  double worst = 0.0;
};

// Relative errors are taken against a floor: the larger of 1e-7 times the
// largest gradient entry and 1e-5 times max(1, |loss|). Central differences at
// h = 1e-6 carry about 1e-10 * |loss| absolute roundoff, so entries below the
// second term cannot be resolved to 1e-5 relative by the oracle itself.
inline constexpr double kRelativeFloorScale = 1e-7;
inline constexpr double kResolutionFloorScale = 1e-5;

GradientCheck check_dice_gradients(int instances, std::uint64_t seed);
GradientCheck check_contrastive_gradients(int instances, std::uint64_t seed);
/// Joint loss through forward/backward over every model parameter on 10-face
/// toys. The first instance uses the default model shape; the rest use small
/// random shapes with every class present.
GradientCheck check_model_gradients(int instances, std::uint64_t seed);

/// Flattened parameters in for_each_tensor order and back.
Eigen::VectorXd flatten(toothseg::ModelParams params);
void unflatten(toothseg::ModelParams& params, const Eigen::VectorXd& flat);

/// Plain dice-only loop over the labeled pool, written from the public pieces
/// (schedule, augmentation, forward, loss, backward, update).
toothseg::ModelParams supervised_reference(const toothseg::DatasetSplit& split, const toothseg::TrainConfig& cfg);

/// True when every tensor of `a` equals `b` bit for bit.
bool same_params(toothseg::ModelParams a, const toothseg::ModelParams& b);

}  // namespace oracle
