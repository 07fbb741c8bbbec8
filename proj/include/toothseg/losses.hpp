#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "toothseg/kmeans.hpp"

namespace toothseg {

struct JointLossConfig {
  double lambda = 10.0;
  double margin = 1.0;
  std::size_t pairs_per_step = 4096;
  double dice_epsilon = 1e-6;
  std::uint64_t seed = 0;

  void validate() const;
};

struct LossWithGradient {
  double loss = 0.0;
  Eigen::MatrixXd grad;  // same shape as the differentiated input
};

/// Generalized dice loss with class weights 1 / (count_c + eps)^2:
///   1 - 2 (sum_c w_c sum_i p_ic g_ic + eps) / (sum_c w_c sum_i (p_ic + g_ic) + eps)
/// `probs` is n x C. The gradient is with respect to probs.
LossWithGradient generalized_dice_loss(const Eigen::MatrixXd& probs, std::span<const int> labels,
                                       int num_classes, double epsilon);

struct FacePair {
  std::uint32_t i, j;
  bool positive;
};

/// Draws `count` pairs: the first ceil(count / 2) share a component, the rest
/// do not. When every component is a singleton, positive pairs degenerate to
/// (i, i). Throws Error if only one component exists.
std::vector<FacePair> sample_pairs(std::span<const int> components, std::size_t count,
                                   std::uint64_t seed);

/// Mean over pairs of 1/2 d^2 (positive) or 1/2 max(0, margin - d)^2
/// (negative), d the Euclidean distance between embedding rows.
LossWithGradient contrastive_pair_loss(const Eigen::MatrixXd& embed, std::span<const FacePair> pairs,
                                       double margin);

/// sample_pairs with cfg.pairs_per_step / cfg.seed, then contrastive_pair_loss.
LossWithGradient contrastive_loss(const Eigen::MatrixXd& embed, const ClusterAssignment& components,
                                  const JointLossConfig& cfg);

/// L = L_sup + lambda * L_self with an absent part contributing zero. Throws
/// Error when both parts are absent.
double joint_loss(std::optional<double> supervised, std::optional<double> self_supervised,
                  double lambda);

}  // namespace toothseg
