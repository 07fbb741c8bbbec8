#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>

#include <Eigen/Core>

#include "toothseg/preprocess.hpp"

namespace toothseg {

struct ModelShape {
  int input = kFeatureDim;
  int hidden = 64;
  int classes = kDefaultClassCount;
  int embed = 16;

  bool operator==(const ModelShape&) const = default;
};

struct DenseLayer {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;
};

/// Pointwise network: input -> hidden -> hidden (ReLU) -> {softmax logits,
/// embedding}. The same type holds parameter gradients and optimizer moments.
struct ModelParams {
  ModelShape shape;
  DenseLayer hidden1, hidden2, classifier, embedding;

  static ModelParams zeros(const ModelShape& shape);
  /// Glorot-uniform weights, zero biases.
  static ModelParams init(const ModelShape& shape, std::uint64_t seed);

  std::size_t parameter_count() const;
  bool all_finite() const;
};

/// Visits the 8 tensors of each argument in a fixed order.
void for_each_tensor(ModelParams& params,
                     const std::function<void(Eigen::Ref<Eigen::MatrixXd>)>& fn);
void for_each_tensor_pair(ModelParams& a, const ModelParams& b,
                          const std::function<void(Eigen::Ref<Eigen::MatrixXd>,
                                                   const Eigen::Ref<const Eigen::MatrixXd>&)>& fn);

struct Prediction {
  Eigen::MatrixXd probs;  // n x classes, rows sum to 1
  Eigen::MatrixXd embed;  // n x embed
};

Prediction forward(const ModelParams& params, const FaceFeatures& features);

/// Parameter gradients given upstream gradients with respect to probs and the
/// embedding. Either upstream may be empty (0 x 0) to mean zero.
ModelParams backward(const ModelParams& params, const FaceFeatures& features,
                     const Eigen::MatrixXd& grad_probs, const Eigen::MatrixXd& grad_embed);

struct OptimState {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t step = 0;
  ModelParams first_moment;
  ModelParams second_moment;

  static OptimState for_params(const ModelParams& params, double learning_rate = 1e-3);
};

/// One bias-corrected adaptive-moment step. Throws Error (leaving params and
/// state untouched) if any gradient entry is non-finite.
void adam_update(ModelParams& params, const ModelParams& grads, OptimState& opt);

/// Versioned text checkpoint; doubles are written as hex floats so a round
/// trip is exact.
std::string save_checkpoint(const ModelParams& params, const OptimState& opt);

struct Checkpoint {
  ModelParams params;
  OptimState opt;
};

Checkpoint load_checkpoint(std::string_view text);

}  // namespace toothseg
