#include "toothseg/losses.hpp"

#include <cmath>
#include <string>

#include "toothseg/common.hpp"

namespace toothseg {

void JointLossConfig::validate() const {
  if (!(lambda >= 0.0)) throw ConfigError("loss.lambda must be >= 0");
  if (!(margin > 0.0)) throw ConfigError("loss.margin must be > 0");
  if (pairs_per_step < 2) throw ConfigError("loss.pairs_per_step must be >= 2");
  if (!(dice_epsilon > 0.0)) throw ConfigError("loss.dice_epsilon must be > 0");
}

LossWithGradient generalized_dice_loss(const Eigen::MatrixXd& probs, std::span<const int> labels,
                                       int num_classes, double epsilon) {
  const Eigen::Index n = probs.rows();
  if (probs.cols() != num_classes) {
    throw Error("dice loss: probs has " + std::to_string(probs.cols()) + " columns, expected " +
                std::to_string(num_classes));
  }
  if (static_cast<Eigen::Index>(labels.size()) != n) {
    throw Error("dice loss: " + std::to_string(labels.size()) + " labels for " + std::to_string(n) +
                " rows");
  }
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(num_classes);
  for (int l : labels) {
    if (l < 0 || l >= num_classes) {
      throw Error("dice loss: label " + std::to_string(l) + " outside [0, " +
                  std::to_string(num_classes) + ")");
    }
    counts[l] += 1.0;
  }
  const Eigen::VectorXd weights = (counts.array() + epsilon).square().inverse();

  double intersection = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const int c = labels[static_cast<std::size_t>(i)];
    intersection += weights[c] * probs(i, c);
  }
  const Eigen::VectorXd prob_sums = probs.colwise().sum().transpose();
  const double uni = weights.dot(prob_sums + counts);

  const double num = intersection + epsilon;
  const double den = uni + epsilon;
  LossWithGradient out;
  out.loss = 1.0 - 2.0 * num / den;

  // d/dp_ic: -2 w_c (g_ic den - num) / den^2
  const double inv_den2 = 1.0 / (den * den);
  out.grad.resize(n, num_classes);
  for (Eigen::Index c = 0; c < num_classes; ++c) {
    out.grad.col(c).setConstant(2.0 * weights[c] * num * inv_den2);
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    const int c = labels[static_cast<std::size_t>(i)];
    out.grad(i, c) -= 2.0 * weights[c] * den * inv_den2;
  }
  return out;
}

std::vector<FacePair> sample_pairs(std::span<const int> components, std::size_t count,
                                   std::uint64_t seed) {
  const std::size_t n = components.size();
  int max_id = -1;
  for (int c : components) {
    if (c < 0) throw Error("negative component id");
    max_id = std::max(max_id, c);
  }
  // Faces grouped by component: members[start[c] .. start[c+1]).
  std::vector<std::size_t> start(static_cast<std::size_t>(max_id) + 2, 0);
  for (int c : components) ++start[static_cast<std::size_t>(c) + 1];
  for (std::size_t c = 1; c < start.size(); ++c) start[c] += start[c - 1];
  std::vector<std::uint32_t> members(n);
  std::vector<std::size_t> position(n);
  {
    std::vector<std::size_t> fill(start.begin(), start.end() - 1);
    for (std::size_t i = 0; i < n; ++i) {
      const auto c = static_cast<std::size_t>(components[i]);
      position[i] = fill[c] - start[c];
      members[fill[c]++] = static_cast<std::uint32_t>(i);
    }
  }
  auto size_of = [&](std::size_t c) { return start[c + 1] - start[c]; };

  std::size_t distinct = 0;
  std::vector<std::uint32_t> pairable;  // faces whose component has >= 2 members
  for (std::size_t c = 0; c + 1 < start.size(); ++c) {
    if (size_of(c) > 0) ++distinct;
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (size_of(static_cast<std::size_t>(components[i])) >= 2) pairable.push_back(static_cast<std::uint32_t>(i));
  }
  if (distinct < 2) {
    throw Error("contrastive loss needs at least 2 distinct components for negative pairs, got " +
                std::to_string(distinct));
  }

  Rng rng(seed);
  const std::size_t positives = (count + 1) / 2;
  std::vector<FacePair> pairs;
  pairs.reserve(count);
  for (std::size_t p = 0; p < positives; ++p) {
    if (pairable.empty()) {
      const auto i = static_cast<std::uint32_t>(uniform_index(rng, n));
      pairs.push_back({i, i, true});
      continue;
    }
    const std::uint32_t i = pairable[uniform_index(rng, pairable.size())];
    const auto c = static_cast<std::size_t>(components[i]);
    std::size_t r = uniform_index(rng, size_of(c) - 1);
    if (r >= position[i]) ++r;
    pairs.push_back({i, members[start[c] + r], true});
  }
  for (std::size_t p = positives; p < count; ++p) {
    const auto i = static_cast<std::uint32_t>(uniform_index(rng, n));
    const auto c = static_cast<std::size_t>(components[i]);
    std::size_t r = uniform_index(rng, n - size_of(c));
    if (r >= start[c]) r += size_of(c);
    pairs.push_back({i, members[r], false});
  }
  return pairs;
}

LossWithGradient contrastive_pair_loss(const Eigen::MatrixXd& embed, std::span<const FacePair> pairs,
                                       double margin) {
  if (pairs.empty()) throw Error("contrastive loss needs at least one pair");
  LossWithGradient out;
  out.grad = Eigen::MatrixXd::Zero(embed.rows(), embed.cols());
  const double inv_count = 1.0 / static_cast<double>(pairs.size());
  double total = 0.0;
  Eigen::RowVectorXd diff(embed.cols());
  for (const FacePair& pair : pairs) {
    if (pair.i >= embed.rows() || pair.j >= embed.rows()) throw Error("pair index out of range");
    diff = embed.row(pair.i) - embed.row(pair.j);
    const double d2 = diff.squaredNorm();
    if (pair.positive) {
      total += 0.5 * d2;
      out.grad.row(pair.i) += inv_count * diff;
      out.grad.row(pair.j) -= inv_count * diff;
    } else {
      const double d = std::sqrt(d2);
      const double gap = margin - d;
      if (gap > 0.0) {
        total += 0.5 * gap * gap;
        if (d > 0.0) {
          const double coef = -gap / d * inv_count;
          out.grad.row(pair.i) += coef * diff;
          out.grad.row(pair.j) -= coef * diff;
        }
      }
    }
  }
  out.loss = total * inv_count;
  return out;
}

LossWithGradient contrastive_loss(const Eigen::MatrixXd& embed, const ClusterAssignment& components,
                                  const JointLossConfig& cfg) {
  cfg.validate();
  if (static_cast<std::size_t>(embed.rows()) != components.size()) {
    throw Error("contrastive loss: " + std::to_string(embed.rows()) + " embedding rows for " +
                std::to_string(components.size()) + " component ids");
  }
  const auto pairs = sample_pairs(components.component, cfg.pairs_per_step, cfg.seed);
  return contrastive_pair_loss(embed, pairs, cfg.margin);
}

double joint_loss(std::optional<double> supervised, std::optional<double> self_supervised,
                  double lambda) {
  if (!supervised && !self_supervised) {
    throw Error("joint loss needs a supervised or a self-supervised part");
  }
  double total = supervised.value_or(0.0);
  if (self_supervised) total += lambda * *self_supervised;
  return total;
}

}  // namespace toothseg
