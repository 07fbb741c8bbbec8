#include "toothseg/train.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

namespace toothseg {

namespace {

// Seed streams for augmentation: labeled and unlabeled draws never collide.
constexpr std::uint64_t kLabeledStream = 0;
constexpr std::uint64_t kUnlabeledStream = 1;

std::vector<std::size_t> shuffled(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[uniform_index(rng, i)]);
  return order;
}

std::string format_value(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("train.epochs must be >= 1");
  loss.validate();
  augment_ranges.validate();
  if (!(learning_rate > 0.0)) throw ConfigError("optim.learning_rate must be > 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ConfigError("optim.beta1 and optim.beta2 must lie in [0, 1)");
  }
  if (!(adam_epsilon > 0.0)) throw ConfigError("optim.epsilon must be > 0");
  if (decimate_target < 4) throw ConfigError("decimate.target_faces must be >= 4");
  ModelParams::zeros(model);
}

std::vector<std::pair<bool, std::size_t>> epoch_schedule(std::size_t labeled, std::size_t unlabeled,
                                                         std::uint64_t order_seed, int epoch) {
  const auto e = static_cast<std::uint64_t>(epoch);
  const auto lab = shuffled(labeled, mix_seed(order_seed, 2 * e));
  const auto unl = shuffled(unlabeled, mix_seed(order_seed, 2 * e + 1));
  std::vector<std::pair<bool, std::size_t>> steps;
  steps.reserve(labeled + unlabeled);
  std::size_t i = 0, j = 0;
  while (i < labeled || j < unlabeled) {
    // Compare fractional positions (i + 1/2) / l and (j + 1/2) / u.
    const bool take_labeled =
        j >= unlabeled || (i < labeled && (2 * i + 1) * unlabeled <= (2 * j + 1) * labeled);
    if (take_labeled) {
      steps.emplace_back(true, lab[i++]);
    } else {
      steps.emplace_back(false, unl[j++]);
    }
  }
  return steps;
}

TrainResult train(const DatasetSplit& split, const TrainConfig& cfg,
                  const std::function<void(const StepRecord&)>& on_step) {
  cfg.validate();
  split.validate();
  if (split.labeled.empty() && split.unlabeled.empty()) {
    throw Error("training needs at least one labeled or unlabeled arch");
  }
  for (const auto& s : split.labeled) {
    if (s.labels.num_classes > cfg.model.classes) {
      throw Error("labeled arch '" + s.name + "' uses " + std::to_string(s.labels.num_classes) +
                  " classes but the model has " + std::to_string(cfg.model.classes));
    }
  }

  TrainResult result;
  result.params = ModelParams::init(cfg.model, cfg.seeds.model);
  result.opt = OptimState::for_params(result.params, cfg.learning_rate);
  result.opt.beta1 = cfg.beta1;
  result.opt.beta2 = cfg.beta2;
  result.opt.epsilon = cfg.adam_epsilon;

  std::size_t step = 0, labeled_steps = 0, unlabeled_steps = 0;
  auto seeds_note = [&cfg]() {
    std::ostringstream s;
    s << "seeds: model=" << cfg.seeds.model << " order=" << cfg.seeds.order
      << " augment=" << cfg.seeds.augment << " pairs=" << cfg.loss.seed
      << " kmeans=" << cfg.spectral.seed;
    return s.str();
  };

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (const auto& [is_labeled, index] :
         epoch_schedule(split.labeled.size(), split.unlabeled.size(), cfg.seeds.order, epoch)) {
      StepRecord rec;
      rec.step = step;
      rec.epoch = epoch;
      rec.labeled = is_labeled;
      const TriangleMesh& base = is_labeled ? split.labeled[index].mesh : split.unlabeled[index].mesh;
      const std::uint64_t counter = is_labeled ? labeled_steps++ : unlabeled_steps++;
      const TriangleMesh mesh =
          cfg.augment ? augment(base, sample_augment(cfg.augment_ranges,
                                                     mix_seed(cfg.seeds.augment,
                                                              2 * counter + (is_labeled ? kLabeledStream
                                                                                        : kUnlabeledStream))))
                      : base;
      const FaceFeatures features = extract_features(mesh);
      const Prediction pred = forward(result.params, features);

      bool apply = true;
      ModelParams grads;
      if (is_labeled) {
        const auto& labels = split.labeled[index].labels.labels;
        const LossWithGradient dice =
            generalized_dice_loss(pred.probs, labels, cfg.model.classes, cfg.loss.dice_epsilon);
        rec.supervised = dice.loss;
        rec.total = joint_loss(dice.loss, std::nullopt, cfg.loss.lambda);
        grads = backward(result.params, features, dice.grad, Eigen::MatrixXd());
      } else {
        JointLossConfig pair_cfg = cfg.loss;
        pair_cfg.seed = mix_seed(cfg.loss.seed, counter);
        const LossWithGradient con = contrastive_loss(pred.embed, *split.unlabeled[index].components, pair_cfg);
        rec.self_supervised = con.loss;
        rec.total = joint_loss(std::nullopt, con.loss, cfg.loss.lambda);
        if (cfg.loss.lambda == 0.0) {
          apply = false;
        } else {
          grads = backward(result.params, features, Eigen::MatrixXd(), cfg.loss.lambda * con.grad);
        }
      }
      if (!std::isfinite(rec.total)) {
        throw DivergenceError("non-finite loss at step " + std::to_string(step) + " (epoch " +
                              std::to_string(epoch) + "); " + seeds_note());
      }
      if (apply) {
        try {
          adam_update(result.params, grads, result.opt);
        } catch (const Error& e) {
          throw DivergenceError(std::string(e.what()) + " at training step " + std::to_string(step) +
                                "; " + seeds_note());
        }
        if (!result.params.all_finite()) {
          throw DivergenceError("parameters became non-finite at step " + std::to_string(step) + "; " +
                                seeds_note());
        }
      }
      result.history.push_back(rec);
      if (on_step) on_step(rec);
      ++step;
    }
  }
  return result;
}

double dsc(std::span<const int> predicted, std::span<const int> truth, int num_classes) {
  if (predicted.size() != truth.size()) {
    throw Error("dsc: " + std::to_string(predicted.size()) + " predictions for " +
                std::to_string(truth.size()) + " labels");
  }
  std::vector<std::size_t> pred_count(static_cast<std::size_t>(num_classes), 0);
  std::vector<std::size_t> truth_count(static_cast<std::size_t>(num_classes), 0);
  std::vector<std::size_t> overlap(static_cast<std::size_t>(num_classes), 0);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const int p = predicted[i], g = truth[i];
    if (p < 0 || p >= num_classes || g < 0 || g >= num_classes) {
      throw Error("dsc: class id outside [0, " + std::to_string(num_classes) + ")");
    }
    ++pred_count[static_cast<std::size_t>(p)];
    ++truth_count[static_cast<std::size_t>(g)];
    if (p == g) ++overlap[static_cast<std::size_t>(g)];
  }
  double total = 0.0;
  int present = 0;
  for (std::size_t c = 0; c < pred_count.size(); ++c) {
    const std::size_t denom = pred_count[c] + truth_count[c];
    if (denom == 0) continue;
    total += 2.0 * static_cast<double>(overlap[c]) / static_cast<double>(denom);
    ++present;
  }
  return present > 0 ? total / present : 1.0;
}

std::vector<int> predict_labels(const ModelParams& params, const TriangleMesh& mesh) {
  const Prediction pred = forward(params, extract_features(mesh));
  std::vector<int> labels(static_cast<std::size_t>(pred.probs.rows()));
  for (Eigen::Index i = 0; i < pred.probs.rows(); ++i) {
    Eigen::Index best = 0;
    pred.probs.row(i).maxCoeff(&best);
    labels[static_cast<std::size_t>(i)] = static_cast<int>(best);
  }
  return labels;
}

EvalReport make_report(std::vector<EvalRow> rows) {
  EvalReport report;
  report.rows = std::move(rows);
  if (report.rows.empty()) return report;
  double sum = 0.0;
  for (const auto& r : report.rows) sum += r.dsc;
  report.mean = sum / static_cast<double>(report.rows.size());
  double sq = 0.0;
  for (const auto& r : report.rows) sq += (r.dsc - report.mean) * (r.dsc - report.mean);
  report.std = std::sqrt(sq / static_cast<double>(report.rows.size()));
  return report;
}

EvalReport evaluate(const ModelParams& params, std::span<const LabeledSample> test) {
  std::vector<EvalRow> rows;
  for (const auto& s : test) {
    if (s.labels.size() != s.mesh.face_count()) {
      throw Error("test arch '" + s.name + "' has " + std::to_string(s.labels.size()) +
                  " labels for " + std::to_string(s.mesh.face_count()) + " faces");
    }
    const auto predicted = predict_labels(params, s.mesh);
    rows.push_back({s.name, s.missing_teeth, dsc(predicted, s.labels.labels, params.shape.classes)});
  }
  return make_report(std::move(rows));
}

std::string losses_csv(std::span<const StepRecord> history) {
  std::string out = "step,L_sup,L_self,L\n";
  for (const auto& r : history) {
    out += std::to_string(r.step) + ',';
    if (r.supervised) out += format_value(*r.supervised);
    out += ',';
    if (r.self_supervised) out += format_value(*r.self_supervised);
    out += ',' + format_value(r.total) + '\n';
  }
  return out;
}

std::string report_csv(const EvalReport& report) {
  std::string out = "arch,missing_teeth,dsc\n";
  for (const auto& r : report.rows) {
    out += r.arch + ',' + (r.missing_teeth ? "yes" : "no") + ',' + format_value(r.dsc) + '\n';
  }
  return out;
}

std::string report_table(const EvalReport& report) {
  std::ostringstream out;
  char line[160];
  std::snprintf(line, sizeof line, "%-24s %-14s %8s\n", "arch", "missing teeth", "DSC");
  out << line;
  for (const auto& r : report.rows) {
    std::snprintf(line, sizeof line, "%-24s %-14s %8.4f\n", r.arch.c_str(), r.missing_teeth ? "yes" : "no",
                  r.dsc);
    out << line;
  }
  std::snprintf(line, sizeof line, "%-24s %-14s %.4f +/- %.4f\n", "average", "", report.mean, report.std);
  out << line;
  return out.str();
}

}  // namespace toothseg
