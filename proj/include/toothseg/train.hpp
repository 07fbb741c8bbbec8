#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "toothseg/dataset.hpp"
#include "toothseg/losses.hpp"
#include "toothseg/model.hpp"
#include "toothseg/preprocess.hpp"
#include "toothseg/spectral.hpp"

namespace toothseg {

struct TrainSeeds {
  std::uint64_t model = 1;    // weight init
  std::uint64_t order = 2;    // per-epoch pool shuffles
  std::uint64_t augment = 3;  // per-step augmentation draws
  // Pair sampling uses JointLossConfig::seed; k-means uses SpectralConfig::seed.
};

struct TrainConfig {
  int epochs = 300;
  JointLossConfig loss;
  ModelShape model;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  bool augment = true;
  AugmentRanges augment_ranges;
  SpectralConfig spectral;
  std::size_t decimate_target = kDefaultDecimateTarget;
  TrainSeeds seeds;

  void validate() const;
};

struct StepRecord {
  std::size_t step = 0;
  int epoch = 0;
  bool labeled = true;
  std::optional<double> supervised;
  std::optional<double> self_supervised;
  double total = 0.0;
};

struct TrainResult {
  ModelParams params;
  OptimState opt;
  std::vector<StepRecord> history;
};

/// Raised when a loss stops being finite. The message names the step and the
/// seeds needed to replay the run.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

/// Order of (labeled?, pool index) steps in one epoch: both pools shuffled
/// with the epoch's seed and merged so each pool is spread evenly; each
/// labeled and each unlabeled mesh appears exactly once.
std::vector<std::pair<bool, std::size_t>> epoch_schedule(std::size_t labeled, std::size_t unlabeled,
                                                         std::uint64_t order_seed, int epoch);

/// One mesh per step: seeded augmentation, forward, joint loss, backward,
/// update. Labeled steps use the dice loss; unlabeled steps use lambda times
/// the contrastive loss and are skipped by the optimizer when lambda is 0.
TrainResult train(const DatasetSplit& split, const TrainConfig& cfg,
                  const std::function<void(const StepRecord&)>& on_step = {});

/// Macro-averaged Dice over the classes present in either labeling.
double dsc(std::span<const int> predicted, std::span<const int> truth, int num_classes);

std::vector<int> predict_labels(const ModelParams& params, const TriangleMesh& mesh);

struct EvalRow {
  std::string arch;
  bool missing_teeth = false;
  double dsc = 0.0;
};

struct EvalReport {
  std::vector<EvalRow> rows;
  double mean = 0.0;
  double std = 0.0;  // population standard deviation
};

EvalReport make_report(std::vector<EvalRow> rows);
EvalReport evaluate(const ModelParams& params, std::span<const LabeledSample> test);

/// `step,L_sup,L_self,L`; absent parts are empty fields.
std::string losses_csv(std::span<const StepRecord> history);
/// `arch,missing_teeth,dsc`.
std::string report_csv(const EvalReport& report);
std::string report_table(const EvalReport& report);

}  // namespace toothseg
