#ifndef HCR_TRAIN_TRAINER_H_
#define HCR_TRAIN_TRAINER_H_

#include <cstdint>
#include <functional>
#include <memory>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "hcr/cohort/cohort.h"
#include "hcr/common/kvconfig.h"
#include "hcr/models/models.h"

namespace hcr::train {

struct TrainConfig {
  int epochs = 100;
  std::size_t batch_size = 16;
  double learning_rate = 1e-3;
  std::vector<int> lr_drop_epochs = {10, 50, 90};
  double lr_drop_factor = 0.1;
  int patience = 10;  // epochs without a new best validation loss
  std::uint64_t seed = 1;
  int folds = 5;

  // Batch 16 with the step schedule for note models; batch 64 and a
  // constant rate for the time-series baseline.
  static TrainConfig ForModel(models::ModelKind kind);
  // "train.*" keys over ForModel(kind).
  static TrainConfig FromKeyValue(KeyValueConfig& kv, models::ModelKind kind);
  void Validate() const;
  std::string Canonical() const;
};

// Epochs count from 1.
double LrAtEpoch(const TrainConfig& config, int epoch);

// Groups example indices by note count, shuffles inside each group, cuts
// batches of at most batch_size and shuffles the batch order.
std::vector<std::vector<std::size_t>> BucketBatches(std::span<const std::size_t> note_counts,
                                                    std::size_t batch_size, nd::Rng& rng);

struct EpochRecord {
  int epoch = 0;
  double learning_rate = 0.0;
  double train_loss = 0.0;  // mean batch objective including weight decay
  double val_loss = 0.0;    // weighted BCE in eval mode
  double val_auroc = 0.0;   // NaN when the validation set has one class
};

struct EvalResult {
  double loss = 0.0;
  std::vector<double> scores;
  std::vector<std::uint8_t> labels;
  double auroc = 0.0;  // NaN when undefined
  double auprc = 0.0;
};

EvalResult Evaluate(models::Model& model, std::span<const models::Example> examples, std::size_t batch_size,
                    const cohort::ClassWeights& weights);

struct TrainOutcome {
  models::Model model;  // best-epoch weights
  std::vector<EpochRecord> history;
  int best_epoch = 0;
  double best_val_loss = 0.0;
  cohort::ClassWeights weights;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

// Class weights come from `train` labels alone. Throws kData when the
// training set holds a single class.
TrainOutcome Train(const models::ModelConfig& model_config, const TrainConfig& config,
                   std::span<const models::Example> train, std::span<const models::Example> val,
                   std::shared_ptr<const nd::Tensor> embeddings, std::uint64_t seed,
                   const EpochCallback& on_epoch = {});

struct FoldOutcome {
  int fold = 0;
  std::vector<EpochRecord> history;
  int best_epoch = 0;
  cohort::ClassWeights weights;
  EvalResult test;
  std::shared_ptr<models::Model> model;
};

// Weights for one split, read from its training members only.
cohort::ClassWeights FoldClassWeights(std::span<const models::Example> examples, const cohort::FoldSplit& split);

// Trains every split, `jobs` folds at a time. Results are independent of
// `jobs`: each fold draws from its own seed.
std::vector<FoldOutcome> CrossValidate(const models::ModelConfig& model_config, const TrainConfig& config,
                                       std::span<const models::Example> examples,
                                       std::span<const cohort::FoldSplit> splits,
                                       std::shared_ptr<const nd::Tensor> embeddings, int jobs = 1,
                                       const std::function<void(int fold, const EpochRecord&)>& on_epoch = {});

void WriteHistoryJsonl(std::ostream& out, int fold, std::span<const EpochRecord> history);

}  // namespace hcr::train

#endif  // HCR_TRAIN_TRAINER_H_
