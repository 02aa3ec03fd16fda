#include "hcr/train/trainer.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <map>
#include <mutex>
#include <thread>
#include <unordered_map>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "hcr/common/error.h"
#include "hcr/nd/ops.h"
#include "hcr/nd/optim.h"
#include "hcr/train/metrics.h"
#include "json.hpp"

namespace hcr::train {

using models::Example;
using models::Model;

TrainConfig TrainConfig::ForModel(models::ModelKind kind) {
  TrainConfig c;
  if (kind == models::ModelKind::kCtsRnn) {
    c.batch_size = 64;
    c.lr_drop_epochs.clear();
  }
  return c;
}

TrainConfig TrainConfig::FromKeyValue(KeyValueConfig& kv, models::ModelKind kind) {
  TrainConfig c = ForModel(kind);
  // Batch size and schedule are read per model family; the other family's
  // keys are still consumed so one file can drive every model.
  const bool cts = kind == models::ModelKind::kCtsRnn;
  const std::string own = cts ? "train.cts_" : "train.", other = cts ? "train." : "train.cts_";
  const std::int64_t batch = kv.GetInt(own + "batch_size", static_cast<std::int64_t>(c.batch_size));
  Check(batch >= 1, ErrorKind::kConfig, own + "batch_size must be at least 1");
  c.batch_size = static_cast<std::size_t>(batch);
  std::vector<std::int64_t> drops(c.lr_drop_epochs.begin(), c.lr_drop_epochs.end());
  c.lr_drop_epochs.clear();
  for (auto e : kv.GetIntList(own + "lr_drop_epochs", drops)) c.lr_drop_epochs.push_back(static_cast<int>(e));
  kv.GetInt(other + "batch_size", 1);
  kv.GetIntList(other + "lr_drop_epochs", {});

  c.epochs = static_cast<int>(kv.GetInt("train.epochs", c.epochs));
  c.learning_rate = kv.GetDouble("train.learning_rate", c.learning_rate);
  c.lr_drop_factor = kv.GetDouble("train.lr_drop_factor", c.lr_drop_factor);
  c.patience = static_cast<int>(kv.GetInt("train.patience", c.patience));
  c.seed = static_cast<std::uint64_t>(kv.GetInt("train.seed", static_cast<std::int64_t>(c.seed)));
  c.folds = static_cast<int>(kv.GetInt("train.folds", c.folds));
  c.Validate();
  return c;
}

void TrainConfig::Validate() const {
  Check(epochs >= 1, ErrorKind::kConfig, "train.epochs must be at least 1");
  Check(batch_size >= 1, ErrorKind::kConfig, "train.batch_size must be at least 1");
  Check(learning_rate > 0, ErrorKind::kConfig, "train.learning_rate must be positive");
  Check(lr_drop_factor > 0 && lr_drop_factor <= 1, ErrorKind::kConfig, "train.lr_drop_factor must lie in (0, 1]");
  for (std::size_t i = 0; i < lr_drop_epochs.size(); ++i) {
    Check(lr_drop_epochs[i] >= 1 && (i == 0 || lr_drop_epochs[i] > lr_drop_epochs[i - 1]), ErrorKind::kConfig,
          "train.lr_drop_epochs must be positive and strictly increasing");
  }
  Check(patience >= 1, ErrorKind::kConfig, "train.patience must be at least 1");
  Check(folds >= 3, ErrorKind::kConfig, "train.folds must be at least 3");
}

std::string TrainConfig::Canonical() const {
  return fmt::format("epochs={};batch_size={};learning_rate={};lr_drop_epochs={};lr_drop_factor={};patience={};"
                     "seed={};folds={}",
                     epochs, batch_size, learning_rate, fmt::join(lr_drop_epochs, ","), lr_drop_factor, patience,
                     seed, folds);
}

double LrAtEpoch(const TrainConfig& config, int epoch) {
  Check(epoch >= 1, ErrorKind::kContract, "epochs count from 1");
  double lr = config.learning_rate;
  for (int drop : config.lr_drop_epochs) {
    if (epoch >= drop) lr *= config.lr_drop_factor;
  }
  return lr;
}

std::vector<std::vector<std::size_t>> BucketBatches(std::span<const std::size_t> note_counts,
                                                    std::size_t batch_size, nd::Rng& rng) {
  Check(batch_size >= 1, ErrorKind::kContract, "batch size must be positive");
  std::map<std::size_t, std::vector<std::size_t>> buckets;
  for (std::size_t i = 0; i < note_counts.size(); ++i) buckets[note_counts[i]].push_back(i);
  std::vector<std::vector<std::size_t>> batches;
  for (auto& [count, members] : buckets) {
    std::shuffle(members.begin(), members.end(), rng);
    for (std::size_t i = 0; i < members.size(); i += batch_size) {
      const std::size_t end = std::min(members.size(), i + batch_size);
      batches.emplace_back(members.begin() + static_cast<std::ptrdiff_t>(i),
                           members.begin() + static_cast<std::ptrdiff_t>(end));
    }
  }
  std::shuffle(batches.begin(), batches.end(), rng);
  return batches;
}

namespace {

std::vector<std::size_t> NoteCounts(std::span<const Example> examples, const models::ModelConfig& config) {
  std::vector<std::size_t> counts;
  counts.reserve(examples.size());
  for (const auto& e : examples) counts.push_back(models::UsesNotes(config.kind) ? e.notes.size() : 0);
  return counts;
}

models::Batch GatherBatch(std::span<const Example> examples, std::span<const std::size_t> members,
                          const models::ModelConfig& config) {
  std::vector<const Example*> ptrs;
  ptrs.reserve(members.size());
  for (std::size_t i : members) ptrs.push_back(&examples[i]);
  return models::MakeBatch(ptrs, config);
}

double NanIfUndefined(const std::function<double()>& metric) {
  try {
    return metric();
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::kUndefinedMetric) throw;
    return std::numeric_limits<double>::quiet_NaN();
  }
}

}  // namespace

EvalResult Evaluate(Model& model, std::span<const Example> examples, std::size_t batch_size,
                    const cohort::ClassWeights& weights) {
  Check(!examples.empty(), ErrorKind::kContract, "nothing to evaluate");
  EvalResult r;
  r.scores.assign(examples.size(), 0.0);
  r.labels.reserve(examples.size());
  for (const auto& e : examples) r.labels.push_back(e.label ? 1 : 0);
  // Deterministic grouping: ascending note count, then input order.
  nd::Rng unused(0);
  const auto counts = NoteCounts(examples, model.config());
  std::map<std::size_t, std::vector<std::size_t>> buckets;
  for (std::size_t i = 0; i < counts.size(); ++i) buckets[counts[i]].push_back(i);
  double total = 0.0;
  for (const auto& [count, members] : buckets) {
    for (std::size_t i = 0; i < members.size(); i += batch_size) {
      const std::span<const std::size_t> part(members.data() + i, std::min(batch_size, members.size() - i));
      const auto probs = model.Predict(GatherBatch(examples, part, model.config()));
      for (std::size_t j = 0; j < part.size(); ++j) r.scores[part[j]] = probs[j];
    }
  }
  for (std::size_t i = 0; i < examples.size(); ++i) {
    total += WeightedBceValue(r.scores[i], r.labels[i], weights.positive, weights.negative);
  }
  r.loss = total / static_cast<double>(examples.size());
  r.auroc = NanIfUndefined([&] { return Auroc(r.scores, r.labels); });
  r.auprc = NanIfUndefined([&] { return Auprc(r.scores, r.labels); });
  return r;
}

TrainOutcome Train(const models::ModelConfig& model_config, const TrainConfig& config,
                   std::span<const Example> train, std::span<const Example> val,
                   std::shared_ptr<const nd::Tensor> embeddings, std::uint64_t seed, const EpochCallback& on_epoch) {
  config.Validate();
  Check(!train.empty() && !val.empty(), ErrorKind::kData, "training and validation sets must be non-empty");
  std::vector<std::uint8_t> labels;
  labels.reserve(train.size());
  for (const auto& e : train) labels.push_back(e.label ? 1 : 0);
  const cohort::ClassWeights weights = cohort::ComputeClassWeights(labels);

  nd::Rng rng(seed);
  TrainOutcome out{Model(model_config, rng(), std::move(embeddings)), {}, 0, 0.0, weights};
  Model& model = out.model;
  nd::ParamStore best = model.params();
  out.best_val_loss = std::numeric_limits<double>::infinity();
  nd::OptimizerState optimizer;
  const auto counts = NoteCounts(train, model_config);

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    optimizer.learning_rate = LrAtEpoch(config, epoch);
    double loss_sum = 0.0;
    const auto batches = BucketBatches(counts, config.batch_size, rng);
    for (const auto& members : batches) {
      const models::Batch batch = GatherBatch(train, members, model_config);
      nd::Tape tape;
      const nd::Var probs = model.Forward(tape, batch, nd::Mode::kTrain, rng);
      const nd::Var loss =
          nd::Add(nd::WeightedBce(probs, batch.labels, weights.positive, weights.negative), model.Penalty(tape));
      model.params().ZeroGrad();
      tape.Backward(loss);
      nd::AmsGradStep(model.params(), optimizer);
      loss_sum += loss.value().raw()[0];
    }
    const EvalResult v = Evaluate(model, val, config.batch_size, weights);
    EpochRecord rec{epoch, optimizer.learning_rate, loss_sum / static_cast<double>(batches.size()), v.loss, v.auroc};
    out.history.push_back(rec);
    if (on_epoch) on_epoch(rec);
    Check(std::isfinite(rec.train_loss), ErrorKind::kData, fmt::format("training diverged at epoch {}", epoch));
    if (v.loss < out.best_val_loss) {
      out.best_val_loss = v.loss;
      out.best_epoch = epoch;
      best.CopyValuesFrom(model.params());
    } else if (epoch - out.best_epoch >= config.patience) {
      break;
    }
  }
  model.params().CopyValuesFrom(best);
  return out;
}

cohort::ClassWeights FoldClassWeights(std::span<const Example> examples, const cohort::FoldSplit& split) {
  std::vector<std::uint8_t> labels;
  for (const auto& e : examples) {
    const auto it = split.roles.find(e.hadm_id);
    if (it != split.roles.end() && it->second == cohort::Role::kTrain) labels.push_back(e.label ? 1 : 0);
  }
  return cohort::ComputeClassWeights(labels);
}

std::vector<FoldOutcome> CrossValidate(const models::ModelConfig& model_config, const TrainConfig& config,
                                       std::span<const Example> examples, std::span<const cohort::FoldSplit> splits,
                                       std::shared_ptr<const nd::Tensor> embeddings, int jobs,
                                       const std::function<void(int, const EpochRecord&)>& on_epoch) {
  Check(jobs >= 1, ErrorKind::kConfig, "--jobs must be at least 1");
  Check(!splits.empty(), ErrorKind::kContract, "no folds to train");
  std::vector<FoldOutcome> results(splits.size());
  std::vector<std::exception_ptr> errors(splits.size());
  std::atomic<std::size_t> next{0};
  std::mutex callback_mutex;

  auto run = [&](std::size_t f) {
    const cohort::FoldSplit& split = splits[f];
    std::vector<Example> part[3];
    for (const auto& e : examples) {
      const auto it = split.roles.find(e.hadm_id);
      Check(it != split.roles.end(), ErrorKind::kData, fmt::format("hadm {} has no role in fold {}", e.hadm_id, split.fold));
      part[static_cast<int>(it->second)].push_back(e);
    }
    const std::uint64_t seed = config.seed * 0x9E3779B97F4A7C15ull + static_cast<std::uint64_t>(split.fold) + 1;
    auto callback = [&](const EpochRecord& rec) {
      if (!on_epoch) return;
      std::lock_guard lock(callback_mutex);
      on_epoch(split.fold, rec);
    };
    TrainOutcome t = Train(model_config, config, part[static_cast<int>(cohort::Role::kTrain)],
                           part[static_cast<int>(cohort::Role::kVal)], embeddings, seed, callback);
    FoldOutcome& r = results[f];
    r.fold = split.fold;
    r.best_epoch = t.best_epoch;
    r.weights = t.weights;
    r.history = std::move(t.history);
    r.test = Evaluate(t.model, part[static_cast<int>(cohort::Role::kTest)], config.batch_size, t.weights);
    r.model = std::make_shared<Model>(t.model);
  };
  auto worker = [&] {
    for (std::size_t f = next++; f < splits.size(); f = next++) {
      try {
        run(f);
      } catch (...) {
        errors[f] = std::current_exception();
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    for (int j = 1; j < std::min<int>(jobs, static_cast<int>(splits.size())); ++j) pool.emplace_back(worker);
    worker();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return results;
}

void WriteHistoryJsonl(std::ostream& out, int fold, std::span<const EpochRecord> history) {
  for (const auto& r : history) {
    nlohmann::json j = {{"fold", fold},
                        {"epoch", r.epoch},
                        {"lr", r.learning_rate},
                        {"train_loss", r.train_loss},
                        {"val_loss", r.val_loss}};
    j["val_auroc"] = std::isnan(r.val_auroc) ? nlohmann::json(nullptr) : nlohmann::json(r.val_auroc);
    out << j.dump() << '\n';
  }
}

}  // namespace hcr::train
