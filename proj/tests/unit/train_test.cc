#include <gtest/gtest.h>

#include <boost/math/distributions/students_t.hpp>
#include <boost/math/special_functions/beta.hpp>

#include <cmath>
#include <random>
#include <set>
#include <sstream>

#include "hcr/common/error.h"
#include "hcr/nd/ops.h"
#include "hcr/nd/optim.h"
#include "hcr/train/metrics.h"
#include "hcr/train/report.h"
#include "hcr/train/trainer.h"
#include "oracles.h"

namespace hcr::train {
namespace {

using models::Example;
using models::ModelConfig;
using models::ModelKind;

std::vector<int> Ints(const std::vector<std::uint8_t>& v) { return {v.begin(), v.end()}; }

// ------------------------------------------------------------- losses

TEST(WeightedBce, Examples) {
  EXPECT_NEAR(WeightedBceValue(0.5, true, 1.0, 1.0), std::log(2.0), 1e-15);
  EXPECT_NEAR(WeightedBceValue(0.9, false, 1.0, 2.0), 4.605170185988091, 1e-12);
  for (double p : {0.1, 0.3, 0.77}) {
    EXPECT_DOUBLE_EQ(WeightedBceValue(p, true, 1.0, 1.0), -std::log(p));
    EXPECT_DOUBLE_EQ(WeightedBceValue(p, false, 1.0, 1.0), -std::log(1.0 - p));
  }
  EXPECT_NEAR(WeightedBceValue(0.0, true, 1.0, 1.0), -std::log(1e-12), 1e-9);
  EXPECT_TRUE(std::isfinite(WeightedBceValue(1.0, false, 1.0, 1.0)));
}

TEST(Schedule, StepDrops) {
  const TrainConfig hcr = TrainConfig::ForModel(ModelKind::kNotesHcr);
  EXPECT_EQ(hcr.batch_size, 16u);
  EXPECT_DOUBLE_EQ(LrAtEpoch(hcr, 1), 1e-3);
  EXPECT_DOUBLE_EQ(LrAtEpoch(hcr, 9), 1e-3);
  EXPECT_NEAR(LrAtEpoch(hcr, 10), 1e-4, 1e-19);
  EXPECT_NEAR(LrAtEpoch(hcr, 49), 1e-4, 1e-19);
  EXPECT_NEAR(LrAtEpoch(hcr, 50), 1e-5, 1e-20);
  EXPECT_NEAR(LrAtEpoch(hcr, 89), 1e-5, 1e-20);
  EXPECT_NEAR(LrAtEpoch(hcr, 90), 1e-6, 1e-21);
  EXPECT_NEAR(LrAtEpoch(hcr, 100), 1e-6, 1e-21);
  const TrainConfig cts = TrainConfig::ForModel(ModelKind::kCtsRnn);
  EXPECT_EQ(cts.batch_size, 64u);
  for (int e : {1, 10, 50, 90, 100}) EXPECT_DOUBLE_EQ(LrAtEpoch(cts, e), 1e-3);
  EXPECT_THROW(LrAtEpoch(hcr, 0), Error);
}

TEST(Schedule, ConfigKeys) {
  KeyValueConfig kv = KeyValueConfig::Parse(
      "train.epochs = 7\ntrain.batch_size = 4\ntrain.cts_batch_size = 9\ntrain.lr_drop_epochs = 2, 5\n");
  const TrainConfig hcr = TrainConfig::FromKeyValue(kv, ModelKind::kMmHcr);
  EXPECT_EQ(hcr.epochs, 7);
  EXPECT_EQ(hcr.batch_size, 4u);
  EXPECT_EQ(hcr.lr_drop_epochs, (std::vector<int>{2, 5}));
  kv.RejectUnknown();
  KeyValueConfig kv2 = KeyValueConfig::Parse("train.batch_size = 4\ntrain.cts_batch_size = 9\n");
  const TrainConfig cts = TrainConfig::FromKeyValue(kv2, ModelKind::kCtsRnn);
  EXPECT_EQ(cts.batch_size, 9u);
  EXPECT_TRUE(cts.lr_drop_epochs.empty());
  KeyValueConfig bad = KeyValueConfig::Parse("train.lr_drop_epochs = 5, 5\n");
  EXPECT_THROW(TrainConfig::FromKeyValue(bad, ModelKind::kNotesHcr), Error);
}

// ------------------------------------------------------------- metrics

TEST(AurocTest, Examples) {
  const std::vector<std::uint8_t> y = {0, 0, 1, 1};
  EXPECT_DOUBLE_EQ(Auroc(std::vector<double>{0.1, 0.4, 0.35, 0.8}, y), 0.75);
  EXPECT_DOUBLE_EQ(Auroc(std::vector<double>{0.1, 0.2, 0.7, 0.8}, y), 1.0);
  EXPECT_DOUBLE_EQ(Auroc(std::vector<double>{0.3, 0.3, 0.3, 0.3}, y), 0.5);
  try {
    Auroc(std::vector<double>{0.1, 0.2}, std::vector<std::uint8_t>{1, 1});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kUndefinedMetric);
  }
}

TEST(AuprcTest, Examples) {
  EXPECT_NEAR(Auprc(std::vector<double>{0.9, 0.8, 0.7}, std::vector<std::uint8_t>{1, 0, 1}), 5.0 / 6.0, 1e-15);
  EXPECT_DOUBLE_EQ(Auprc(std::vector<double>{0.9, 0.8, 0.1}, std::vector<std::uint8_t>{1, 1, 0}), 1.0);
  for (std::size_t n : {2u, 10u, 137u}) {
    std::vector<double> s(n);
    std::vector<std::uint8_t> y(n, 0);
    for (std::size_t i = 0; i < n; ++i) s[i] = 1.0 - static_cast<double>(i) / n;
    y[n - 1] = 1;
    EXPECT_DOUBLE_EQ(Auprc(s, y), 1.0 / static_cast<double>(n));
  }
  EXPECT_THROW(Auprc(std::vector<double>{0.1}, std::vector<std::uint8_t>{0}), Error);
}

TEST(MetricOracles, RandomInstancesMatchExactly) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + rng() % 1999;
    // Coarse grids force ties on some trials.
    const int levels = trial % 3 == 0 ? 7 : trial % 3 == 1 ? 200 : 1 << 30;
    std::vector<double> s(n);
    std::vector<std::uint8_t> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = static_cast<double>(rng() % levels) / levels;
      y[i] = rng() % 4 == 0;
    }
    y[0] = 1;
    y[1] = 0;
    EXPECT_EQ(Auroc(s, y), oracle::PairwiseAuroc(s, Ints(y))) << trial;
    EXPECT_EQ(Auprc(s, y), oracle::SweepAuprc(s, Ints(y))) << trial;
  }
}

// ------------------------------------------------------------- statistics

TEST(Statistics, IncompleteBetaAndTCdf) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 500; ++i) {
    const double a = 0.05 + 20 * u(rng), b = 0.05 + 20 * u(rng), x = u(rng);
    EXPECT_NEAR(IncompleteBeta(a, b, x), boost::math::ibeta(a, b, x), 1e-12) << a << " " << b << " " << x;
  }
  for (double df : {1.0, 2.0, 4.0, 7.5, 30.0}) EXPECT_DOUBLE_EQ(StudentTCdf(0.0, df), 0.5);
  // scipy.stats.t.cdf
  EXPECT_NEAR(StudentTCdf(0.5, 1), 0.6475836176504333, 1e-12);
  EXPECT_NEAR(StudentTCdf(-2.3, 4), 0.04146951855619119, 1e-12);
  EXPECT_NEAR(StudentTCdf(11.2, 4), 0.9998190687764017, 1e-12);
  EXPECT_NEAR(StudentTCdf(1.7, 7.5), 0.9349669508213314, 1e-12);
  EXPECT_NEAR(StudentTCdf(30, 3), 0.9999593235978642, 1e-12);
}

TEST(Statistics, PairedTTestExample) {
  const std::vector<double> a = {0.80, 0.82, 0.81, 0.83, 0.79};
  const std::vector<double> b = {0.85, 0.86, 0.84, 0.88, 0.83};
  const TTestResult r = PairedTTestOneTailed(a, b);
  // scipy.stats.ttest_rel(b, a, alternative="greater")
  EXPECT_NEAR(r.t, 11.22497216032178, 1e-10);
  EXPECT_NEAR(r.p, 0.00017936763018872853, 1e-10);
  EXPECT_EQ(r.df, 4.0);
  const TTestResult flipped = PairedTTestOneTailed(b, a);
  EXPECT_NEAR(flipped.p, 1.0 - r.p, 1e-12);
}

TEST(Statistics, ZeroVarianceConvention) {
  const std::vector<double> a = {0.7, 0.8, 0.9};
  EXPECT_EQ(PairedTTestOneTailed(a, a).p, 0.5);
  const std::vector<double> x = {0.25, 0.5, 0.75}, y = {0.5, 0.75, 1.0};
  EXPECT_EQ(PairedTTestOneTailed(x, y).p, 0.0);
  EXPECT_EQ(PairedTTestOneTailed(y, x).p, 1.0);
  EXPECT_TRUE(std::isnan(PairedTTestOneTailed(x, y).t));
  EXPECT_THROW(PairedTTestOneTailed(std::vector<double>{1.0}, std::vector<double>{2.0}), Error);
}

TEST(Statistics, RandomFoldVectorsMatchBoost) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> noise(0.0, 0.02);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> a(5), b(5), d(5);
    const double shift = noise(rng);
    for (int i = 0; i < 5; ++i) {
      a[i] = 0.8 + noise(rng);
      b[i] = a[i] + shift + noise(rng);
      d[i] = b[i] - a[i];
    }
    double mean = 0, ss = 0;
    for (double x : d) mean += x / 5;
    for (double x : d) ss += (x - mean) * (x - mean);
    const double t = mean / std::sqrt(ss / 4 / 5);
    const double want = boost::math::cdf(boost::math::complement(boost::math::students_t(4.0), t));
    EXPECT_NEAR(PairedTTestOneTailed(a, b).p, want, 1e-8) << trial;
  }
}

TEST(Statistics, Markers) {
  EXPECT_EQ(SignificanceMarker(0.007), "**");
  EXPECT_EQ(SignificanceMarker(0.0099), "**");
  EXPECT_EQ(SignificanceMarker(0.01), "*");
  EXPECT_EQ(SignificanceMarker(0.03), "*");
  EXPECT_EQ(SignificanceMarker(0.05), "†");
  EXPECT_EQ(SignificanceMarker(0.06), "†");
}

// ------------------------------------------------------------- report

std::vector<FoldMetrics> ReportFixture() {
  std::vector<FoldMetrics> m;
  const double base[3] = {0.80, 0.86, 0.87};
  const char* names[3] = {"cts-rnn", "notes-hcr", "mm-hcr"};
  for (int w : {12, 48}) {
    for (int k = 0; k < 3; ++k) {
      for (int f = 0; f < 5; ++f) {
        const double jitter = 0.003 * ((f * 7 + k * 3) % 5) - 0.006;
        m.push_back({names[k], w, f, base[k] + jitter + (w == 48 ? 0.02 : 0.0), 0.4 + 0.1 * k + jitter});
      }
    }
  }
  return m;
}

TEST(Report, SummariesAreRecomputable) {
  const auto metrics = ReportFixture();
  const MetricsReport r = BuildReport(metrics, 5);
  ASSERT_EQ(r.rows.size(), 6u);
  EXPECT_EQ(r.rows[0].model, "cts-rnn");
  EXPECT_EQ(r.rows[5].model, "mm-hcr");
  for (const auto& row : r.rows) {
    std::vector<double> folds;
    for (const auto& m : metrics) {
      if (m.model == row.model && m.window == row.window) folds.push_back(m.auroc);
    }
    ASSERT_EQ(folds.size(), 5u);
    double mean = 0, ss = 0;
    for (double x : folds) mean += x / 5;
    for (double x : folds) ss += (x - mean) * (x - mean);
    EXPECT_NEAR(row.auroc.mean, mean, 1e-12);
    EXPECT_NEAR(row.auroc.sd, std::sqrt(ss / 4), 1e-12);
    EXPECT_EQ(row.auroc.folds, folds);
  }
  // mm-hcr is best everywhere; cts-rnn trails by a wide margin.
  EXPECT_FALSE(r.rows[5].auroc.p_value.has_value());
  EXPECT_EQ(r.rows[0].auroc.marker, "**");
}

TEST(Report, EqualFoldsAndMarkers) {
  std::vector<FoldMetrics> m;
  const double ref[5] = {0.85, 0.86, 0.84, 0.88, 0.83}, other[5] = {0.80, 0.82, 0.81, 0.83, 0.79};
  for (int f = 0; f < 5; ++f) {
    m.push_back({"mm-hcr", 24, f, ref[f], 0.5});
    m.push_back({"notes-hcr", 24, f, other[f], 0.5});
  }
  const MetricsReport r = BuildReport(m, 5);
  EXPECT_EQ(r.rows[0].model, "notes-hcr");
  EXPECT_NEAR(*r.rows[0].auroc.p_value, 0.00017936763018872853, 1e-10);
  EXPECT_EQ(r.rows[0].auroc.marker, "**");
  // Equal AUPRC everywhere: sd 0, zero-variance p = 0.5.
  EXPECT_EQ(r.rows[0].auprc.sd, 0.0);
  EXPECT_EQ(r.rows[1].auprc.mean, 0.5);
  const bool first_is_ref = !r.rows[0].auprc.p_value.has_value();
  const auto& marked = first_is_ref ? r.rows[1].auprc : r.rows[0].auprc;
  EXPECT_EQ(*marked.p_value, 0.5);
  EXPECT_EQ(marked.marker, "†");
}

TEST(Report, IncompleteOrDuplicatedFolds) {
  auto m = ReportFixture();
  m.pop_back();
  EXPECT_THROW(BuildReport(m, 5), Error);
  m = ReportFixture();
  m.back().fold = 0;
  EXPECT_THROW(BuildReport(m, 5), Error);
  EXPECT_THROW(BuildReport(std::vector<FoldMetrics>{}, 5), Error);
}

TEST(Report, RenderAndJsonl) {
  const auto metrics = ReportFixture();
  const MetricsReport r = BuildReport(metrics, 5);
  const std::string table = RenderTable(r);
  EXPECT_NE(table.find("W=12 AUROC"), std::string::npos);
  EXPECT_NE(table.find("W=48 AUPRC"), std::string::npos);
  EXPECT_NE(table.find("mm-hcr"), std::string::npos);
  EXPECT_NE(table.find("±"), std::string::npos);
  std::ostringstream out;
  WriteReportJsonl(out, r);
  std::size_t lines = 0, folds = 0;
  std::istringstream in(out.str());
  for (std::string line; std::getline(in, line); ++lines) folds += line.find("\"type\":\"fold\"") != std::string::npos;
  EXPECT_EQ(folds, 30u);
  EXPECT_EQ(lines, 36u);
  std::stringstream round;
  WriteFoldMetricsJsonl(round, metrics);
  const auto back = ReadFoldMetricsJsonl(round);
  ASSERT_EQ(back.size(), metrics.size());
  EXPECT_EQ(back[7].auroc, metrics[7].auroc);
  EXPECT_EQ(back[7].model, metrics[7].model);
}

// ------------------------------------------------------------- training

// Token 1 and a rising first series channel mark positives.
std::vector<Example> PlantedExamples(const ModelConfig& c, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<Example> out;
  for (std::size_t i = 0; i < n; ++i) {
    Example e;
    e.hadm_id = static_cast<std::int64_t>(1000 + i);
    e.subject_id = static_cast<std::int64_t>(i / 2);
    e.label = i % 3 == 0;
    const std::size_t notes = 1 + rng() % 3;
    for (std::size_t t = 0; t < notes; ++t) {
      notes::CleanNote note;
      for (std::size_t l = 0; l < c.note_length; ++l) {
        const bool real = l < c.note_length - 2;
        std::int32_t id = static_cast<std::int32_t>(2 + rng() % 8);
        if (e.label && rng() % 3 == 0) id = 1;
        note.tokens.push_back(real ? id : 0);
        note.mask.push_back(real ? 1 : 0);
      }
      e.notes.push_back(std::move(note));
    }
    e.series = nd::Tensor(nd::Shape{4, c.cts_features});
    std::normal_distribution<double> g(0.0, 1.0);
    for (std::size_t h = 0; h < 4; ++h) {
      for (std::size_t f = 0; f < c.cts_features; ++f) {
        e.series.at(h, f) = g(rng) + (f == 0 && e.label ? 0.6 * static_cast<double>(h) : 0.0);
      }
    }
    out.push_back(std::move(e));
  }
  return out;
}

std::shared_ptr<const nd::Tensor> ToyTable(std::size_t d) {
  nd::Tensor t(nd::Shape{10, d});
  std::mt19937_64 rng(77);
  std::normal_distribution<double> g(0.0, 1.0);
  for (std::size_t i = d; i < t.size(); ++i) t.raw()[i] = g(rng);
  return std::make_shared<const nd::Tensor>(std::move(t));
}

TEST(Bucketing, UniformNoteCountsAndPartition) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::size_t> counts(1 + rng() % 200);
    for (auto& c : counts) c = 1 + rng() % 6;
    const std::size_t bs = 1 + rng() % 20;
    nd::Rng r(trial);
    const auto batches = BucketBatches(counts, bs, r);
    std::multiset<std::size_t> seen;
    for (const auto& b : batches) {
      ASSERT_FALSE(b.empty());
      EXPECT_LE(b.size(), bs);
      for (std::size_t i : b) {
        EXPECT_EQ(counts[i], counts[b[0]]);
        seen.insert(i);
      }
    }
    ASSERT_EQ(seen.size(), counts.size());
    std::size_t expect = 0;
    for (std::size_t i : seen) EXPECT_EQ(i, expect++);
  }
}

TEST(Training, SingleBatchLossDecreasesOverTenSteps) {
  for (ModelKind kind : {ModelKind::kNotesHcr, ModelKind::kCtsRnn, ModelKind::kMmHcr}) {
    const ModelConfig c = ModelConfig::Toy(kind);
    auto xs = PlantedExamples(c, 8, 1);
    for (auto& e : xs) e.notes.resize(1);
    std::vector<const Example*> ptrs;
    for (const auto& e : xs) ptrs.push_back(&e);
    const models::Batch batch = models::MakeBatch(ptrs, c);
    models::Model model(c, 5, ToyTable(c.embedding_dim));
    nd::OptimizerState opt;
    opt.learning_rate = 1e-3;
    std::vector<double> losses;
    for (int step = 0; step <= 10; ++step) {
      nd::Tape tape;
      nd::Rng drop(123);  // one fixed dropout draw keeps the objective fixed
      const nd::Var loss = nd::Add(nd::WeightedBce(model.Forward(tape, batch, nd::Mode::kTrain, drop), batch.labels,
                                                   1.5, 0.75),
                                   model.Penalty(tape));
      losses.push_back(loss.value().raw()[0]);
      model.params().ZeroGrad();
      tape.Backward(loss);
      nd::AmsGradStep(model.params(), opt);
    }
    int rises = 0;
    for (std::size_t i = 1; i < losses.size(); ++i) {
      if (losses[i] > losses[i - 1]) {
        ++rises;
        EXPECT_LE(losses[i] - losses[i - 1], 1e-6) << models::ModelKindName(kind);
      }
    }
    EXPECT_LE(rises, 1) << models::ModelKindName(kind);
    EXPECT_LT(losses.back(), losses.front()) << models::ModelKindName(kind);
  }
}

TEST(Training, EarlyStoppingRestoresBestAndIsDeterministic) {
  const ModelConfig c = ModelConfig::Toy(ModelKind::kMmHcr);
  const auto train = PlantedExamples(c, 30, 2), val = PlantedExamples(c, 12, 3);
  TrainConfig tc = TrainConfig::ForModel(c.kind);
  tc.epochs = 25;
  tc.batch_size = 8;
  tc.patience = 4;
  tc.learning_rate = 0.02;
  const auto a = Train(c, tc, train, val, ToyTable(c.embedding_dim), 9);
  ASSERT_FALSE(a.history.empty());
  EXPECT_LE(a.history.size(), 25u);
  EXPECT_GE(a.best_epoch, 1);
  EXPECT_EQ(a.best_val_loss, a.history[a.best_epoch - 1].val_loss);
  for (const auto& r : a.history) EXPECT_GE(r.val_loss, a.best_val_loss);
  if (static_cast<int>(a.history.size()) < tc.epochs) {
    EXPECT_EQ(static_cast<int>(a.history.size()), a.best_epoch + tc.patience);
  }
  models::Model restored(a.model);
  EXPECT_EQ(Evaluate(restored, val, 5, a.weights).loss, a.best_val_loss);

  const auto b = Train(c, tc, train, val, ToyTable(c.embedding_dim), 9);
  ASSERT_EQ(a.history.size(), b.history.size());
  for (std::size_t i = 0; i < a.history.size(); ++i) {
    EXPECT_EQ(a.history[i].train_loss, b.history[i].train_loss);
    EXPECT_EQ(a.history[i].val_loss, b.history[i].val_loss);
    EXPECT_EQ(a.history[i].learning_rate, b.history[i].learning_rate);
  }
}

TEST(Training, SingleClassTrainingFoldAborts) {
  const ModelConfig c = ModelConfig::Toy(ModelKind::kCtsRnn);
  auto train = PlantedExamples(c, 6, 4);
  for (auto& e : train) e.label = false;
  TrainConfig tc = TrainConfig::ForModel(c.kind);
  tc.epochs = 2;
  try {
    Train(c, tc, train, train, nullptr, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kData);
  }
}

TEST(Training, ClassWeightsIgnoreHeldOutLabels) {
  const ModelConfig c = ModelConfig::Toy(ModelKind::kCtsRnn);
  auto xs = PlantedExamples(c, 40, 5);
  cohort::FoldSplit split;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    split.roles[xs[i].hadm_id] = i < 24 ? cohort::Role::kTrain : i < 32 ? cohort::Role::kVal : cohort::Role::kTest;
  }
  std::vector<std::uint8_t> train_labels;
  for (std::size_t i = 0; i < 24; ++i) train_labels.push_back(xs[i].label);
  const auto want = cohort::ComputeClassWeights(train_labels);
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    for (std::size_t i = 24; i < xs.size(); ++i) xs[i].label = rng() % 2;
    const auto w = FoldClassWeights(xs, split);
    EXPECT_EQ(w.positive, want.positive);
    EXPECT_EQ(w.negative, want.negative);
  }
  // Train reports the same weights whatever the validation labels are.
  TrainConfig tc = TrainConfig::ForModel(c.kind);
  tc.epochs = 1;
  std::vector<Example> train(xs.begin(), xs.begin() + 24), val(xs.begin() + 24, xs.end());
  for (auto& e : val) e.label = true;
  const auto t = Train(c, tc, train, val, nullptr, 1);
  EXPECT_EQ(t.weights.positive, want.positive);
  EXPECT_EQ(t.weights.negative, want.negative);
}

TEST(Training, CrossValidationIsIndependentOfJobs) {
  const ModelConfig c = ModelConfig::Toy(ModelKind::kNotesHcr);
  const auto xs = PlantedExamples(c, 45, 7);
  std::vector<cohort::CohortEntry> entries;
  for (const auto& e : xs) entries.push_back({e.hadm_id, e.subject_id, {}, e.label});
  const auto splits = cohort::GroupedKFold(entries, 3, 1);
  TrainConfig tc = TrainConfig::ForModel(c.kind);
  tc.epochs = 3;
  tc.folds = 3;
  const auto one = CrossValidate(c, tc, xs, splits, ToyTable(c.embedding_dim), 1);
  const auto three = CrossValidate(c, tc, xs, splits, ToyTable(c.embedding_dim), 3);
  ASSERT_EQ(one.size(), 3u);
  for (std::size_t f = 0; f < 3; ++f) {
    EXPECT_EQ(one[f].fold, three[f].fold);
    EXPECT_EQ(one[f].test.scores, three[f].test.scores);
    EXPECT_EQ(one[f].history.size(), three[f].history.size());
    EXPECT_EQ(one[f].test.scores.size(), splits[f].Members(cohort::Role::kTest).size());
  }
  std::ostringstream hist;
  WriteHistoryJsonl(hist, 0, one[0].history);
  EXPECT_NE(hist.str().find("\"val_loss\""), std::string::npos);
}

}  // namespace
}  // namespace hcr::train
