#include <cmath>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "hcr/embed/embed.h"

namespace hcr::embed {
namespace {

using Corpus = std::vector<std::vector<std::string>>;

std::vector<std::vector<std::int32_t>> EncodeAll(const Corpus& c, const Vocabulary& v) {
  std::vector<std::vector<std::int32_t>> out;
  for (const auto& s : c) out.push_back(v.Encode(s));
  return out;
}

double Cosine(const nd::Tensor& m, std::int32_t a, std::int32_t b) {
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t j = 0; j < m.dim(1); ++j) {
    ab += m.at(a, j) * m.at(b, j);
    aa += m.at(a, j) * m.at(a, j);
    bb += m.at(b, j) * m.at(b, j);
  }
  return ab / std::sqrt(aa * bb);
}

Corpus TwoBlockCorpus(std::uint64_t seed, int sentences = 300) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> word(0, 9);
  Corpus c;
  for (int s = 0; s < sentences; ++s) {
    const std::string prefix = s % 2 ? "a" : "b";
    std::vector<std::string> sent;
    for (int i = 0; i < 20; ++i) sent.push_back(prefix + std::to_string(word(rng)));
    c.push_back(std::move(sent));
  }
  return c;
}

void ExpectBlocksSeparate(const nd::Tensor& m, const Vocabulary& v) {
  double intra = 0, inter = 0;
  int ni = 0, nx = 0;
  for (int i = 0; i < 10; ++i) {
    for (int j = 0; j < 10; ++j) {
      const auto ai = v.Id("a" + std::to_string(i)), aj = v.Id("a" + std::to_string(j));
      const auto bi = v.Id("b" + std::to_string(i)), bj = v.Id("b" + std::to_string(j));
      if (i != j) {
        intra += Cosine(m, ai, aj) + Cosine(m, bi, bj);
        ni += 2;
      }
      inter += Cosine(m, ai, bj);
      ++nx;
    }
  }
  EXPECT_GT(intra / ni, inter / nx + 0.2);
}

TEST(Vocabulary, MinCountIsStrict) {
  Corpus c = {std::vector<std::string>(21, "keep"), std::vector<std::string>(20, "drop")};
  const Vocabulary v = Vocabulary::Build(c, 20);
  ASSERT_EQ(v.size(), 2u);
  EXPECT_EQ(v.Id("keep"), 1);
  EXPECT_EQ(v.Id("drop"), kOovId);
  EXPECT_EQ(v.Token(0), kPadToken);
  EXPECT_EQ(v.Id(kPadToken), kOovId);
}

TEST(Vocabulary, FrequencyThenLexicographicIds) {
  Corpus c = {{"b", "a", "c", "c", "zz", "zz", "zz"}};
  const Vocabulary v = Vocabulary::Build(c, 0);
  EXPECT_EQ(v.Id("zz"), 1);
  EXPECT_EQ(v.Id("c"), 2);
  EXPECT_EQ(v.Id("a"), 3);
  EXPECT_EQ(v.Id("b"), 4);
  EXPECT_EQ(v.Frequency(1), 3);
  EXPECT_EQ(v.Encode(std::vector<std::string>{"a", "nope"}), (std::vector<std::int32_t>{3, kOovId}));
}

TEST(Vocabulary, EmptyCorpusFailsAndTsvRoundTrips) {
  EXPECT_THROW(Vocabulary::Build(Corpus{}, 20), Error);
  EXPECT_THROW(Vocabulary::Build(Corpus{{}}, 20), Error);
  const Vocabulary v = Vocabulary::Build(Corpus{{"x", "y", "y"}}, 0);
  std::stringstream buf;
  v.Write(buf);
  const Vocabulary back = Vocabulary::Read(buf);
  ASSERT_EQ(back.size(), v.size());
  for (std::int32_t i = 0; i < static_cast<std::int32_t>(v.size()); ++i) {
    EXPECT_EQ(back.Token(i), v.Token(i));
    EXPECT_EQ(back.Frequency(i), v.Frequency(i));
  }
  std::stringstream bad("x\t1\n");
  EXPECT_THROW(Vocabulary::Read(bad), Error);
}

TEST(SgnsPairLoss, MatchesFiniteDifferences) {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> n(0, 0.7);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> v(5), u(5);
    std::vector<std::vector<double>> neg(1, std::vector<double>(5));
    for (auto* vec : {&v, &u, &neg[0]})
      for (double& x : *vec) x = n(rng);
    const PairLoss pl = SgnsPairLoss(v, u, neg);
    const double h = 1e-6;
    auto check = [&](std::vector<double>& x, const std::vector<double>& analytic) {
      for (std::size_t j = 0; j < x.size(); ++j) {
        const double keep = x[j];
        x[j] = keep + h;
        const double up = SgnsPairLoss(v, u, neg).loss;
        x[j] = keep - h;
        const double down = SgnsPairLoss(v, u, neg).loss;
        x[j] = keep;
        EXPECT_NEAR(analytic[j], (up - down) / (2 * h), 1e-7);
      }
    };
    check(v, pl.d_center);
    check(u, pl.d_context);
    check(neg[0], pl.d_negatives[0]);
  }
}

TEST(SgnsPairLoss, HandComputedSingleNegative) {
  const std::vector<double> v = {1.0, 0.0}, u = {std::log(3.0), 0.0};
  const std::vector<std::vector<double>> neg = {{0.0, 2.0}};
  const PairLoss pl = SgnsPairLoss(v, u, neg);
  EXPECT_NEAR(pl.loss, -std::log(0.75) + std::log(2.0), 1e-14);
  EXPECT_NEAR(pl.d_context[0], -0.25, 1e-14);
  EXPECT_NEAR(pl.d_center[0], -0.25 * std::log(3.0), 1e-14);
  EXPECT_NEAR(pl.d_center[1], 0.5 * 2.0, 1e-14);
  EXPECT_NEAR(pl.d_negatives[0][0], 0.5, 1e-14);
}

TEST(SkipGram, EarlyLossNonIncreasing) {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> w(0, 9);
  Corpus c;
  for (int s = 0; s < 200; ++s) {
    std::vector<std::string> sent;
    int cur = w(rng);
    for (int i = 0; i < 15; ++i) {
      sent.push_back("t" + std::to_string(cur));
      cur = (cur + 1 + (w(rng) % 2)) % 10;
    }
    c.push_back(sent);
  }
  const Vocabulary v = Vocabulary::Build(c, 0);
  SkipGramOptions o;
  o.dim = 16;
  o.epochs = 5;
  const auto r = TrainSkipGram(EncodeAll(c, v), v, o);
  ASSERT_EQ(r.epoch_loss.size(), 5u);
  for (std::size_t e = 1; e < 5; ++e) EXPECT_LE(r.epoch_loss[e], r.epoch_loss[e - 1] * 1.05);
  EXPECT_LT(r.epoch_loss.back(), r.epoch_loss.front());
}

TEST(SkipGram, ExclusiveCoOccurrencePair) {
  Corpus c;
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<int> w(0, 7);
  for (int s = 0; s < 200; ++s) {
    if (s % 4 == 0) {
      c.push_back({"x", "y", "x", "y"});
    } else {
      std::vector<std::string> sent;
      for (int i = 0; i < 12; ++i) sent.push_back("o" + std::to_string(w(rng)));
      c.push_back(sent);
    }
  }
  const Vocabulary v = Vocabulary::Build(c, 0);
  SkipGramOptions o;
  o.dim = 16;
  o.epochs = 10;
  const auto r = TrainSkipGram(EncodeAll(c, v), v, o);
  const double xy = Cosine(r.vectors, v.Id("x"), v.Id("y"));
  for (int i = 0; i < 8; ++i) {
    const auto other = v.Id("o" + std::to_string(i));
    EXPECT_GT(xy, Cosine(r.vectors, v.Id("x"), other));
    EXPECT_GT(xy, Cosine(r.vectors, v.Id("y"), other));
  }
}

TEST(SkipGram, PlantedBlocksAndBitReproducible) {
  const Corpus c = TwoBlockCorpus(9);
  const Vocabulary v = Vocabulary::Build(c, 0);
  SkipGramOptions o;
  o.dim = 16;
  o.epochs = 5;
  o.seed = 77;
  const auto a = TrainSkipGram(EncodeAll(c, v), v, o);
  const auto b = TrainSkipGram(EncodeAll(c, v), v, o);
  EXPECT_EQ(a.vectors, b.vectors);
  EXPECT_EQ(a.epoch_loss, b.epoch_loss);
  for (std::size_t j = 0; j < o.dim; ++j) EXPECT_EQ(a.vectors.at(0, j), 0.0);
  ExpectBlocksSeparate(a.vectors, v);
  o.seed = 78;
  EXPECT_NE(TrainSkipGram(EncodeAll(c, v), v, o).vectors, a.vectors);
}

TEST(SkipGram, SubwordSubsampleAndWorkers) {
  const Corpus c = TwoBlockCorpus(10);
  const Vocabulary v = Vocabulary::Build(c, 0);
  SkipGramOptions o;
  o.dim = 16;
  o.epochs = 5;
  o.subword = true;
  o.subsample = 1e-2;
  const auto sub = TrainSkipGram(EncodeAll(c, v), v, o);
  ExpectBlocksSeparate(sub.vectors, v);
  o.subword = false;
  o.subsample = 0.0;
  o.threads = 3;
  const auto par = TrainSkipGram(EncodeAll(c, v), v, o);
  for (std::size_t j = 0; j < o.dim; ++j) EXPECT_EQ(par.vectors.at(0, j), 0.0);
  EXPECT_TRUE(par.vectors.AllFinite());
  ExpectBlocksSeparate(par.vectors, v);
}

TEST(SkipGram, RejectsBadOptionsAndIds) {
  const Vocabulary v = Vocabulary::Build(Corpus{{"a", "b"}}, 0);
  SkipGramOptions o;
  o.negatives = 0;
  EXPECT_THROW(TrainSkipGram(std::vector<std::vector<std::int32_t>>{{1, 2}}, v, o), Error);
  EXPECT_THROW(TrainSkipGram(std::vector<std::vector<std::int32_t>>{{1, 9}}, v, SkipGramOptions{}), Error);
}

TEST(NgramBuckets, CountsAndRange) {
  // "<cat>" has 3 trigrams, 2 four-grams; the 5-gram is the whole word.
  const auto b = NgramBuckets("cat", 3, 6, 100);
  EXPECT_EQ(b.size(), 5u);
  for (auto x : b) EXPECT_LT(x, 100u);
  EXPECT_EQ(NgramBuckets("cat", 3, 6, 100), b);
}

TEST(EmbeddingFile, RoundTripAndValidation) {
  const Vocabulary v = Vocabulary::Build(Corpus{{"x", "y", "y"}}, 0);
  nd::Tensor m(nd::Shape{3, 2}, {0, 0, 0.1, -1.0 / 3, 1e-300, 12345.678});
  std::stringstream buf;
  WriteEmbeddings(buf, v, m);
  EXPECT_EQ(buf.str().substr(0, 4), "3 2\n");
  EXPECT_EQ(ReadEmbeddings(buf, v), m);

  std::stringstream wrong_dim("3 2\n<pad> 0 0\ny 1\nx 1 2\n");
  EXPECT_THROW(ReadEmbeddings(wrong_dim, v), Error);
  std::stringstream wrong_rows("2 2\n<pad> 0 0\ny 1 1\n");
  EXPECT_THROW(ReadEmbeddings(wrong_rows, v), Error);
}

TEST(EmbedNote, LookupPadAndOov) {
  nd::Tensor m(nd::Shape{3, 2}, {0, 0, 1, 2, 3, 4});
  const std::vector<std::int32_t> ids = {2, kOovId, 1, 0, 0};
  const nd::Tensor e = EmbedNote(ids, m);
  EXPECT_EQ(e, nd::Tensor(nd::Shape{5, 2}, {3, 4, 0, 0, 1, 2, 0, 0, 0, 0}));
  const std::vector<std::int32_t> bad = {3};
  try {
    EmbedNote(bad, m);
    FAIL();
  } catch (const Error& err) {
    EXPECT_EQ(err.kind(), ErrorKind::kData);
  }
}

}  // namespace
}  // namespace hcr::embed
